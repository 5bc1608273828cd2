//! Dinic's max-flow on small dense-ish graphs with real capacities.

const EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: f64,
    rev: usize,
}

#[derive(Clone, Debug)]
pub struct FlowGraph {
    adj: Vec<Vec<Edge>>,
}

impl FlowGraph {
    pub fn new(n: usize) -> Self {
        FlowGraph { adj: vec![Vec::new(); n] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        if cap <= 0.0 {
            return;
        }
        let (rf, rt) = (self.adj[to].len(), self.adj[from].len());
        self.adj[from].push(Edge { to, cap, rev: rf });
        self.adj[to].push(Edge { to: from, cap: 0.0, rev: rt });
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for e in &self.adj[u] {
                if e.cap > EPS && level[e.to] == usize::MAX {
                    level[e.to] = level[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, t: usize, f: f64, level: &[usize], it: &mut [usize]) -> f64 {
        if u == t {
            return f;
        }
        while it[u] < self.adj[u].len() {
            let (to, cap) = (self.adj[u][it[u]].to, self.adj[u][it[u]].cap);
            if cap > EPS && level[to] == level[u] + 1 {
                let d = self.push(to, t, f.min(cap), level, it);
                if d > EPS {
                    let rev = self.adj[u][it[u]].rev;
                    self.adj[u][it[u]].cap -= d;
                    self.adj[to][rev].cap += d;
                    return d;
                }
            }
            it[u] += 1;
        }
        0.0
    }

    /// Maximum flow value from `s` to `t`.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                return flow;
            }
            let mut it = vec![0; self.adj.len()];
            loop {
                let f = self.push(s, t, f64::INFINITY, &level, &mut it);
                if f <= EPS {
                    break;
                }
                flow += f;
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph (the minimal source
    /// side of a minimum cut once `max_flow` has run).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).into_iter().map(|l| l != usize::MAX).collect()
    }
}
