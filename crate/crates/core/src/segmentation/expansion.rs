//! Multi-label Potts energy minimization by α-expansion.

use serde::{Deserialize, Serialize};

use crate::segmentation::maxflow::FlowGraph;

/// Label per node (ids start at 1) and the energy of that assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<u32>,
    pub energy: f64,
}

/// A Potts labeling problem: `unary[i][l - 1]` is the cost of node `i`
/// taking label `l`; each edge `(a, b, w)` costs `w` when its labels differ.
#[derive(Clone, Debug, PartialEq)]
pub struct PottsProblem {
    pub unary: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl PottsProblem {
    pub fn n_labels(&self) -> usize {
        self.unary.first().map_or(0, |u| u.len())
    }

    pub fn energy(&self, labels: &[u32]) -> f64 {
        let data: f64 = labels.iter().enumerate().map(|(i, &l)| self.unary[i][l as usize - 1]).sum();
        let smooth: f64 = self
            .edges
            .iter()
            .filter(|(a, b, _)| labels[*a] != labels[*b])
            .map(|(_, _, w)| w)
            .sum();
        data + smooth
    }

    /// Per-node argmin of the unary costs, ties to the smallest label.
    pub fn argmin_labels(&self) -> Vec<u32> {
        self.unary
            .iter()
            .map(|u| {
                let mut best = 0;
                for l in 1..u.len() {
                    if u[l] < u[best] {
                        best = l;
                    }
                }
                best as u32 + 1
            })
            .collect()
    }

    /// Optimal α-expansion of `labels`: every node either keeps its label
    /// or switches to `alpha`.
    pub fn expand(&self, labels: &[u32], alpha: u32) -> Vec<u32> {
        let n = labels.len();
        let (s, t) = (n, n + 1);
        // cost[i] = [cost of keeping, cost of switching]
        let mut cost: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let keep = self.unary[i][labels[i] as usize - 1];
                let switch = self.unary[i][alpha as usize - 1];
                [keep, switch]
            })
            .collect();
        let free: Vec<bool> = labels.iter().map(|&l| l != alpha).collect();
        let mut g = FlowGraph::new(n + 2);
        for &(a, b, w) in &self.edges {
            match (free[a], free[b]) {
                (true, true) => {
                    // E(0,0) = w·[l_a ≠ l_b], E(0,1) = E(1,0) = w, E(1,1) = 0.
                    let e00 = if labels[a] != labels[b] { w } else { 0.0 };
                    let (e01, e10, e11) = (w, w, 0.0);
                    cost[a][1] += e10 - e00;
                    cost[b][1] += e11 - e10;
                    let pair = e01 + e10 - e00 - e11;
                    g.add_edge(a, b, pair);
                }
                (true, false) => cost[a][0] += w,
                (false, true) => cost[b][0] += w,
                (false, false) => {}
            }
        }
        for i in 0..n {
            if !free[i] {
                continue;
            }
            let m = cost[i][0].min(cost[i][1]);
            // Source side keeps (pays cost[0] via i -> t); sink side switches.
            g.add_edge(s, i, cost[i][1] - m);
            g.add_edge(i, t, cost[i][0] - m);
        }
        g.max_flow(s, t);
        let side = g.source_side(s);
        (0..n).map(|i| if free[i] && !side[i] { alpha } else { labels[i] }).collect()
    }

    /// α-expansion from the unary argmin, sweeping labels in ascending
    /// order until a full sweep makes no improving move.
    pub fn solve(&self) -> Labeling {
        let mut labels = self.argmin_labels();
        let mut energy = self.energy(&labels);
        let n_l = self.n_labels() as u32;
        loop {
            let mut improved = false;
            for alpha in 1..=n_l {
                let cand = self.expand(&labels, alpha);
                let e = self.energy(&cand);
                if e < energy - 1e-12 {
                    labels = cand;
                    energy = e;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        Labeling { labels, energy }
    }

    /// Exhaustive minimum over all `n_l^n` labelings (small problems only).
    pub fn brute_force(&self) -> Labeling {
        let n = self.unary.len();
        let n_l = self.n_labels() as u32;
        let mut labels = vec![1u32; n];
        let mut best = Labeling {
            labels: labels.clone(),
            energy: self.energy(&labels),
        };
        loop {
            let mut k = 0;
            while k < n && labels[k] == n_l {
                labels[k] = 1;
                k += 1;
            }
            if k == n {
                return best;
            }
            labels[k] += 1;
            let e = self.energy(&labels);
            if e < best.energy {
                best = Labeling {
                    labels: labels.clone(),
                    energy: e,
                };
            }
        }
    }
}
