//! 2D navigation: obstacle grid, A* with clearance, floor frontiers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::camera::Viewpoint;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};

/// Square cells over the xy plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub dims: [usize; 2],
}

impl Grid2 {
    /// Cells covering the xy extent of `bounds`.
    pub fn covering(bounds: &Aabb, resolution: f64) -> Result<Grid2> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidParameter("grid resolution must be positive".into()));
        }
        let n = |lo: f64, hi: f64| (((hi - lo) / resolution).ceil() as usize).max(1);
        Ok(Grid2 {
            origin: [bounds.min.x, bounds.min.y],
            resolution,
            dims: [n(bounds.min.x, bounds.max.x), n(bounds.min.y, bounds.max.y)],
        })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.dims[0] + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.dims[0], idx / self.dims[0])
    }

    pub fn cell_of(&self, p: Point) -> Option<usize> {
        let i = ((p.x - self.origin[0]) / self.resolution).floor();
        let j = ((p.y - self.origin[1]) / self.resolution).floor();
        if i < 0.0 || j < 0.0 || i >= self.dims[0] as f64 || j >= self.dims[1] as f64 {
            return None;
        }
        Some(self.index(i as usize, j as usize))
    }

    /// Cell center at z = 0.
    pub fn center(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        Point::new(
            self.origin[0] + (i as f64 + 0.5) * self.resolution,
            self.origin[1] + (j as f64 + 0.5) * self.resolution,
            0.0,
        )
    }

    /// In-grid 4-neighbours in the order -x, +x, -y, +y.
    pub fn neighbors4(&self, idx: usize) -> Vec<usize> {
        let (i, j) = self.coords(idx);
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push(self.index(i - 1, j));
        }
        if i + 1 < self.dims[0] {
            out.push(self.index(i + 1, j));
        }
        if j > 0 {
            out.push(self.index(i, j - 1));
        }
        if j + 1 < self.dims[1] {
            out.push(self.index(i, j + 1));
        }
        out
    }
}

/// Obstacle cells for path planning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavGrid {
    pub grid: Grid2,
    pub blocked: Vec<bool>,
}

impl NavGrid {
    pub fn new(grid: Grid2) -> NavGrid {
        NavGrid {
            blocked: vec![false; grid.len()],
            grid,
        }
    }

    pub fn block_point(&mut self, p: Point) {
        if let Some(c) = self.grid.cell_of(p) {
            self.blocked[c] = true;
        }
    }

    /// Blocks every cell whose center lies in the xy footprint of `b`.
    pub fn block_footprint(&mut self, b: &Aabb) {
        for idx in 0..self.grid.len() {
            let c = self.grid.center(idx);
            if c.x >= b.min.x && c.x <= b.max.x && c.y >= b.min.y && c.y <= b.max.y {
                self.blocked[idx] = true;
            }
        }
    }

    /// Cells within `clearance` (center to center) of a blocked cell.
    pub fn inflate(&self, clearance: f64) -> Vec<bool> {
        let g = &self.grid;
        let r = (clearance / g.resolution).ceil() as i64;
        let r2 = (clearance / g.resolution).powi(2) + 1e-9;
        let mut out = self.blocked.clone();
        for idx in 0..g.len() {
            if !self.blocked[idx] {
                continue;
            }
            let (i, j) = g.coords(idx);
            for dj in -r..=r {
                for di in -r..=r {
                    if (di * di + dj * dj) as f64 > r2 {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni >= 0 && nj >= 0 && (ni as usize) < g.dims[0] && (nj as usize) < g.dims[1] {
                        out[g.index(ni as usize, nj as usize)] = true;
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavPath {
    pub waypoints: Vec<Point>,
    pub length: f64,
}

fn segment_clear(g: &Grid2, free: &dyn Fn(usize) -> bool, a: Point, b: Point) -> bool {
    let n = ((a.dist(b) / (0.25 * g.resolution)).ceil() as usize).max(1);
    (0..=n).all(|k| {
        let p = a + (b - a) * (k as f64 / n as f64);
        g.cell_of(p).is_some_and(free)
    })
}

/// Shortest 8-connected path from `from` to `to` keeping `clearance` from
/// blocked cells, shortened by line-of-sight shortcuts. The start cell is
/// always passable so a robot that drifted close to an obstacle can leave.
pub fn plan_path(nav: &NavGrid, from: Point, to: Point, clearance: f64) -> Result<NavPath> {
    let g = &nav.grid;
    let start = g.cell_of(from).ok_or(Error::Unreachable)?;
    let goal = g.cell_of(to).ok_or(Error::Unreachable)?;
    let from = Point::new(from.x, from.y, 0.0);
    let to = Point::new(to.x, to.y, 0.0);
    if start == goal {
        return Ok(NavPath {
            length: from.dist(to),
            waypoints: if from == to { vec![from] } else { vec![from, to] },
        });
    }
    let blocked = nav.inflate(clearance);
    if blocked[goal] {
        return Err(Error::Unreachable);
    }
    let free = |c: usize| c == start || !blocked[c];
    let (gi, gj) = g.coords(goal);
    let h = |c: usize| {
        let (i, j) = g.coords(c);
        let (dx, dy) = ((i as f64 - gi as f64).abs(), (j as f64 - gj as f64).abs());
        g.resolution * (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy))
    };
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut prev = vec![usize::MAX; g.len()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Reverse((h(start).to_bits(), start)));
    while let Some(Reverse((_, c))) = heap.pop() {
        if c == goal {
            break;
        }
        let (i, j) = g.coords(c);
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni as usize >= g.dims[0] || nj as usize >= g.dims[1] {
                continue;
            }
            let n = g.index(ni as usize, nj as usize);
            if !free(n) {
                continue;
            }
            if di != 0 && dj != 0 && !(free(g.index(ni as usize, j)) && free(g.index(i, nj as usize))) {
                continue;
            }
            let step = if di != 0 && dj != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            let d = dist[c] + step * g.resolution;
            if d < dist[n] {
                dist[n] = d;
                prev[n] = c;
                heap.push(Reverse(((d + h(n)).to_bits(), n)));
            }
        }
    }
    if !dist[goal].is_finite() {
        return Err(Error::Unreachable);
    }
    let mut cells = vec![goal];
    while let Some(&c) = cells.last() {
        if c == start {
            break;
        }
        cells.push(prev[c]);
    }
    cells.reverse();
    let mut raw: Vec<Point> = cells.iter().map(|&c| g.center(c)).collect();
    raw[0] = from;
    *raw.last_mut().expect("path has cells") = to;
    let mut waypoints = vec![from];
    let mut k = 0;
    while k + 1 < raw.len() {
        let mut next = k + 1;
        for m in (k + 2..raw.len()).rev() {
            if segment_clear(g, &free, raw[k], raw[m]) {
                next = m;
                break;
            }
        }
        waypoints.push(raw[next]);
        k = next;
    }
    let length = waypoints.windows(2).map(|w| w[0].dist(w[1])).sum();
    Ok(NavPath { waypoints, length })
}

/// Floor cells seen so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorMap {
    pub grid: Grid2,
    pub observed: Vec<bool>,
}

impl FloorMap {
    pub fn new(grid: Grid2) -> FloorMap {
        FloorMap {
            observed: vec![false; grid.len()],
            grid,
        }
    }

    pub fn observe(&mut self, p: Point) {
        if let Some(c) = self.grid.cell_of(p) {
            self.observed[c] = true;
        }
    }

    pub fn observed_fraction(&self) -> f64 {
        self.observed.iter().filter(|&&o| o).count() as f64 / self.grid.len().max(1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierTarget {
    pub cell: usize,
    /// Unit horizontal direction toward the unobserved side.
    pub direction: Point,
    pub viewpoint: Viewpoint,
}

/// Observed floor cells with an unobserved, non-excluded 4-neighbour.
pub fn frontier_cells(floor: &FloorMap, excluded: &[bool]) -> Vec<usize> {
    (0..floor.grid.len())
        .filter(|&c| {
            floor.observed[c]
                && floor
                    .grid
                    .neighbors4(c)
                    .into_iter()
                    .any(|n| !floor.observed[n] && !excluded[n])
        })
        .collect()
}

/// Nearest frontier cell to `position` (ties to the smaller cell index),
/// as a viewpoint `standoff` meters back from it on the observed side,
/// at height `h_cam`, facing the unobserved side pitched down by `pitch`
/// radians. `None` when no frontier remains.
pub fn frontier_target(
    floor: &FloorMap,
    excluded: &[bool],
    position: Point,
    standoff: f64,
    h_cam: f64,
    pitch: f64,
) -> Option<FrontierTarget> {
    let g = &floor.grid;
    let here = Point::new(position.x, position.y, 0.0);
    let cell = frontier_cells(floor, excluded)
        .into_iter()
        .min_by(|&a, &b| g.center(a).dist(here).total_cmp(&g.center(b).dist(here)).then(a.cmp(&b)))?;
    let c = g.center(cell);
    let mut dir = Point::ZERO;
    for n in g.neighbors4(cell) {
        if !floor.observed[n] && !excluded[n] {
            dir += g.center(n) - c;
        }
    }
    let dir = dir.normalized().unwrap_or(Point::X);
    let pos = Point::new(c.x - dir.x * standoff, c.y - dir.y * standoff, h_cam);
    let look = Point::new(dir.x * pitch.cos(), dir.y * pitch.cos(), -pitch.sin());
    let viewpoint = Viewpoint::new(pos, look, Point::Z).ok()?;
    Some(FrontierTarget {
        cell,
        direction: dir,
        viewpoint,
    })
}
