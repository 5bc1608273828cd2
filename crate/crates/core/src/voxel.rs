//! Voxel grids, scalar fields, the blurred occupancy field used as shape
//! probability, and line-of-sight queries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::camera::Viewpoint;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};

/// Fields with more voxels than this are stored sparsely.
pub const DENSE_LIMIT: usize = 256 * 256 * 256;

/// Occupancy threshold for occlusion tests.
pub const OCCUPIED: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: Point,
    /// Edge length of a voxel, meters.
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(origin: Point, resolution: f64, dims: [usize; 3]) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter("voxel resolution must be positive".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParameter("voxel grid needs at least one voxel per axis".into()));
        }
        Ok(VoxelGrid { origin, resolution, dims })
    }

    /// Smallest grid of the given resolution covering `bounds` grown by `pad`.
    /// The origin snaps to a multiple of the resolution so grids over the same
    /// region line up.
    pub fn covering(bounds: &Aabb, resolution: f64, pad: f64) -> Result<Self> {
        let b = bounds.expanded(pad);
        let snap = |v: f64| (v / resolution).floor() * resolution;
        let origin = Point::new(snap(b.min.x), snap(b.min.y), snap(b.min.z));
        let n = |lo: f64, hi: f64| (((hi - lo) / resolution).floor() as usize + 1).max(1);
        let dims = [n(origin.x, b.max.x), n(origin.y, b.max.y), n(origin.z, b.max.z)];
        VoxelGrid::new(origin, resolution, dims)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> Aabb {
        let e = Point::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution;
        Aabb::new(self.origin, self.origin + e)
    }

    #[inline]
    pub fn linear(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Integer voxel coordinates of `p` (may be outside the grid).
    #[inline]
    pub fn cell_of(&self, p: Point) -> [i64; 3] {
        let r = self.resolution;
        [
            ((p.x - self.origin.x) / r).floor() as i64,
            ((p.y - self.origin.y) / r).floor() as i64,
            ((p.z - self.origin.z) / r).floor() as i64,
        ]
    }

    #[inline]
    pub fn in_grid(&self, c: [i64; 3]) -> bool {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a])
    }

    pub fn index_of(&self, p: Point) -> Option<usize> {
        let c = self.cell_of(p);
        self.in_grid(c)
            .then(|| self.linear([c[0] as usize, c[1] as usize, c[2] as usize]))
    }

    pub fn center(&self, idx: usize) -> Point {
        let c = self.coords(idx);
        self.origin
            + Point::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.resolution
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Store {
    Dense(Vec<f64>),
    Sparse(BTreeMap<usize, f64>),
}

/// One value in `[0, 1]` per voxel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: VoxelGrid,
    store: Store,
}

impl ScalarField {
    pub fn zeros(grid: VoxelGrid) -> Self {
        let store = if grid.len() <= DENSE_LIMIT {
            Store::Dense(vec![0.0; grid.len()])
        } else {
            Store::Sparse(BTreeMap::new())
        };
        ScalarField { grid, store }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.store, Store::Sparse(_))
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        match &self.store {
            Store::Dense(v) => v[idx],
            Store::Sparse(m) => m.get(&idx).copied().unwrap_or(0.0),
        }
    }

    pub fn set(&mut self, idx: usize, value: f64) {
        let value = value.clamp(0.0, 1.0);
        match &mut self.store {
            Store::Dense(v) => v[idx] = value,
            Store::Sparse(m) => {
                if value == 0.0 {
                    m.remove(&idx);
                } else {
                    m.insert(idx, value);
                }
            }
        }
    }

    fn add(&mut self, idx: usize, delta: f64) {
        match &mut self.store {
            Store::Dense(v) => v[idx] += delta,
            Store::Sparse(m) => *m.entry(idx).or_insert(0.0) += delta,
        }
    }

    /// Non-zero voxels in ascending index order.
    pub fn nonzero(&self) -> Vec<(usize, f64)> {
        match &self.store {
            Store::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| (i, x))
                .collect(),
            Store::Sparse(m) => m.iter().map(|(&i, &x)| (i, x)).collect(),
        }
    }

    #[inline]
    pub fn is_occupied(&self, idx: usize) -> bool {
        self.get(idx) > OCCUPIED
    }

    /// Value at a point, 0 outside the grid.
    pub fn sample(&self, p: Point) -> f64 {
        self.grid.index_of(p).map_or(0.0, |i| self.get(i))
    }

    fn clamp_all(&mut self) {
        match &mut self.store {
            Store::Dense(v) => v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0)),
            Store::Sparse(m) => {
                m.values_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
                m.retain(|_, x| *x != 0.0);
            }
        }
    }
}

/// Binary occupancy: 1 for voxels holding at least one point.
pub fn build_occupancy(cloud: &PointCloud, grid: &VoxelGrid) -> Result<ScalarField> {
    occupancy_of(&cloud.points, grid)
}

pub fn occupancy_of(points: &[Point], grid: &VoxelGrid) -> Result<ScalarField> {
    let mut field = ScalarField::zeros(*grid);
    for p in points {
        let idx = grid.index_of(*p).ok_or(Error::OutOfGrid)?;
        field.set(idx, 1.0);
    }
    Ok(field)
}

/// Normalized 1D Gaussian weights for offsets `-r..=r` voxels.
pub fn gaussian_kernel(sigma_voxels: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_voxels).ceil() as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma_voxels * sigma_voxels)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Separable Gaussian blur with zero padding outside the grid.
pub fn blur(field: &ScalarField, sigma: f64) -> Result<ScalarField> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter("blur sigma must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let grid = field.grid;
    let kernel = gaussian_kernel(sigma / grid.resolution);
    let radius = (kernel.len() / 2) as i64;
    let mut current = field.clone();
    for axis in 0..3 {
        let mut next = ScalarField::zeros(grid);
        for (idx, v) in current.nonzero() {
            let c = grid.coords(idx);
            for (k, w) in kernel.iter().enumerate() {
                let pos = c[axis] as i64 + k as i64 - radius;
                if pos < 0 || pos as usize >= grid.dims[axis] {
                    continue;
                }
                let mut cc = c;
                cc[axis] = pos as usize;
                next.add(grid.linear(cc), v * w);
            }
        }
        current = next;
    }
    current.clamp_all();
    Ok(current)
}

/// Indicator occupancy of `cloud` convolved with a normalized Gaussian of
/// standard deviation `blur_sigma` meters (kernel truncated at 3 sigma).
pub fn tdf(cloud: &PointCloud, grid: &VoxelGrid, blur_sigma: f64) -> Result<ScalarField> {
    tdf_of(&cloud.points, grid, blur_sigma)
}

pub fn tdf_of(points: &[Point], grid: &VoxelGrid, blur_sigma: f64) -> Result<ScalarField> {
    if !(blur_sigma >= 0.0) {
        return Err(Error::InvalidParameter("blur sigma must be non-negative".into()));
    }
    blur(&occupancy_of(points, grid)?, blur_sigma)
}

/// Voxels pierced by the segment `from -> to`, in order, clipped to the
/// grid (Amanatides & Woo stepping). Includes the voxels containing the
/// clipped endpoints.
pub fn traverse(grid: &VoxelGrid, from: Point, to: Point) -> Vec<usize> {
    let mut out = Vec::new();
    traverse_with(grid, from, to, |idx| {
        out.push(idx);
        true
    });
    out
}

/// Visits voxels along `from -> to` until `visit` returns false. Returns
/// false if the walk was stopped early.
pub fn traverse_with(grid: &VoxelGrid, from: Point, to: Point, mut visit: impl FnMut(usize) -> bool) -> bool {
    let dir = to - from;
    let Some((t0, t1)) = grid.bounds().ray_interval(from, dir, 0.0, 1.0) else {
        return true;
    };
    let r = grid.resolution;
    // Work in voxel units relative to the grid origin.
    let to_local = |p: Point| (p - grid.origin) / r;
    let start = to_local(from + dir * t0);
    let end = to_local(from + dir * t1);
    let clamp_cell = |v: f64, axis: usize| (v.floor() as i64).clamp(0, grid.dims[axis] as i64 - 1);
    let mut cell = [clamp_cell(start.x, 0), clamp_cell(start.y, 1), clamp_cell(start.z, 2)];
    let last = [clamp_cell(end.x, 0), clamp_cell(end.y, 1), clamp_cell(end.z, 2)];
    let d = end - start;
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let da = d.get(a);
        let sa = start.get(a);
        if da > 0.0 {
            step[a] = 1;
            t_max[a] = ((cell[a] + 1) as f64 - sa) / da;
            t_delta[a] = 1.0 / da;
        } else if da < 0.0 {
            step[a] = -1;
            t_max[a] = (cell[a] as f64 - sa) / da;
            t_delta[a] = -1.0 / da;
        }
    }
    let budget: i64 = (0..3).map(|a| (last[a] - cell[a]).abs()).sum::<i64>() + 3;
    for _ in 0..=budget {
        let idx = grid.linear([cell[0] as usize, cell[1] as usize, cell[2] as usize]);
        if !visit(idx) {
            return false;
        }
        if cell == last {
            break;
        }
        // Step along the axis whose boundary comes first; ties resolve to
        // the lowest axis.
        let mut axis = 0;
        for a in 1..3 {
            if t_max[a] < t_max[axis] {
                axis = a;
            }
        }
        if step[axis] == 0 {
            break;
        }
        let next = cell[axis] + step[axis];
        if next < 0 || next >= grid.dims[axis] as i64 {
            break;
        }
        cell[axis] = next;
        t_max[axis] += t_delta[axis];
    }
    true
}

/// Line-of-sight test `g(x, V)`: true iff no voxel with occupancy above
/// [`OCCUPIED`] lies strictly between the viewpoint and the target voxel.
/// The target never occludes itself. A viewpoint inside an occupied voxel
/// sees nothing.
pub fn visible(occupancy: &ScalarField, view: &Viewpoint, target: usize) -> bool {
    visible_from(occupancy, view.position, target)
}

pub fn visible_from(occupancy: &ScalarField, position: Point, target: usize) -> bool {
    let grid = &occupancy.grid;
    if let Some(own) = grid.index_of(position) {
        if occupancy.is_occupied(own) {
            return false;
        }
    }
    let goal = grid.center(target);
    traverse_with(grid, position, goal, |idx| idx == target || !occupancy.is_occupied(idx))
}

/// Visibility of many voxels from one viewpoint, in input order.
pub fn visible_many(occupancy: &ScalarField, view: &Viewpoint, targets: &[usize]) -> Vec<bool> {
    targets.iter().map(|&t| visible(occupancy, view, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> VoxelGrid {
        VoxelGrid::new(Point::ZERO, 0.1, [n, n, n]).unwrap()
    }

    #[test]
    fn occupancy_marks_single_voxel() {
        let g = grid(5);
        let c = PointCloud::from_points(vec![g.center(g.linear([2, 1, 3]))]);
        let occ = build_occupancy(&c, &g).unwrap();
        let nz = occ.nonzero();
        assert_eq!(nz, vec![(g.linear([2, 1, 3]), 1.0)]);
    }

    #[test]
    fn occupancy_is_binary_and_empty_is_zero() {
        let g = grid(4);
        let p = g.center(5);
        let occ = build_occupancy(&PointCloud::from_points(vec![p, p + Point::new(0.01, 0.0, 0.0)]), &g).unwrap();
        assert_eq!(occ.get(5), 1.0);
        assert!(build_occupancy(&PointCloud::new(), &g).unwrap().nonzero().is_empty());
    }

    #[test]
    fn occupancy_out_of_grid_errors() {
        let g = grid(4);
        let c = PointCloud::from_points(vec![Point::new(5.0, 0.0, 0.0)]);
        assert!(matches!(build_occupancy(&c, &g), Err(Error::OutOfGrid)));
    }

    #[test]
    fn tdf_sigma_zero_is_occupancy() {
        let g = grid(6);
        let pts: Vec<Point> = [3usize, 40, 41, 100].iter().map(|&i| g.center(i)).collect();
        let c = PointCloud::from_points(pts);
        assert_eq!(tdf(&c, &g, 0.0).unwrap(), build_occupancy(&c, &g).unwrap());
        assert!(tdf(&c, &g, -1.0).is_err());
    }

    #[test]
    fn tdf_of_empty_cloud_is_zero() {
        let g = grid(6);
        assert!(tdf(&PointCloud::new(), &g, 0.2).unwrap().nonzero().is_empty());
    }

    /// Brute-force dense 3D convolution used as the oracle for the blur.
    fn dense_convolution(occ: &ScalarField, sigma_vox: f64) -> Vec<f64> {
        let g = occ.grid;
        let r = (3.0 * sigma_vox).ceil() as i64;
        let mut norm = 0.0;
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    norm += (-((dx * dx + dy * dy + dz * dz) as f64) / (2.0 * sigma_vox * sigma_vox)).exp();
                }
            }
        }
        let mut out = vec![0.0; g.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let c = g.coords(i);
            let mut acc = 0.0;
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        let cc = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                        if !g.in_grid(cc) {
                            continue;
                        }
                        let j = g.linear([cc[0] as usize, cc[1] as usize, cc[2] as usize]);
                        let w = (-((dx * dx + dy * dy + dz * dz) as f64) / (2.0 * sigma_vox * sigma_vox)).exp();
                        acc += w * occ.get(j);
                    }
                }
            }
            *o = acc / norm;
        }
        out
    }

    #[test]
    fn tdf_isolated_voxel_matches_direct_convolution() {
        let g = grid(9);
        let center = g.linear([4, 4, 4]);
        let c = PointCloud::from_points(vec![g.center(center)]);
        let field = tdf(&c, &g, g.resolution).unwrap();
        let oracle = dense_convolution(&build_occupancy(&c, &g).unwrap(), 1.0);
        for i in 0..g.len() {
            assert!((field.get(i) - oracle[i]).abs() < 1e-12, "voxel {i}");
        }
        let w0 = gaussian_kernel(1.0)[3];
        assert!((field.get(center) - w0 * w0 * w0).abs() < 1e-12);
    }

    #[test]
    fn tdf_interior_of_solid_block_is_near_one() {
        let g = grid(12);
        let pts: Vec<Point> = (0..g.len()).map(|i| g.center(i)).collect();
        let field = tdf(&PointCloud::from_points(pts), &g, 0.1).unwrap();
        assert!((field.get(g.linear([6, 6, 6])) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn visibility_cases() {
        let g = grid(10);
        let empty = ScalarField::zeros(g);
        let view = Viewpoint::new(Point::new(0.05, 0.55, 0.55), Point::X, Point::Z).unwrap();
        let target = g.linear([8, 5, 5]);
        assert!(visible(&empty, &view, target));

        let mut occ = ScalarField::zeros(g);
        occ.set(g.linear([4, 5, 5]), 1.0);
        assert!(!visible(&occ, &view, target));
        // The first occupied voxel on the ray is itself visible.
        assert!(visible(&occ, &view, g.linear([4, 5, 5])));
    }

    #[test]
    fn viewpoint_inside_occupied_sees_nothing() {
        let g = grid(10);
        let mut occ = ScalarField::zeros(g);
        occ.set(g.linear([0, 5, 5]), 1.0);
        let view = Viewpoint::new(Point::new(0.05, 0.55, 0.55), Point::X, Point::Z).unwrap();
        assert!(!visible(&occ, &view, g.linear([8, 5, 5])));
        assert!(!visible(&occ, &view, g.linear([0, 5, 5])));
    }

    #[test]
    fn viewpoint_outside_grid_is_clipped() {
        let g = grid(10);
        let mut occ = ScalarField::zeros(g);
        let view = Viewpoint::new(Point::new(-2.0, 0.55, 0.55), Point::X, Point::Z).unwrap();
        let target = g.linear([6, 5, 5]);
        assert!(visible(&occ, &view, target));
        occ.set(g.linear([0, 5, 5]), 1.0);
        assert!(!visible(&occ, &view, target));
    }

    #[test]
    fn traversal_visits_contiguous_voxels() {
        let g = grid(10);
        let path = traverse(&g, Point::new(0.05, 0.05, 0.05), Point::new(0.93, 0.61, 0.27));
        for w in path.windows(2) {
            let a = g.coords(w[0]);
            let b = g.coords(w[1]);
            let manhattan: i64 = (0..3).map(|k| (a[k] as i64 - b[k] as i64).abs()).sum();
            assert_eq!(manhattan, 1);
        }
        assert_eq!(*path.last().unwrap(), g.index_of(Point::new(0.93, 0.61, 0.27)).unwrap());
    }

    #[test]
    fn sparse_store_above_dense_limit() {
        let g = VoxelGrid::new(Point::ZERO, 0.01, [300, 300, 300]).unwrap();
        let mut f = ScalarField::zeros(g);
        assert!(f.is_sparse());
        let idx = g.linear([150, 150, 150]);
        f.set(idx, 0.7);
        assert_eq!(f.get(idx), 0.7);
        assert_eq!(f.nonzero().len(), 1);
        let blurred = blur(&f, 0.01).unwrap();
        let total: f64 = blurred.nonzero().iter().map(|(_, v)| v).sum();
        assert!((total - 0.7).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn tdf_bounded(cells in proptest::collection::vec(0usize..512, 0..60), sigma in 0.0f64..0.3) {
            let g = grid(8);
            let pts: Vec<Point> = cells.iter().map(|&i| g.center(i)).collect();
            let f = tdf(&PointCloud::from_points(pts), &g, sigma).unwrap();
            for i in 0..g.len() {
                let v = f.get(i);
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn removing_occluders_never_hides(
            cells in proptest::collection::vec(0usize..1000, 0..80),
            drop_mask in proptest::collection::vec(proptest::bool::ANY, 80),
            target in 0usize..1000,
        ) {
            let g = grid(10);
            let mut full = ScalarField::zeros(g);
            let mut reduced = ScalarField::zeros(g);
            for (k, &c) in cells.iter().enumerate() {
                full.set(c, 1.0);
                if !drop_mask[k] {
                    reduced.set(c, 1.0);
                }
            }
            let view = Viewpoint::new(Point::new(-0.3, 0.42, 0.77), Point::X, Point::Z).unwrap();
            if visible(&full, &view, target) {
                proptest::prop_assert!(visible(&reduced, &view, target));
            }
        }
    }
}
