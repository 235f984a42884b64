//! Adversary geometry: the problem instance, the base hypercube under the
//! initial value, its face subdivision, and the oblique cell grid swept
//! toward the cone vertex.

use crate::bump::Parallelepiped;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Full problem instance: interval, initial value, class parameters, and the
/// derived adversary constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub eta: Vec<f64>,
    pub dim: usize,
    pub smoothness: usize,
    /// Uniform bound D on all partials of class members.
    pub bound: f64,
    /// Outer box M: fields vanish outside it.
    pub outer: Vec<[f64; 2]>,
    /// Inner box M1: the plateau region, with closure(M1) inside M.
    pub inner: Vec<[f64; 2]>,
    /// Plateau speed; `|alpha|_inf = delta`.
    pub delta: f64,
    /// Base cube edge T, at most `delta * (b - a)`.
    pub t_edge: f64,
    /// Cell refinement factor for the standard-information construction.
    pub p: usize,
    /// Max-norm Lipschitz constant of the class, `L = d * D`.
    pub lipschitz: f64,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        eta: Vec<f64>,
        smoothness: usize,
        bound: f64,
        outer: Vec<[f64; 2]>,
        inner: Vec<[f64; 2]>,
        delta: f64,
        t_edge: f64,
        p: usize,
    ) -> Result<Self> {
        let dim = eta.len();
        if dim == 0 || outer.len() != dim || inner.len() != dim {
            return Err(Error::Geometry("dimension mismatch".into()));
        }
        if !(a < b) {
            return Err(Error::Geometry(format!("need a < b, got [{a}, {b}]")));
        }
        if smoothness == 0 {
            return Err(Error::Geometry("smoothness r must be >= 1".into()));
        }
        if !(bound > 0.0) {
            return Err(Error::Geometry("derivative bound D must be positive".into()));
        }
        if p < 2 {
            return Err(Error::Geometry("refinement factor p must be >= 2".into()));
        }
        for j in 0..dim {
            if !(outer[j][0] < inner[j][0] && inner[j][0] < inner[j][1] && inner[j][1] < outer[j][1])
            {
                return Err(Error::Geometry(format!(
                    "axis {j}: closure of the inner box must lie inside the outer box"
                )));
            }
            if !(eta[j] > inner[j][0] && eta[j] < inner[j][1]) {
                return Err(Error::Geometry(format!(
                    "axis {j}: initial value must lie in the inner box"
                )));
            }
        }
        if !(delta > 0.0 && delta <= bound / 2.0) {
            return Err(Error::Geometry(format!(
                "delta = {delta} must satisfy 0 < delta <= D/2 = {}",
                bound / 2.0
            )));
        }
        let radius = delta * (b - a);
        for j in 0..dim {
            if eta[j] - radius < inner[j][0] || eta[j] + radius > inner[j][1] {
                return Err(Error::Geometry(format!(
                    "axis {j}: the reachable ball of radius {radius} leaves the inner box"
                )));
            }
        }
        if !(t_edge > 0.0 && t_edge <= radius) {
            return Err(Error::EdgeTooLong {
                edge: t_edge,
                max_edge: radius,
            });
        }
        Ok(ProblemSpec {
            a,
            b,
            eta,
            dim,
            smoothness,
            bound,
            outer,
            inner,
            delta,
            t_edge,
            p,
            lipschitz: dim as f64 * bound,
        })
    }

    /// Radius of the reachable max-norm ball around eta.
    pub fn ball_radius(&self) -> f64 {
        self.delta * (self.b - self.a)
    }

    pub fn ball(&self) -> Vec<[f64; 2]> {
        let r = self.ball_radius();
        self.eta.iter().map(|&e| [e - r, e + r]).collect()
    }
}

/// Smallest m with m^d >= n, computed in integer arithmetic.
pub fn integer_root_ceil(n: u64, d: u32) -> u64 {
    if n <= 1 {
        return n.max(1);
    }
    let mut m = (n as f64).powf(1.0 / d as f64).round() as u64;
    m = m.max(1);
    while m.saturating_pow(d) >= n {
        m -= 1;
        if m == 0 {
            break;
        }
    }
    while m.saturating_pow(d) < n {
        m += 1;
    }
    m
}

/// Largest g with g^d <= n.
pub fn integer_root_floor(n: u64, d: u32) -> u64 {
    let m = integer_root_ceil(n, d);
    if m.saturating_pow(d) == n {
        m
    } else {
        m - 1
    }
}

/// The base hypercube K: edges of length T, top corner at eta.
pub fn base_cube(spec: &ProblemSpec) -> Result<Vec<[f64; 2]>> {
    if spec.t_edge > spec.ball_radius() {
        return Err(Error::EdgeTooLong {
            edge: spec.t_edge,
            max_edge: spec.ball_radius(),
        });
    }
    Ok(spec
        .eta
        .iter()
        .map(|&e| [e - spec.t_edge, e])
        .collect())
}

/// Uniform subdivision of the base face (axis d frozen at its lower level)
/// into `(divisions)^(d-1)` sub-hypercubes, ordered lexicographically.
#[derive(Debug, Clone)]
pub struct BaseSubdivision {
    cube: Vec<[f64; 2]>,
    eta: Vec<f64>,
    p: usize,
    m: usize,
    divisions: usize,
    dim: usize,
}

impl BaseSubdivision {
    pub fn new(cube: Vec<[f64; 2]>, eta: Vec<f64>, p: usize, m: usize) -> Result<Self> {
        if p == 0 || m == 0 {
            return Err(Error::Geometry("need p >= 1 and m >= 1".into()));
        }
        let dim = cube.len();
        if dim < 2 {
            return Err(Error::Geometry(
                "base-face subdivision needs dimension >= 2".into(),
            ));
        }
        Ok(BaseSubdivision {
            cube,
            eta,
            p,
            m,
            divisions: p * m,
            dim,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cube(&self) -> &[[f64; 2]] {
        &self.cube
    }

    pub fn edge(&self) -> f64 {
        self.cube[0][1] - self.cube[0][0]
    }

    /// Number of base-face sub-hypercubes.
    pub fn count(&self) -> usize {
        self.divisions.pow(self.dim as u32 - 1)
    }

    /// Grid point `t_k` on base axis `j` (0-based axis among the first d-1).
    pub fn grid_point(&self, j: usize, k: usize) -> f64 {
        self.cube[j][0] + k as f64 * self.edge() / self.divisions as f64
    }

    pub fn tuple(&self, rank: usize) -> Vec<usize> {
        let mut t = vec![0; self.dim - 1];
        let mut r = rank;
        for j in (0..self.dim - 1).rev() {
            t[j] = r % self.divisions;
            r /= self.divisions;
        }
        t
    }

    pub fn rank(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &k| acc * self.divisions + k)
    }

    /// Center of sub-hypercube `tuple`, a point in R^d on the base face.
    pub fn center(&self, tuple: &[usize]) -> Vec<f64> {
        let mut c: Vec<f64> = tuple
            .iter()
            .enumerate()
            .map(|(j, &k)| 0.5 * (self.grid_point(j, k) + self.grid_point(j, k + 1)))
            .collect();
        c.push(self.cube[self.dim - 1][0]);
        c
    }

    /// `center - eta`; its max-norm equals the cube edge T.
    pub fn alpha(&self, tuple: &[usize]) -> Vec<f64> {
        self.center(tuple)
            .iter()
            .zip(&self.eta)
            .map(|(c, e)| c - e)
            .collect()
    }

    /// The oblique parallelepiped associated with `tuple`: the mid-height
    /// homothety of the sub-hypercube (ratio 1/2 toward eta) swept halfway
    /// down the cone toward the base face.
    pub fn parallelepiped(&self, tuple: &[usize]) -> Result<Parallelepiped> {
        let alpha = self.alpha(tuple);
        let norm = alpha.iter().map(|c| c * c).sum::<f64>().sqrt();
        // bottom face: midpoints between the sub-hypercube and its center
        let base = (0..self.dim - 1)
            .map(|j| {
                let c = 0.5 * (self.grid_point(j, tuple[j]) + self.grid_point(j, tuple[j] + 1));
                [
                    0.5 * (self.grid_point(j, tuple[j]) + c),
                    0.5 * (self.grid_point(j, tuple[j] + 1) + c),
                ]
            })
            .collect();
        let up: Vec<f64> = alpha.iter().map(|c| -c).collect();
        Parallelepiped::new(base, self.cube[self.dim - 1][0], &up, norm / 2.0)
    }
}

/// The full cell grid: one parallelepiped per base sub-hypercube, each split
/// into `cells_per_parallelepiped` slabs indexed from the mid-height face
/// toward the base face (the order the plateau trajectory crosses them).
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub sub: BaseSubdivision,
    pub parallelepipeds: Vec<Parallelepiped>,
    pub cells: Vec<Parallelepiped>,
    cells_per: usize,
    eta: Vec<f64>,
    t_edge: f64,
}

impl CellGrid {
    pub fn build(sub: BaseSubdivision, cells_per: usize) -> Result<Self> {
        if cells_per == 0 {
            return Err(Error::Geometry("cells_per must be >= 1".into()));
        }
        let eta = sub.eta.clone();
        let t_edge = sub.edge();
        let mut parallelepipeds = Vec::with_capacity(sub.count());
        let mut cells = Vec::with_capacity(sub.count() * cells_per);
        for rank in 0..sub.count() {
            let tuple = sub.tuple(rank);
            let pll = sub.parallelepiped(&tuple)?;
            let mut slabs = pll.split_along_sweep(cells_per);
            slabs.reverse(); // cell 0 sits at the mid-height face
            cells.extend(slabs);
            parallelepipeds.push(pll);
        }
        Ok(CellGrid {
            sub,
            parallelepipeds,
            cells,
            cells_per,
            eta,
            t_edge,
        })
    }

    pub fn dim(&self) -> usize {
        self.sub.dim()
    }

    pub fn cells_per_parallelepiped(&self) -> usize {
        self.cells_per
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn flat_index(&self, rank: usize, j: usize) -> usize {
        rank * self.cells_per + j
    }

    pub fn split_index(&self, flat: usize) -> (usize, usize) {
        (flat / self.cells_per, flat % self.cells_per)
    }

    /// Central projection from eta onto the base-face plane; the candidate
    /// sub-hypercube tuple containing the ray through `y`.
    fn cone_tuple(&self, y: &[f64]) -> Option<usize> {
        let d = self.dim();
        let drop = self.eta[d - 1] - y[d - 1];
        if !(drop > 0.0 && drop <= self.t_edge) {
            return None;
        }
        let scale = self.t_edge / drop;
        let step = self.t_edge / self.sub.divisions() as f64;
        let mut rank = 0usize;
        for j in 0..d - 1 {
            let q = self.eta[j] + (y[j] - self.eta[j]) * scale;
            let rel = (q - self.sub.cube()[j][0]) / step;
            if !(rel > 0.0 && rel < self.sub.divisions() as f64) {
                return None;
            }
            rank = rank * self.sub.divisions() + rel as usize;
        }
        Some(rank)
    }

    /// The unique cell whose open interior contains `y`, if any. Points on
    /// shared faces (within the 1e-12 relative band) report none.
    pub fn locate(&self, y: &[f64]) -> Option<usize> {
        let rank = self.cone_tuple(y)?;
        let pll = &self.parallelepipeds[rank];
        let (_, lbar) = pll.project(y);
        let v = lbar / pll.height();
        if !(v > 0.0 && v < 1.0) {
            return None;
        }
        // bottom-up slab index -> mid-face-first cell index
        let from_bottom = ((v * self.cells_per as f64) as usize).min(self.cells_per - 1);
        let j = self.cells_per - 1 - from_bottom;
        let flat = self.flat_index(rank, j);
        if self.cells[flat].contains_interior(y) {
            Some(flat)
        } else {
            None
        }
    }

    /// Like `locate` but at parallelepiped granularity.
    pub fn locate_parallelepiped(&self, y: &[f64]) -> Option<usize> {
        let rank = self.cone_tuple(y)?;
        if self.parallelepipeds[rank].contains_interior(y) {
            Some(rank)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec2() -> ProblemSpec {
        ProblemSpec::new(
            0.0,
            1.0,
            vec![0.5, 0.5],
            1,
            1.0,
            vec![[0.0, 1.0], [0.0, 1.0]],
            vec![[0.1, 0.9], [0.1, 0.9]],
            0.25,
            0.2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn base_cube_coordinates() {
        let spec = spec2();
        let k = base_cube(&spec).unwrap();
        assert_eq!(k, vec![[0.3, 0.5], [0.3, 0.5]]);
        // the top corner is eta exactly
        assert_eq!(k[0][1], 0.5);
        assert_eq!(k[1][1], 0.5);
    }

    #[test]
    fn base_cube_vertices_in_ball() {
        let spec = spec2();
        let k = base_cube(&spec).unwrap();
        let r = spec.ball_radius();
        for mask in 0..4 {
            let v = [k[0][mask & 1], k[1][(mask >> 1) & 1]];
            assert!((v[0] - 0.5f64).abs() <= r && (v[1] - 0.5f64).abs() <= r);
        }
    }

    #[test]
    fn base_cube_rejects_long_edge() {
        let spec = ProblemSpec::new(
            0.0,
            1.0,
            vec![0.5, 0.5],
            1,
            1.0,
            vec![[0.0, 1.0], [0.0, 1.0]],
            vec![[0.1, 0.9], [0.1, 0.9]],
            0.25,
            0.3,
            2,
        );
        assert!(matches!(spec, Err(Error::EdgeTooLong { .. })));
    }

    #[test]
    fn integer_roots() {
        assert_eq!(integer_root_ceil(16, 2), 4);
        assert_eq!(integer_root_ceil(17, 2), 5);
        assert_eq!(integer_root_ceil(1024, 2), 32);
        assert_eq!(integer_root_ceil(1728, 3), 12);
        assert_eq!(integer_root_ceil(1729, 3), 13);
        assert_eq!(integer_root_floor(1023, 2), 31);
        assert_eq!(integer_root_floor(1024, 2), 32);
        assert_eq!(integer_root_floor(124, 3), 4);
    }

    fn sub2(p: usize, m: usize) -> BaseSubdivision {
        let spec = spec2();
        BaseSubdivision::new(base_cube(&spec).unwrap(), spec.eta.clone(), p, m).unwrap()
    }

    #[test]
    fn subdivision_counts_and_widths() {
        let sub = sub2(2, 2);
        assert_eq!(sub.count(), 4);
        // centers at a_1 + T(2k+1)/8, level a_2
        for k in 0..4 {
            let c = sub.center(&[k]);
            assert!((c[0] - (0.3 + 0.2 * (2.0 * k as f64 + 1.0) / 8.0)).abs() < 1e-15);
            assert_eq!(c[1], 0.3);
        }
    }

    #[test]
    fn subdivision_volume_partition() {
        let sub = sub2(2, 3);
        let widths: f64 = (0..sub.count())
            .map(|r| {
                let t = sub.tuple(r);
                sub.grid_point(0, t[0] + 1) - sub.grid_point(0, t[0])
            })
            .sum();
        assert!((widths - 0.2).abs() < 1e-14);
    }

    #[test]
    fn three_dim_subdivision_count() {
        let spec = ProblemSpec::new(
            0.0,
            1.0,
            vec![0.5; 3],
            1,
            1.0,
            vec![[0.0, 1.0]; 3],
            vec![[0.1, 0.9]; 3],
            0.25,
            0.2,
            2,
        )
        .unwrap();
        let sub =
            BaseSubdivision::new(base_cube(&spec).unwrap(), spec.eta.clone(), 2, 3).unwrap();
        assert_eq!(sub.count(), 36);
    }

    #[test]
    fn centers_at_max_norm_distance_t() {
        let sub = sub2(2, 4);
        for r in 0..sub.count() {
            let a = sub.alpha(&sub.tuple(r));
            let inf = a.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
            assert!((inf - 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn parallelepiped_homothety_endpoints() {
        // d=2, eta=(0.5,0.5), T=0.2, pm=4, k=0: the mid-height face spans the
        // midpoints of the segments from eta to the endpoints of K_0.
        let sub = sub2(2, 2);
        let pll = sub.parallelepiped(&[0]).unwrap();
        // top face = base + height along direction
        let t0 = sub.grid_point(0, 0);
        let t1 = sub.grid_point(0, 1);
        let expect_lo = 0.5 * (t0 + 0.5);
        let expect_hi = 0.5 * (t1 + 0.5);
        let top_lo = pll.unproject(&[pll.base()[0][0]], pll.height());
        let top_hi = pll.unproject(&[pll.base()[0][1]], pll.height());
        assert!((top_lo[0] - expect_lo).abs() < 1e-14);
        assert!((top_hi[0] - expect_hi).abs() < 1e-14);
        assert!((top_lo[1] - 0.4).abs() < 1e-14); // mid-height level
    }

    #[test]
    fn parallelepiped_height_is_half_alpha() {
        let sub = sub2(2, 4);
        for r in 0..sub.count() {
            let t = sub.tuple(r);
            let a = sub.alpha(&t);
            let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
            let pll = sub.parallelepiped(&t).unwrap();
            assert!((pll.height() - norm / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn parallelepiped_vertices_inside_ball() {
        let spec = spec2();
        let sub = sub2(2, 4);
        let r = spec.ball_radius();
        for rank in 0..sub.count() {
            let pll = sub.parallelepiped(&sub.tuple(rank)).unwrap();
            for v in pll.vertices() {
                for (j, &c) in v.iter().enumerate() {
                    assert!(
                        (c - spec.eta[j]).abs() <= r + 1e-12,
                        "vertex {v:?} escapes the ball"
                    );
                }
            }
        }
    }

    #[test]
    fn direction_cosine_at_least_inv_sqrt_d() {
        for d in [2usize, 3] {
            let spec = ProblemSpec::new(
                0.0,
                1.0,
                vec![0.5; d],
                1,
                1.0,
                vec![[0.0, 1.0]; d],
                vec![[0.1, 0.9]; d],
                0.25,
                0.2,
                2,
            )
            .unwrap();
            let sub =
                BaseSubdivision::new(base_cube(&spec).unwrap(), spec.eta.clone(), 2, 3).unwrap();
            let bound = 1.0 / (d as f64).sqrt();
            for rank in 0..sub.count() {
                let pll = sub.parallelepiped(&sub.tuple(rank)).unwrap();
                assert!(pll.cos_axis() >= bound - 1e-14);
            }
        }
    }

    fn grid2() -> CellGrid {
        CellGrid::build(sub2(2, 2), 4).unwrap()
    }

    #[test]
    fn cell_count_matches() {
        let g = grid2();
        assert_eq!(g.cell_count(), 16); // (pm)^d = 4^2
        assert_eq!(g.parallelepipeds.len(), 4);
    }

    #[test]
    fn locate_finds_cell_centers() {
        let g = grid2();
        for flat in 0..g.cell_count() {
            let cell = &g.cells[flat];
            let mid: Vec<f64> = cell.base().iter().map(|iv| 0.5 * (iv[0] + iv[1])).collect();
            let y = cell.unproject(&mid, cell.height() / 2.0);
            assert_eq!(g.locate(&y), Some(flat), "center of cell {flat}");
        }
    }

    #[test]
    fn locate_rejects_eta_and_outside() {
        let g = grid2();
        assert_eq!(g.locate(&[0.5, 0.5]), None); // the cone vertex
        assert_eq!(g.locate(&[0.9, 0.9]), None);
        assert_eq!(g.locate(&[0.35, 0.55]), None); // above the base cube
    }

    #[test]
    fn locate_rejects_shared_faces() {
        let g = grid2();
        // face between cell j and j+1 of the same parallelepiped
        let cell = &g.cells[g.flat_index(1, 1)];
        let mid: Vec<f64> = cell.base().iter().map(|iv| 0.5 * (iv[0] + iv[1])).collect();
        let face_point = cell.unproject(&mid, 0.0);
        assert_eq!(g.locate(&face_point), None);
    }

    #[test]
    fn locate_agrees_with_brute_force() {
        let g = grid2();
        let mut state = 0xabcdefu64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut hits = 0;
        for _ in 0..1000 {
            let y = [0.3 + 0.2 * rand01(), 0.3 + 0.2 * rand01()];
            let brute: Vec<usize> = (0..g.cell_count())
                .filter(|&i| g.cells[i].contains_interior(&y))
                .collect();
            assert!(brute.len() <= 1, "overlapping interiors at {y:?}");
            assert_eq!(g.locate(&y), brute.first().copied(), "at {y:?}");
            hits += brute.len();
        }
        assert!(hits > 50, "sampling never hit the grid; test is vacuous");
    }

    #[test]
    fn cells_volume_sums_to_parallelepiped() {
        let g = grid2();
        for rank in 0..g.parallelepipeds.len() {
            let total: f64 = (0..g.cells_per_parallelepiped())
                .map(|j| g.cells[g.flat_index(rank, j)].volume())
                .sum();
            let v = g.parallelepipeds[rank].volume();
            assert!((total - v).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn containment_chain() {
        let spec = spec2();
        let g = grid2();
        for cell in &g.cells {
            for v in cell.vertices() {
                for j in 0..2 {
                    assert!((v[j] - spec.eta[j]).abs() <= spec.ball_radius() + 1e-12);
                    assert!(v[j] > spec.inner[j][0] && v[j] < spec.inner[j][1]);
                    assert!(v[j] > spec.outer[j][0] && v[j] < spec.outer[j][1]);
                }
            }
        }
    }
}
