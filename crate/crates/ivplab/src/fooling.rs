//! Adversarial pair construction: a plateau right-hand side `f1` and a
//! perturbed `f2 = f1 + H`, where `H` is a signed sum of cell bumps chosen so
//! that a given nonadaptive information operator cannot tell the two apart,
//! while the two solutions separate by a predictable margin.

use crate::bump::{h_integral, h_max, CertifyOptions, Parallelepiped, ParallelepipedBump};
use crate::error::{Error, Result};
use crate::field::{BoxProfile, Field};
use crate::geometry::{base_cube, integer_root_ceil, BaseSubdivision, CellGrid, ProblemSpec};
use crate::info::{InfoOperator, LinearFunctional, StandardAtom};
use crate::nullspace::{frobenius, null_vector_max_normalized, residual_inf};
use serde::{Deserialize, Serialize};

/// Which construction produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    /// Standard point information, pigeonhole cell elimination.
    #[serde(rename = "thm1")]
    Standard,
    /// Arbitrary finite-rank linear information, one bump per parallelepiped,
    /// null-space coefficients.
    #[serde(rename = "thm2i")]
    Linear,
    /// Mixed class: point atoms eliminate cells, linear functionals are
    /// solved per surviving parallelepiped.
    #[serde(rename = "thm2ii")]
    Mixed,
    /// Scalar problems: a bump train on subintervals of the plateau ray.
    #[serde(rename = "d1")]
    Interval,
}

/// Inputs to problem resolution, before the plateau speed is certified.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub dim: usize,
    pub smoothness: usize,
    pub bound: f64,
    pub a: f64,
    /// End of the time interval; `None` picks the horizon that lets the base
    /// cube reach its geometric cap.
    pub b: Option<f64>,
    pub outer: Option<Vec<[f64; 2]>>,
    pub inner: Option<Vec<[f64; 2]>>,
    pub eta: Option<Vec<f64>>,
    pub p: usize,
}

impl ProblemParams {
    pub fn new(dim: usize, smoothness: usize) -> Self {
        ProblemParams {
            dim,
            smoothness,
            bound: 1.0,
            a: 0.0,
            b: None,
            outer: None,
            inner: None,
            eta: None,
            p: 2,
        }
    }
}

const PLATEAU_MARGIN: f64 = 0.05;
const BALL_FRACTION: f64 = 0.9;

/// Resolve the problem instance: build the cutoff profile, certify by dense
/// finite-difference sampling the largest plateau speed whose extension stays
/// in the class, and fix the time horizon and base-cube edge.
pub fn resolve_problem(params: &ProblemParams) -> Result<(ProblemSpec, BoxProfile)> {
    let d = params.dim;
    let r = params.smoothness;
    let outer = params
        .outer
        .clone()
        .unwrap_or_else(|| vec![[0.0, 1.0]; d]);
    let inner = params.inner.clone().unwrap_or_else(|| {
        outer
            .iter()
            .map(|o| {
                let c = 0.5 * (o[0] + o[1]);
                let half = 0.3 * (o[1] - o[0]);
                [c - half, c + half]
            })
            .collect()
    });
    let eta = params
        .eta
        .clone()
        .unwrap_or_else(|| inner.iter().map(|i| 0.5 * (i[0] + i[1])).collect());

    let profile = BoxProfile::new(&outer, &inner, r + 2)?;

    // Largest speed such that |alpha| * sup |D^kappa phi| <= D for every
    // derivative order 1..=r; per-axis sups multiply across a tensor product.
    let mut axis_sup = vec![vec![1.0f64; r + 1]; d];
    for (axis, sups) in axis_sup.iter_mut().enumerate() {
        for (k, slot) in sups.iter_mut().enumerate().skip(1) {
            *slot = profile.sup_axis_derivative(axis, k, 2048)?;
        }
    }
    let mut worst = 0.0f64;
    for k in 1..=r {
        for orders in crate::fd::multi_indices(d, k) {
            let a: f64 = orders
                .iter()
                .enumerate()
                .map(|(axis, &o)| axis_sup[axis][o])
                .product();
            worst = worst.max(a);
        }
    }
    if !(worst > 0.0) {
        return Err(Error::Geometry("degenerate cutoff profile".into()));
    }
    let delta_ext = (1.0 - PLATEAU_MARGIN) * params.bound / worst;
    let delta_cap = delta_ext.min(params.bound / 2.0);
    if !(delta_cap > 0.0) {
        return Err(Error::Geometry(
            "no positive plateau speed certifies against the class bound".into(),
        ));
    }

    let dist = eta
        .iter()
        .zip(&inner)
        .map(|(&e, iv)| (e - iv[0]).min(iv[1] - e))
        .fold(f64::INFINITY, f64::min);

    let b = match params.b {
        Some(b) => b,
        None => params.a + BALL_FRACTION * dist * 0.9999 / delta_cap,
    };
    if !(b > params.a) {
        return Err(Error::Geometry("empty time interval".into()));
    }
    let delta = delta_cap.min(BALL_FRACTION * dist / (b - params.a));
    let t_edge = delta * (b - params.a);

    let spec = ProblemSpec::new(
        params.a,
        b,
        eta,
        r,
        params.bound,
        outer,
        inner,
        delta,
        t_edge,
        params.p,
    )?;
    Ok((spec, profile))
}

/// The plateau field `f1 = alpha * phi`: exactly `alpha` on the inner box,
/// exactly zero outside the outer box.
#[derive(Debug, Clone)]
pub struct PlateauField {
    pub alpha: Vec<f64>,
    pub profile: BoxProfile,
}

pub fn build_plateau_field(
    spec: &ProblemSpec,
    profile: &BoxProfile,
    alpha: Vec<f64>,
) -> Result<PlateauField> {
    let sup = alpha.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    if (sup - spec.delta).abs() > 1e-12 * spec.delta {
        return Err(Error::Construction(format!(
            "plateau speed |alpha|_inf = {sup} differs from delta = {}",
            spec.delta
        )));
    }
    Ok(PlateauField {
        alpha,
        profile: profile.clone(),
    })
}

impl Field for PlateauField {
    fn dim(&self) -> usize {
        self.alpha.len()
    }

    fn partial(&self, y: &[f64], component: usize, orders: &[usize]) -> Result<f64> {
        if self.profile.inside_inner(y) {
            // phi is identically 1 here
            return Ok(if orders.iter().all(|&o| o == 0) {
                self.alpha[component]
            } else {
                0.0
            });
        }
        if self.profile.outside_outer(y) {
            return Ok(0.0);
        }
        Ok(self.alpha[component] * self.profile.partial(y, orders)?)
    }
}

/// The scalar perturbation on the cell grid; evaluation routes through the
/// cone locator so it costs one bump regardless of the cell count.
#[derive(Debug, Clone)]
pub struct HatField {
    pub grid: CellGrid,
    pub bumps: Vec<ParallelepipedBump>,
    pub betas: Vec<f64>,
}

impl HatField {
    pub fn value(&self, y: &[f64]) -> f64 {
        match self.grid.locate(y) {
            // eliminated cells contribute no term at all
            Some(i) if self.betas[i] != 0.0 => self.betas[i] * self.bumps[i].value(y),
            _ => 0.0,
        }
    }

    pub fn partial(&self, y: &[f64], orders: &[usize]) -> Result<f64> {
        match self.grid.locate(y) {
            Some(i) if self.betas[i] != 0.0 => {
                Ok(self.betas[i] * self.bumps[i].partial(y, orders)?)
            }
            _ => Ok(0.0),
        }
    }
}

/// One-dimensional bump train over `[origin, origin + width * total]`.
#[derive(Debug, Clone)]
pub struct BumpTrain {
    pub origin: f64,
    pub width: f64,
    pub groups: usize,
    pub per_group: usize,
    pub removed: Vec<bool>,
    /// One coefficient per group.
    pub betas: Vec<f64>,
    pub bumps: Vec<ParallelepipedBump>,
}

impl BumpTrain {
    fn locate(&self, y: f64) -> Option<usize> {
        let rel = (y - self.origin) / self.width;
        if !(rel > 0.0) {
            return None;
        }
        let idx = rel as usize;
        if idx >= self.groups * self.per_group {
            return None;
        }
        Some(idx)
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match self.locate(y[0]) {
            Some(i) if !self.removed[i] => {
                self.betas[i / self.per_group] * self.bumps[i].value(y)
            }
            _ => 0.0,
        }
    }

    pub fn partial(&self, y: &[f64], orders: &[usize]) -> Result<f64> {
        match self.locate(y[0]) {
            Some(i) if !self.removed[i] => {
                Ok(self.betas[i / self.per_group] * self.bumps[i].partial(y, orders)?)
            }
            _ => Ok(0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Adversary {
    Grid(HatField),
    Train(BumpTrain),
}

impl Adversary {
    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Adversary::Grid(h) => h.value(y),
            Adversary::Train(t) => t.value(y),
        }
    }

    pub fn partial(&self, y: &[f64], orders: &[usize]) -> Result<f64> {
        match self {
            Adversary::Grid(h) => h.partial(y, orders),
            Adversary::Train(t) => t.partial(y, orders),
        }
    }
}

/// View of `f2 = f1 + H` with `H = [hat, 0, ..., 0]`.
pub struct FoolingField<'a> {
    pub plateau: &'a PlateauField,
    pub hat: &'a Adversary,
}

impl Field for FoolingField<'_> {
    fn dim(&self) -> usize {
        self.plateau.dim()
    }

    fn partial(&self, y: &[f64], component: usize, orders: &[usize]) -> Result<f64> {
        let base = self.plateau.partial(y, component, orders)?;
        if component == 0 {
            Ok(base + self.hat.partial(y, orders)?)
        } else {
            Ok(base)
        }
    }
}

/// The adversarial pair plus everything needed to audit it.
#[derive(Debug, Clone)]
pub struct FoolingPair {
    pub spec: ProblemSpec,
    pub kind: PairKind,
    pub plateau: PlateauField,
    pub adversary: Adversary,
    pub alpha: Vec<f64>,
    /// Parallelepiped rank (grid variants) or interval group (d = 1) whose
    /// coefficient is exactly one.
    pub k_star: usize,
    /// Cell indices inside the chosen parallelepiped with beta = 1.
    pub ones: Vec<usize>,
    pub amplitude_star: f64,
}

impl FoolingPair {
    pub fn f1(&self) -> &PlateauField {
        &self.plateau
    }

    pub fn f2(&self) -> FoolingField<'_> {
        FoolingField {
            plateau: &self.plateau,
            hat: &self.adversary,
        }
    }

    /// Closed-form solution for the plateau side.
    pub fn z1(&self, t: f64) -> Vec<f64> {
        self.spec
            .eta
            .iter()
            .zip(&self.alpha)
            .map(|(e, a)| e + a * (t - self.spec.a))
            .collect()
    }

    /// Times at which the plateau line crosses the mid-height face and the
    /// base face of the chosen parallelepiped.
    pub fn crossing_times(&self) -> (f64, f64) {
        let t1 = self.spec.a + self.spec.t_edge / (2.0 * self.spec.delta);
        let t2 = self.spec.a + self.spec.t_edge / self.spec.delta;
        (t1, t2)
    }

    /// Cell-crossing breakpoints of the plateau line inside the chosen
    /// parallelepiped.
    pub fn xi(&self, j: usize) -> f64 {
        let (t1, t2) = self.crossing_times();
        let cpp = self.cells_per_parallelepiped();
        t1 + (t2 - t1) * j as f64 / cpp as f64
    }

    fn cells_per_parallelepiped(&self) -> usize {
        match &self.adversary {
            Adversary::Grid(h) => h.grid.cells_per_parallelepiped(),
            Adversary::Train(t) => t.per_group,
        }
    }

    /// Half the time the plateau line spends inside one cell (or one train
    /// slot): the step cap that keeps an integrator from aliasing over the
    /// perturbation's fine structure.
    pub fn reference_step_cap(&self) -> f64 {
        match &self.adversary {
            Adversary::Grid(_) => {
                let (t1, t2) = self.crossing_times();
                (t2 - t1) / (2.0 * self.cells_per_parallelepiped() as f64)
            }
            Adversary::Train(t) => t.width / (2.0 * self.spec.delta),
        }
    }

    /// The exact value of the information-free line integral
    /// `int hat(z1) dxi` for grid constructions: amplitude * scale *
    /// h(1/2)^{d-1} * (int h) * sum of crossing times of unit cells.
    pub fn closed_form_line_integral(&self) -> Result<f64> {
        let hat = match &self.adversary {
            Adversary::Grid(h) => h,
            Adversary::Train(_) => {
                return Err(Error::Construction(
                    "closed-form line integral applies to grid constructions".into(),
                ))
            }
        };
        let (t1, t2) = self.crossing_times();
        let cpp = hat.grid.cells_per_parallelepiped();
        let dxi = (t2 - t1) / cpp as f64;
        let scale = hat.bumps[hat.grid.flat_index(self.k_star, 0)].scale_factor();
        let d = self.spec.dim;
        Ok(self.amplitude_star
            * scale
            * h_max().powi(d as i32 - 1)
            * h_integral()
            * self.ones.len() as f64
            * dxi)
    }

    /// The guaranteed separation of the two solutions, from the line-integral
    /// bound with the sharpened constant for intervals starting at `a`.
    pub fn predicted_separation(&self) -> Result<f64> {
        if self.kind != PairKind::Standard {
            return Err(Error::Construction(
                "predicted separation is defined for the standard-information pair".into(),
            ));
        }
        let gronwall = 1.0 + self.spec.lipschitz * (self.spec.b - self.spec.a);
        Ok(self.closed_form_line_integral()? / gronwall)
    }

    /// Adaptive quadrature of `hat` along the plateau line, split at the cell
    /// crossing breakpoints.
    pub fn line_integral_quadrature(&self, rel_tol: f64) -> f64 {
        match &self.adversary {
            Adversary::Grid(hat) => {
                let cpp = hat.grid.cells_per_parallelepiped();
                let mut acc = 0.0;
                for j in 0..cpp {
                    let (lo, hi) = (self.xi(j), self.xi(j + 1));
                    let coarse = crate::quad::adaptive_simpson(
                        |t| hat.value(&self.z1(t)),
                        lo,
                        hi,
                        1e-300_f64.max(1e-6 * (hi - lo) * h_max()),
                    );
                    let tol = (coarse.abs() * rel_tol).max(1e-300);
                    acc += crate::quad::adaptive_simpson(|t| hat.value(&self.z1(t)), lo, hi, tol);
                }
                acc
            }
            Adversary::Train(train) => {
                let total = train.groups * train.per_group;
                let dt = train.width / self.spec.delta;
                let start = self.spec.a;
                let mut acc = 0.0;
                for i in 0..total {
                    if train.removed[i] {
                        continue;
                    }
                    let lo = start + i as f64 * dt;
                    let hi = lo + dt;
                    let coarse = crate::quad::adaptive_simpson(
                        |t| train.value(&self.z1(t)),
                        lo,
                        hi,
                        1e-300_f64.max(1e-6 * dt * h_max()),
                    );
                    let tol = (coarse.abs() * rel_tol).max(1e-300);
                    acc +=
                        crate::quad::adaptive_simpson(|t| train.value(&self.z1(t)), lo, hi, tol);
                }
                acc
            }
        }
    }

    /// `N(f2) - N(f1)` componentwise; exactly zero for standard atoms by
    /// construction, small for finite-rank functionals.
    pub fn verify_zero_information(&self, op: &InfoOperator) -> Result<Vec<f64>> {
        let v2 = op.evaluate(&self.f2())?;
        let v1 = op.evaluate(self.f1())?;
        Ok(v2.iter().zip(&v1).map(|(a, b)| a - b).collect())
    }

    /// Max over deterministic sampled points and derivative orders `<= r` of
    /// `|D^kappa f2^c| / D` (and the order-0 ratio against D as well).
    pub fn max_fd_class_ratio(&self, samples: usize, seed: u64) -> Result<f64> {
        let f2 = self.f2();
        self.max_fd_class_ratio_of(&f2, samples, seed)
    }

    /// The same sampled check against an arbitrary field (used to audit `f1`
    /// on its own).
    pub fn max_fd_class_ratio_of(
        &self,
        field: &dyn Field,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let spec = &self.spec;
        let d = spec.dim;
        let r = spec.smoothness;
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let mut rand01 = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let fine_scale = match &self.adversary {
            Adversary::Grid(h) => {
                h.grid.cells[0]
                    .base()
                    .iter()
                    .map(|iv| iv[1] - iv[0])
                    .fold(h.grid.cells[0].height(), f64::min)
            }
            Adversary::Train(t) => t.width,
        };
        let band = spec
            .outer
            .iter()
            .zip(&spec.inner)
            .flat_map(|(o, i)| [i[0] - o[0], o[1] - i[1]])
            .fold(f64::INFINITY, f64::min);

        let mut worst: f64 = 0.0;
        for s in 0..samples {
            let in_grid_region = s % 2 == 0;
            let (y, step): (Vec<f64>, f64) = if in_grid_region {
                let y = (0..d)
                    .map(|j| spec.eta[j] - spec.t_edge * rand01())
                    .collect();
                (y, fine_scale * 5e-3)
            } else {
                let y = (0..d)
                    .map(|j| {
                        let [lo, hi] = spec.outer[j];
                        lo + (hi - lo) * rand01()
                    })
                    .collect();
                (y, band * 1e-3)
            };
            let steps = vec![step; d];
            for c in 0..d {
                let eval = |p: &[f64]| field.value(p, c);
                worst = worst.max(eval(&y).abs() / spec.bound);
                for k in 1..=r {
                    for orders in crate::fd::multi_indices(d, k) {
                        let v = crate::fd::fd_partial(&eval, &y, &orders, &steps);
                        worst = worst.max(v.abs() / spec.bound);
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Zero out every coefficient: the H = 0 control pair.
    pub fn zero_out(&mut self) {
        match &mut self.adversary {
            Adversary::Grid(h) => h.betas.iter_mut().for_each(|b| *b = 0.0),
            Adversary::Train(t) => t.betas.iter_mut().for_each(|b| *b = 0.0),
        }
        self.ones.clear();
    }

    pub fn to_json(&self) -> String {
        let geometry = match &self.adversary {
            Adversary::Grid(h) => {
                let amplitudes = (0..h.grid.parallelepipeds.len())
                    .map(|rank| h.bumps[h.grid.flat_index(rank, 0)].amplitude())
                    .collect();
                let betas = h.betas.clone();
                GeometryDoc::Grid {
                    p: h.grid.sub.p(),
                    m: h.grid.sub.m(),
                    cells_per: h.grid.cells_per_parallelepiped(),
                    amplitudes,
                    betas,
                }
            }
            Adversary::Train(t) => GeometryDoc::Train {
                groups: t.groups,
                per_group: t.per_group,
                removed: t.removed.clone(),
                betas: t.betas.clone(),
                amplitude: t.bumps[0].amplitude(),
            },
        };
        let doc = PairDoc {
            kind: self.kind,
            spec: self.spec.clone(),
            alpha: self.alpha.clone(),
            k_star: self.k_star,
            ones: self.ones.clone(),
            amplitude_star: self.amplitude_star,
            geometry,
        };
        serde_json::to_string_pretty(&doc).expect("pair serialization cannot fail")
    }

    /// Rebuild a pair bit-identically from its serialized form: geometry is
    /// regenerated from the spec, amplitudes and coefficients are restored.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PairDoc = serde_json::from_str(text)
            .map_err(|e| Error::Construction(format!("pair parse error: {e}")))?;
        let spec = doc.spec;
        let profile = BoxProfile::new(&spec.outer, &spec.inner, spec.smoothness + 2)?;
        let plateau = build_plateau_field(&spec, &profile, doc.alpha.clone())?;
        let adversary = match doc.geometry {
            GeometryDoc::Grid {
                p,
                m,
                cells_per,
                amplitudes,
                betas,
            } => {
                let sub = BaseSubdivision::new(base_cube(&spec)?, spec.eta.clone(), p, m)?;
                let grid = CellGrid::build(sub, cells_per)?;
                let bumps = grid_bumps(&grid, spec.smoothness, spec.bound, &amplitudes);
                Adversary::Grid(HatField { grid, bumps, betas })
            }
            GeometryDoc::Train {
                groups,
                per_group,
                removed,
                betas,
                amplitude,
            } => Adversary::Train(build_train(
                &spec, groups, per_group, removed, betas, amplitude,
            )?),
        };
        Ok(FoolingPair {
            spec,
            kind: doc.kind,
            plateau,
            adversary,
            alpha: doc.alpha,
            k_star: doc.k_star,
            ones: doc.ones,
            amplitude_star: doc.amplitude_star,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PairDoc {
    kind: PairKind,
    spec: ProblemSpec,
    alpha: Vec<f64>,
    k_star: usize,
    ones: Vec<usize>,
    amplitude_star: f64,
    geometry: GeometryDoc,
}

#[derive(Serialize, Deserialize)]
enum GeometryDoc {
    Grid {
        p: usize,
        m: usize,
        cells_per: usize,
        amplitudes: Vec<f64>,
        betas: Vec<f64>,
    },
    Train {
        groups: usize,
        per_group: usize,
        removed: Vec<bool>,
        betas: Vec<f64>,
        amplitude: f64,
    },
}

/// Direction selection: `alpha = (center(k*) - eta) / T * delta`, with the
/// dominant axis forced to exactly `-delta` (it is the unique max-norm
/// component by construction).
pub fn choose_alpha(sub: &BaseSubdivision, tuple: &[usize], delta: f64) -> Vec<f64> {
    let t = sub.edge();
    let mut alpha: Vec<f64> = sub
        .alpha(tuple)
        .iter()
        .map(|c| c / t * delta)
        .collect();
    let d = alpha.len();
    alpha[d - 1] = -delta;
    alpha
}

/// Elimination-and-pigeonhole coefficient selection for standard information:
/// zero on cells whose interior contains an atom point, one elsewhere; pick
/// the first parallelepiped keeping ones on at least half its cells.
pub fn select_betas_standard(
    grid: &CellGrid,
    atoms: &[StandardAtom],
) -> Result<(Vec<f64>, usize, Vec<usize>)> {
    let mut betas = vec![1.0; grid.cell_count()];
    for atom in atoms {
        if let Some(i) = grid.locate(&atom.point) {
            betas[i] = 0.0;
        }
    }
    let cpp = grid.cells_per_parallelepiped();
    for rank in 0..grid.parallelepipeds.len() {
        let ones: Vec<usize> = (0..cpp)
            .filter(|&j| betas[grid.flat_index(rank, j)] == 1.0)
            .collect();
        if 2 * ones.len() >= cpp {
            return Ok((betas, rank, ones));
        }
    }
    Err(Error::Construction(
        "pigeonhole failed: every parallelepiped lost more than half its cells".into(),
    ))
}

fn grid_bumps(
    grid: &CellGrid,
    smoothness: usize,
    bound: f64,
    amplitudes: &[f64],
) -> Vec<ParallelepipedBump> {
    let cpp = grid.cells_per_parallelepiped();
    grid.cells
        .iter()
        .enumerate()
        .map(|(flat, cell)| {
            ParallelepipedBump::with_amplitude(
                cell.clone(),
                smoothness,
                amplitudes[flat / cpp],
                bound,
            )
        })
        .collect()
}

/// Certify one cell per parallelepiped; its siblings are translates, so the
/// sampled sups (and therefore the ladder amplitude) carry over exactly.
fn certify_grid_amplitudes(
    grid: &CellGrid,
    smoothness: usize,
    bound: f64,
    opts: &CertifyOptions,
) -> Result<Vec<f64>> {
    (0..grid.parallelepipeds.len())
        .map(|rank| {
            let cell = grid.cells[grid.flat_index(rank, 0)].clone();
            Ok(ParallelepipedBump::certify(cell, smoothness, bound, opts)?.amplitude())
        })
        .collect()
}

/// Standard-information adversary (point atoms only).
pub fn build_standard_pair(
    spec: &ProblemSpec,
    profile: &BoxProfile,
    op: &InfoOperator,
    nominal_n: usize,
    certify: &CertifyOptions,
) -> Result<FoolingPair> {
    if spec.dim < 2 {
        return Err(Error::Construction(
            "the standard grid construction needs dimension >= 2; use the interval construction"
                .into(),
        ));
    }
    if op.split().1 != 0 {
        return Err(Error::Construction(
            "standard construction takes point information only".into(),
        ));
    }
    op.validate(spec.dim, spec.smoothness)?;
    let m = integer_root_ceil(nominal_n as u64, spec.dim as u32) as usize;
    let sub = BaseSubdivision::new(base_cube(spec)?, spec.eta.clone(), spec.p, m)?;
    let cpp = spec.p * m;
    let grid = CellGrid::build(sub, cpp)?;
    let amplitudes = certify_grid_amplitudes(&grid, spec.smoothness, spec.bound, certify)?;
    let bumps = grid_bumps(&grid, spec.smoothness, spec.bound, &amplitudes);
    let (betas, k_star, ones) = select_betas_standard(&grid, op.standard_atoms())?;
    let alpha = choose_alpha(&grid.sub, &grid.sub.tuple(k_star), spec.delta);
    let plateau = build_plateau_field(spec, profile, alpha.clone())?;
    let amplitude_star = amplitudes[k_star];
    Ok(FoolingPair {
        spec: spec.clone(),
        kind: PairKind::Standard,
        plateau,
        adversary: Adversary::Grid(HatField { grid, bumps, betas }),
        alpha,
        k_star,
        ones,
        amplitude_star,
    })
}

/// Null-space coefficient selection for linear information: one coefficient
/// per bump, annihilating every functional, scaled so the max-modulus entry
/// is exactly one. Returns the coefficients and that entry's index.
pub fn select_betas_linear(
    bumps: &[ParallelepipedBump],
    functionals: &[LinearFunctional],
) -> Result<(Vec<f64>, usize)> {
    let matrix = crate::info::constraint_matrix(functionals, bumps)?;
    let (betas, k_star) = null_vector_max_normalized(&matrix, bumps.len())?;
    let residual = residual_inf(&matrix, &betas);
    let scale = frobenius(&matrix);
    if residual > 1e-10 * scale.max(1e-300) {
        return Err(Error::Construction(format!(
            "null-space residual {residual} exceeds 1e-10 * {scale}"
        )));
    }
    Ok((betas, k_star))
}

/// Linear-information adversary: one bump per parallelepiped, coefficients
/// from the null space of the constraint matrix.
pub fn build_linear_pair(
    spec: &ProblemSpec,
    profile: &BoxProfile,
    functionals: &[LinearFunctional],
    certify: &CertifyOptions,
) -> Result<FoolingPair> {
    if spec.dim < 2 {
        return Err(Error::Construction(
            "the linear construction needs dimension >= 2".into(),
        ));
    }
    let n = functionals.len();
    let m = integer_root_ceil(n as u64 + 1, spec.dim as u32 - 1) as usize;
    let sub = BaseSubdivision::new(base_cube(spec)?, spec.eta.clone(), 1, m)?;
    let grid = CellGrid::build(sub, 1)?;
    debug_assert!(grid.parallelepipeds.len() > n);
    let amplitudes = certify_grid_amplitudes(&grid, spec.smoothness, spec.bound, certify)?;
    let bumps = grid_bumps(&grid, spec.smoothness, spec.bound, &amplitudes);
    let (betas, k_star) = select_betas_linear(&bumps, functionals)?;
    let alpha = choose_alpha(&grid.sub, &grid.sub.tuple(k_star), spec.delta);
    let plateau = build_plateau_field(spec, profile, alpha.clone())?;
    let amplitude_star = amplitudes[k_star];
    Ok(FoolingPair {
        spec: spec.clone(),
        kind: PairKind::Linear,
        plateau,
        adversary: Adversary::Grid(HatField { grid, bumps, betas }),
        alpha,
        k_star,
        ones: vec![0],
        amplitude_star,
    })
}

/// Smallest p >= 2 with `alpha_info <= p^{d-1} - 2/p`.
pub fn mixed_refinement_factor(alpha_info: f64, dim: usize) -> Result<usize> {
    for p in 2..=4096usize {
        if alpha_info <= (p as f64).powi(dim as i32 - 1) - 2.0 / p as f64 {
            return Ok(p);
        }
    }
    Err(Error::Construction(format!(
        "no refinement factor accommodates alpha_info = {alpha_info}"
    )))
}

/// Counting report of the mixed construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixedCounts {
    pub eliminated_cells: usize,
    pub excluded_parallelepipeds: usize,
    pub survivors: usize,
    pub linear_constraints: usize,
    pub cells_per_parallelepiped: usize,
    pub parallelepipeds: usize,
}

/// Mixed-information adversary: standard atoms eliminate cells, heavily hit
/// parallelepipeds are dropped, one unknown per survivor solves the linear
/// constraints.
pub fn build_mixed_pair(
    spec: &ProblemSpec,
    profile: &BoxProfile,
    op: &InfoOperator,
    nominal_n: usize,
    certify: &CertifyOptions,
) -> Result<(FoolingPair, MixedCounts)> {
    if spec.dim < 2 {
        return Err(Error::Construction(
            "the mixed construction needs dimension >= 2; use the interval construction".into(),
        ));
    }
    op.validate(spec.dim, spec.smoothness)?;
    let alpha_info = op.alpha_info().ok_or_else(|| {
        Error::Construction("mixed construction needs an operator with an alpha_info budget".into())
    })?;
    let (n_std, k) = op.split();
    let p_eff = mixed_refinement_factor(alpha_info, spec.dim)?;
    let m = integer_root_ceil(nominal_n as u64, spec.dim as u32) as usize;
    let cpp = p_eff * m;
    let sub = BaseSubdivision::new(base_cube(spec)?, spec.eta.clone(), p_eff, m)?;
    let grid = CellGrid::build(sub, cpp)?;
    let amplitudes = certify_grid_amplitudes(&grid, spec.smoothness, spec.bound, certify)?;
    let bumps = grid_bumps(&grid, spec.smoothness, spec.bound, &amplitudes);

    let mut eliminated = vec![false; grid.cell_count()];
    for atom in op.standard_atoms() {
        if let Some(i) = grid.locate(&atom.point) {
            eliminated[i] = true;
        }
    }
    let eliminated_cells = eliminated.iter().filter(|&&e| e).count();

    let ranks = grid.parallelepipeds.len();
    let mut excluded = vec![false; ranks];
    let mut x = 0usize;
    for (rank, flag) in excluded.iter_mut().enumerate() {
        let hit = (0..cpp)
            .filter(|&j| eliminated[grid.flat_index(rank, j)])
            .count();
        if 2 * hit > cpp {
            *flag = true;
            x += 1;
        }
    }
    // x * pm <= 2 (n - k), else more than n - k cells were eliminated
    if x * cpp > 2 * n_std {
        return Err(Error::Construction(format!(
            "excluded-parallelepiped count {x} violates the bound 2(n-k)/(pm)"
        )));
    }
    // strict constraint count: k < (pm)^{d-1} - 2(n-k)/(pm)
    let rhs = ranks as f64 - 2.0 * n_std as f64 / cpp as f64;
    if !((k as f64) < rhs) {
        return Err(Error::Construction(format!(
            "linear budget k = {k} is not below {rhs}; raise n"
        )));
    }

    let survivors: Vec<usize> = (0..ranks).filter(|&r| !excluded[r]).collect();
    let (surv_betas, surv_idx) = if k == 0 {
        (vec![1.0; survivors.len()], 0)
    } else {
        let matrix: Vec<Vec<f64>> = op
            .linear_functionals()
            .iter()
            .map(|f| {
                survivors
                    .iter()
                    .map(|&rank| {
                        let mut acc = 0.0;
                        for j in 0..cpp {
                            let flat = grid.flat_index(rank, j);
                            if !eliminated[flat] {
                                acc += f.apply_to_bump(&bumps[flat])?;
                            }
                        }
                        Ok(acc)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let (betas, idx) = null_vector_max_normalized(&matrix, survivors.len())?;
        let residual = residual_inf(&matrix, &betas);
        let scale = frobenius(&matrix);
        if residual > 1e-10 * scale.max(1e-300) {
            return Err(Error::Construction(format!(
                "null-space residual {residual} exceeds 1e-10 * {scale}"
            )));
        }
        (betas, idx)
    };

    let mut betas = vec![0.0; grid.cell_count()];
    for (s, &rank) in survivors.iter().enumerate() {
        for j in 0..cpp {
            let flat = grid.flat_index(rank, j);
            if !eliminated[flat] {
                betas[flat] = surv_betas[s];
            }
        }
    }
    let k_star = survivors[surv_idx];
    let ones: Vec<usize> = (0..cpp)
        .filter(|&j| betas[grid.flat_index(k_star, j)] == 1.0)
        .collect();
    if 2 * ones.len() < cpp {
        return Err(Error::Construction(
            "chosen parallelepiped lost more than half its cells".into(),
        ));
    }

    let counts = MixedCounts {
        eliminated_cells,
        excluded_parallelepipeds: x,
        survivors: survivors.len(),
        linear_constraints: k,
        cells_per_parallelepiped: cpp,
        parallelepipeds: ranks,
    };
    let alpha = choose_alpha(&grid.sub, &grid.sub.tuple(k_star), spec.delta);
    let plateau = build_plateau_field(spec, profile, alpha.clone())?;
    let amplitude_star = amplitudes[k_star];
    Ok((
        FoolingPair {
            spec: spec.clone(),
            kind: PairKind::Mixed,
            plateau,
            adversary: Adversary::Grid(HatField { grid, bumps, betas }),
            alpha,
            k_star,
            ones,
            amplitude_star,
        },
        counts,
    ))
}

fn build_train(
    spec: &ProblemSpec,
    groups: usize,
    per_group: usize,
    removed: Vec<bool>,
    betas: Vec<f64>,
    amplitude: f64,
) -> Result<BumpTrain> {
    let origin = spec.eta[0];
    let width = spec.t_edge / (groups * per_group) as f64;
    let bumps = (0..groups * per_group)
        .map(|i| {
            let pll = Parallelepiped::new(
                vec![],
                origin + i as f64 * width,
                &[1.0],
                width,
            )?;
            Ok(ParallelepipedBump::with_amplitude(
                pll,
                spec.smoothness,
                amplitude,
                spec.bound,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BumpTrain {
        origin,
        width,
        groups,
        per_group,
        removed,
        betas,
        bumps,
    })
}

/// Scalar adversary: `k + 1` interval groups of `2n` bump slots each; slots
/// holding a point atom are removed, group coefficients solve the linear
/// constraints.
pub fn build_interval_pair(
    spec: &ProblemSpec,
    profile: &BoxProfile,
    op: &InfoOperator,
    nominal_n: usize,
    certify: &CertifyOptions,
) -> Result<FoolingPair> {
    if spec.dim != 1 {
        return Err(Error::Construction(
            "the interval construction is the d = 1 route".into(),
        ));
    }
    op.validate(1, spec.smoothness)?;
    let (n_std, k) = op.split();
    let n = nominal_n.max(op.len());
    if n_std > n - k {
        return Err(Error::Construction(format!(
            "too many point atoms: {n_std} > n - k = {}",
            n - k
        )));
    }
    let groups = k + 1;
    let per_group = 2 * n;
    let total = groups * per_group;
    let origin = spec.eta[0];
    let width = spec.t_edge / total as f64;

    let mut removed = vec![false; total];
    for atom in op.standard_atoms() {
        let rel = (atom.point[0] - origin) / width;
        if rel > 0.0 && (rel as usize) < total && rel.fract() != 0.0 {
            removed[rel as usize] = true;
        }
    }
    let removed_count = removed.iter().filter(|&&r| r).count();
    if removed_count > n - k {
        return Err(Error::Construction(
            "more removed slots than point atoms allow".into(),
        ));
    }
    for g in 0..groups {
        let remaining = (0..per_group)
            .filter(|&l| !removed[g * per_group + l])
            .count();
        if remaining < n + k {
            return Err(Error::Construction(format!(
                "group {g} keeps only {remaining} slots, below n + k = {}",
                n + k
            )));
        }
    }

    let template = Parallelepiped::new(vec![], origin, &[1.0], width)?;
    let amplitude =
        ParallelepipedBump::certify(template, spec.smoothness, spec.bound, certify)?.amplitude();
    let mut train = build_train(spec, groups, per_group, removed, vec![0.0; groups], amplitude)?;

    let (betas, j_star) = if k == 0 {
        (vec![1.0], 0)
    } else {
        let matrix: Vec<Vec<f64>> = op
            .linear_functionals()
            .iter()
            .map(|f| {
                (0..groups)
                    .map(|g| {
                        let mut acc = 0.0;
                        for l in 0..per_group {
                            let i = g * per_group + l;
                            if !train.removed[i] {
                                acc += f.apply_to_bump(&train.bumps[i])?;
                            }
                        }
                        Ok(acc)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let (betas, idx) = null_vector_max_normalized(&matrix, groups)?;
        let residual = residual_inf(&matrix, &betas);
        if residual > 1e-10 * frobenius(&matrix).max(1e-300) {
            return Err(Error::Construction("interval null-space residual too large".into()));
        }
        (betas, idx)
    };
    train.betas = betas;
    let ones: Vec<usize> = (0..per_group)
        .filter(|&l| !train.removed[j_star * per_group + l])
        .collect();

    let alpha = vec![spec.delta];
    let plateau = build_plateau_field(spec, profile, alpha.clone())?;
    Ok(FoolingPair {
        spec: spec.clone(),
        kind: PairKind::Interval,
        plateau,
        adversary: Adversary::Train(train),
        alpha,
        k_star: j_star,
        ones,
        amplitude_star: amplitude,
    })
}
