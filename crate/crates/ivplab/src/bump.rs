//! The 1D mollifier `h`, its exact derivative calculus, the smooth step built
//! from its integral, and C-infinity bumps supported on oblique parallelepipeds
//! with numerically certified amplitude.
//!
//! `h(x) = exp(1/(x(x-1)))` on (0,1) and 0 elsewhere. Every derivative of `h`
//! is `R_k(x) h(x)` for a rational prefactor `R_k`; the table below carries the
//! prefactors exactly, so derivative bounds are reliable arbitrarily close to
//! the flat support boundary where finite differences degrade.

use crate::error::{Error, Result};
use crate::fd::{fd_partial, multi_indices};
use crate::poly::{Poly, RationalFn};
use crate::quad::{adaptive_simpson, composite_simpson};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// The mollifier: positive on (0,1), identically 0 outside, maximum e^{-4} at 1/2.
pub fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    // x(x-1) < 0 on (0,1); exp of the large negative reciprocal underflows
    // to an exact 0 near the boundary, which is the intended clamp.
    (1.0 / (x * (x - 1.0))).exp()
}

/// `max h = h(1/2) = e^{-4}`.
pub fn h_max() -> f64 {
    (-4.0f64).exp()
}

/// Cached integral of `h` over the real line, to absolute error <= 1e-12.
pub fn h_integral() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| adaptive_simpson(h, 0.0, 1.0, 1e-13))
}

/// Prefactor table: `h^{(k)}(x) = P_k(x) / (x(x-1))^{2k} * h(x)` on (0,1).
///
/// The recurrence `P_{k+1} = (P_k' u - 2k(2x-1) P_k) u + (1-2x) P_k` with
/// `u = x^2 - x` is the rational-function identity
/// `R_{k+1} = R_k' + R_k (1-2x)/(x^2 (x-1)^2)` cleared of denominators.
#[derive(Debug, Clone)]
pub struct PrefactorTable {
    numerators: Vec<Poly>,
    max_order: usize,
}

impl PrefactorTable {
    pub fn new(max_order: usize) -> Self {
        let u = Poly(vec![0.0, -1.0, 1.0]); // x^2 - x
        let one_minus_2x = Poly(vec![1.0, -2.0]);
        let two_x_minus_1 = Poly(vec![-1.0, 2.0]);
        let mut numerators = vec![Poly::constant(1.0)];
        for k in 0..max_order {
            let p = &numerators[k];
            let next = p
                .derivative()
                .mul(&u)
                .add(&two_x_minus_1.mul(p).scale(-2.0 * k as f64))
                .mul(&u)
                .add(&one_minus_2x.mul(p));
            numerators.push(next);
        }
        PrefactorTable {
            numerators,
            max_order,
        }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `h^{(k)}(x)`; exactly 0 outside (0,1) for every order.
    pub fn derivative(&self, x: f64, k: usize) -> Result<f64> {
        if k > self.max_order {
            return Err(Error::OrderTooLarge {
                order: k,
                max_order: self.max_order,
            });
        }
        if k == 0 {
            return Ok(h(x));
        }
        let hv = h(x);
        if hv == 0.0 {
            // Covers the exterior, the endpoints, and the underflow band where
            // the prefactor would otherwise blow up against a vanishing h.
            return Ok(0.0);
        }
        let u = x * (x - 1.0);
        Ok(self.numerators[k].eval(x) / u.powi(2 * k as i32) * hv)
    }

    /// The prefactor `R_k` as an explicit rational function.
    pub fn rational(&self, k: usize) -> RationalFn {
        let mut den = Poly::constant(1.0);
        let u = Poly(vec![0.0, -1.0, 1.0]);
        for _ in 0..2 * k {
            den = den.mul(&u);
        }
        RationalFn {
            num: self.numerators[k].clone(),
            den,
        }
    }

    /// Sampled sup of |h^{(k)}| over (0,1); the constants c_k.
    pub fn sup_abs_derivative(&self, k: usize) -> Result<f64> {
        let grid = 20_001;
        let mut sup = 0.0f64;
        for i in 1..grid {
            let x = i as f64 / grid as f64;
            sup = sup.max(self.derivative(x, k)?.abs());
        }
        Ok(sup)
    }
}

/// Smooth step `s(x) = (integral of h over [0, x]) / (integral of h)`:
/// exactly 0 for x <= 0, exactly 1 for x >= 1, C-infinity in between.
#[derive(Debug, Clone)]
pub struct SmoothStep {
    prefix: Vec<f64>,
    total: f64,
    table: PrefactorTable,
}

const STEP_PANELS: usize = 8192;

impl SmoothStep {
    pub fn new(max_order: usize) -> Self {
        let mut prefix = Vec::with_capacity(STEP_PANELS + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..STEP_PANELS {
            let x0 = i as f64 / STEP_PANELS as f64;
            let x1 = (i + 1) as f64 / STEP_PANELS as f64;
            acc += composite_simpson(h, x0, x1, 1);
            prefix.push(acc);
        }
        SmoothStep {
            prefix,
            total: acc,
            table: PrefactorTable::new(max_order.max(1)),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = ((x * STEP_PANELS as f64) as usize).min(STEP_PANELS - 1);
        let x_i = i as f64 / STEP_PANELS as f64;
        ((self.prefix[i] + composite_simpson(h, x_i, x, 1)) / self.total).clamp(0.0, 1.0)
    }

    /// k-th derivative of the step; `s^{(k)} = h^{(k-1)} / c` for k >= 1.
    pub fn derivative(&self, x: f64, k: usize) -> Result<f64> {
        if k == 0 {
            return Ok(self.value(x));
        }
        Ok(self.table.derivative(x, k - 1)? / self.total)
    }

    pub fn max_order(&self) -> usize {
        self.table.max_order() + 1
    }
}

/// Oblique parallelepiped: a base box in the first d-1 coordinates sitting on
/// the hyperplane `y^d = base_level`, swept by `height` along a unit direction
/// whose last component is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parallelepiped {
    base: Vec<[f64; 2]>,
    base_level: f64,
    unit_dir: Vec<f64>,
    height: f64,
}

/// Relative slack below which a coordinate counts as lying on a face.
const INTERIOR_BAND: f64 = 1e-12;

impl Parallelepiped {
    pub fn new(
        base: Vec<[f64; 2]>,
        base_level: f64,
        direction: &[f64],
        height: f64,
    ) -> Result<Self> {
        let d = base.len() + 1;
        if direction.len() != d {
            return Err(Error::Geometry(format!(
                "direction has {} components, expected {}",
                direction.len(),
                d
            )));
        }
        for (s, iv) in base.iter().enumerate() {
            if !(iv[1] - iv[0] > 0.0) {
                return Err(Error::Geometry(format!(
                    "base interval {s} has nonpositive width"
                )));
            }
        }
        if !(height > 0.0) {
            return Err(Error::Geometry(format!("nonpositive height {height}")));
        }
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        let cosine = direction[d - 1] / norm;
        if !(cosine > 0.0) {
            return Err(Error::DegenerateDirection { cosine });
        }
        Ok(Parallelepiped {
            base,
            base_level,
            unit_dir: direction.iter().map(|c| c / norm).collect(),
            height,
        })
    }

    pub fn dim(&self) -> usize {
        self.unit_dir.len()
    }

    pub fn base(&self) -> &[[f64; 2]] {
        &self.base
    }

    pub fn base_level(&self) -> f64 {
        self.base_level
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn unit_direction(&self) -> &[f64] {
        &self.unit_dir
    }

    /// cos(direction, e_d).
    pub fn cos_axis(&self) -> f64 {
        self.unit_dir[self.dim() - 1]
    }

    /// Oblique coordinates `(ybar, lbar)`: `lbar` is the Euclidean distance
    /// travelled along the sweep direction from the base hyperplane, `ybar`
    /// the base-plane footprint of `y` slid back along the direction.
    pub fn project(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let d = self.dim();
        let lbar = (y[d - 1] - self.base_level) / self.cos_axis();
        let ybar = (0..d - 1)
            .map(|s| y[s] - self.unit_dir[s] * lbar)
            .collect();
        (ybar, lbar)
    }

    pub fn unproject(&self, ybar: &[f64], lbar: f64) -> Vec<f64> {
        let d = self.dim();
        let mut y = Vec::with_capacity(d);
        for s in 0..d - 1 {
            y.push(ybar[s] + self.unit_dir[s] * lbar);
        }
        y.push(self.base_level + self.cos_axis() * lbar);
        y
    }

    /// Strict interior membership; points within a 1e-12 relative band of a
    /// face count as boundary (h and all its derivatives vanish there anyway).
    pub fn contains_interior(&self, y: &[f64]) -> bool {
        let (ybar, lbar) = self.project(y);
        let v = lbar / self.height;
        if !(v > INTERIOR_BAND && v < 1.0 - INTERIOR_BAND) {
            return false;
        }
        self.base.iter().enumerate().all(|(s, iv)| {
            let u = (ybar[s] - iv[0]) / (iv[1] - iv[0]);
            u > INTERIOR_BAND && u < 1.0 - INTERIOR_BAND
        })
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = Vec::with_capacity(1 << d);
        for mask in 0..(1u32 << (d - 1)) {
            let ybar: Vec<f64> = self
                .base
                .iter()
                .enumerate()
                .map(|(s, iv)| iv[(mask >> s & 1) as usize])
                .collect();
            out.push(self.unproject(&ybar, 0.0));
            out.push(self.unproject(&ybar, self.height));
        }
        out
    }

    pub fn bounding_box(&self) -> Vec<[f64; 2]> {
        let verts = self.vertices();
        (0..self.dim())
            .map(|a| {
                let lo = verts.iter().map(|v| v[a]).fold(f64::INFINITY, f64::min);
                let hi = verts.iter().map(|v| v[a]).fold(f64::NEG_INFINITY, f64::max);
                [lo, hi]
            })
            .collect()
    }

    /// The sweep map has Jacobian cos(direction, e_d).
    pub fn volume(&self) -> f64 {
        self.base.iter().map(|iv| iv[1] - iv[0]).product::<f64>() * self.height * self.cos_axis()
    }

    /// Partition into `parts` congruent slabs along the sweep, base first.
    pub fn split_along_sweep(&self, parts: usize) -> Vec<Parallelepiped> {
        assert!(parts >= 1);
        let slab = self.height / parts as f64;
        (0..parts)
            .map(|j| {
                let shift = j as f64 * slab;
                let base = self
                    .base
                    .iter()
                    .enumerate()
                    .map(|(s, iv)| {
                        let off = self.unit_dir[s] * shift;
                        [iv[0] + off, iv[1] + off]
                    })
                    .collect();
                Parallelepiped {
                    base,
                    base_level: self.base_level + self.cos_axis() * shift,
                    unit_dir: self.unit_dir.clone(),
                    height: slab,
                }
            })
            .collect()
    }
}

/// Certification knobs; grid and margin defaults follow the construction
/// contract (dense deterministic sample, 5% derivative headroom).
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub grid_per_axis: usize,
    pub margin: f64,
    pub max_halvings: u32,
    pub fd_step_rel: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            grid_per_axis: 33,
            margin: 0.05,
            max_halvings: 60,
            fd_step_rel: 1e-3,
        }
    }
}

/// C-infinity bump with support exactly a parallelepiped:
/// `amplitude * (min{min base width, height, 1})^r * prod_s h(u_s) * h(v)`.
#[derive(Debug, Clone)]
pub struct ParallelepipedBump {
    support: Parallelepiped,
    smoothness: usize,
    amplitude: f64,
    bound: f64,
    scale_pow: f64,
    table: PrefactorTable,
}

impl ParallelepipedBump {
    pub fn with_amplitude(
        support: Parallelepiped,
        smoothness: usize,
        amplitude: f64,
        bound: f64,
    ) -> Self {
        let min_width = support
            .base()
            .iter()
            .map(|iv| iv[1] - iv[0])
            .fold(f64::INFINITY, f64::min);
        let scale = min_width.min(support.height()).min(1.0);
        ParallelepipedBump {
            scale_pow: scale.powi(smoothness as i32),
            table: PrefactorTable::new(smoothness + 2),
            support,
            smoothness,
            amplitude,
            bound,
        }
    }

    /// Pick the largest amplitude `2^{-i}` whose sampled sup stays below
    /// `bound/2` and whose sampled finite-difference partials of orders
    /// `1..=r` stay below `bound * (1 - margin)`.
    pub fn certify(
        support: Parallelepiped,
        smoothness: usize,
        bound: f64,
        opts: &CertifyOptions,
    ) -> Result<Self> {
        assert!(bound > 0.0);
        let probe = Self::with_amplitude(support, smoothness, 1.0, bound);
        let (sup_value, sup_deriv) = probe.sampled_sups(opts.grid_per_axis, opts.fd_step_rel)?;
        // The bump is linear in the amplitude and ladder elements are powers
        // of two, so scaling the unit-amplitude sups is bit-identical to
        // re-sampling at each ladder step.
        for i in 0..=opts.max_halvings {
            let c = 2.0f64.powi(-(i as i32));
            if c * sup_value <= bound / 2.0 && c * sup_deriv <= bound * (1.0 - opts.margin) {
                let mut bump = probe;
                bump.amplitude = c;
                return Ok(bump);
            }
        }
        Err(Error::AmplitudeNotCertifiable {
            halvings: opts.max_halvings,
        })
    }

    /// (sup |value|, sup over orders 1..=r of FD partials) on the bounding-box grid.
    pub fn sampled_sups(&self, grid_per_axis: usize, fd_step_rel: f64) -> Result<(f64, f64)> {
        let d = self.support.dim();
        let bbox = self.support.bounding_box();
        let steps: Vec<f64> = bbox
            .iter()
            .map(|iv| (iv[1] - iv[0]) * fd_step_rel)
            .collect();
        let eval = |y: &[f64]| self.value(y);

        let mut sup_value = 0.0f64;
        let mut sup_deriv = 0.0f64;
        let mut idx = vec![0usize; d];
        loop {
            let y: Vec<f64> = (0..d)
                .map(|a| {
                    let [lo, hi] = bbox[a];
                    lo + (hi - lo) * idx[a] as f64 / (grid_per_axis - 1) as f64
                })
                .collect();
            sup_value = sup_value.max(eval(&y).abs());
            for k in 1..=self.smoothness {
                for orders in multi_indices(d, k) {
                    sup_deriv = sup_deriv.max(fd_partial(&eval, &y, &orders, &steps).abs());
                }
            }
            // advance the mixed-radix counter
            let mut a = 0;
            loop {
                if a == d {
                    return Ok((sup_value, sup_deriv));
                }
                idx[a] += 1;
                if idx[a] < grid_per_axis {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let (ybar, lbar) = self.support.project(y);
        let mut prod = h(lbar / self.support.height());
        for (s, iv) in self.support.base().iter().enumerate() {
            if prod == 0.0 {
                return 0.0;
            }
            prod *= h((ybar[s] - iv[0]) / (iv[1] - iv[0]));
        }
        self.amplitude * self.scale_pow * prod
    }

    /// Analytic partial derivative via the multivariate Leibniz rule over the
    /// affine-composed h factors; exactly 0 outside the open support.
    pub fn partial(&self, y: &[f64], orders: &[usize]) -> Result<f64> {
        let total: usize = orders.iter().sum();
        if total == 0 {
            return Ok(self.value(y));
        }
        if total > self.table.max_order() {
            return Err(Error::OrderTooLarge {
                order: total,
                max_order: self.table.max_order(),
            });
        }
        let d = self.support.dim();
        let cos = self.support.cos_axis();
        let (ybar, lbar) = self.support.project(y);

        // factor i < d-1: h((ybar_s - p_s)/w_s); factor d-1: h(lbar/height)
        let mut args = Vec::with_capacity(d);
        let mut grads = Vec::with_capacity(d);
        for (s, iv) in self.support.base().iter().enumerate() {
            let w = iv[1] - iv[0];
            args.push((ybar[s] - iv[0]) / w);
            let mut g = vec![0.0; d];
            g[s] = 1.0 / w;
            g[d - 1] = -self.support.unit_direction()[s] / (cos * w);
            grads.push(g);
        }
        args.push(lbar / self.support.height());
        let mut g = vec![0.0; d];
        g[d - 1] = 1.0 / (cos * self.support.height());
        grads.push(g);

        if args.iter().any(|&a| h(a) == 0.0) {
            // Outside the open support (or in the underflow band) every term
            // carries a factor that is exactly 0.
            return Ok(0.0);
        }

        let sum = leibniz_product(&self.table, &args, &grads, orders)?;
        Ok(self.amplitude * self.scale_pow * sum)
    }

    pub fn support(&self) -> &Parallelepiped {
        &self.support
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    /// The `(min{min base width, height, 1})^r` factor.
    pub fn scale_factor(&self) -> f64 {
        self.scale_pow
    }
}

/// d^orders of a product of factors `h(args_i)` whose arguments are affine in
/// `y` with constant gradients `grads_i`.
fn leibniz_product(
    table: &PrefactorTable,
    args: &[f64],
    grads: &[Vec<f64>],
    orders: &[usize],
) -> Result<f64> {
    let nf = args.len();
    let mut factor_orders = vec![0usize; nf];
    let mut total = 0.0;
    distribute_axes(
        table,
        args,
        grads,
        orders,
        0,
        &mut factor_orders,
        1.0,
        &mut total,
    )?;
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn distribute_axes(
    table: &PrefactorTable,
    args: &[f64],
    grads: &[Vec<f64>],
    orders: &[usize],
    axis: usize,
    factor_orders: &mut Vec<usize>,
    weight: f64,
    total: &mut f64,
) -> Result<()> {
    if axis == orders.len() {
        let mut term = weight;
        for (i, &k) in factor_orders.iter().enumerate() {
            term *= table.derivative(args[i], k)?;
        }
        *total += term;
        return Ok(());
    }
    let nf = args.len();
    let mut parts = vec![0usize; nf];
    distribute_one_axis(
        table,
        args,
        grads,
        orders,
        axis,
        orders[axis],
        0,
        &mut parts,
        weight,
        factor_orders,
        total,
    )
}

#[allow(clippy::too_many_arguments)]
fn distribute_one_axis(
    table: &PrefactorTable,
    args: &[f64],
    grads: &[Vec<f64>],
    orders: &[usize],
    axis: usize,
    remaining: usize,
    factor: usize,
    parts: &mut Vec<usize>,
    weight: f64,
    factor_orders: &mut Vec<usize>,
    total: &mut f64,
) -> Result<()> {
    let nf = args.len();
    if factor == nf {
        if remaining != 0 {
            return Ok(());
        }
        for i in 0..nf {
            factor_orders[i] += parts[i];
        }
        distribute_axes(
            table,
            args,
            grads,
            orders,
            axis + 1,
            factor_orders,
            weight,
            total,
        )?;
        for i in 0..nf {
            factor_orders[i] -= parts[i];
        }
        return Ok(());
    }
    for take in 0..=remaining {
        let g = grads[factor][axis];
        if take > 0 && g == 0.0 {
            continue; // gradient power annihilates the term
        }
        // sequential binomials compose to the axis multinomial coefficient
        let coeff = binomial(remaining, take);
        parts[factor] = take;
        distribute_one_axis(
            table,
            args,
            grads,
            orders,
            axis,
            remaining - take,
            factor + 1,
            parts,
            weight * coeff * g.powi(take as i32),
            factor_orders,
            total,
        )?;
        parts[factor] = 0;
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::fd_derivative_1d;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn h_at_half_is_exp_minus_four() {
        assert!((h(0.5) - (-4.0f64).exp()).abs() < 1e-17);
        assert!(rel_close(h(0.5), 1.8315638888734179e-2, 1e-12));
    }

    #[test]
    fn h_outside_support_is_zero() {
        assert_eq!(h(0.0), 0.0);
        assert_eq!(h(1.0), 0.0);
        assert_eq!(h(-3.7), 0.0);
        assert_eq!(h(1.0001), 0.0);
    }

    #[test]
    fn h_at_quarter() {
        assert!(rel_close(h(0.25), (-16.0f64 / 3.0).exp(), 1e-15));
    }

    #[test]
    fn h_symmetry() {
        for i in 1..200 {
            let x = i as f64 / 200.0;
            assert!(rel_close(h(x), h(1.0 - x), 1e-12), "asymmetric at {x}");
        }
    }

    #[test]
    fn derivative_zero_at_interior_maximum() {
        let table = PrefactorTable::new(3);
        assert_eq!(table.derivative(0.5, 1).unwrap(), 0.0);
    }

    #[test]
    fn derivative_zero_at_boundary_all_orders() {
        let table = PrefactorTable::new(6);
        for k in 0..=6 {
            assert_eq!(table.derivative(0.0, k).unwrap(), 0.0);
            assert_eq!(table.derivative(1.0, k).unwrap(), 0.0);
            assert_eq!(table.derivative(-2.0, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn smooth_contact_near_boundary() {
        let table = PrefactorTable::new(5);
        for k in 0..=5 {
            assert!(table.derivative(1e-3, k).unwrap().abs() <= 1e-40);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let table = PrefactorTable::new(4);
        let exact = table.derivative(0.3, 2).unwrap();
        let fd = fd_derivative_1d(&h, 0.3, 2, 1e-4);
        assert!(rel_close(exact, fd, 1e-5), "exact {exact} vs fd {fd}");
    }

    #[test]
    fn derivative_rejects_order_beyond_table() {
        let table = PrefactorTable::new(2);
        assert!(table.derivative(0.3, 3).is_err());
    }

    #[test]
    fn prefactor_recurrence_holds_symbolically() {
        // Recompute R_{k+1} = R_k' + R_k (1-2x)/u^2 by generic rational
        // arithmetic and compare coefficients exactly. Integer coefficients
        // stay below 2^53 through order 6.
        let table = PrefactorTable::new(6);
        let lead = RationalFn {
            num: Poly(vec![1.0, -2.0]),
            den: Poly(vec![0.0, 0.0, 1.0, -2.0, 1.0]), // x^2 (x-1)^2
        };
        for k in 0..6 {
            let rk = table.rational(k);
            let independent = rk.derivative().add(&rk.mul(&lead));
            assert!(
                independent.equivalent(&table.rational(k + 1)),
                "recurrence mismatch at order {}",
                k + 1
            );
        }
    }

    #[test]
    fn integral_matches_composite_oracle() {
        let oracle = composite_simpson(h, 0.0, 1.0, 1_000_000);
        assert!(
            (h_integral() - oracle).abs() < 1e-10,
            "adaptive {} vs composite {}",
            h_integral(),
            oracle
        );
    }

    #[test]
    fn integral_halves_are_symmetric() {
        let left = adaptive_simpson(h, 0.0, 0.5, 1e-14);
        let right = adaptive_simpson(h, 0.5, 1.0, 1e-14);
        assert!(rel_close(left, right, 1e-10));
        assert!(rel_close(left + right, h_integral(), 1e-10));
    }

    #[test]
    fn integral_below_max() {
        assert!(h_integral() < h_max());
        assert!(h_integral() > 0.0);
    }

    #[test]
    fn smooth_step_endpoints_and_monotonicity() {
        let s = SmoothStep::new(3);
        assert_eq!(s.value(-0.5), 0.0);
        assert_eq!(s.value(0.0), 0.0);
        assert_eq!(s.value(1.0), 1.0);
        assert_eq!(s.value(2.0), 1.0);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = s.value(i as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!(rel_close(s.value(0.5), 0.5, 1e-10)); // symmetry of h
    }

    #[test]
    fn smooth_step_derivative_is_normalized_h() {
        let s = SmoothStep::new(3);
        assert!(rel_close(
            s.derivative(0.37, 1).unwrap(),
            h(0.37) / h_integral(),
            1e-10
        ));
        let fd = fd_derivative_1d(&|x| s.value(x), 0.4, 1, 1e-5);
        assert!(rel_close(s.derivative(0.4, 1).unwrap(), fd, 1e-6));
    }

    fn unit_box_pll(d: usize) -> Parallelepiped {
        let base = vec![[0.0, 1.0]; d - 1];
        let mut dir = vec![0.0; d];
        dir[d - 1] = 1.0;
        Parallelepiped::new(base, 0.0, &dir, 1.0).unwrap()
    }

    fn oblique_pll() -> Parallelepiped {
        Parallelepiped::new(vec![[0.2, 0.6], [0.1, 0.5]], 0.25, &[0.3, -0.2, 0.9], 0.7).unwrap()
    }

    #[test]
    fn project_base_face() {
        let p = oblique_pll();
        let y = p.unproject(&[0.3, 0.2], 0.0);
        let (ybar, lbar) = p.project(&y);
        assert!(lbar.abs() < 1e-15);
        assert!((ybar[0] - 0.3).abs() < 1e-15 && (ybar[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn project_top_face() {
        let p = oblique_pll();
        let y = p.unproject(&[0.25, 0.3], p.height());
        let (_, lbar) = p.project(&y);
        assert!(rel_close(lbar, p.height(), 1e-14));
    }

    #[test]
    fn project_round_trip() {
        let p = oblique_pll();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let ybar = [
                0.2 + 0.4 * rand01(),
                0.1 + 0.4 * rand01(),
            ];
            let lbar = p.height() * rand01();
            let y = p.unproject(&ybar, lbar);
            let (yb2, lb2) = p.project(&y);
            let y2 = p.unproject(&yb2, lb2);
            for a in 0..3 {
                assert!(rel_close(y[a], y2[a], 1e-12));
            }
        }
    }

    #[test]
    fn degenerate_direction_rejected() {
        let err = Parallelepiped::new(vec![[0.0, 1.0]], 0.0, &[1.0, 0.0], 1.0);
        assert!(matches!(err, Err(Error::DegenerateDirection { .. })));
        let err = Parallelepiped::new(vec![[0.0, 1.0]], 0.0, &[0.3, -0.5], 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn volume_matches_determinant() {
        // |det [w_1 e_1, w_2 e_2, N u]| for the edge matrix of the sweep
        let p = oblique_pll();
        let w1 = 0.4;
        let w2 = 0.4;
        let u = p.unit_direction();
        let n = p.height();
        let det = w1 * w2 * n * u[2];
        assert!(rel_close(p.volume(), det.abs(), 1e-14));
    }

    #[test]
    fn split_partitions_height_and_volume() {
        let p = oblique_pll();
        let cells = p.split_along_sweep(5);
        assert_eq!(cells.len(), 5);
        let vol: f64 = cells.iter().map(|c| c.volume()).sum();
        assert!(rel_close(vol, p.volume(), 1e-12));
        // adjacent cells share the face: top of cell j == base of cell j+1
        for j in 0..4 {
            let top = cells[j].unproject(&[0.3, 0.3], cells[j].height());
            let (_, lbar) = cells[j + 1].project(&top);
            assert!(lbar.abs() < 1e-12);
        }
    }

    #[test]
    fn bump_center_value() {
        let p = unit_box_pll(3);
        let b = ParallelepipedBump::with_amplitude(p.clone(), 2, 0.8, 1.0);
        let center = p.unproject(&[0.5, 0.5], 0.5);
        let expected = 0.8 * 1.0f64 * h(0.5).powi(3); // min{1,1,1}^2 = 1
        assert!(rel_close(b.value(&center), expected, 1e-14));
    }

    #[test]
    fn bump_vanishes_outside() {
        let b = ParallelepipedBump::with_amplitude(oblique_pll(), 1, 1.0, 1.0);
        assert_eq!(b.value(&[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(b.value(&[0.0, 0.0, 0.0]), 0.0);
        // boundary points are exact zeros
        let base_pt = oblique_pll().unproject(&[0.3, 0.3], 0.0);
        assert_eq!(b.value(&base_pt), 0.0);
    }

    #[test]
    fn bump_positive_iff_interior() {
        let p = oblique_pll();
        let b = ParallelepipedBump::with_amplitude(p.clone(), 1, 1.0, 1.0);
        let mut state = 42u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let ybar = [0.2 + 0.4 * rand01(), 0.1 + 0.4 * rand01()];
            let lbar = p.height() * rand01();
            let y = p.unproject(&ybar, lbar);
            let inside = p.contains_interior(&y);
            let positive = b.value(&y) > 0.0;
            // positivity implies interior; deep interior implies positivity
            if positive {
                assert!(inside);
            }
            let (u0, u1, v) = (
                (ybar[0] - 0.2) / 0.4,
                (ybar[1] - 0.1) / 0.4,
                lbar / p.height(),
            );
            let deep = [u0, u1, v].iter().all(|&t| t > 0.05 && t < 0.95);
            if deep {
                assert!(positive && inside);
            }
        }
    }

    #[test]
    fn bump_scaling_in_amplitude_is_exact() {
        let p = oblique_pll();
        let b1 = ParallelepipedBump::with_amplitude(p.clone(), 2, 0.25, 1.0);
        let b2 = ParallelepipedBump::with_amplitude(p.clone(), 2, 0.5, 1.0);
        let y = p.unproject(&[0.31, 0.27], 0.4 * p.height());
        assert_eq!(2.0 * b1.value(&y), b2.value(&y));
    }

    #[test]
    fn bump_partial_matches_finite_differences() {
        let p = oblique_pll();
        let b = ParallelepipedBump::with_amplitude(p.clone(), 2, 1.0, 1.0);
        let eval = |y: &[f64]| b.value(y);
        let mut state = 7u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let steps = [1e-5, 1e-5, 1e-5];
        let mut checked = 0;
        while checked < 100 {
            let ybar = [0.2 + 0.4 * rand01(), 0.1 + 0.4 * rand01()];
            let lbar = p.height() * (0.1 + 0.8 * rand01());
            let y = p.unproject(&ybar, lbar);
            if b.value(&y) < 1e-8 {
                continue; // keep FD relative error meaningful
            }
            checked += 1;
            for axis in 0..3 {
                let mut orders = vec![0usize; 3];
                orders[axis] = 1;
                let exact = b.partial(&y, &orders).unwrap();
                let fd = fd_partial(&eval, &y, &orders, &steps);
                assert!(
                    rel_close(exact, fd, 1e-4) || (exact.abs() < 1e-10 && fd.abs() < 1e-6),
                    "axis {axis}: exact {exact} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn bump_mixed_partial_matches_finite_differences() {
        let p = oblique_pll();
        let b = ParallelepipedBump::with_amplitude(p.clone(), 2, 1.0, 1.0);
        let eval = |y: &[f64]| b.value(y);
        let y = p.unproject(&[0.33, 0.29], 0.45 * p.height());
        let steps = [2e-4, 2e-4, 2e-4];
        for orders in [[1, 1, 0], [0, 1, 1], [2, 0, 0], [0, 0, 2]] {
            let exact = b.partial(&y, &orders).unwrap();
            let fd = fd_partial(&eval, &y, &orders, &steps);
            assert!(
                rel_close(exact, fd, 2e-3),
                "orders {orders:?}: exact {exact} vs fd {fd}"
            );
        }
    }

    #[test]
    fn certify_is_idempotent_and_bounded() {
        let p = unit_box_pll(2);
        let opts = CertifyOptions::default();
        let b1 = ParallelepipedBump::certify(p.clone(), 1, 1.0, &opts).unwrap();
        let b2 = ParallelepipedBump::certify(p, 1, 1.0, &opts).unwrap();
        assert_eq!(b1.amplitude(), b2.amplitude());
        assert!(b1.amplitude() > 0.0 && b1.amplitude() <= 1.0);
    }

    #[test]
    fn certify_monotone_in_bound() {
        let p = oblique_pll();
        let opts = CertifyOptions::default();
        let tight = ParallelepipedBump::certify(p.clone(), 2, 0.5, &opts).unwrap();
        let loose = ParallelepipedBump::certify(p, 2, 1.0, &opts).unwrap();
        assert!(loose.amplitude() >= tight.amplitude());
    }

    #[test]
    fn certified_bump_passes_finer_grid_recheck() {
        let p = oblique_pll();
        let opts = CertifyOptions::default();
        let b = ParallelepipedBump::certify(p, 2, 1.0, &opts).unwrap();
        let (sup_value, sup_deriv) = b.sampled_sups(65, 1e-3).unwrap();
        assert!(sup_value <= b.bound() / 2.0 * (1.0 + 1e-9));
        assert!(sup_deriv <= b.bound(), "finer grid sup {sup_deriv}");
    }
}
