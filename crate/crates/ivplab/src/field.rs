//! Right-hand-side fields: the evaluation surface shared by information
//! operators, adversary constructions, and solvers.
//!
//! Components and axes are 0-based throughout.

use crate::bump::SmoothStep;
use crate::error::{Error, Result};

/// A vector field on R^d exposing exact partial derivatives up to the order
/// the implementation carries.
pub trait Field {
    fn dim(&self) -> usize;

    /// `D^orders f^component (y)`. `orders` is a per-axis derivative
    /// multi-index of length `dim()`.
    fn partial(&self, y: &[f64], component: usize, orders: &[usize]) -> Result<f64>;

    fn value(&self, y: &[f64], component: usize) -> f64 {
        self.partial(y, component, &vec![0; self.dim()])
            .expect("order-0 evaluation cannot exceed any derivative cap")
    }

    fn eval_vector(&self, y: &[f64], out: &mut [f64]) {
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = self.value(y, c);
        }
    }
}

/// f = 0.
pub struct ZeroField(pub usize);

impl Field for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn partial(&self, _y: &[f64], _component: usize, _orders: &[usize]) -> Result<f64> {
        Ok(0.0)
    }
}

/// f = const vector.
pub struct ConstField(pub Vec<f64>);

impl Field for ConstField {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn partial(&self, _y: &[f64], component: usize, orders: &[usize]) -> Result<f64> {
        Ok(if orders.iter().all(|&o| o == 0) {
            self.0[component]
        } else {
            0.0
        })
    }
}

/// Value-only wrapper around a closure; derivative queries are rejected.
pub struct FnField<F: Fn(&[f64], usize) -> f64> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], usize) -> f64> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn partial(&self, y: &[f64], component: usize, orders: &[usize]) -> Result<f64> {
        if orders.iter().any(|&o| o > 0) {
            return Err(Error::FieldEvaluation(
                "closure-backed field carries values only".into(),
            ));
        }
        Ok((self.f)(y, component))
    }
}

/// Tensor-product smooth cutoff: identically 1 on the inner box, identically 0
/// outside the outer box, C-infinity in between. Each axis factor is
/// `s((x - olo)/(ilo - olo)) * s((ohi - x)/(ohi - ihi))`.
#[derive(Debug, Clone)]
pub struct BoxProfile {
    axes: Vec<AxisCutoff>,
    step: SmoothStep,
}

#[derive(Debug, Clone, Copy)]
struct AxisCutoff {
    outer_lo: f64,
    inner_lo: f64,
    inner_hi: f64,
    outer_hi: f64,
}

impl BoxProfile {
    pub fn new(outer: &[[f64; 2]], inner: &[[f64; 2]], max_order: usize) -> Result<Self> {
        if outer.len() != inner.len() {
            return Err(Error::Geometry("outer/inner dimension mismatch".into()));
        }
        let mut axes = Vec::with_capacity(outer.len());
        for (j, (o, i)) in outer.iter().zip(inner.iter()).enumerate() {
            if !(o[0] < i[0] && i[0] < i[1] && i[1] < o[1]) {
                return Err(Error::Geometry(format!(
                    "axis {j}: inner box must be strictly inside the outer box"
                )));
            }
            axes.push(AxisCutoff {
                outer_lo: o[0],
                inner_lo: i[0],
                inner_hi: i[1],
                outer_hi: o[1],
            });
        }
        Ok(BoxProfile {
            axes,
            step: SmoothStep::new(max_order.max(1)),
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn max_order(&self) -> usize {
        self.step.max_order()
    }

    pub fn inside_inner(&self, y: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(y)
            .all(|(a, &x)| x >= a.inner_lo && x <= a.inner_hi)
    }

    pub fn outside_outer(&self, y: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(y)
            .any(|(a, &x)| x <= a.outer_lo || x >= a.outer_hi)
    }

    fn axis_args(&self, axis: usize, x: f64) -> (f64, f64, f64, f64) {
        let a = &self.axes[axis];
        let w_lo = a.inner_lo - a.outer_lo;
        let w_hi = a.outer_hi - a.inner_hi;
        ((x - a.outer_lo) / w_lo, 1.0 / w_lo, (a.outer_hi - x) / w_hi, -1.0 / w_hi)
    }

    /// sigma_axis^{(k)}(x) by the Leibniz rule over the two step factors.
    pub fn axis_derivative(&self, axis: usize, x: f64, k: usize) -> Result<f64> {
        let (u, du, v, dv) = self.axis_args(axis, x);
        if k == 0 {
            return Ok(self.step.value(u) * self.step.value(v));
        }
        let mut acc = 0.0;
        let mut coeff = 1.0;
        for t in 0..=k {
            if t > 0 {
                coeff = coeff * (k - t + 1) as f64 / t as f64; // C(k, t)
            }
            acc += coeff
                * self.step.derivative(u, t)?
                * du.powi(t as i32)
                * self.step.derivative(v, k - t)?
                * dv.powi((k - t) as i32);
        }
        Ok(acc)
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let mut prod = 1.0;
        for axis in 0..self.dim() {
            if prod == 0.0 {
                return 0.0;
            }
            prod *= self.axis_derivative(axis, y[axis], 0).unwrap();
        }
        prod
    }

    /// `D^orders` of the tensor product: the per-axis factors separate.
    pub fn partial(&self, y: &[f64], orders: &[usize]) -> Result<f64> {
        let mut prod = 1.0;
        for axis in 0..self.dim() {
            prod *= self.axis_derivative(axis, y[axis], orders[axis])?;
            if prod == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(prod)
    }

    /// Sampled sup of |sigma_axis^{(k)}| over the two cutoff bands, taking the
    /// max of the exact prefactor route and a finite-difference resample.
    pub fn sup_axis_derivative(&self, axis: usize, k: usize, samples: usize) -> Result<f64> {
        if k == 0 {
            return Ok(1.0);
        }
        let a = self.axes[axis];
        let mut sup = 0.0f64;
        for (lo, hi) in [(a.outer_lo, a.inner_lo), (a.inner_hi, a.outer_hi)] {
            let fd_step = (hi - lo) * 2e-4;
            for i in 0..=samples {
                let x = lo + (hi - lo) * i as f64 / samples as f64;
                sup = sup.max(self.axis_derivative(axis, x, k)?.abs());
                let fd = crate::fd::fd_derivative_1d(
                    &|t| self.axis_derivative(axis, t, 0).unwrap(),
                    x,
                    k,
                    fd_step,
                );
                sup = sup.max(fd.abs());
            }
        }
        Ok(sup)
    }
}

/// Smooth compactly supported benchmark field: a rigid rotation of the first
/// two coordinates about `center`, damped to zero outside the profile's outer
/// box. Inside the inner box the motion is an exact circular rotation.
pub struct RotationField {
    pub omega: f64,
    pub center: Vec<f64>,
    pub profile: BoxProfile,
}

impl Field for RotationField {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn partial(&self, y: &[f64], component: usize, orders: &[usize]) -> Result<f64> {
        let d = self.dim();
        assert!(d >= 2, "rotation needs at least two axes");
        // g(y) is linear: component 0 -> -omega (y_1 - c_1); component 1 -> omega (y_0 - c_0)
        let (g, grad_axis, grad) = match component {
            0 => (-self.omega * (y[1] - self.center[1]), 1, -self.omega),
            1 => (self.omega * (y[0] - self.center[0]), 0, self.omega),
            _ => return Ok(0.0),
        };
        // Leibniz for linear * profile: g D^k phi + k_a grad D^{k - e_a} phi
        let mut acc = g * self.profile.partial(y, orders)?;
        if orders[grad_axis] > 0 {
            let mut reduced = orders.to_vec();
            reduced[grad_axis] -= 1;
            acc += orders[grad_axis] as f64 * grad * self.profile.partial(y, &reduced)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::fd_partial;

    fn profile2() -> BoxProfile {
        BoxProfile::new(&[[0.0, 1.0], [0.0, 1.0]], &[[0.2, 0.8], [0.2, 0.8]], 4).unwrap()
    }

    #[test]
    fn profile_one_on_inner_zero_outside() {
        let p = profile2();
        assert_eq!(p.value(&[0.5, 0.5]), 1.0);
        assert_eq!(p.value(&[0.2, 0.7]), 1.0);
        assert_eq!(p.value(&[1.0, 0.5]), 0.0);
        assert_eq!(p.value(&[-0.3, 0.5]), 0.0);
        let mid = p.value(&[0.1, 0.5]);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn profile_derivatives_vanish_on_inner() {
        let p = profile2();
        assert_eq!(p.partial(&[0.5, 0.5], &[1, 0]).unwrap(), 0.0);
        assert_eq!(p.partial(&[0.3, 0.6], &[0, 2]).unwrap(), 0.0);
    }

    #[test]
    fn profile_partial_matches_fd() {
        let p = profile2();
        let eval = |y: &[f64]| p.value(y);
        for (pt, orders) in [
            ([0.1, 0.5], [1usize, 0usize]),
            ([0.12, 0.1], [1, 1]),
            ([0.85, 0.5], [2, 0]),
        ] {
            let exact = p.partial(&pt, &orders).unwrap();
            let fd = fd_partial(&eval, &pt, &orders, &[1e-5, 1e-5]);
            let scale = exact.abs().max(fd.abs()).max(1.0);
            assert!(
                (exact - fd).abs() / scale < 1e-4,
                "{pt:?} {orders:?}: exact {exact} fd {fd}"
            );
        }
    }

    #[test]
    fn sup_axis_derivative_sane() {
        // sup |sigma'| = (max h / integral h) / band width
        let p = profile2();
        let sup = p.sup_axis_derivative(0, 1, 2000).unwrap();
        let expected = crate::bump::h_max() / crate::bump::h_integral() / 0.2;
        assert!((sup - expected).abs() / expected < 1e-3, "sup {sup} vs {expected}");
    }

    #[test]
    fn rotation_is_divergence_free_inside() {
        let p = profile2();
        let f = RotationField {
            omega: 0.7,
            center: vec![0.5, 0.5],
            profile: p,
        };
        assert!((f.value(&[0.5, 0.6], 0) - (-0.7 * 0.1)).abs() < 1e-15);
        let div = f.partial(&[0.45, 0.55], 0, &[1, 0]).unwrap()
            + f.partial(&[0.45, 0.55], 1, &[0, 1]).unwrap();
        assert!(div.abs() < 1e-15);
    }

    #[test]
    fn rotation_partial_matches_fd() {
        let p = profile2();
        let f = RotationField {
            omega: 1.3,
            center: vec![0.5, 0.5],
            profile: p,
        };
        let eval = |y: &[f64]| f.value(y, 1);
        let pt = [0.15, 0.4]; // inside the cutoff band where phi varies
        for orders in [[1usize, 0usize], [0, 1], [1, 1]] {
            let exact = f.partial(&pt, 1, &orders).unwrap();
            let fd = fd_partial(&eval, &pt, &orders, &[1e-5, 1e-5]);
            let scale = exact.abs().max(fd.abs()).max(1.0);
            assert!((exact - fd).abs() / scale < 1e-4);
        }
    }
}
