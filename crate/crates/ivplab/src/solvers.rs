//! Integrators: an adaptive Dormand-Prince 5(4) reference solver with dense
//! output, a budgeted nonadaptive tensor-grid interpolation solver, and a
//! budgeted adaptive Taylor solver driven by exact partials of the field.

use crate::error::{Error, Result};
use crate::field::{Field, FnField};
use crate::geometry::{integer_root_floor, ProblemSpec};

// Dormand-Prince 5(4) tableau. The stage times are kept for reference; the
// autonomous right-hand sides here never read them.
#[allow(dead_code)]
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
// Quartic dense-output weights: y(t0 + th) = y0 + h sum_i k_i sum_m P[i][m] t^{m+1}.
// At t = 1 the rows sum to B5 and the column sums make constant fields exact.
const P: [[f64; 4]; 7] = [
    [1.0, -183.0 / 64.0, 37.0 / 12.0, -145.0 / 128.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 1500.0 / 371.0, -1000.0 / 159.0, 1000.0 / 371.0],
    [0.0, -125.0 / 32.0, 125.0 / 12.0, -375.0 / 64.0],
    [0.0, 9477.0 / 3392.0, -729.0 / 106.0, 25515.0 / 6784.0],
    [0.0, -11.0 / 7.0, 11.0 / 3.0, -55.0 / 28.0],
    [0.0, 3.0 / 2.0, -4.0, 5.0 / 2.0],
];

enum Dense {
    /// Per accepted step: step size and the seven stage derivatives.
    Stages(Vec<(f64, Vec<Vec<f64>>)>),
    /// Per node: total-derivative stack z', z'', ... for the Taylor polynomial.
    Taylor(Vec<Vec<Vec<f64>>>),
}

/// A solution path on `[a, b]` with piecewise-polynomial dense output.
pub struct Trajectory {
    nodes: Vec<f64>,
    states: Vec<Vec<f64>>,
    dense: Dense,
}

impl Trajectory {
    pub fn span(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn end_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Dense evaluation; `t` must lie in the solved span (a relative 1e-9
    /// overshoot is clamped).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let (a, b) = self.span();
        let slack = 1e-9 * (b - a);
        assert!(
            t >= a - slack && t <= b + slack,
            "evaluation at t = {t} outside the solved span [{a}, {b}]"
        );
        let t = t.clamp(a, b);
        // index of the step containing t
        let mut i = match self
            .nodes
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        };
        if t >= self.nodes[i + 1] {
            i = (i + 1).min(self.nodes.len() - 2);
        }
        let d = self.dim();
        match &self.dense {
            Dense::Stages(steps) => {
                let (h, stages) = &steps[i];
                let theta = (t - self.nodes[i]) / h;
                let mut out = self.states[i].clone();
                for (s, k) in stages.iter().enumerate() {
                    let mut q = 0.0;
                    let mut tp = theta;
                    for pm in P[s] {
                        q += pm * tp;
                        tp *= theta;
                    }
                    for c in 0..d {
                        out[c] += h * q * k[c];
                    }
                }
                out
            }
            Dense::Taylor(stacks) => {
                let dt = t - self.nodes[i];
                let mut out = self.states[i].clone();
                let mut factor = 1.0;
                for (ord, deriv) in stacks[i].iter().enumerate() {
                    factor *= dt / (ord + 1) as f64;
                    for c in 0..d {
                        out[c] += factor * deriv[c];
                    }
                }
                out
            }
        }
    }
}

/// Adaptive Dormand-Prince 5(4) with local error control at `tol` (used as
/// both absolute and relative weight) and quartic dense output.
pub fn reference_solve(f: &dyn Field, y0: &[f64], a: f64, b: f64, tol: f64) -> Result<Trajectory> {
    reference_solve_capped(f, y0, a, b, tol, f64::INFINITY)
}

/// Like `reference_solve` with a hard step-size cap. Fields whose fine
/// structure (bump trains, cell grids) is thinner than the natural step need
/// the cap: an embedded error estimate can alias an oscillation it never
/// samples and silently step across it.
pub fn reference_solve_capped(
    f: &dyn Field,
    y0: &[f64],
    a: f64,
    b: f64,
    tol: f64,
    max_step: f64,
) -> Result<Trajectory> {
    assert!(b > a && tol > 0.0 && max_step > 0.0);
    let d = y0.len();
    let mut t = a;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; d];
    f.eval_vector(&y, &mut k1);

    let mut nodes = vec![a];
    let mut states = vec![y.clone()];
    let mut steps: Vec<(f64, Vec<Vec<f64>>)> = Vec::new();

    let mut h = ((b - a) / 100.0).min(max_step);
    let h_floor = (b - a) * 1e-14;
    let max_steps = 50_000_000u64;
    let mut count = 0u64;

    while t < b {
        count += 1;
        if count > max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        h = h.min(b - t).min(max_step);
        let mut stages: Vec<Vec<f64>> = Vec::with_capacity(7);
        stages.push(k1.clone());
        for s in 1..6 {
            let mut ys = y.clone();
            for (j, k) in stages.iter().enumerate() {
                let w = A[s][j] * h;
                for c in 0..d {
                    ys[c] += w * k[c];
                }
            }
            let mut ks = vec![0.0; d];
            f.eval_vector(&ys, &mut ks);
            stages.push(ks);
        }
        // sixth combination row gives the fifth-order solution
        let mut y5 = y.clone();
        for (j, k) in stages.iter().enumerate() {
            let w = A[6][j] * h;
            for c in 0..d {
                y5[c] += w * k[c];
            }
        }
        let mut k7 = vec![0.0; d];
        f.eval_vector(&y5, &mut k7);
        stages.push(k7.clone());

        let mut err_norm = 0.0f64;
        for c in 0..d {
            let mut e = 0.0;
            for (j, k) in stages.iter().enumerate() {
                e += (B5[j] - B4[j]) * k[c];
            }
            let w = tol + tol * y[c].abs().max(y5[c].abs());
            err_norm = err_norm.max((h * e / w).abs());
        }

        if err_norm <= 1.0 {
            t += h;
            y = y5;
            k1 = k7; // first-same-as-last
            nodes.push(t);
            states.push(y.clone());
            steps.push((h, stages));
        }
        let scale = if err_norm == 0.0 {
            10.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 10.0)
        };
        h *= scale;
        if h < h_floor && t < b {
            return Err(Error::StepSizeUnderflow { t, h });
        }
    }

    Ok(Trajectory {
        nodes,
        states,
        dense: Dense::Stages(steps),
    })
}

/// The endpoint-inclusive uniform tensor grid over `box_`, first axis
/// fastest; the flat order the interpolant indexes by.
pub fn grid_points(box_: &[[f64; 2]], points_per_axis: usize) -> Vec<Vec<f64>> {
    let d = box_.len();
    let g = points_per_axis;
    let mut out = Vec::with_capacity(g.pow(d as u32));
    let mut idx = vec![0usize; d];
    for _ in 0..g.pow(d as u32) {
        out.push(
            (0..d)
                .map(|a| {
                    let [lo, hi] = box_[a];
                    lo + (hi - lo) * idx[a] as f64 / (g - 1) as f64
                })
                .collect(),
        );
        for a in 0..d {
            idx[a] += 1;
            if idx[a] < g {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

/// Uniform per-axis tensor grid with sliding-window Lagrange interpolation of
/// per-axis degree `degree`; windows clamp at the box edges and ties at
/// window midpoints break toward lower indices.
pub struct GridInterpolant {
    lo: Vec<f64>,
    step: Vec<f64>,
    points_per_axis: usize,
    degree: usize,
    /// values[component][flat grid index], C-style axis order
    values: Vec<Vec<f64>>,
}

impl GridInterpolant {
    pub fn sample(f: &dyn Field, box_: &[[f64; 2]], points_per_axis: usize, degree: usize) -> Self {
        let d = box_.len();
        let g = points_per_axis;
        let lo: Vec<f64> = box_.iter().map(|iv| iv[0]).collect();
        let step: Vec<f64> = box_
            .iter()
            .map(|iv| (iv[1] - iv[0]) / (g - 1) as f64)
            .collect();
        let total = g.pow(d as u32);
        let mut values = vec![vec![0.0; total]; d];
        for (flat, y) in grid_points(box_, g).into_iter().enumerate() {
            for (c, vals) in values.iter_mut().enumerate() {
                vals[flat] = f.value(&y, c);
            }
        }
        GridInterpolant {
            lo,
            step,
            points_per_axis,
            degree,
            values,
        }
    }

    fn axis_window(&self, axis: usize, x: f64) -> (usize, Vec<f64>) {
        let g = self.points_per_axis;
        let w = self.degree + 1;
        let pos = (x - self.lo[axis]) / self.step[axis];
        let start = (pos - w as f64 / 2.0).ceil().max(0.0) as usize;
        let start = start.min(g - w);
        // Lagrange weights over the window nodes
        let mut weights = vec![1.0; w];
        for (i, wi) in weights.iter_mut().enumerate() {
            for j in 0..w {
                if i != j {
                    *wi *= (pos - (start + j) as f64) / (i as f64 - j as f64);
                }
            }
        }
        (start, weights)
    }

    pub fn value(&self, y: &[f64], component: usize) -> f64 {
        let d = self.lo.len();
        let g = self.points_per_axis;
        let w = self.degree + 1;
        let windows: Vec<(usize, Vec<f64>)> =
            (0..d).map(|a| self.axis_window(a, y[a])).collect();
        let mut acc = 0.0;
        let mut counter = vec![0usize; d];
        'outer: loop {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for a in (0..d).rev() {
                let (start, ws) = &windows[a];
                weight *= ws[counter[a]];
                flat = flat * g + (start + counter[a]);
            }
            acc += weight * self.values[component][flat];
            for a in 0..d {
                counter[a] += 1;
                if counter[a] < w {
                    continue 'outer;
                }
                counter[a] = 0;
            }
            break;
        }
        acc
    }
}

/// Nonadaptive grid solver: sample all components of `f` on the
/// `floor(n^{1/d})`-per-axis grid over the reachable box, interpolate at
/// per-axis degree `r - 1`, and integrate the interpolant with the reference
/// solver. Returns the trajectory and the charged functional count.
pub fn solve_nonadaptive_grid(
    f: &dyn Field,
    spec: &ProblemSpec,
    n: usize,
) -> Result<(Trajectory, usize)> {
    let d = spec.dim;
    let r = spec.smoothness;
    let g = integer_root_floor(n as u64, d as u32) as usize;
    if g < r.max(2) {
        return Err(Error::BudgetTooSmall(format!(
            "budget n = {n} gives {g} points per axis; degree {} needs {}",
            r - 1,
            r.max(2)
        )));
    }
    let box_ = spec.ball();
    let interp = GridInterpolant::sample(f, &box_, g, r - 1);
    let charged = d * g.pow(d as u32);
    // the interpolant has structure at grid-spacing scale; cap steps so the
    // integrator resolves it
    let speed = interp
        .values
        .iter()
        .flat_map(|vals| vals.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let spacing = box_
        .iter()
        .map(|iv| (iv[1] - iv[0]) / (g - 1) as f64)
        .fold(f64::INFINITY, f64::min);
    let cap = if speed > 0.0 {
        spacing / (2.0 * speed)
    } else {
        f64::INFINITY
    };
    let field = FnField {
        dim: d,
        f: |y: &[f64], c: usize| interp.value(y, c),
    };
    let traj = reference_solve_capped(&field, &spec.eta, spec.a, spec.b, 1e-11, cap)?;
    Ok((traj, charged))
}

/// Total time-derivative stack of the solution at state `y`:
/// z' = f, z'' = Df f, z''' = D2f[f, f] + Df Df f.
fn taylor_stack(f: &dyn Field, y: &[f64], order: usize) -> Result<Vec<Vec<f64>>> {
    let d = y.len();
    let mut z1 = vec![0.0; d];
    f.eval_vector(y, &mut z1);
    let mut stack = vec![z1];
    if order >= 2 {
        // jac[i][j] = d f^i / d y_j
        let mut jac = vec![vec![0.0; d]; d];
        for (i, row) in jac.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let mut orders = vec![0usize; d];
                orders[j] = 1;
                *slot = f.partial(y, i, &orders)?;
            }
        }
        let z1 = stack[0].clone();
        let z2: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| jac[i][j] * z1[j]).sum())
            .collect();
        stack.push(z2);
        if order >= 3 {
            let z2 = stack[1].clone();
            let mut z3 = vec![0.0; d];
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    for l in 0..d {
                        let mut orders = vec![0usize; d];
                        orders[j] += 1;
                        orders[l] += 1;
                        acc += f.partial(y, i, &orders)? * z1[j] * z1[l];
                    }
                    acc += jac[i][j] * z2[j];
                }
                z3[i] = acc;
            }
            stack.push(z3);
        }
        if order > 3 {
            return Err(Error::Unsupported(
                "Taylor solver implements orders 1 through 3".into(),
            ));
        }
    }
    Ok(stack)
}

/// Functionals consumed per Taylor step: values, plus the Jacobian, plus the
/// symmetric second-derivative tensor when the order asks for them.
pub fn taylor_info_per_step(dim: usize, order: usize) -> usize {
    let d = dim;
    let mut c = d;
    if order >= 2 {
        c += d * d;
    }
    if order >= 3 {
        c += d * d * (d + 1) / 2;
    }
    c
}

/// Adaptive Taylor solver of the given order with uniform steps; query points
/// follow the computed trajectory. Returns the trajectory and the charged
/// functional count.
pub fn solve_adaptive_taylor(
    f: &dyn Field,
    y0: &[f64],
    a: f64,
    b: f64,
    steps: usize,
    order: usize,
) -> Result<(Trajectory, usize)> {
    assert!(steps >= 1 && order >= 1);
    let h = (b - a) / steps as f64;
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut stacks = Vec::with_capacity(steps);
    let mut y = y0.to_vec();
    nodes.push(a);
    states.push(y.clone());
    for i in 0..steps {
        let stack = taylor_stack(f, &y, order)?;
        let mut next = y.clone();
        let mut factor = 1.0;
        for (ord, deriv) in stack.iter().enumerate() {
            factor *= h / (ord + 1) as f64;
            for (c, slot) in next.iter_mut().enumerate() {
                *slot += factor * deriv[c];
            }
        }
        stacks.push(stack);
        y = next;
        nodes.push(a + (i + 1) as f64 * h);
        states.push(y.clone());
    }
    let charged = steps * taylor_info_per_step(y0.len(), order);
    Ok((
        Trajectory {
            nodes,
            states,
            dense: Dense::Taylor(stacks),
        },
        charged,
    ))
}

/// Max-norm distance between two trajectories sampled on a uniform grid.
pub fn sup_distance(t1: &Trajectory, t2: &Trajectory, samples: usize) -> f64 {
    assert!(samples >= 2);
    let (a, b) = t1.span();
    let (a2, b2) = t2.span();
    assert!(
        (a - a2).abs() <= 1e-9 * (b - a) && (b - b2).abs() <= 1e-9 * (b - a),
        "trajectories cover different spans"
    );
    let mut sup = 0.0f64;
    for i in 0..samples {
        let t = a + (b - a) * i as f64 / (samples - 1) as f64;
        let y1 = t1.eval(t);
        let y2 = t2.eval(t);
        let diff = y1
            .iter()
            .zip(&y2)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        sup = sup.max(diff);
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BoxProfile, ConstField, RotationField, ZeroField};

    fn rotation() -> RotationField {
        RotationField {
            omega: 1.0,
            center: vec![0.5, 0.5],
            profile: BoxProfile::new(
                &[[0.0, 1.0], [0.0, 1.0]],
                &[[0.2, 0.8], [0.2, 0.8]],
                4,
            )
            .unwrap(),
        }
    }

    #[test]
    fn zero_field_stays_put() {
        let traj = reference_solve(&ZeroField(2), &[0.5, 0.5], 0.0, 1.0, 1e-10).unwrap();
        assert_eq!(traj.end_state(), &[0.5, 0.5]);
        assert_eq!(traj.eval(0.3), vec![0.5, 0.5]);
    }

    #[test]
    fn constant_field_is_exact() {
        let f = ConstField(vec![0.125, -0.0625]);
        let traj = reference_solve(&f, &[0.4, 0.6], 0.0, 2.0, 1e-10).unwrap();
        let end = traj.end_state();
        assert!((end[0] - (0.4 + 0.25)).abs() < 1e-12);
        assert!((end[1] - (0.6 - 0.125)).abs() < 1e-12);
        let mid = traj.eval(1.0);
        assert!((mid[0] - 0.525).abs() < 1e-12);
    }

    #[test]
    fn rotation_preserves_radius_and_matches_closed_form() {
        let f = rotation();
        let y0 = [0.65, 0.5]; // radius 0.15 orbit, inside the plateau
        let traj = reference_solve(&f, &y0, 0.0, 3.0, 1e-11).unwrap();
        for i in 0..=30 {
            let t = 3.0 * i as f64 / 30.0;
            let y = traj.eval(t);
            let exact = [
                0.5 + 0.15 * t.cos(),
                0.5 + 0.15 * t.sin(),
            ];
            assert!(
                (y[0] - exact[0]).abs() < 1e-9 && (y[1] - exact[1]).abs() < 1e-9,
                "t = {t}: {y:?} vs {exact:?}"
            );
        }
    }

    fn spec2() -> ProblemSpec {
        ProblemSpec::new(
            0.0,
            1.0,
            vec![0.5, 0.5],
            2,
            1.0,
            vec![[0.0, 1.0], [0.0, 1.0]],
            vec![[0.1, 0.9], [0.1, 0.9]],
            0.25,
            0.25,
            2,
        )
        .unwrap()
    }

    #[test]
    fn grid_solver_exact_on_constants() {
        let f = ConstField(vec![0.01, -0.02]);
        let spec = spec2();
        let (traj, charged) = solve_nonadaptive_grid(&f, &spec, 16).unwrap();
        assert_eq!(charged, 2 * 16);
        let end = traj.end_state();
        assert!((end[0] - 0.51).abs() < 1e-10);
        assert!((end[1] - 0.48).abs() < 1e-10);
    }

    #[test]
    fn grid_solver_exact_on_affine_for_degree_one() {
        // r = 2 -> per-axis degree 1 reproduces affine fields
        let f = FnField {
            dim: 2,
            f: |y: &[f64], c: usize| {
                if c == 0 {
                    0.02 * (y[1] - 0.5)
                } else {
                    -0.03 * (y[0] - 0.5) + 0.01
                }
            },
        };
        let spec = spec2();
        let (traj, _) = solve_nonadaptive_grid(&f, &spec, 25).unwrap();
        let reference = reference_solve(&f, &spec.eta, spec.a, spec.b, 1e-12).unwrap();
        assert!(sup_distance(&traj, &reference, 101) < 1e-9);
    }

    #[test]
    fn grid_solver_rejects_tiny_budgets() {
        let spec = spec2();
        assert!(solve_nonadaptive_grid(&ZeroField(2), &spec, 1).is_err());
    }

    #[test]
    fn taylor_exact_on_constant_fields() {
        let f = ConstField(vec![0.125, 0.25]);
        let (traj, charged) = solve_adaptive_taylor(&f, &[0.0, 0.0], 0.0, 1.0, 4, 1).unwrap();
        assert_eq!(charged, 4 * 2);
        let end = traj.end_state();
        assert!((end[0] - 0.125).abs() < 1e-15);
        assert!((end[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn taylor_second_order_error_ratio() {
        let f = rotation();
        let y0 = [0.65, 0.5];
        let reference = reference_solve(&f, &y0, 0.0, 2.0, 1e-12).unwrap();
        let mut errors = Vec::new();
        for steps in [64usize, 128, 256] {
            let (traj, _) = solve_adaptive_taylor(&f, &y0, 0.0, 2.0, steps, 2).unwrap();
            errors.push(sup_distance(&traj, &reference, 257));
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (3.2..=4.8).contains(&ratio),
                "halving ratio {ratio} outside [3.2, 4.8]; errors {errors:?}"
            );
        }
    }

    #[test]
    fn taylor_third_order_runs() {
        let f = rotation();
        let (t3, _) = solve_adaptive_taylor(&f, &[0.6, 0.5], 0.0, 1.0, 128, 3).unwrap();
        let reference = reference_solve(&f, &[0.6, 0.5], 0.0, 1.0, 1e-12).unwrap();
        assert!(sup_distance(&t3, &reference, 129) < 1e-6);
        assert!(solve_adaptive_taylor(&f, &[0.6, 0.5], 0.0, 1.0, 8, 4).is_err());
    }

    #[test]
    fn sup_distance_basics() {
        let f = ConstField(vec![0.1, 0.0]);
        let t1 = reference_solve(&f, &[0.0, 0.0], 0.0, 1.0, 1e-10).unwrap();
        let t2 = reference_solve(&f, &[0.0, 0.0], 0.0, 1.0, 1e-10).unwrap();
        assert_eq!(sup_distance(&t1, &t2, 33), 0.0);
        let t3 = reference_solve(&f, &[0.03, -0.04], 0.0, 1.0, 1e-10).unwrap();
        let d = sup_distance(&t1, &t3, 33);
        assert!((d - 0.04).abs() < 1e-12);
    }

    #[test]
    fn sup_distance_stable_under_refinement() {
        let f = rotation();
        let t1 = reference_solve(&f, &[0.65, 0.5], 0.0, 2.0, 1e-11).unwrap();
        let (t2, _) = solve_adaptive_taylor(&f, &[0.65, 0.5], 0.0, 2.0, 200, 2).unwrap();
        let coarse = sup_distance(&t1, &t2, 513);
        let fine = sup_distance(&t1, &t2, 1025);
        assert!((fine - coarse).abs() <= 0.01 * fine.max(1e-300));
    }

    #[test]
    fn gronwall_bound_on_field_perturbation() {
        // fields differing by delta in sup norm separate by at most
        // delta (b - a) e^{L (b - a)}
        let f = rotation();
        let delta = 1e-4;
        let g = FnField {
            dim: 2,
            f: |y: &[f64], c: usize| f.value(y, c) + if c == 0 { 1e-4 } else { 0.0 },
        };
        let base = rotation();
        let t1 = reference_solve(&base, &[0.6, 0.55], 0.0, 1.0, 1e-11).unwrap();
        let t2 = reference_solve(&g, &[0.6, 0.55], 0.0, 1.0, 1e-11).unwrap();
        let lip = 2.0; // d * D for this toy setup
        let bound = delta * 1.0 * (lip * 1.0f64).exp();
        let dist = sup_distance(&t1, &t2, 257);
        assert!(dist <= bound, "distance {dist} exceeds Gronwall bound {bound}");
        assert!(dist >= delta * 0.1, "perturbation had no visible effect");
    }
}
