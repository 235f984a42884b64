//! Central finite differences, used for certification sampling and as the
//! independent oracle against analytic derivative paths.

/// k-th derivative of a scalar function by nested central differences.
pub fn fd_derivative_1d(f: &dyn Fn(f64) -> f64, x: f64, k: usize, h: f64) -> f64 {
    if k == 0 {
        return f(x);
    }
    (fd_derivative_1d(f, x + h, k - 1, h) - fd_derivative_1d(f, x - h, k - 1, h)) / (2.0 * h)
}

/// Mixed partial `D^orders f` at `y` by nested central differences with
/// per-axis steps. `orders[i]` is the derivative order along axis `i`.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, y: &[f64], orders: &[usize], steps: &[f64]) -> f64 {
    match orders.iter().position(|&o| o > 0) {
        None => f(y),
        Some(axis) => {
            let mut reduced = orders.to_vec();
            reduced[axis] -= 1;
            let h = steps[axis];
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[axis] += h;
            ym[axis] -= h;
            (fd_partial(f, &yp, &reduced, steps) - fd_partial(f, &ym, &reduced, steps))
                / (2.0 * h)
        }
    }
}

/// All derivative multi-indices of total order `k` in dimension `d`.
pub fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; d];
    fill(&mut out, &mut current, 0, k);
    out
}

fn fill(out: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, axis: usize, remaining: usize) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.clone());
        current[axis] = 0;
        return;
    }
    for take in 0..=remaining {
        current[axis] = take;
        fill(out, current, axis + 1, remaining - take);
    }
    current[axis] = 0;
}
