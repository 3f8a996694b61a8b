//! One-dimensional quadrature helpers.

/// Composite Simpson rule with `n` panels (`n` is rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Adaptive Simpson with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson_third<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson_third(f, a, 0.5 * (a + m), m);
        let right = simpson_third(f, m, 0.5 * (m + b), b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let whole = simpson_third(&f, a, m, b);
    recurse(&f, a, b, whole, tol, 48)
}

/// Number of Simpson panels that resolves an oscillation of total phase
/// `phase` (about 20 points per period), floored at `min_panels`.
pub fn oscillation_panels(phase: f64, min_panels: usize) -> usize {
    let per_period = 20.0;
    let periods = phase.abs() / std::f64::consts::TAU;
    ((periods * per_period) as usize).max(min_panels)
}
