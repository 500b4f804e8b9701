//! Deterministic quadrature building blocks.
//!
//! Everything here is exact-arithmetic-reproducible: fixed node counts,
//! fixed recursion orders, no randomness.

use std::sync::OnceLock;

/// Trapezoid rule on a uniform grid with spacing `dx`.
pub fn trapezoid_uniform(ys: &[f64], dx: f64) -> f64 {
    if ys.len() < 2 {
        return 0.0;
    }
    let inner: f64 = ys[1..ys.len() - 1].iter().sum();
    dx * (0.5 * (ys[0] + ys[ys.len() - 1]) + inner)
}

/// Trapezoid rule on an arbitrary grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Adaptive Simpson quadrature with a relative tolerance.
///
/// The recursion refines until the local Richardson error estimate is below
/// `tol` times the magnitude of the running whole-interval estimate, with a
/// hard depth cap so pathological integrands terminate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(1e-300);
    simpson_step(f, a, b, fa, fm, fb, whole, rel_tol * scale, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    abs_tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * abs_tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, abs_tol * 0.5, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, abs_tol * 0.5, depth - 1)
}

/// Gauss-Legendre rule on [-1, 1].
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Integrate `f` over [a, b].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (b - a);
        let d = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c * x + d);
        }
        c * acc
    }
}

/// Compute the `n`-point Gauss-Legendre rule by Newton iteration on the
/// Legendre recurrence. Nodes converge to machine precision in a handful of
/// iterations from the Chebyshev initial guess.
fn compute_gauss_legendre(n: usize) -> GaussLegendre {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess: roots of the Chebyshev polynomial
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) via the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let k_f = k as f64;
                let p2 = ((2.0 * k_f - 1.0) * x * p1 - (k_f - 1.0) * p0) / k_f;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussLegendre { nodes, weights }
}

static GL32: OnceLock<GaussLegendre> = OnceLock::new();
static GL64: OnceLock<GaussLegendre> = OnceLock::new();

pub fn gl32() -> &'static GaussLegendre {
    GL32.get_or_init(|| compute_gauss_legendre(32))
}

pub fn gl64() -> &'static GaussLegendre {
    GL64.get_or_init(|| compute_gauss_legendre(64))
}
