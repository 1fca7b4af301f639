//! Quadrature primitives shared by the spectral module, the runtime
//! self-checks, and the oracle tests: Gauss–Legendre rules, a plain
//! adaptive integrator, alternating-series acceleration, and analytic
//! tails for oscillatory integrands with power-law envelopes.

use std::f64::consts::PI;
use std::sync::OnceLock;

// ── Gauss–Legendre rules ───────────────────────────────────────────────────

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
/// Supported orders are cached after first use.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    static CACHE: [(usize, OnceLock<Vec<(f64, f64)>>); 5] = [
        (8, OnceLock::new()),
        (10, OnceLock::new()),
        (16, OnceLock::new()),
        (20, OnceLock::new()),
        (24, OnceLock::new()),
    ];
    for (order, cell) in &CACHE {
        if *order == n {
            return cell.get_or_init(|| compute_gauss_legendre(n));
        }
    }
    panic!("unsupported Gauss-Legendre order {n}");
}

/// Newton iteration on Legendre polynomials; machine-accurate for the small
/// orders used here.
fn compute_gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut nodes = vec![(0.0, 0.0); n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        nodes[i] = (-z, w);
        nodes[n - 1 - i] = (z, w);
    }
    nodes
}

/// ∫ₐᵇ f, composite Gauss–Legendre with `panels` equal panels.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let nodes = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for &(t, w) in nodes {
            acc += w * f(mid + half * t);
        }
        sum += acc * half;
    }
    sum
}

// ── Adaptive quadrature ────────────────────────────────────────────────────

/// Failure modes of the adaptive integrator.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadError {
    /// The requested tolerance was not reached within the subdivision budget.
    NoConvergence { achieved: f64, requested: f64 },
    /// The running total never stabilized (e.g. a divergent tail).
    Divergent { detail: String },
}

impl std::fmt::Display for QuadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NoConvergence { achieved, requested } => write!(
                f,
                "quadrature did not converge: error estimate {achieved:.3e} > tol {requested:.3e}"
            ),
            Self::Divergent { detail } => write!(f, "divergent integral: {detail}"),
        }
    }
}

impl std::error::Error for QuadError {}

/// Adaptive bisection with a nested 10/20-point Gauss–Legendre error
/// estimate. `tol` is absolute.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, QuadError> {
    fn kernel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
        let nodes = gauss_legendre(order);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for &(t, w) in nodes {
            acc += w * f(mid + half * t);
        }
        acc * half
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let coarse = kernel(f, a, b, 10);
        let fine = kernel(f, a, b, 20);
        let err = (fine - coarse).abs();
        if err <= tol || depth >= 48 {
            if err > tol {
                *worst = worst.max(err);
            }
            return fine;
        }
        let mid = 0.5 * (a + b);
        recurse(f, a, mid, 0.5 * tol, depth + 1, worst)
            + recurse(f, mid, b, 0.5 * tol, depth + 1, worst)
    }
    let mut worst = 0.0;
    let v = recurse(f, a, b, tol, 0, &mut worst);
    if worst > 0.0 {
        return Err(QuadError::NoConvergence {
            achieved: worst,
            requested: tol,
        });
    }
    Ok(v)
}

// ── Alternating series acceleration ────────────────────────────────────────

/// Sum Σ_{k≥0} (−1)^k a_k from the first `a.len()` magnitudes using the
/// Chebyshev-weight acceleration of Cohen, Rodriguez Villegas and Zagier.
/// For smoothly decaying a_k the error shrinks like (3+√8)^{−n}.
pub fn accelerate_alternating(a: &[f64]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut d = (3.0 + 8.0_f64.sqrt()).powi(n as i32);
    d = 0.5 * (d + 1.0 / d);
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for (k, &ak) in a.iter().enumerate() {
        c = b - c;
        s += c * ak;
        let kf = k as f64;
        let nf = n as f64;
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

// ── Oscillatory tails ──────────────────────────────────────────────────────

/// Which trigonometric factor a tail integral carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trig {
    Cos,
    Sin,
}

/// ∫_R^∞ trig(c·t) / t^k dt for c > 0, k ≥ 1, R > 0, by four rounds of
/// integration by parts. Returns (value, rigorous remainder bound).
pub fn osc_tail(trig: Trig, c: f64, k: u32, r: f64) -> (f64, f64) {
    assert!(c > 0.0 && r > 0.0 && k >= 1);
    fn go(trig: Trig, c: f64, k: f64, r: f64, depth: u32) -> (f64, f64) {
        if depth == 0 {
            // |∫_R^∞ trig(ct)/t^k dt| ≤ ∫_R^∞ t^{-k} dt = R^{1-k}/(k-1)
            let bound = if k > 1.0 {
                r.powf(1.0 - k) / (k - 1.0)
            } else {
                // last resort for k = 1: van der Corput style bound 2/(cR)
                2.0 / (c * r)
            };
            return (0.0, bound);
        }
        let (s, cs) = (c * r).sin_cos();
        match trig {
            // ∫ cos(ct)/t^k = −sin(cR)/(c R^k) + (k/c) ∫ sin(ct)/t^{k+1}
            Trig::Cos => {
                let (inner, bound) = go(Trig::Sin, c, k + 1.0, r, depth - 1);
                (-s / (c * r.powf(k)) + (k / c) * inner, (k / c) * bound)
            }
            // ∫ sin(ct)/t^k = cos(cR)/(c R^k) − (k/c) ∫ cos(ct)/t^{k+1}
            Trig::Sin => {
                let (inner, bound) = go(Trig::Cos, c, k + 1.0, r, depth - 1);
                (cs / (c * r.powf(k)) - (k / c) * inner, (k / c) * bound)
            }
        }
    }
    go(trig, c, k as f64, r, 4)
}

/// ∫_R^∞ t^{-k} dt for k ≥ 2 (power tail without oscillation).
pub fn power_tail(k: u32, r: f64) -> f64 {
    assert!(k >= 2);
    r.powi(1 - k as i32) / (k as f64 - 1.0)
}

// ── Tests ──────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // order n is exact through degree 2n−1
        let nodes = gauss_legendre(8);
        let mut acc = 0.0;
        for &(x, w) in nodes {
            acc += w * x.powi(14);
        }
        assert_abs_diff_eq!(acc, 2.0 / 15.0, epsilon = 1e-14);
    }

    #[test]
    fn panels_integrate_gaussian() {
        let v = integrate_panels(|x: f64| (-x * x).exp(), 0.0, 8.0, 16, 24);
        assert_abs_diff_eq!(v, PI.sqrt() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_hits_tolerance() {
        let v = integrate_adaptive(&|x: f64| (5.0 * x).sin() / (1.0 + x * x), 0.0, 10.0, 1e-12)
            .unwrap();
        // cross-check against a brute composite rule
        let brute = integrate_panels(|x: f64| (5.0 * x).sin() / (1.0 + x * x), 0.0, 10.0, 400, 24);
        assert_abs_diff_eq!(v, brute, epsilon = 1e-11);
    }

    #[test]
    fn alternating_acceleration_log2() {
        // Σ (−1)^k / (k+1) = ln 2, from just 18 terms
        let terms: Vec<f64> = (0..18).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        let v = accelerate_alternating(&terms);
        assert_abs_diff_eq!(v, std::f64::consts::LN_2, epsilon = 1e-13);
    }

    #[test]
    fn oscillatory_tail_matches_brute_force() {
        // ∫_R^∞ cos(2t)/t² dt with R = 20, brute-forced far out
        let (v, bound) = osc_tail(Trig::Cos, 2.0, 2, 20.0);
        let brute = integrate_panels(|t: f64| (2.0 * t).cos() / (t * t), 20.0, 4000.0, 40_000, 16);
        // the brute truncation at 4000 contributes ~1e-8 of its own
        assert!((v - brute).abs() < 1e-6, "{v} vs {brute}");
        assert!(bound < 1e-6);
    }

    #[test]
    fn power_tail_exact() {
        assert_abs_diff_eq!(power_tail(4, 10.0), 1.0 / 3000.0, epsilon = 1e-18);
    }
}
