//! Numerical spectral analysis: radial Fourier transforms, 95%
//! energy-concentration radii, decay classification, and the calibration
//! search that matches the kernel family's concentration numbers against
//! their published reference values.
//!
//! All energy integrals are of the form ∫ r²·|g(r)|^p dr with p = 2
//! (`AmplitudeSquared`, the defining convention) or p = 1 (`Amplitude`,
//! provided because the reference table is closer to it). Slowly decaying
//! integrands get analytic oscillatory tails (integration by parts through
//! [`crate::quad::osc_tail`]); integrands that do not decay at all — the
//! Jinc kernel's amplitude-weighted spatial energy, the exponential
//! kernel's amplitude-weighted frequency energy — are detected by a
//! window-decay probe and reported as divergent rather than silently
//! truncated.
//!
//! Scale handling: every quantity is computed for the σ = 1 profile and
//! rescaled afterwards (spatial radii scale with σ, frequency radii with
//! 1/σ); the kernel evaluations are exactly scale-covariant so this is
//! lossless.

use crate::kernels::{KernelError, KernelKind, RadialKernel};
use crate::par;
use crate::quad::{gauss_legendre, osc_tail, power_tail, Trig};

// ── Types ──────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Spatial,
    Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// r²·|g(r)|² — the defining energy integral.
    AmplitudeSquared,
    /// r²·|g(r)| — matches the reference table's Gaussian anchor better.
    Amplitude,
}

impl Weighting {
    pub fn name(&self) -> &'static str {
        match self {
            Weighting::AmplitudeSquared => "amplitude-squared",
            Weighting::Amplitude => "amplitude",
        }
    }
}

/// Radial samples of a kernel's spatial or frequency magnitude.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    pub domain: Domain,
    pub radii: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub kernel: RadialKernel,
}

impl SpectralProfile {
    fn new(
        domain: Domain,
        radii: Vec<f64>,
        magnitudes: Vec<f64>,
        kernel: RadialKernel,
    ) -> Result<Self, SpectralError> {
        if radii.is_empty() || radii[0] < 0.0 {
            return Err(SpectralError::BadGrid);
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SpectralError::BadGrid);
        }
        if magnitudes.iter().any(|m| !m.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        Ok(SpectralProfile { domain, radii, magnitudes, kernel })
    }
}

/// Energy radii of one kernel under one weighting; infinite when the
/// weighted energy does not concentrate.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub kernel: KernelKind,
    pub spatial_r95: f64,
    pub frequency_r95: f64,
    pub weighting: Weighting,
}

#[derive(Debug)]
pub enum SpectralError {
    /// Total weighted energy grows without bound.
    Divergent { kernel: &'static str, detail: String },
    /// The tail machinery could not certify the requested accuracy.
    NoConvergence { kernel: &'static str, achieved: f64, requested: f64 },
    /// The operation is undefined for this kernel (delta) or parameter
    /// range (modulated Student's t amplitude energies need ω ≥ 1/2).
    Unsupported { kernel: &'static str, detail: &'static str },
    Kernel(KernelError),
    BadGrid,
    NonFinite,
}

impl std::fmt::Display for SpectralError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Divergent { kernel, detail } => {
                write!(f, "divergent energy integral for {kernel}: {detail}")
            }
            Self::NoConvergence { kernel, achieved, requested } => write!(
                f,
                "tail bound {achieved:.3e} above tolerance {requested:.3e} for {kernel}"
            ),
            Self::Unsupported { kernel, detail } => {
                write!(f, "unsupported spectral operation for {kernel}: {detail}")
            }
            Self::Kernel(e) => write!(f, "{e}"),
            Self::BadGrid => write!(f, "grid must be ascending and start at r >= 0"),
            Self::NonFinite => write!(f, "profile contains non-finite magnitudes"),
        }
    }
}

impl std::error::Error for SpectralError {}

impl From<KernelError> for SpectralError {
    fn from(e: KernelError) -> Self {
        SpectralError::Kernel(e)
    }
}

// ── Weighted energy density ────────────────────────────────────────────────

/// W(r) = r²·|g(r)|^p with g the σ = 1 spatial or frequency profile.
pub fn weighted_energy_density(
    kind: KernelKind,
    domain: Domain,
    weighting: Weighting,
    r: f64,
) -> Result<f64, SpectralError> {
    let k = RadialKernel::new(kind, 1.0)?;
    let g = match domain {
        Domain::Spatial => k.eval_spatial(r),
        Domain::Frequency => k.eval_frequency(r)?,
    };
    let m = g.abs();
    Ok(match weighting {
        Weighting::AmplitudeSquared => r * r * m * m,
        Weighting::Amplitude => r * r * m,
    })
}

// ── Integration plans ──────────────────────────────────────────────────────

struct Plan {
    /// Ascending panel boundaries starting at 0.
    breaks: Vec<f64>,
    /// Analytic tail beyond the last break: (value, rigorous bound).
    tail: (f64, f64),
    /// Whether the window-decay probe should vet the tail region.
    probe: bool,
}

fn uniform_breaks(r_max: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let n = (r_max / step).ceil() as usize;
    let mut b: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    if let Some(last) = b.last_mut() {
        *last = r_max;
    }
    for &e in extra {
        if e > 0.0 && e < r_max {
            b.push(e);
        }
    }
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
    b
}

/// Zeros of ω + (1−ω)cos(f₀x) on (0, r_max); empty for ω ≥ 1/2 where the
/// blend never crosses zero.
fn blend_zeros(omega: f64, f0: f64, r_max: f64) -> Vec<f64> {
    if omega >= 0.5 {
        return Vec::new();
    }
    let c = -omega / (1.0 - omega); // cos value at the zero, in (−1, 0]
    let t = c.acos();
    let mut zs = Vec::new();
    let mut m = 0;
    loop {
        let base = 2.0 * std::f64::consts::PI * m as f64;
        for z in [(base + t) / f0, (base + 2.0 * std::f64::consts::PI - t) / f0] {
            if z > 0.0 && z < r_max {
                zs.push(z);
            }
        }
        if base / f0 > r_max {
            break;
        }
        m += 1;
    }
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    zs
}

const PI: f64 = std::f64::consts::PI;

/// Build the σ = 1 integration plan for an energy integral, or decide it
/// cannot converge / is unsupported.
fn energy_plan(
    kind: KernelKind,
    domain: Domain,
    weighting: Weighting,
) -> Result<Plan, SpectralError> {
    let p2 = matches!(weighting, Weighting::AmplitudeSquared);
    let name = kind.name();
    match (domain, kind) {
        (_, KernelKind::Delta) => {
            Err(SpectralError::Unsupported { kernel: "delta", detail: "no energy profile" })
        }

        // spatial
        (Domain::Spatial, KernelKind::Gaussian) => {
            Ok(Plan { breaks: uniform_breaks(16.0, 0.25, &[]), tail: (0.0, 0.0), probe: false })
        }
        (Domain::Spatial, KernelKind::Exponential) => {
            Ok(Plan { breaks: uniform_breaks(160.0, 0.5, &[]), tail: (0.0, 0.0), probe: false })
        }
        (Domain::Spatial, KernelKind::StudentT { .. }) => {
            // W = x²(1+x²)^{-2p}: expand in inverse powers for the tail
            let r = if p2 { 60.0 } else { 120.0 };
            let (tail, bound) = if p2 {
                // x^{-6} − 4x^{-8} + 10x^{-10}
                (
                    power_tail(6, r) - 4.0 * power_tail(8, r) + 10.0 * power_tail(10, r),
                    20.0 * power_tail(12, r),
                )
            } else {
                // x^{-2} − 2x^{-4} + 3x^{-6}
                (
                    power_tail(2, r) - 2.0 * power_tail(4, r) + 3.0 * power_tail(6, r),
                    4.0 * power_tail(8, r),
                )
            };
            Ok(Plan { breaks: uniform_breaks(r, 0.25, &[]), tail: (tail, bound), probe: true })
        }
        (Domain::Spatial, KernelKind::Jinc) => {
            if !p2 {
                // W = 3x|j₁(x)| → 3|cos x| asymptotically: never decays.
                // The probe below would also catch this; report it directly
                // with the window evidence.
                return Err(divergence_evidence(name, domain, weighting));
            }
            // 9 j₁(x)² = 9[(1−cos2x)/(2x⁴) − sin2x/x³ + (1+cos2x)/(2x²)]
            let r = 400.0;
            let (c2, bc2) = osc_tail(Trig::Cos, 2.0, 2, r);
            let (c4, bc4) = osc_tail(Trig::Cos, 2.0, 4, r);
            let (s3, bs3) = osc_tail(Trig::Sin, 2.0, 3, r);
            let tail = 9.0
                * (0.5 * power_tail(4, r) - 0.5 * c4 - s3 + 0.5 * power_tail(2, r) + 0.5 * c2);
            let bound = 9.0 * (bc2 + bc4 + bs3) * 0.5 + 9.0 * bs3;
            Ok(Plan {
                breaks: uniform_breaks(r, PI / 4.0, &[]),
                tail: (tail, bound),
                probe: true,
            })
        }
        (Domain::Spatial, KernelKind::ModulatedGaussian { omega, f0 }) => {
            let zeros = blend_zeros(omega, f0, 18.0);
            let step = (PI / (4.0 * f0)).min(0.25);
            Ok(Plan { breaks: uniform_breaks(18.0, step, &zeros), tail: (0.0, 0.0), probe: false })
        }
        (Domain::Spatial, KernelKind::ModulatedStudentT { omega, f0, .. }) => {
            let step = (PI / (4.0 * f0)).min(0.25);
            if p2 {
                // blend² ≤ 1 and the envelope is x^{-6}: truncation alone
                // meets tolerance
                let r = 250.0;
                Ok(Plan {
                    breaks: uniform_breaks(r, step, &[]),
                    tail: (0.0, power_tail(6, r)),
                    probe: true,
                })
            } else {
                if omega < 0.5 {
                    // |blend| changes sign forever; the analytic tail below
                    // assumes blend ≥ 0
                    return Err(SpectralError::Unsupported {
                        kernel: name,
                        detail: "amplitude-weighted spatial energy needs omega >= 0.5",
                    });
                }
                // W = (x^{-2} − 2x^{-4} + 3x^{-6})·(ω + (1−ω)cos(f₀x))
                let r = 150.0;
                let pow = power_tail(2, r) - 2.0 * power_tail(4, r) + 3.0 * power_tail(6, r);
                let (c2, b2) = osc_tail(Trig::Cos, f0, 2, r);
                let (c4, b4) = osc_tail(Trig::Cos, f0, 4, r);
                let (c6, b6) = osc_tail(Trig::Cos, f0, 6, r);
                let tail = omega * pow + (1.0 - omega) * (c2 - 2.0 * c4 + 3.0 * c6);
                let bound = 4.0 * power_tail(8, r) + (1.0 - omega) * (b2 + 2.0 * b4 + 3.0 * b6);
                let zeros = blend_zeros(omega, f0, r);
                Ok(Plan {
                    breaks: uniform_breaks(r, step, &zeros),
                    tail: (tail, bound),
                    probe: true,
                })
            }
        }

        // frequency
        (Domain::Frequency, KernelKind::Gaussian) => {
            Ok(Plan { breaks: uniform_breaks(16.0, 0.25, &[]), tail: (0.0, 0.0), probe: false })
        }
        (Domain::Frequency, KernelKind::Exponential) => {
            if !p2 {
                // W = k²/(1+k²) → 1: no concentration
                return Err(divergence_evidence(name, domain, weighting));
            }
            let r = 120.0;
            let tail = power_tail(2, r) - 2.0 * power_tail(4, r) + 3.0 * power_tail(6, r);
            Ok(Plan {
                breaks: uniform_breaks(r, 0.25, &[]),
                tail: (tail, 4.0 * power_tail(8, r)),
                probe: true,
            })
        }
        (Domain::Frequency, KernelKind::StudentT { .. }) => {
            let r = if p2 { 90.0 } else { 170.0 };
            Ok(Plan { breaks: uniform_breaks(r, 0.25, &[]), tail: (0.0, 0.0), probe: false })
        }
        (Domain::Frequency, KernelKind::Jinc) => {
            // unit indicator: support ends at the cutoff 1/σ = 1
            Ok(Plan { breaks: uniform_breaks(1.0, 0.05, &[]), tail: (0.0, 0.0), probe: false })
        }
        (Domain::Frequency, KernelKind::ModulatedGaussian { f0, .. }) => {
            Ok(Plan {
                breaks: uniform_breaks(f0 + 18.0, 0.25, &[f0]),
                tail: (0.0, 0.0),
                probe: false,
            })
        }
        (Domain::Frequency, KernelKind::ModulatedStudentT { f0, .. }) => {
            let r = f0 + 180.0;
            Ok(Plan { breaks: uniform_breaks(r, 0.25, &[f0]), tail: (0.0, 0.0), probe: false })
        }
    }
}

/// Build the divergence error carrying the measured window evidence.
fn divergence_evidence(
    kernel: &'static str,
    domain: Domain,
    weighting: Weighting,
) -> SpectralError {
    let kind = match kernel {
        "jinc" => KernelKind::Jinc,
        _ => KernelKind::Exponential,
    };
    let w = |r: f64| weighted_energy_density(kind, domain, weighting, r).unwrap_or(0.0);
    let early: f64 = integrate_smooth(&w, 50.0, 50.0 + 8.0 * PI, 16);
    let late: f64 = integrate_smooth(&w, 400.0, 400.0 + 8.0 * PI, 16);
    SpectralError::Divergent {
        kernel,
        detail: format!(
            "window integrals do not decay: [50, 50+8π] = {early:.4e}, [400, 400+8π] = {late:.4e}"
        ),
    }
}

fn integrate_smooth<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let nodes = gauss_legendre(16);
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

/// Window-decay probe: window integrals of width π must decay like j^{-γ}
/// with γ > 1 for the full integral to converge.
fn probe_decay<F: Fn(f64) -> f64>(
    w: &F,
    r0: f64,
    kernel: &'static str,
) -> Result<(), SpectralError> {
    let window = PI;
    let n = 48;
    let sums: Vec<f64> = (0..n)
        .map(|j| integrate_smooth(w, r0 + j as f64 * window, r0 + (j + 1) as f64 * window, 4))
        .collect();
    let head: f64 = sums[..8].iter().sum::<f64>() / 8.0;
    let tail: f64 = sums[n - 8..].iter().sum::<f64>() / 8.0;
    if head <= 0.0 || tail < 1e-14 * head.max(1e-300) {
        return Ok(()); // decayed to nothing
    }
    let j_head = r0 / window + 4.0;
    let j_tail = r0 / window + (n - 4) as f64;
    let gamma = (head / tail).ln() / (j_tail / j_head).ln();
    if gamma < 1.05 {
        return Err(SpectralError::Divergent {
            kernel,
            detail: format!(
                "window decay exponent {gamma:.3} < 1.05 (head {head:.3e}, tail {tail:.3e})"
            ),
        });
    }
    Ok(())
}

// ── Energy radius ──────────────────────────────────────────────────────────

/// Relative tolerance on the 95% energy ratio.
const ENERGY_RATIO_TOL: f64 = 1e-6;

/// Radius containing 95% of ∫₀^∞ r²|g|^p dr for the σ = 1 profile.
fn energy_radius_95_unit(
    kind: KernelKind,
    domain: Domain,
    weighting: Weighting,
) -> Result<f64, SpectralError> {
    let plan = energy_plan(kind, domain, weighting)?;
    let name = kind.name();
    let w = move |r: f64| {
        weighted_energy_density(kind, domain, weighting, r)
            .expect("plan construction validated the kernel")
    };

    if plan.probe {
        probe_decay(&w, plan.breaks.last().copied().unwrap_or(100.0), name)?;
    }

    // prefix integrals over the panel grid
    let mut prefix = Vec::with_capacity(plan.breaks.len());
    prefix.push(0.0);
    for i in 1..plan.breaks.len() {
        let v = integrate_smooth(&w, plan.breaks[i - 1], plan.breaks[i], 1);
        prefix.push(prefix[i - 1] + v);
    }
    let body = *prefix.last().unwrap();
    let total = body + plan.tail.0;
    if !(total > 0.0) || !total.is_finite() {
        return Err(SpectralError::Divergent {
            kernel: name,
            detail: format!("non-positive or non-finite total {total}"),
        });
    }
    if plan.tail.1 > ENERGY_RATIO_TOL * total {
        return Err(SpectralError::NoConvergence {
            kernel: name,
            achieved: plan.tail.1 / total,
            requested: ENERGY_RATIO_TOL,
        });
    }

    let target = 0.95 * total;
    // find the panel containing the target, then bisect inside it
    let idx = match prefix.iter().position(|&v| v >= target) {
        Some(i) => i,
        None => {
            // 95% sits in the analytic tail region — the radius is beyond
            // the last break; that violates the plan's design margins
            return Err(SpectralError::NoConvergence {
                kernel: name,
                achieved: (total - body) / total,
                requested: 0.05,
            });
        }
    };
    let (mut lo, mut hi) = (plan.breaks[idx - 1], plan.breaks[idx]);
    let base = prefix[idx - 1];
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let v = base + integrate_smooth(&w, plan.breaks[idx - 1], mid, 1);
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Radius containing 95% of the kernel's weighted energy in the requested
/// domain. Spatial radii scale with σ, frequency radii with 1/σ.
pub fn energy_radius_95(
    kernel: &RadialKernel,
    domain: Domain,
    weighting: Weighting,
) -> Result<f64, SpectralError> {
    let unit = energy_radius_95_unit(kernel.kind, domain, weighting)?;
    Ok(match domain {
        Domain::Spatial => unit * kernel.sigma,
        Domain::Frequency => unit / kernel.sigma,
    })
}

// ── Numerical radial Fourier transform ─────────────────────────────────────

/// Asymptotic tail term amp·trig(ω r)/r^k (trig `None` means a pure power).
#[derive(Clone, Copy)]
struct AsymTerm {
    amp: f64,
    trig: Option<(Trig, f64)>,
    k: u32,
}

/// h(r) tail expansion for kinds with algebraic decay; `None` means the
/// kernel decays fast enough that truncation alone suffices.
fn spatial_tail_terms(k: &RadialKernel) -> Option<Vec<AsymTerm>> {
    let s = k.sigma;
    match k.kind {
        KernelKind::StudentT { .. } => Some(vec![
            AsymTerm { amp: s.powi(4), trig: None, k: 4 },
            AsymTerm { amp: -2.0 * s.powi(6), trig: None, k: 6 },
            AsymTerm { amp: 3.0 * s.powi(8), trig: None, k: 8 },
        ]),
        // h = 3σ³ sin(r/σ)/r³ − 3σ² cos(r/σ)/r²
        KernelKind::Jinc => Some(vec![
            AsymTerm { amp: -3.0 * s * s, trig: Some((Trig::Cos, 1.0 / s)), k: 2 },
            AsymTerm { amp: 3.0 * s.powi(3), trig: Some((Trig::Sin, 1.0 / s)), k: 3 },
        ]),
        KernelKind::ModulatedStudentT { omega, f0, .. } => {
            let base = [
                AsymTerm { amp: s.powi(4), trig: None, k: 4 },
                AsymTerm { amp: -2.0 * s.powi(6), trig: None, k: 6 },
            ];
            let mut terms = Vec::new();
            for b in base {
                terms.push(AsymTerm { amp: omega * b.amp, ..b });
                terms.push(AsymTerm {
                    amp: (1.0 - omega) * b.amp,
                    trig: Some((Trig::Cos, f0 / s)),
                    k: b.k,
                });
            }
            Some(terms)
        }
        _ => None,
    }
}

/// ∫_R^∞ trig_a(ω r)/r^k · trig_b(c r) dr via product-to-sum and the
/// by-parts tails. Returns (value, bound).
fn tail_trig_product(
    a: Option<(Trig, f64)>,
    k: u32,
    b_trig: Trig,
    c: f64,
    r: f64,
) -> (f64, f64) {
    match a {
        None => {
            if c <= 1e-12 {
                match b_trig {
                    Trig::Cos => (power_tail(k.max(2), r), 0.0),
                    Trig::Sin => (0.0, 0.0),
                }
            } else {
                osc_tail(b_trig, c, k, r)
            }
        }
        Some((a_trig, omega)) => {
            // product-to-sum: frequencies c ± ω
            let sum_f = c + omega;
            let diff = c - omega;
            let half = |trig: Trig, freq: f64, sign: f64| -> (f64, f64) {
                if freq.abs() <= 1e-9 {
                    match trig {
                        // cos(0·r) = 1 → pure power tail
                        Trig::Cos => (sign * 0.5 * power_tail(k.max(2), r), 0.0),
                        Trig::Sin => (0.0, 0.0),
                    }
                } else {
                    let (v, b) = osc_tail(trig, freq.abs(), k, r);
                    let flip = if freq < 0.0 && matches!(trig, Trig::Sin) { -1.0 } else { 1.0 };
                    (sign * 0.5 * flip * v, 0.5 * b)
                }
            };
            let ((v1, b1), (v2, b2)) = match (a_trig, b_trig) {
                // cos(ω)cos(c) = ½cos((c+ω)) + ½cos((c−ω))
                (Trig::Cos, Trig::Cos) => (half(Trig::Cos, sum_f, 1.0), half(Trig::Cos, diff, 1.0)),
                // cos(ω)sin(c) = ½sin((c+ω)) + ½sin((c−ω))
                (Trig::Cos, Trig::Sin) => (half(Trig::Sin, sum_f, 1.0), half(Trig::Sin, diff, 1.0)),
                // sin(ω)cos(c) = ½sin((ω+c)) + ½sin((ω−c))
                (Trig::Sin, Trig::Cos) => {
                    (half(Trig::Sin, sum_f, 1.0), half(Trig::Sin, -diff, 1.0))
                }
                // sin(ω)sin(c) = ½cos((ω−c)) − ½cos((ω+c))
                (Trig::Sin, Trig::Sin) => {
                    (half(Trig::Cos, diff, 1.0), half(Trig::Cos, sum_f, -1.0))
                }
            };
            (v1 + v2, b1 + b2)
        }
    }
}

/// Numerically transform a kernel's spatial profile.
///
/// Dimension 1: F(f) = 2∫₀^∞ h(r)cos(2πfr)dr. Dimension 3:
/// F(f) = 4π∫₀^∞ h(r)·r²·sinc(2πfr)dr, evaluated as (2/f)∫h·r·sin(2πfr)dr.
/// Oscillation-aware panel subdivision plus analytic by-parts tails for the
/// algebraically decaying kinds; absolute accuracy is certified against
/// `tol` per grid point and a violation reports `NoConvergence`.
pub fn numerical_radial_ft(
    kernel: &RadialKernel,
    dimension: u8,
    f_grid: &[f64],
) -> Result<SpectralProfile, SpectralError> {
    assert!(dimension == 1 || dimension == 3, "dimension must be 1 or 3");
    if f_grid.is_empty() || f_grid.windows(2).any(|w| w[1] <= w[0]) || f_grid[0] < 0.0 {
        return Err(SpectralError::BadGrid);
    }
    if matches!(kernel.kind, KernelKind::Delta) {
        return Err(SpectralError::Unsupported {
            kernel: "delta",
            detail: "no integrable spatial profile",
        });
    }
    let s = kernel.sigma;
    let name = kernel.kind.name();

    // base integration reach and the kernel's own oscillation scale; slow
    // tails grow the reach when the by-parts bound misses the tolerance
    let (r_base, own_osc, can_extend) = match kernel.kind {
        KernelKind::Gaussian | KernelKind::ModulatedGaussian { .. } => (16.0 * s, None, false),
        KernelKind::Exponential => (60.0 * s, None, false),
        KernelKind::StudentT { .. } | KernelKind::ModulatedStudentT { .. } => {
            (80.0 * s, None, true)
        }
        KernelKind::Jinc => (700.0 * s, Some(1.0 / s), true),
        KernelKind::Delta => unreachable!(),
    };
    let tail_terms = spatial_tail_terms(kernel);

    let k = *kernel;
    let point = |f: f64, r_max: f64| -> Result<(f64, f64), SpectralError> {
        let c = 2.0 * PI * f;
        // panel length: an eighth of the fastest oscillation present
        let mut panel = (0.35 * s).min(r_base / 16.0);
        if c > 1e-12 {
            panel = panel.min(0.25 * PI / c);
        }
        if let Some(w0) = own_osc {
            panel = panel.min(0.25 * PI / w0);
        }
        if let Some((_, f0)) = k.kind.modulation() {
            panel = panel.min(0.25 * PI / (f0 / s));
        }
        let panels = (r_max / panel).ceil() as usize;

        let (body, tail, bound) = if dimension == 1 {
            let g = |r: f64| k.eval_spatial(r) * (c * r).cos();
            let body = 2.0 * integrate_smooth(&g, 0.0, r_max, panels);
            let (tail, bound) = match &tail_terms {
                None => (0.0, 0.0),
                Some(terms) => {
                    let mut t = 0.0;
                    let mut b = 0.0;
                    for term in terms {
                        let (v, e) = tail_trig_product(term.trig, term.k, Trig::Cos, c, r_max);
                        t += term.amp * v;
                        b += term.amp.abs() * e;
                    }
                    (2.0 * t, 2.0 * b)
                }
            };
            (body, tail, bound)
        } else if c <= 1e-12 {
            // F(0) = 4π ∫ h r² dr
            let g = |r: f64| k.eval_spatial(r) * r * r;
            if matches!(k.kind, KernelKind::Jinc) {
                // r²·h ~ cos(r/σ): conditionally divergent at f = 0
                return Err(SpectralError::NoConvergence {
                    kernel: name,
                    achieved: f64::INFINITY,
                    requested: 0.0,
                });
            }
            let body = 4.0 * PI * integrate_smooth(&g, 0.0, r_max, panels);
            let (tail, bound) = match &tail_terms {
                None => (0.0, 0.0),
                Some(terms) => {
                    let mut t = 0.0;
                    let mut b = 0.0;
                    for term in terms {
                        if term.k < 4 && term.trig.is_none() {
                            continue;
                        }
                        let k_eff = term.k - 2;
                        let (v, e) = tail_trig_product(term.trig, k_eff.max(1), Trig::Cos, 0.0, r_max);
                        t += term.amp * v;
                        b += term.amp.abs() * e;
                    }
                    (4.0 * PI * t, 4.0 * PI * b)
                }
            };
            (body, tail, bound)
        } else {
            let g = |r: f64| k.eval_spatial(r) * r * (c * r).sin();
            let body = (2.0 / f) * integrate_smooth(&g, 0.0, r_max, panels);
            let (tail, bound) = match &tail_terms {
                None => (0.0, 0.0),
                Some(terms) => {
                    let mut t = 0.0;
                    let mut b = 0.0;
                    for term in terms {
                        // ×r lowers the power by one
                        let (v, e) =
                            tail_trig_product(term.trig, term.k - 1, Trig::Sin, c, r_max);
                        t += term.amp * v;
                        b += term.amp.abs() * e;
                    }
                    ((2.0 / f) * t, (2.0 / f) * b)
                }
            };
            (body, tail, bound)
        };
        Ok((body + tail, bound))
    };

    let values = par::map_range(f_grid.len(), |i| -> Result<f64, SpectralError> {
        let f = f_grid[i];
        let mut last = Err(SpectralError::BadGrid);
        for scale in [1.0, 4.0, 16.0] {
            if scale > 1.0 && !can_extend {
                break;
            }
            let (value, bound) = point(f, r_base * scale)?;
            // the op's contract is 1e-6 relative; certify a decade tighter
            let tol_point = 1e-7 * value.abs().max(1e-2);
            if bound <= tol_point {
                return Ok(value);
            }
            last = Err(SpectralError::NoConvergence {
                kernel: name,
                achieved: bound,
                requested: tol_point,
            });
        }
        last
    });

    let mut magnitudes = Vec::with_capacity(values.len());
    for v in values {
        magnitudes.push(v?);
    }
    SpectralProfile::new(Domain::Frequency, f_grid.to_vec(), magnitudes, *kernel)
}

/// Sample a kernel's spatial profile on a grid (plumbing for `analyze`).
pub fn spatial_profile(
    kernel: &RadialKernel,
    r_grid: &[f64],
) -> Result<SpectralProfile, SpectralError> {
    let mags = r_grid.iter().map(|&r| kernel.eval_spatial(r)).collect();
    SpectralProfile::new(Domain::Spatial, r_grid.to_vec(), mags, *kernel)
}

/// Sample a kernel's analytic frequency profile on a wavenumber grid.
pub fn frequency_profile(
    kernel: &RadialKernel,
    k_grid: &[f64],
) -> Result<SpectralProfile, SpectralError> {
    let mut mags = Vec::with_capacity(k_grid.len());
    for &kk in k_grid {
        mags.push(kernel.eval_frequency(kk)?);
    }
    SpectralProfile::new(Domain::Frequency, k_grid.to_vec(), mags, *kernel)
}

// ── Decay classification ───────────────────────────────────────────────────

/// Measured asymptotic behavior of a kernel's spatial profile.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// R² of fitting log h against a + b·r² (Gaussian-type decay).
    pub quadratic_log_r2: f64,
    /// Slope of log|h| (or its envelope maxima for oscillatory kernels)
    /// against log r on [5σ, 50σ].
    pub envelope_slope: f64,
}

/// Fit the decay law of a kernel's spatial profile on [5σ, 50σ].
pub fn decay_fit(kernel: &RadialKernel) -> Result<DecayFit, SpectralError> {
    let s = kernel.sigma;
    let (xs, ys): (Vec<f64>, Vec<f64>) = match kernel.kind {
        KernelKind::Delta => {
            return Err(SpectralError::Unsupported { kernel: "delta", detail: "no decay law" })
        }
        KernelKind::Jinc => {
            // sample the envelope at local maxima of |h| between
            // consecutive oscillation half-periods
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut lo = 5.0 * s;
            while lo < 50.0 * s {
                let hi = lo + PI * s;
                let mut best = 0.0;
                let mut best_r = lo;
                let steps = 64;
                for i in 0..=steps {
                    let r = lo + (hi - lo) * i as f64 / steps as f64;
                    let v = kernel.eval_spatial(r).abs();
                    if v > best {
                        best = v;
                        best_r = r;
                    }
                }
                xs.push(best_r.ln());
                ys.push(best.ln());
                lo = hi;
            }
            (xs, ys)
        }
        _ => {
            let n = 200;
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for i in 0..n {
                let r = 5.0 * s + 45.0 * s * i as f64 / (n - 1) as f64;
                let v = kernel.eval_spatial(r).abs();
                if v > 1e-280 {
                    xs.push(r.ln());
                    ys.push(v.ln());
                }
            }
            (xs, ys)
        }
    };

    let envelope_slope = linear_slope(&xs, &ys);

    // quadratic-in-r fit of log h (exact for Gaussians)
    let mut qx = Vec::new();
    let mut qy = Vec::new();
    // reuse the log-log samples: r = e^x
    for (x, y) in xs.iter().zip(ys.iter()) {
        qx.push((x.exp() / s).powi(2));
        qy.push(*y);
    }
    let r2 = linear_fit_r2(&qx, &qy);
    Ok(DecayFit { quadratic_log_r2: r2, envelope_slope })
}

fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let slope = linear_slope(xs, ys);
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let e = y - (intercept + slope * x);
        ss_res += e * e;
        ss_tot += (y - my) * (y - my);
    }
    1.0 - ss_res / ss_tot
}

// ── Calibration against the published concentration table ──────────────────

/// How each kernel's σ is normalized before measuring its energy radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleNorm {
    /// σ = 1 for every kernel.
    SigmaOne,
    /// σ chosen so the spatial FWHM is 1.
    UnitFwhm,
    /// σ chosen so the frequency r95 is 1.
    UnitFreqR95,
}

impl ScaleNorm {
    pub fn name(&self) -> &'static str {
        match self {
            ScaleNorm::SigmaOne => "sigma-1",
            ScaleNorm::UnitFwhm => "unit-fwhm",
            ScaleNorm::UnitFreqR95 => "unit-freq-r95",
        }
    }
}

/// Published 95%-energy numbers for (Gaussian, Student's t ν = 1, Jinc):
/// spatial then frequency.
pub const TABLE_TARGETS: [[f64; 3]; 2] = [[2.77, 3.68, 5.59], [2.77, 2.99, 1.90]];

/// One candidate convention's measured six numbers and their quality.
#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub weighting: Weighting,
    pub scale_norm: ScaleNorm,
    /// values[0] = spatial (G, T, J); values[1] = frequency. +∞ marks a
    /// divergent integral.
    pub values: [[f64; 3]; 2],
    /// max relative deviation over the six targets (divergent entries are
    /// capped at 1e3).
    pub max_rel_dev: f64,
    pub spatial_ordering_holds: bool,
    pub frequency_ordering_holds: bool,
    pub gaussian_anchor_ok: bool,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub candidates: Vec<CandidateReport>,
    pub chosen: usize,
}

impl CalibrationResult {
    pub fn chosen(&self) -> &CandidateReport {
        &self.candidates[self.chosen]
    }
}

fn unit_values(kind: KernelKind, weighting: Weighting) -> (f64, f64) {
    let sp = energy_radius_95_unit(kind, Domain::Spatial, weighting)
        .unwrap_or(f64::INFINITY);
    let fr = energy_radius_95_unit(kind, Domain::Frequency, weighting)
        .unwrap_or(f64::INFINITY);
    (sp, fr)
}

/// Search {weighting} × {per-kernel scale normalization} for the
/// convention that best reproduces the published six numbers; orderings
/// and the Gaussian anchor take precedence over raw deviation because the
/// table's own normalization is unstated.
pub fn calibrate_convention() -> CalibrationResult {
    let kinds = [KernelKind::Gaussian, KernelKind::student_t(), KernelKind::Jinc];
    let weightings = [Weighting::AmplitudeSquared, Weighting::Amplitude];
    let norms = [ScaleNorm::SigmaOne, ScaleNorm::UnitFwhm, ScaleNorm::UnitFreqR95];

    let mut candidates = Vec::new();
    for &weighting in &weightings {
        // unit-σ radii, shared by all normalizations
        let unit: Vec<(f64, f64)> =
            kinds.iter().map(|&k| unit_values(k, weighting)).collect();
        for &norm in &norms {
            let mut values = [[0.0; 3]; 2];
            for (i, &kind) in kinds.iter().enumerate() {
                let sigma = match norm {
                    ScaleNorm::SigmaOne => 1.0,
                    ScaleNorm::UnitFwhm => {
                        let f = RadialKernel::new(kind, 1.0)
                            .unwrap()
                            .fwhm()
                            .expect("fwhm defined for table kernels");
                        1.0 / f
                    }
                    ScaleNorm::UnitFreqR95 => unit[i].1,
                };
                values[0][i] = unit[i].0 * sigma;
                values[1][i] = unit[i].1 / sigma;
            }
            let mut max_dev = 0.0_f64;
            for d in 0..2 {
                for i in 0..3 {
                    let dev = if values[d][i].is_finite() {
                        (values[d][i] - TABLE_TARGETS[d][i]).abs() / TABLE_TARGETS[d][i]
                    } else {
                        1e3
                    };
                    max_dev = max_dev.max(dev);
                }
            }
            let sp = values[0];
            let fr = values[1];
            candidates.push(CandidateReport {
                weighting,
                scale_norm: norm,
                values,
                max_rel_dev: max_dev,
                spatial_ordering_holds: sp[0] < sp[1] && sp[1] < sp[2],
                frequency_ordering_holds: fr[2] < fr[0] && fr[0] < fr[1],
                gaussian_anchor_ok: values[0][0].is_finite()
                    && (values[0][0] - TABLE_TARGETS[0][0]).abs() / TABLE_TARGETS[0][0] <= 0.05,
            });
        }
    }

    // rank: both orderings > anchor > deviation; stable over candidate order
    let mut best = 0;
    let mut best_key = (false, false, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let key = (
            c.spatial_ordering_holds && c.frequency_ordering_holds,
            c.gaussian_anchor_ok,
            c.max_rel_dev,
        );
        let better = (key.0 && !best_key.0)
            || (key.0 == best_key.0 && key.1 && !best_key.1)
            || (key.0 == best_key.0 && key.1 == best_key.1 && key.2 < best_key.2);
        if better {
            best = i;
            best_key = key;
        }
    }
    CalibrationResult { candidates, chosen: best }
}

/// Energy radii for every kernel kind under one convention (CLI table).
/// Delta's row is the analytic limit: all spatial energy at r = 0, no
/// frequency concentration.
pub fn energy_table(weighting: Weighting, omega: f64) -> Vec<EnergyReport> {
    let kinds = [
        KernelKind::Delta,
        KernelKind::Gaussian,
        KernelKind::Exponential,
        KernelKind::student_t(),
        KernelKind::Jinc,
        KernelKind::modulated_gaussian(omega),
        KernelKind::modulated_student_t(omega),
    ];
    kinds
        .iter()
        .map(|&kind| {
            if matches!(kind, KernelKind::Delta) {
                return EnergyReport {
                    kernel: kind,
                    spatial_r95: 0.0,
                    frequency_r95: f64::INFINITY,
                    weighting,
                };
            }
            let (sp, fr) = unit_values(kind, weighting);
            EnergyReport { kernel: kind, spatial_r95: sp, frequency_r95: fr, weighting }
        })
        .collect()
}
