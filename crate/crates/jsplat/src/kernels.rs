//! The radial reconstruction-kernel family: spatial profiles and their
//! analytic frequency responses.
//!
//! Every kernel is peak-normalized (value 1 at r = 0) — opacity is a
//! separate learnable amplitude in the renderer, so kernels carry shape
//! only. The frequency variable is the *angular wavenumber* k (radians per
//! world unit): under that convention the Jinc kernel's passband cutoff is
//! exactly 1/σ, the Gaussian pair is e^{−r²/2σ²} ↔ e^{−σ²k²/2}, and a
//! spatial modulation by cos(f₀·r/σ) shifts the spectrum by f₀/σ. The
//! numerical radial transforms in [`crate::spectral`] use the ordinary
//! 2πf convention; tests convert axes via k = 2πf.

use crate::special::{mod_bessel_k_half, sph_bessel_j1_over_x};

/// Half the Gaussian FWHM at σ = 1: √(2 ln 2) ≈ 1.17741. Default modulation
/// shift for the modulated Gaussian.
pub const MOD_GAUSSIAN_F0: f64 = 1.177_410_022_515_474_7;
/// Half the Student's t (ν = 1) FWHM at σ = 1: ln 2 ≈ 0.69315. Default
/// modulation shift for the modulated Student's t.
pub const MOD_STUDENT_T_F0: f64 = std::f64::consts::LN_2;
/// Default blend weight between a base kernel and its cosine modulation.
pub const DEFAULT_OMEGA: f64 = 0.5;

// ── Errors ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    /// A constructor argument violated its range constraint.
    InvalidParameter { what: &'static str, value: f64 },
    /// The requested operation has no closed form for this kind
    /// (e.g. frequency response of Student's t with ν ≠ 1, FWHM of Delta).
    Unsupported { kind: &'static str, op: &'static str },
}

impl std::fmt::Display for KernelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::InvalidParameter { what, value } => {
                write!(f, "invalid kernel parameter {what} = {value}")
            }
            Self::Unsupported { kind, op } => {
                write!(f, "operation `{op}` is not supported for kernel kind {kind}")
            }
        }
    }
}

impl std::error::Error for KernelError {}

// ── Kernel kinds ───────────────────────────────────────────────────────────

/// Which reconstruction kernel, with its shape parameters.
///
/// `omega` ∈ [0, 1] blends a modulated kernel between the pure
/// cosine-modulated profile (ω = 0) and its base (ω = 1); `f0` is the
/// dimensionless modulation frequency applied to the Mahalanobis radius
/// r/σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Delta,
    Gaussian,
    Exponential,
    StudentT { nu: f64 },
    Jinc,
    ModulatedGaussian { omega: f64, f0: f64 },
    ModulatedStudentT { nu: f64, omega: f64, f0: f64 },
}

impl KernelKind {
    /// Student's t with the artifact-wide default ν = 1.
    pub fn student_t() -> Self {
        KernelKind::StudentT { nu: 1.0 }
    }

    /// Modulated Gaussian with default f₀ = half the base FWHM.
    pub fn modulated_gaussian(omega: f64) -> Self {
        KernelKind::ModulatedGaussian {
            omega,
            f0: MOD_GAUSSIAN_F0,
        }
    }

    /// Modulated Student's t (ν = 1) with default f₀ = half the base FWHM.
    pub fn modulated_student_t(omega: f64) -> Self {
        KernelKind::ModulatedStudentT {
            nu: 1.0,
            omega,
            f0: MOD_STUDENT_T_F0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Delta => "delta",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Exponential => "exponential",
            KernelKind::StudentT { .. } => "student-t",
            KernelKind::Jinc => "jinc",
            KernelKind::ModulatedGaussian { .. } => "modulated-gaussian",
            KernelKind::ModulatedStudentT { .. } => "modulated-student-t",
        }
    }

    /// The base kernel a modulated kind wraps; identity otherwise.
    pub fn base(&self) -> KernelKind {
        match *self {
            KernelKind::ModulatedGaussian { .. } => KernelKind::Gaussian,
            KernelKind::ModulatedStudentT { nu, .. } => KernelKind::StudentT { nu },
            other => other,
        }
    }

    /// (ω, f₀) for modulated kinds.
    pub fn modulation(&self) -> Option<(f64, f64)> {
        match *self {
            KernelKind::ModulatedGaussian { omega, f0 }
            | KernelKind::ModulatedStudentT { omega, f0, .. } => Some((omega, f0)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), KernelError> {
        let check_nu = |nu: f64| {
            if nu > 0.0 && nu.is_finite() {
                Ok(())
            } else {
                Err(KernelError::InvalidParameter { what: "nu", value: nu })
            }
        };
        match *self {
            KernelKind::StudentT { nu } => check_nu(nu),
            KernelKind::ModulatedGaussian { omega, f0 } => validate_modulation(omega, f0),
            KernelKind::ModulatedStudentT { nu, omega, f0 } => {
                check_nu(nu)?;
                validate_modulation(omega, f0)
            }
            _ => Ok(()),
        }
    }
}

fn validate_modulation(omega: f64, f0: f64) -> Result<(), KernelError> {
    if !(0.0..=1.0).contains(&omega) || !omega.is_finite() {
        return Err(KernelError::InvalidParameter { what: "omega", value: omega });
    }
    if !(f0 > 0.0) || !f0.is_finite() {
        return Err(KernelError::InvalidParameter { what: "f0", value: f0 });
    }
    Ok(())
}

/// The blend factor ω + (1−ω)·cos(f₀·x) applied to a base kernel, with x
/// the dimensionless (Mahalanobis) radius.
pub fn modulation_factor(omega: f64, f0: f64, x: f64) -> f64 {
    omega + (1.0 - omega) * (f0 * x).cos()
}

// ── Radial kernels ─────────────────────────────────────────────────────────

/// A kernel kind with an isotropic world-unit scale σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialKernel {
    pub kind: KernelKind,
    pub sigma: f64,
}

impl RadialKernel {
    pub fn new(kind: KernelKind, sigma: f64) -> Result<Self, KernelError> {
        kind.validate()?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(KernelError::InvalidParameter { what: "sigma", value: sigma });
        }
        Ok(RadialKernel { kind, sigma })
    }

    /// Radial spatial profile, peak-normalized to 1 at r = 0.
    ///
    /// Gaussian e^{−r²/2σ²}; exponential e^{−r/σ}; Student's t
    /// (1 + r²/(νσ²))^{−(ν+3)/2}; Jinc 3·j₁(r/σ)/(r/σ); modulated kinds
    /// multiply their base by ω + (1−ω)cos(f₀·r/σ). Delta is 1 at r = 0 and
    /// 0 elsewhere (documentation value; nothing renders it).
    pub fn eval_spatial(&self, r: f64) -> f64 {
        let x = r / self.sigma;
        match self.kind {
            KernelKind::Delta => {
                if r == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian => (-0.5 * x * x).exp(),
            KernelKind::Exponential => (-x).exp(),
            KernelKind::StudentT { nu } => (1.0 + x * x / nu).powf(-0.5 * (nu + 3.0)),
            KernelKind::Jinc => 3.0 * sph_bessel_j1_over_x(x),
            KernelKind::ModulatedGaussian { omega, f0 } => {
                (-0.5 * x * x).exp() * modulation_factor(omega, f0, x)
            }
            KernelKind::ModulatedStudentT { nu, omega, f0 } => {
                (1.0 + x * x / nu).powf(-0.5 * (nu + 3.0)) * modulation_factor(omega, f0, x)
            }
        }
    }

    /// Analytic radial frequency magnitude at angular wavenumber k ≥ 0,
    /// normalized to 1 at DC (at the passband for Jinc).
    ///
    /// Pairs: Gaussian ↔ e^{−σ²k²/2}; exponential ↔ 1/(1+σ²k²) (its 1D
    /// transform); Student's t (ν = 1) ↔ e^{−σk} (its 3D radial transform);
    /// Jinc ↔ the unit indicator of k ≤ 1/σ; modulated kinds split into
    /// ω·B(k) + ((1−ω)/2)(B(|k−f₀/σ|) + B(k+f₀/σ)) with B the base profile.
    /// Student's t with ν ≠ 1 has no elementary closed form here and
    /// reports `Unsupported`.
    pub fn eval_frequency(&self, k: f64) -> Result<f64, KernelError> {
        let s = self.sigma;
        match self.kind {
            KernelKind::Delta => Ok(1.0),
            KernelKind::Gaussian => Ok((-0.5 * (s * k) * (s * k)).exp()),
            KernelKind::Exponential => Ok(1.0 / (1.0 + (s * k) * (s * k))),
            KernelKind::StudentT { nu } => student_t_frequency(nu, s * k.abs()),
            KernelKind::Jinc => Ok(if k.abs() <= 1.0 / s { 1.0 } else { 0.0 }),
            KernelKind::ModulatedGaussian { omega, f0 }
            | KernelKind::ModulatedStudentT { omega, f0, .. } => {
                let base = RadialKernel { kind: self.kind.base(), sigma: s };
                let shift = f0 / s;
                let b0 = base.eval_frequency(k)?;
                let bm = base.eval_frequency((k - shift).abs())?;
                let bp = base.eval_frequency(k + shift)?;
                Ok(omega * b0 + 0.5 * (1.0 - omega) * (bm + bp))
            }
        }
    }

    /// Full width at half maximum of the spatial profile.
    ///
    /// Gaussian and Student's t (ν = 1) use the closed forms 2σ√(2 ln 2)
    /// and 2σ ln 2; every other kind locates the first half-maximum
    /// crossing by bisection. Delta has no crossing.
    pub fn fwhm(&self) -> Result<f64, KernelError> {
        match self.kind {
            KernelKind::Gaussian => Ok(2.0 * self.sigma * MOD_GAUSSIAN_F0),
            KernelKind::StudentT { nu } if (nu - 1.0).abs() < 1e-12 => {
                Ok(2.0 * self.sigma * MOD_STUDENT_T_F0)
            }
            KernelKind::Delta => Err(KernelError::Unsupported { kind: "delta", op: "fwhm" }),
            _ => self.fwhm_bisection(),
        }
    }

    fn fwhm_bisection(&self) -> Result<f64, KernelError> {
        // March outward to bracket the first crossing of 0.5, then bisect.
        let step = self.sigma / 8.0;
        let mut lo = 0.0;
        let mut hi = step;
        let mut found = false;
        for i in 1..=800 {
            hi = step * i as f64;
            if self.eval_spatial(hi) < 0.5 {
                lo = hi - step;
                found = true;
                break;
            }
        }
        if !found {
            return Err(KernelError::Unsupported {
                kind: self.kind.name(),
                op: "fwhm (no half-maximum crossing within 100 sigma)",
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval_spatial(mid) >= 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * self.sigma {
                break;
            }
        }
        Ok(lo + hi) // 2 · r_half
    }
}

/// Student's t frequency profile. Only ν = 1 has the elementary form
/// e^{−σk} ∝ √(σk)·K_{1/2}(σk); the artifact fixes ν = 1 throughout.
fn student_t_frequency(nu: f64, sk: f64) -> Result<f64, KernelError> {
    if (nu - 1.0).abs() > 1e-12 {
        return Err(KernelError::Unsupported {
            kind: "student-t (nu != 1)",
            op: "eval_frequency",
        });
    }
    if sk == 0.0 {
        return Ok(1.0);
    }
    // Written via K_{1/2} to keep the DC-normalized transform explicit:
    // √(2/π)·√(σk)·K_{1/2}(σk) = e^{−σk}.
    let k_half = mod_bessel_k_half(sk).map_err(|_| KernelError::InvalidParameter {
        what: "frequency",
        value: sk,
    })?;
    Ok((2.0 / std::f64::consts::PI).sqrt() * sk.sqrt() * k_half)
}

// ── Tests ──────────────────────────────────────────────────────────────────
