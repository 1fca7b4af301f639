//! Camera geometry and the whitened-ray forward model.
//!
//! A primitive's covariance factors as Σ = R S Sᵀ Rᵀ. Mapping a world ray
//! x(t) = a + t·b through the whitening transform W = S⁻¹Rᵀ gives
//! m = W(a − μ) and n = W·b, and the closest-approach parameter
//! α = ‖m × n‖/‖n‖ — the whitened perpendicular distance from the kernel
//! center to the ray. The ray integral of the Jinc kernel then has the
//! closed form I = π·J₁(α)/(‖n‖·α).
//!
//! Setting a threshold α = q and eliminating the ray yields a conic
//! u_hᵀ H u_h = 0 in homogeneous pixel coordinates with
//! H = N − (‖m‖² − q²)·Q, N = Bᵀm mᵀB, Q = BᵀB, n = B·u_h. When that conic
//! is a real ellipse it bounds the splat's footprint on the image plane.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3, Vector4};

use crate::special::cyl_bessel_j1;

/// Smallest α at which the closed forms are evaluated directly; below it
/// the even series in α is used (shared with the backward pass).
pub const ALPHA_SERIES_CUTOFF: f64 = 1e-6;

// ── Errors ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub enum GeomError {
    /// Rotation failed the orthonormality / determinant check.
    NonOrthonormal { deviation: f64 },
    /// Intrinsics or image size out of range.
    InvalidCamera { what: &'static str, value: f64 },
    /// Pose fields non-finite or scales outside [1e-7, 1e7].
    InvalidPose { what: &'static str, value: f64 },
    /// A ray with zero direction cannot be whitened.
    DegenerateRay,
}

impl std::fmt::Display for GeomError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonOrthonormal { deviation } => {
                write!(f, "rotation is not orthonormal (deviation {deviation:.3e})")
            }
            Self::InvalidCamera { what, value } => write!(f, "invalid camera {what} = {value}"),
            Self::InvalidPose { what, value } => write!(f, "invalid pose {what} = {value}"),
            Self::DegenerateRay => write!(f, "degenerate ray: zero direction"),
        }
    }
}

impl std::error::Error for GeomError {}

// ── Camera ─────────────────────────────────────────────────────────────────

/// Pinhole camera: intrinsics (fx, fy, cx, cy) in pixels plus the
/// world→camera pose (R_c, t).
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World→camera rotation.
    pub rot: Matrix3<f64>,
    /// Camera-frame translation: p_cam = R_c · p_world + t.
    pub t: Vector3<f64>,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rot: Matrix3<f64>,
        t: Vector3<f64>,
        width: u32,
        height: u32,
    ) -> Result<Self, GeomError> {
        if !(fx > 0.0) || !fx.is_finite() {
            return Err(GeomError::InvalidCamera { what: "fx", value: fx });
        }
        if !(fy > 0.0) || !fy.is_finite() {
            return Err(GeomError::InvalidCamera { what: "fy", value: fy });
        }
        if width == 0 || height == 0 {
            return Err(GeomError::InvalidCamera { what: "size", value: 0.0 });
        }
        let dev = orthonormality_deviation(&rot);
        if dev > 1e-9 || rot.determinant() < 0.0 {
            return Err(GeomError::NonOrthonormal { deviation: dev });
        }
        Ok(Camera { fx, fy, cx, cy, rot, t, width, height })
    }

    /// Camera placed at `eye`, looking at `target`, image axes derived from
    /// `up`. Principal point defaults to the image center.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeomError> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or(GeomError::InvalidCamera { what: "look direction", value: 0.0 })?;
        let x = up
            .cross(&z)
            .try_normalize(1e-12)
            .ok_or(GeomError::InvalidCamera { what: "up direction", value: 0.0 })?;
        let y = z.cross(&x);
        let rot = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let t = -rot * eye;
        Camera::new(
            focal,
            focal,
            0.5 * width as f64,
            0.5 * height as f64,
            rot,
            t,
            width,
            height,
        )
    }

    /// Camera center in world coordinates: −R_cᵀ t.
    pub fn center_world(&self) -> Vector3<f64> {
        -(self.rot.transpose() * self.t)
    }

    /// K⁻¹ for the homogeneous pixel [u, v, 1]ᵀ.
    pub fn k_inv(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// The world ray through pixel (u, v): origin a = −R_cᵀt and direction
    /// b = R_cᵀ K⁻¹ [u, v, 1]ᵀ. `b` is deliberately *not* normalized: the
    /// ‖n‖ factor in the ray integral carries this magnitude.
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Vector3<f64>, Vector3<f64>) {
        let a = self.center_world();
        let d = self.k_inv() * Vector3::new(u, v, 1.0);
        let b = self.rot.transpose() * d;
        (a, b)
    }

    /// World point → camera frame.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rot * p + self.t
    }

    /// World point → pixel coordinates and camera depth; `None` behind the
    /// camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
        let pc = self.to_camera(p);
        if pc.z <= 0.0 {
            return None;
        }
        Some((
            Vector2::new(
                self.fx * pc.x / pc.z + self.cx,
                self.fy * pc.y / pc.z + self.cy,
            ),
            pc.z,
        ))
    }
}

fn orthonormality_deviation(r: &Matrix3<f64>) -> f64 {
    let g = r.transpose() * r - Matrix3::identity();
    g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

// ── Primitive pose ─────────────────────────────────────────────────────────

/// Center, orientation and per-axis log-scales of one primitive;
/// Σ = R·diag(e^{2s})·Rᵀ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitivePose {
    pub mu: Vector3<f64>,
    /// Unit quaternion (w, x, y, z); renormalized on construction.
    pub quat: Vector4<f64>,
    pub log_scales: Vector3<f64>,
}

impl PrimitivePose {
    pub fn new(
        mu: Vector3<f64>,
        quat: Vector4<f64>,
        log_scales: Vector3<f64>,
    ) -> Result<Self, GeomError> {
        if !mu.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidPose { what: "mu", value: f64::NAN });
        }
        let norm = quat.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GeomError::InvalidPose { what: "quat", value: norm });
        }
        for &s in log_scales.iter() {
            // exp(s) must stay within [1e-7, 1e7]
            if !s.is_finite() || s.abs() > 16.118_095_650_958_32 {
                return Err(GeomError::InvalidPose { what: "log_scale", value: s });
            }
        }
        Ok(PrimitivePose { mu, quat: quat / norm, log_scales })
    }

    /// Isotropic pose: identity rotation, uniform scale.
    pub fn isotropic(mu: Vector3<f64>, sigma: f64) -> Result<Self, GeomError> {
        PrimitivePose::new(
            mu,
            Vector4::new(1.0, 0.0, 0.0, 0.0),
            Vector3::repeat(sigma.ln()),
        )
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_from_unit_quat(&self.quat)
    }

    pub fn scales(&self) -> Vector3<f64> {
        self.log_scales.map(f64::exp)
    }

    /// Σ = R S Sᵀ Rᵀ.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation();
        let d = Matrix3::from_diagonal(&self.log_scales.map(|s| (2.0 * s).exp()));
        r * d * r.transpose()
    }

    /// Cached transforms consumed by whitening and the backward pass.
    pub fn geometry(&self) -> PoseGeometry {
        let rotation = self.rotation();
        let scales = self.scales();
        let inv_scales = scales.map(|s| 1.0 / s);
        // W = S⁻¹ Rᵀ (rows of Rᵀ scaled), RS = R S (columns of R scaled)
        let mut whiten = rotation.transpose();
        let mut rs = rotation;
        for i in 0..3 {
            for j in 0..3 {
                whiten[(i, j)] *= inv_scales[i];
                rs[(j, i)] *= scales[i];
            }
        }
        PoseGeometry { rotation, scales, whiten, rs }
    }
}

/// Rotation matrix of a unit quaternion (w, x, y, z).
pub fn rotation_from_unit_quat(q: &Vector4<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Per-primitive transforms derived from a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseGeometry {
    pub rotation: Matrix3<f64>,
    pub scales: Vector3<f64>,
    /// W = S⁻¹Rᵀ; maps world offsets into the whitened frame.
    pub whiten: Matrix3<f64>,
    /// R·S; (RS)⁻ᵀ = W ᵀ appears in the μ-gradient.
    pub rs: Matrix3<f64>,
}

// ── Whitened rays and the line integral ────────────────────────────────────

/// A ray in the kernel-whitened frame: m = W(a−μ), n = W·b, and the
/// closest-approach parameter α = ‖m×n‖/‖n‖.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhitenedRay {
    pub m: Vector3<f64>,
    pub n: Vector3<f64>,
    pub alpha: f64,
}

/// Whiten a world ray against a pose. Errors on b = 0.
pub fn whiten(pose: &PrimitivePose, a: &Vector3<f64>, b: &Vector3<f64>) -> Result<WhitenedRay, GeomError> {
    whiten_cached(&pose.geometry(), &pose.mu, a, b)
}

/// Whitening with a precomputed [`PoseGeometry`] (hot path).
pub fn whiten_cached(
    geom: &PoseGeometry,
    mu: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
) -> Result<WhitenedRay, GeomError> {
    if b.norm_squared() == 0.0 {
        return Err(GeomError::DegenerateRay);
    }
    let m = geom.whiten * (a - mu);
    let n = geom.whiten * b;
    Ok(WhitenedRay { m, n, alpha: alpha_of(&m, &n) })
}

/// α = ‖m×n‖/‖n‖.
pub fn alpha_of(m: &Vector3<f64>, n: &Vector3<f64>) -> f64 {
    m.cross(n).norm() / n.norm()
}

/// Closed-form ray integral of the Jinc kernel: I = π·J₁(α)/(‖n‖·α).
///
/// Below [`ALPHA_SERIES_CUTOFF`] the even series
/// J₁(α)/α = 1/2 − α²/16 + … keeps the evaluation smooth through α = 0.
/// The result oscillates in sign with J₁; callers deal with negativity.
pub fn line_integral(w: &WhitenedRay) -> f64 {
    line_integral_parts(w.alpha, w.n.norm())
}

/// The same integral from (α, ‖n‖) directly.
pub fn line_integral_parts(alpha: f64, n_norm: f64) -> f64 {
    std::f64::consts::PI * j1_over_x(alpha) / n_norm
}

/// J₁(x)/x, series below the small-α cutoff.
pub(crate) fn j1_over_x(x: f64) -> f64 {
    if x < ALPHA_SERIES_CUTOFF {
        0.5 - x * x / 16.0
    } else {
        cyl_bessel_j1(x) / x
    }
}

// ── Threshold conic and footprint ellipse ──────────────────────────────────

/// Homogeneous symmetric conic u_hᵀ H u_h = 0, stored as the six distinct
/// entries so that symmetry holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic2D {
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
    pub h13: f64,
    pub h23: f64,
    pub h33: f64,
}

impl Conic2D {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.h11, self.h12, self.h13, self.h12, self.h22, self.h23, self.h13, self.h23,
            self.h33,
        )
    }

    /// u_hᵀ H u_h at pixel (u, v).
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.h11 * u * u
            + 2.0 * self.h12 * u * v
            + self.h22 * v * v
            + 2.0 * self.h13 * u
            + 2.0 * self.h23 * v
            + self.h33
    }

    fn max_abs(&self) -> f64 {
        [self.h11, self.h12, self.h22, self.h13, self.h23, self.h33]
            .into_iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Ellipse (x−x₀)ᵀ Σ₂D (x−x₀) = 1 with SPD shape matrix Σ₂D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse2D {
    pub center: Vector2<f64>,
    pub shape: Matrix2<f64>,
}

impl Ellipse2D {
    /// Semi-axis lengths (max, min): 1/√λ of the shape eigenvalues.
    pub fn semi_axes(&self) -> (f64, f64) {
        let tr = self.shape[(0, 0)] + self.shape[(1, 1)];
        let det = self.shape[(0, 0)] * self.shape[(1, 1)] - self.shape[(0, 1)] * self.shape[(1, 0)];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        let l1 = 0.5 * tr - disc; // smaller eigenvalue → major axis
        let l2 = 0.5 * tr + disc;
        (1.0 / l1.sqrt(), 1.0 / l2.sqrt())
    }

    /// Axis-aligned bounding box (min, max). The half-extent along axis i
    /// is √((Σ₂D⁻¹)_{ii}).
    pub fn aabb(&self) -> (Vector2<f64>, Vector2<f64>) {
        let det = self.shape[(0, 0)] * self.shape[(1, 1)] - self.shape[(0, 1)] * self.shape[(1, 0)];
        let ex = (self.shape[(1, 1)] / det).sqrt();
        let ey = (self.shape[(0, 0)] / det).sqrt();
        (
            Vector2::new(self.center.x - ex, self.center.y - ey),
            Vector2::new(self.center.x + ex, self.center.y + ey),
        )
    }

    /// `n` points on the boundary, uniform in the elliptical angle.
    pub fn boundary_points(&self, n: usize) -> Vec<Vector2<f64>> {
        // shape = LLᵀ ⇒ boundary = center + L⁻ᵀ (cos θ, sin θ)
        let chol = nalgebra::Cholesky::new(self.shape).expect("shape is SPD");
        let l_inv_t = chol.l().transpose().try_inverse().expect("L is invertible");
        (0..n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                self.center + l_inv_t * Vector2::new(th.cos(), th.sin())
            })
            .collect()
    }
}

/// Classification result of a threshold conic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConicClass {
    Ellipse(Ellipse2D),
    NotEllipse,
}

/// Assemble H = N − (‖m‖² − q²)·Q for the level set α = q, with
/// B = S⁻¹RᵀR_cᵀK⁻¹ and m the whitened camera center offset.
pub fn threshold_conic(pose: &PrimitivePose, cam: &Camera, q: f64) -> Conic2D {
    let geom = pose.geometry();
    threshold_conic_cached(&geom, &pose.mu, cam, q)
}

/// `threshold_conic` with a precomputed [`PoseGeometry`].
pub fn threshold_conic_cached(
    geom: &PoseGeometry,
    mu: &Vector3<f64>,
    cam: &Camera,
    q: f64,
) -> Conic2D {
    let b_mat = geom.whiten * cam.rot.transpose() * cam.k_inv();
    let m = geom.whiten * (cam.center_world() - mu);
    let g = b_mat.transpose() * m; // Bᵀm, so N = g gᵀ
    let q_mat = b_mat.transpose() * b_mat;
    let c = m.norm_squared() - q * q;
    let h = |i: usize, j: usize| g[i] * g[j] - c * q_mat[(i, j)];
    Conic2D {
        h11: h(0, 0),
        h12: h(0, 1),
        h22: h(1, 1),
        h13: h(0, 2),
        h23: h(1, 2),
        h33: h(2, 2),
    }
}

/// Extract the bounding ellipse from a threshold conic, or report that the
/// conic is not a (real) ellipse.
///
/// The determinant conditions det(H) ≠ 0, det(H₂ₓ₂) > 0 are evaluated on H
/// normalized by ‖H‖∞ with threshold 1e−12, which makes the test unit-free;
/// the recovered Σ₂D = −(det H₂ₓ₂ / det H)·H₂ₓ₂ must additionally be SPD
/// (this rejects imaginary ellipses, e.g. a camera inside the α = q
/// surface, where H is definite).
pub fn classify_conic(c: &Conic2D) -> ConicClass {
    let scale = c.max_abs();
    if !(scale > 0.0) || !scale.is_finite() {
        return ConicClass::NotEllipse;
    }
    let inv = 1.0 / scale;
    let (h11, h12, h22) = (c.h11 * inv, c.h12 * inv, c.h22 * inv);
    let (h13, h23, h33) = (c.h13 * inv, c.h23 * inv, c.h33 * inv);
    let det2 = h11 * h22 - h12 * h12;
    let det3 = h11 * (h22 * h33 - h23 * h23) - h12 * (h12 * h33 - h23 * h13)
        + h13 * (h12 * h23 - h22 * h13);
    const EPS_DET: f64 = 1e-12;
    if det2 <= EPS_DET || det3.abs() <= EPS_DET {
        return ConicClass::NotEllipse;
    }
    // center x₀ = −H₂ₓ₂⁻¹ p with p = (h13, h23)
    let inv_det2 = 1.0 / det2;
    let cx = -(h22 * h13 - h12 * h23) * inv_det2;
    let cy = -(h11 * h23 - h12 * h13) * inv_det2;
    let factor = -det2 / det3;
    let shape = Matrix2::new(factor * h11, factor * h12, factor * h12, factor * h22);
    // SPD check: both eigenvalues positive ⇔ det > 0 and trace > 0.
    let s_det = shape[(0, 0)] * shape[(1, 1)] - shape[(0, 1)] * shape[(1, 0)];
    let s_tr = shape[(0, 0)] + shape[(1, 1)];
    if !(s_det > 0.0 && s_tr > 0.0) || !s_det.is_finite() {
        return ConicClass::NotEllipse;
    }
    ConicClass::Ellipse(Ellipse2D { center: Vector2::new(cx, cy), shape })
}

// ── Tests ──────────────────────────────────────────────────────────────────
