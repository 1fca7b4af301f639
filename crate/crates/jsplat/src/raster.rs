//! Tile-based software rasterizer: footprint binning, depth-sorted
//! front-to-back alpha compositing, and the matching analytic backward
//! pass.
//!
//! Two footprint paths coexist:
//!
//! * Jinc primitives evaluate the exact per-ray response 2·J₁(α)/α (the
//!   peak-normalized closed-form ray integral) and are bounded on screen by
//!   the threshold conic at α = `alpha_cutoff_q`.
//! * Gaussian / Student's t primitives (and their modulated variants) use
//!   the conventional perspective projection of Σ with the local affine
//!   Jacobian, evaluated on the projected 2D Mahalanobis radius ρ, bounded
//!   at ρ = 3.
//!
//! Truncation is tile-granular: every pixel of a binned tile evaluates the
//! kernel, pixels of unbinned tiles receive nothing. That is what makes a
//! harshly truncated slowly-decaying kernel produce rectangular,
//! tile-aligned artifacts (see [`tile_artifact_metric`]).
//!
//! Rendering is deterministic for any thread count: tiles are independent
//! work units, per-tile primitive lists are built serially in primitive
//! order and sorted by (depth, index), and backward reductions run in tile
//! order.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use crate::gradients::{
    chain_sigma_to_pose, dalpha_dmu, dalpha_dsigma, dresp_dalpha_unit, PrimitiveGrad,
};
use crate::par;
use crate::projection::{
    classify_conic, j1_over_x, threshold_conic_cached, Camera, ConicClass, Ellipse2D,
    PoseGeometry, PrimitivePose, WhitenedRay,
};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

// ── Errors ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub enum RasterError {
    /// The backward pass produced a non-finite gradient for a primitive.
    NonFiniteGradient { primitive: usize },
    /// Gradient buffer length does not match the image.
    GradientSizeMismatch { expected: usize, got: usize },
}

impl std::fmt::Display for RasterError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonFiniteGradient { primitive } => {
                write!(f, "non-finite gradient for primitive {primitive}")
            }
            Self::GradientSizeMismatch { expected, got } => {
                write!(f, "pixel gradient buffer has {got} entries, image has {expected}")
            }
        }
    }
}

impl std::error::Error for RasterError {}

// ── Primitives ─────────────────────────────────────────────────────────────

/// Renderable kernel families. Modulated kinds read the primitive's
/// `omega_logit` / `f0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplatKind {
    Gaussian,
    StudentT,
    Jinc,
    ModulatedGaussian,
    ModulatedStudentT,
}

impl SplatKind {
    pub fn is_modulated(&self) -> bool {
        matches!(self, SplatKind::ModulatedGaussian | SplatKind::ModulatedStudentT)
    }

    pub fn default_f0(&self) -> f64 {
        match self {
            SplatKind::ModulatedStudentT => crate::kernels::MOD_STUDENT_T_F0,
            _ => crate::kernels::MOD_GAUSSIAN_F0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SplatKind::Gaussian => "gaussian",
            SplatKind::StudentT => "student-t",
            SplatKind::Jinc => "jinc",
            SplatKind::ModulatedGaussian => "modulated-gaussian",
            SplatKind::ModulatedStudentT => "modulated-student-t",
        }
    }
}

/// One splatting primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub pose: PrimitivePose,
    pub opacity_logit: f64,
    /// Flat RGB in [0, 1].
    pub color: Vector3<f64>,
    pub kind: SplatKind,
    /// Modulation blend through a logistic squash: ω = sigmoid(omega_logit).
    pub omega_logit: f64,
    /// Dimensionless modulation frequency on the Mahalanobis radius.
    pub f0: f64,
}

impl Primitive {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn omega(&self) -> f64 {
        sigmoid(self.omega_logit)
    }

    pub fn is_finite(&self) -> bool {
        self.pose.mu.iter().all(|v| v.is_finite())
            && self.pose.quat.iter().all(|v| v.is_finite())
            && self.pose.log_scales.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.color.iter().all(|v| v.is_finite())
            && self.omega_logit.is_finite()
            && self.f0.is_finite()
    }
}

// ── Render configuration ───────────────────────────────────────────────────

/// How negative kernel response is composited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeLobes {
    /// w ← max(w, 0): stable default for training.
    Clamp,
    /// Keep signed weights; exposes the Jinc ringing.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub tile_size: u32,
    /// Threshold q of the Jinc footprint conic (α ≤ q is kept).
    pub alpha_cutoff_q: f64,
    /// Contributions with |α_px| below this are skipped.
    pub min_alpha_contrib: f64,
    /// Stop compositing a pixel once transmittance falls below this.
    pub transmittance_floor: f64,
    /// Primitives with camera depth ≤ near_clip are skipped.
    pub near_clip: f64,
    pub negative_lobes: NegativeLobes,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            tile_size: 16,
            alpha_cutoff_q: 30.0,
            min_alpha_contrib: 1.0 / 255.0,
            transmittance_floor: 1e-4,
            near_clip: 0.01,
            negative_lobes: NegativeLobes::Clamp,
        }
    }
}

impl RenderConfig {
    fn validated(&self) -> RenderConfig {
        let mut c = *self;
        c.tile_size = c.tile_size.max(4);
        c.alpha_cutoff_q = c.alpha_cutoff_q.max(f64::MIN_POSITIVE);
        c
    }
}

// ── Image buffer and writers ───────────────────────────────────────────────

/// Linear-RGB render target with a per-pixel residual transmittance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<Vector3<f64>>,
    pub transmittance: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = (width as usize) * (height as usize);
        ImageBuffer {
            width,
            height,
            rgb: vec![Vector3::zeros(); n],
            transmittance: vec![1.0; n],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> Vector3<f64> {
        self.rgb[(y * self.width + x) as usize]
    }

    /// Binary 8-bit PPM (P6), values clamped to [0, 1].
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for px in &self.rgb {
            for c in 0..3 {
                out.push((px[c].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    /// Raw float dump: 16-byte header (magic "JSPL", u32 width, u32 height,
    /// u32 channels = 3, little-endian) followed by row-major f32 RGB.
    pub fn to_raw_f32(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.rgb.len() * 12);
        out.extend_from_slice(b"JSPL");
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&3u32.to_le_bytes());
        for px in &self.rgb {
            for c in 0..3 {
                out.extend_from_slice(&(px[c] as f32).to_le_bytes());
            }
        }
        out
    }
}

/// Per-render counters, mostly for CLI diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub drawn: usize,
    pub skipped_non_finite: usize,
    pub skipped_behind_camera: usize,
    pub skipped_not_ellipse: usize,
    pub skipped_degenerate: usize,
}

// ── Per-view preparation ───────────────────────────────────────────────────

/// Gaussian-path projection data kept for the backward pass.
struct ProjData {
    center: Vector2<f64>,
    /// Σ₂D⁻¹ as (a, b, c): ρ² = a·dx² + 2b·dx·dy + c·dy².
    conic: (f64, f64, f64),
    /// M = J·R_c (2×3): dΣ₂D = M·dΣ·Mᵀ, dcenter = M·dμ.
    m_mat: Matrix2x3<f64>,
    /// Camera-frame center, for ∂J/∂p_c.
    p_cam: Vector3<f64>,
    /// Σ in the camera frame: R_c Σ R_cᵀ.
    sigma_cam: Matrix3<f64>,
    /// J at p_cam (2×3).
    jac: Matrix2x3<f64>,
    /// R_cᵀ, to push camera-frame gradients back to the world.
    rot_t: Matrix3<f64>,
    fx: f64,
    fy: f64,
}

enum Footprint {
    /// Jinc: whitened camera center offset and the pixel→whitened-direction
    /// matrix B = W·R_cᵀ·K⁻¹.
    Ray { m: Vector3<f64>, b_mat: Matrix3<f64> },
    /// Projected-ellipse path.
    Proj(ProjData),
}

struct PrimView {
    prim: usize,
    depth: f64,
    opacity: f64,
    color: Vector3<f64>,
    kind: SplatKind,
    omega: f64,
    f0: f64,
    geom: PoseGeometry,
    footprint: Footprint,
    /// Inclusive tile span (tx0, ty0, tx1, ty1).
    tiles: (u32, u32, u32, u32),
}

/// Perspective Jacobian of (u, v) at camera-frame point p.
fn perspective_jacobian(cam: &Camera, p: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / p.z;
    Matrix2x3::new(
        cam.fx * iz,
        0.0,
        -cam.fx * p.x * iz * iz,
        0.0,
        cam.fy * iz,
        -cam.fy * p.y * iz * iz,
    )
}

/// Project a pose's covariance to the image plane: 2D mean by perspective
/// projection, 2D covariance J·R_c·Σ·R_cᵀ·Jᵀ. Returns the footprint
/// ellipse scaled to ρ = 3 for binning, or `None` when the center is
/// closer than `near_clip` or the projected covariance degenerates.
pub fn project_gaussian_2d(pose: &PrimitivePose, cam: &Camera, near_clip: f64) -> Option<Ellipse2D> {
    project_gaussian_full(pose, cam, near_clip).map(|(e, _, _)| e)
}

fn project_gaussian_full(
    pose: &PrimitivePose,
    cam: &Camera,
    near_clip: f64,
) -> Option<(Ellipse2D, ProjData, f64)> {
    let p_cam = cam.to_camera(&pose.mu);
    if p_cam.z <= near_clip {
        return None;
    }
    let center = Vector2::new(
        cam.fx * p_cam.x / p_cam.z + cam.cx,
        cam.fy * p_cam.y / p_cam.z + cam.cy,
    );
    let jac = perspective_jacobian(cam, &p_cam);
    let sigma_cam = cam.rot * pose.covariance() * cam.rot.transpose();
    let m_mat = jac * cam.rot;
    let s2 = jac * sigma_cam * jac.transpose();
    let (a, b, c) = (s2[(0, 0)], s2[(0, 1)], s2[(1, 1)]);
    let det = a * c - b * b;
    let tr = a + c;
    if !(det > 1e-18 * tr * tr) || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    let conic = (c * inv_det, -b * inv_det, a * inv_det);
    // binning boundary at ρ = 3: (x−c)ᵀ (Σ₂D⁻¹/9) (x−c) = 1
    let shape = Matrix2::new(conic.0, conic.1, conic.1, conic.2) / 9.0;
    let ellipse = Ellipse2D { center, shape };
    let data = ProjData {
        center,
        conic,
        m_mat,
        p_cam,
        sigma_cam,
        jac,
        rot_t: cam.rot.transpose(),
        fx: cam.fx,
        fy: cam.fy,
    };
    Some((ellipse, data, p_cam.z))
}

/// Clamp an ellipse AABB to the image and convert to an inclusive tile
/// span; `None` if fully off screen.
fn tile_span(e: &Ellipse2D, w: u32, h: u32, ts: u32) -> Option<(u32, u32, u32, u32)> {
    let (lo, hi) = e.aabb();
    if !(lo.x.is_finite() && hi.x.is_finite() && lo.y.is_finite() && hi.y.is_finite()) {
        return None;
    }
    if hi.x < 0.0 || hi.y < 0.0 || lo.x > (w - 1) as f64 || lo.y > (h - 1) as f64 {
        return None;
    }
    let x0 = lo.x.floor().max(0.0) as u32;
    let y0 = lo.y.floor().max(0.0) as u32;
    let x1 = (hi.x.ceil() as u32).min(w - 1);
    let y1 = (hi.y.ceil() as u32).min(h - 1);
    Some((x0 / ts, y0 / ts, x1 / ts, y1 / ts))
}

fn prepare_views(
    prims: &[Primitive],
    cam: &Camera,
    cfg: &RenderConfig,
    stats: &mut RenderStats,
) -> Vec<PrimView> {
    let mut views = Vec::with_capacity(prims.len());
    for (i, p) in prims.iter().enumerate() {
        if !p.is_finite() {
            stats.skipped_non_finite += 1;
            continue;
        }
        let depth = cam.to_camera(&p.pose.mu).z;
        if depth <= cfg.near_clip {
            stats.skipped_behind_camera += 1;
            continue;
        }
        let geom = p.pose.geometry();
        let (footprint, ellipse) = match p.kind {
            SplatKind::Jinc => {
                let conic = threshold_conic_cached(&geom, &p.pose.mu, cam, cfg.alpha_cutoff_q);
                match classify_conic(&conic) {
                    ConicClass::Ellipse(e) => {
                        let m = geom.whiten * (cam.center_world() - p.pose.mu);
                        let b_mat = geom.whiten * cam.rot.transpose() * cam.k_inv();
                        (Footprint::Ray { m, b_mat }, e)
                    }
                    ConicClass::NotEllipse => {
                        stats.skipped_not_ellipse += 1;
                        continue;
                    }
                }
            }
            _ => match project_gaussian_full(&p.pose, cam, cfg.near_clip) {
                Some((e, data, _)) => (Footprint::Proj(data), e),
                None => {
                    stats.skipped_degenerate += 1;
                    continue;
                }
            },
        };
        let Some(tiles) = tile_span(&ellipse, cam.width, cam.height, cfg.tile_size) else {
            stats.skipped_degenerate += 1;
            continue;
        };
        stats.drawn += 1;
        views.push(PrimView {
            prim: i,
            depth,
            opacity: p.opacity(),
            color: p.color,
            kind: p.kind,
            omega: p.omega(),
            f0: p.f0,
            geom,
            footprint,
            tiles,
        });
    }
    views
}

/// Per-tile primitive lists in front-to-back order (ties broken by
/// primitive index). Built serially so binning order never depends on the
/// thread count.
fn bin_tiles(views: &[PrimView], tiles_x: u32, tiles_y: u32) -> Vec<Vec<u32>> {
    let mut bins = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (vi, v) in views.iter().enumerate() {
        let (tx0, ty0, tx1, ty1) = v.tiles;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                bins[(ty * tiles_x + tx) as usize].push(vi as u32);
            }
        }
    }
    for bin in &mut bins {
        bin.sort_by(|&a, &b| {
            let (va, vb) = (&views[a as usize], &views[b as usize]);
            va.depth
                .partial_cmp(&vb.depth)
                .expect("depths are finite")
                .then(va.prim.cmp(&vb.prim))
        });
    }
    bins
}

// ── Per-pixel response evaluation ──────────────────────────────────────────

/// What the backward pass needs to replay one contribution.
enum SampleGeom {
    Ray(WhitenedRay),
    Proj { d: Vector2<f64>, rho2: f64 },
}

struct Sample {
    /// Raw (possibly negative) peak-normalized kernel response.
    resp: f64,
    geom: SampleGeom,
}

fn eval_sample(v: &PrimView, u: f64, vpix: f64) -> Sample {
    match &v.footprint {
        Footprint::Ray { m, b_mat } => {
            let n = b_mat * Vector3::new(u, vpix, 1.0);
            let alpha = m.cross(&n).norm() / n.norm();
            let base = 2.0 * j1_over_x(alpha);
            Sample { resp: base, geom: SampleGeom::Ray(WhitenedRay { m: *m, n, alpha }) }
        }
        Footprint::Proj(p) => {
            let d = Vector2::new(u - p.center.x, vpix - p.center.y);
            let rho2 = p.conic.0 * d.x * d.x + 2.0 * p.conic.1 * d.x * d.y + p.conic.2 * d.y * d.y;
            let base = match v.kind {
                SplatKind::Gaussian | SplatKind::ModulatedGaussian => (-0.5 * rho2).exp(),
                // Student's t with ν = 1: (1 + ρ²/ν)^{−(ν+1)/2}
                SplatKind::StudentT | SplatKind::ModulatedStudentT => 1.0 / (1.0 + rho2),
                SplatKind::Jinc => unreachable!("jinc uses the ray footprint"),
            };
            let resp = if v.kind.is_modulated() {
                base * (v.omega + (1.0 - v.omega) * (v.f0 * rho2.sqrt()).cos())
            } else {
                base
            };
            Sample { resp, geom: SampleGeom::Proj { d, rho2 } }
        }
    }
}

const ALPHA_PX_CAP: f64 = 0.999;

/// Composite one pixel front to back. When `record` is given, every
/// accepted contribution is appended (the backward pass replays them).
fn composite_pixel(
    views: &[PrimView],
    order: &[u32],
    u: f64,
    vpix: f64,
    cfg: &RenderConfig,
    mut record: Option<&mut Vec<(u32, Sample, f64, f64)>>,
) -> (Vector3<f64>, f64) {
    let mut rgb = Vector3::zeros();
    let mut t = 1.0_f64;
    for &vi in order {
        let v = &views[vi as usize];
        let sample = eval_sample(v, u, vpix);
        let resp_eff = match cfg.negative_lobes {
            NegativeLobes::Clamp => sample.resp.max(0.0),
            NegativeLobes::Signed => sample.resp,
        };
        let w = v.opacity * resp_eff;
        let alpha_px = w.min(ALPHA_PX_CAP);
        if alpha_px.abs() < cfg.min_alpha_contrib {
            continue;
        }
        rgb += v.color * (alpha_px * t);
        if let Some(rec) = record.as_deref_mut() {
            rec.push((vi, sample, alpha_px, t));
        }
        t *= 1.0 - alpha_px;
        if t < cfg.transmittance_floor {
            break;
        }
    }
    (rgb, t)
}

// ── Forward render ─────────────────────────────────────────────────────────

pub fn render(prims: &[Primitive], cam: &Camera, cfg: &RenderConfig) -> ImageBuffer {
    render_with_stats(prims, cam, cfg).0
}

pub fn render_with_stats(
    prims: &[Primitive],
    cam: &Camera,
    cfg: &RenderConfig,
) -> (ImageBuffer, RenderStats) {
    let cfg = cfg.validated();
    let mut stats = RenderStats::default();
    let views = prepare_views(prims, cam, &cfg, &mut stats);
    let ts = cfg.tile_size;
    let (w, h) = (cam.width, cam.height);
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);
    let bins = bin_tiles(&views, tiles_x, tiles_y);

    let mut img = ImageBuffer::new(w, h);
    // carve the image into per-tile-row stripes? tiles own disjoint pixel
    // rectangles, so hand each tile its own output block and copy back.
    let mut tile_results: Vec<(u32, Vec<(Vector3<f64>, f64)>)> =
        (0..bins.len() as u32).map(|t| (t, Vec::new())).collect();
    par::for_each_mut(&mut tile_results, |_, (tile_idx, out)| {
        let t = *tile_idx;
        let tx = t % tiles_x;
        let ty = t / tiles_x;
        let x0 = tx * ts;
        let y0 = ty * ts;
        let x1 = (x0 + ts).min(w);
        let y1 = (y0 + ts).min(h);
        let order = &bins[t as usize];
        out.reserve(((x1 - x0) * (y1 - y0)) as usize);
        for py in y0..y1 {
            for px in x0..x1 {
                out.push(composite_pixel(&views, order, px as f64, py as f64, &cfg, None));
            }
        }
    });
    for (t, out) in &tile_results {
        let tx = t % tiles_x;
        let ty = t / tiles_x;
        let x0 = tx * ts;
        let y0 = ty * ts;
        let x1 = (x0 + ts).min(w);
        let y1 = (y0 + ts).min(h);
        let mut it = out.iter();
        for py in y0..y1 {
            for px in x0..x1 {
                let (rgb, t_res) = it.next().expect("tile buffer matches pixel count");
                let idx = (py * w + px) as usize;
                img.rgb[idx] = *rgb;
                img.transmittance[idx] = t_res.clamp(0.0, 1.0);
            }
        }
    }
    (img, stats)
}

// ── Backward pass ──────────────────────────────────────────────────────────

struct TileGrads {
    grads: Vec<PrimitiveGrad>,
    sigma: Vec<Matrix3<f64>>,
}

/// Accumulate ∂L/∂(primitive parameters) for ∂L/∂pixel-RGB given in
/// `d_rgb` (row-major, one entry per pixel). Replays the forward
/// compositing exactly, so it must be called with the same inputs as
/// [`render`].
pub fn render_backward(
    prims: &[Primitive],
    cam: &Camera,
    cfg: &RenderConfig,
    d_rgb: &[Vector3<f64>],
) -> Result<Vec<PrimitiveGrad>, RasterError> {
    let cfg = cfg.validated();
    let expected = (cam.width as usize) * (cam.height as usize);
    if d_rgb.len() != expected {
        return Err(RasterError::GradientSizeMismatch { expected, got: d_rgb.len() });
    }
    let mut stats = RenderStats::default();
    let views = prepare_views(prims, cam, &cfg, &mut stats);
    let ts = cfg.tile_size;
    let (w, h) = (cam.width, cam.height);
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);
    let bins = bin_tiles(&views, tiles_x, tiles_y);

    let n = prims.len();
    let mut tile_grads: Vec<TileGrads> = (0..bins.len())
        .map(|_| TileGrads {
            grads: vec![PrimitiveGrad::zero(); n],
            sigma: vec![Matrix3::zeros(); n],
        })
        .collect();

    par::for_each_mut(&mut tile_grads, |t, tg| {
        let t = t as u32;
        let tx = t % tiles_x;
        let ty = t / tiles_x;
        let x0 = tx * ts;
        let y0 = ty * ts;
        let x1 = (x0 + ts).min(w);
        let y1 = (y0 + ts).min(h);
        let order = &bins[t as usize];
        if order.is_empty() {
            return;
        }
        let mut contribs: Vec<(u32, Sample, f64, f64)> = Vec::new();
        for py in y0..y1 {
            for px in x0..x1 {
                let dpx = d_rgb[(py * w + px) as usize];
                if dpx == Vector3::zeros() {
                    continue;
                }
                contribs.clear();
                composite_pixel(&views, order, px as f64, py as f64, &cfg, Some(&mut contribs));
                backward_pixel(&views, &contribs, &dpx, &cfg, tg);
            }
        }
    });

    // deterministic reduction in tile order
    let mut grads = vec![PrimitiveGrad::zero(); n];
    let mut sigma_grads = vec![Matrix3::<f64>::zeros(); n];
    for tg in &tile_grads {
        for i in 0..n {
            grads[i].add(&tg.grads[i]);
            sigma_grads[i] += tg.sigma[i];
        }
    }
    // chain the accumulated Σ-gradients onto (quat, log-scales) once per
    // primitive
    for (i, p) in prims.iter().enumerate() {
        if sigma_grads[i] != Matrix3::zeros() {
            let (d_quat, d_ls) = chain_sigma_to_pose(&sigma_grads[i], &p.pose);
            grads[i].d_quat += d_quat;
            grads[i].d_log_scales += d_ls;
        }
        if !grads[i].is_finite() {
            return Err(RasterError::NonFiniteGradient { primitive: i });
        }
    }
    Ok(grads)
}

/// Distribute ∂L/∂pixel over this pixel's recorded contributions.
fn backward_pixel(
    views: &[PrimView],
    contribs: &[(u32, Sample, f64, f64)],
    dpx: &Vector3<f64>,
    cfg: &RenderConfig,
    tg: &mut TileGrads,
) {
    // Suffix accumulator: S_i = Σ_{j>i} c_j·α_j·T_j (per channel).
    let mut suffix = Vector3::zeros();
    for (vi, sample, alpha_px, t_before) in contribs.iter().rev() {
        let v = &views[*vi as usize];
        let prim = v.prim;

        // ∂C/∂α_i = c_i·T_i − S_i/(1−α_i); ∂C/∂c_i = α_i·T_i
        let d_alpha_px = dpx.dot(&(v.color * *t_before - suffix / (1.0 - alpha_px)));
        tg.grads[prim].d_color += dpx * (alpha_px * t_before);
        suffix += v.color * (alpha_px * t_before);

        // α_px = min(w, cap); w = opacity·resp_eff
        let resp_eff = match cfg.negative_lobes {
            NegativeLobes::Clamp => sample.resp.max(0.0),
            NegativeLobes::Signed => sample.resp,
        };
        let w_raw = v.opacity * resp_eff;
        if w_raw >= ALPHA_PX_CAP {
            continue; // capped: no gradient through α
        }
        let d_w = d_alpha_px;
        // opacity chain: σ'(x) = σ(1−σ)
        tg.grads[prim].d_opacity_logit += d_w * resp_eff * v.opacity * (1.0 - v.opacity);
        let mut d_resp_eff = d_w * v.opacity;
        if matches!(cfg.negative_lobes, NegativeLobes::Clamp) && sample.resp <= 0.0 {
            d_resp_eff = 0.0; // clamped lobe: no gradient through the kernel
        }
        if d_resp_eff == 0.0 {
            continue;
        }

        match &sample.geom {
            SampleGeom::Ray(wray) => {
                // resp = 2·J₁(α)/α (Jinc is never modulated here)
                let d_alpha = d_resp_eff * 2.0 * dresp_dalpha_unit(wray.alpha);
                tg.grads[prim].d_mu += d_alpha * dalpha_dmu(wray, &v.geom);
                tg.sigma[prim] += d_alpha * dalpha_dsigma(wray, &v.geom);
            }
            SampleGeom::Proj { d, rho2 } => {
                backward_proj(v, d, *rho2, d_resp_eff, tg);
            }
        }
    }
}

/// Backward through the projected-ellipse response: base(ρ)·blend(ρ) →
/// (center, conic) → (μ, Σ) via the projection Jacobian chain.
fn backward_proj(v: &PrimView, d: &Vector2<f64>, rho2: f64, d_resp: f64, tg: &mut TileGrads) {
    let Footprint::Proj(p) = &v.footprint else { unreachable!() };
    let prim = v.prim;

    let base = match v.kind {
        SplatKind::Gaussian | SplatKind::ModulatedGaussian => (-0.5 * rho2).exp(),
        SplatKind::StudentT | SplatKind::ModulatedStudentT => 1.0 / (1.0 + rho2),
        SplatKind::Jinc => unreachable!(),
    };
    let d_base_drho2 = match v.kind {
        SplatKind::Gaussian | SplatKind::ModulatedGaussian => -0.5 * base,
        SplatKind::StudentT | SplatKind::ModulatedStudentT => -base * base,
        SplatKind::Jinc => unreachable!(),
    };

    let mut d_rho2 = d_resp * d_base_drho2;
    if v.kind.is_modulated() {
        let rho = rho2.sqrt();
        let c = (v.f0 * rho).cos();
        let blend = v.omega + (1.0 - v.omega) * c;
        // resp = base·blend; redo the product rule with blend attached
        d_rho2 = d_resp * (d_base_drho2 * blend + base * dblend_drho2(v.omega, v.f0, rho));
        // ∂resp/∂ω = base·(1 − cos(f₀ρ)), chained through ω = σ(logit)
        let d_omega = d_resp * base * (1.0 - c);
        tg.grads[prim].d_omega_logit += d_omega * v.omega * (1.0 - v.omega);
    }

    // ρ² = dᵀCd: ∂ρ²/∂d = 2Cd; center moves opposite to d
    let cd = Vector2::new(
        p.conic.0 * d.x + p.conic.1 * d.y,
        p.conic.1 * d.x + p.conic.2 * d.y,
    );
    let d_center = -2.0 * d_rho2 * cd;
    // ∂ρ²/∂C = d dᵀ
    let g_conic = Matrix2::new(d.x * d.x, d.x * d.y, d.x * d.y, d.y * d.y) * d_rho2;

    // C = Σ₂D⁻¹ ⇒ ∂L/∂Σ₂D = −C·G_C·C
    let c_mat = Matrix2::new(p.conic.0, p.conic.1, p.conic.1, p.conic.2);
    let g2 = -(c_mat * g_conic * c_mat);

    // Σ₂D = M·Σ·Mᵀ ⇒ ∂L/∂Σ = Mᵀ·G2·M
    tg.sigma[prim] += p.m_mat.transpose() * g2 * p.m_mat;

    // μ receives the center chain through M = J·R_c and the ∂J/∂p_cam
    // chain through R_c.
    tg.grads[prim].d_mu += p.m_mat.transpose() * d_center;

    // Σ₂D depends on p_cam through J: ∂L/∂J = 2·G2·J·Σ_cam
    let dj = 2.0 * g2 * p.jac * p.sigma_cam;
    let (x, y, z) = (p.p_cam.x, p.p_cam.y, p.p_cam.z);
    let iz2 = 1.0 / (z * z);
    // Nonzero entries of ∂J/∂p_cam contracted with dj:
    //   ∂J₀₂/∂x = −fx/z², ∂J₁₂/∂y = −fy/z²,
    //   ∂J₀₀/∂z = −fx/z², ∂J₁₁/∂z = −fy/z²,
    //   ∂J₀₂/∂z = 2fx·x/z³, ∂J₁₂/∂z = 2fy·y/z³.
    let d_p_cam = Vector3::new(
        dj[(0, 2)] * (-p.fx * iz2),
        dj[(1, 2)] * (-p.fy * iz2),
        dj[(0, 0)] * (-p.fx * iz2)
            + dj[(1, 1)] * (-p.fy * iz2)
            + dj[(0, 2)] * (2.0 * p.fx * x * iz2 / z)
            + dj[(1, 2)] * (2.0 * p.fy * y * iz2 / z),
    );
    tg.grads[prim].d_mu += p.rot_t * d_p_cam;
}

/// d/dρ² of the blend factor ω + (1−ω)cos(f₀ρ), smooth through ρ = 0.
fn dblend_drho2(omega: f64, f0: f64, rho: f64) -> f64 {
    if rho < 1e-6 {
        // −(1−ω)·f₀²/2·(1 − (f₀ρ)²/6)
        -(1.0 - omega) * 0.5 * f0 * f0 * (1.0 - (f0 * rho) * (f0 * rho) / 6.0)
    } else {
        -(1.0 - omega) * f0 * (f0 * rho).sin() / (2.0 * rho)
    }
}

// ── Tile artifact metric ───────────────────────────────────────────────────

/// Mean absolute inter-pixel color difference across tile-boundary edges
/// minus the same statistic across non-boundary edges. Positive values
/// mean tile-aligned discontinuities stand out from the image's own
/// gradient content.
pub fn tile_artifact_metric(img: &ImageBuffer, tile_size: u32) -> f64 {
    let ts = tile_size.max(1);
    let (w, h) = (img.width, img.height);
    let mut boundary = (0.0, 0usize);
    let mut interior = (0.0, 0usize);
    let mut edge = |a: Vector3<f64>, b: Vector3<f64>, on_boundary: bool| {
        let d = (a - b).abs().sum() / 3.0;
        if on_boundary {
            boundary.0 += d;
            boundary.1 += 1;
        } else {
            interior.0 += d;
            interior.1 += 1;
        }
    };
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            edge(img.pixel(x, y), img.pixel(x + 1, y), (x + 1) % ts == 0);
        }
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            edge(img.pixel(x, y), img.pixel(x, y + 1), (y + 1) % ts == 0);
        }
    }
    let mb = if boundary.1 > 0 { boundary.0 / boundary.1 as f64 } else { 0.0 };
    let mi = if interior.1 > 0 { interior.0 / interior.1 as f64 } else { 0.0 };
    mb - mi
}

// ── Tests ──────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::whiten;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector4;

    fn test_camera() -> Camera {
        Camera::look_at(
            Vector3::new(0.0, 0.0, -4.0),
            Vector3::zeros(),
            Vector3::y(),
            80.0,
            64,
            64,
        )
        .unwrap()
    }

    fn prim(kind: SplatKind, sigma: f64, opacity_logit: f64) -> Primitive {
        Primitive {
            pose: PrimitivePose::isotropic(Vector3::zeros(), sigma).unwrap(),
            opacity_logit,
            color: Vector3::new(0.8, 0.3, 0.1),
            kind,
            omega_logit: 0.0,
            f0: kind.default_f0(),
        }
    }

    #[test]
    fn empty_scene_is_black_with_full_transmittance() {
        let img = render(&[], &test_camera(), &RenderConfig::default());
        assert!(img.rgb.iter().all(|p| *p == Vector3::zeros()));
        assert!(img.transmittance.iter().all(|t| *t == 1.0));
    }

    #[test]
    fn opaque_gaussian_saturates_center_pixel() {
        let p = prim(SplatKind::Gaussian, 0.1, 30.0); // opacity → 1
        let cam = test_camera();
        let img = render(&[p], &cam, &RenderConfig::default());
        let center = img.pixel(32, 32);
        // α_px capped at 0.999 ⇒ color·0.999
        assert_abs_diff_eq!(center.x, 0.8 * 0.999, epsilon = 1e-9);
        assert_abs_diff_eq!(center.y, 0.3 * 0.999, epsilon = 1e-9);
        assert_abs_diff_eq!(center.z, 0.1 * 0.999, epsilon = 1e-9);
        let idx = (32 * 64 + 32) as usize;
        assert_abs_diff_eq!(img.transmittance[idx], 0.001, epsilon = 1e-9);
    }

    #[test]
    fn modulated_gaussian_omega_one_bit_identical_to_gaussian() {
        let cam = test_camera();
        let cfg = RenderConfig::default();
        let mut a = prim(SplatKind::Gaussian, 0.15, 1.2);
        a.pose = PrimitivePose::new(
            Vector3::new(0.05, -0.1, 0.0),
            Vector4::new(0.9, 0.1, -0.2, 0.3),
            Vector3::new(-2.0, -2.5, -1.8),
        )
        .unwrap();
        let mut b = a;
        b.kind = SplatKind::ModulatedGaussian;
        b.omega_logit = 60.0; // sigmoid(60) == 1.0 in f64
        assert_eq!(b.omega(), 1.0);
        let ia = render(&[a], &cam, &cfg);
        let ib = render(&[b], &cam, &cfg);
        for (pa, pb) in ia.rgb.iter().zip(ib.rgb.iter()) {
            assert_eq!(pa.x.to_bits(), pb.x.to_bits());
            assert_eq!(pa.y.to_bits(), pb.y.to_bits());
            assert_eq!(pa.z.to_bits(), pb.z.to_bits());
        }
    }

    #[test]
    fn compositing_conserves_energy_with_opaque_background() {
        // final T + Σ α_i·T_i = 1 once an opaque far background is appended
        let cam = test_camera();
        let mut prims = vec![
            prim(SplatKind::Gaussian, 0.2, 0.5),
            {
                let mut p = prim(SplatKind::Gaussian, 0.3, -0.3);
                p.pose = PrimitivePose::isotropic(Vector3::new(0.2, 0.1, 0.5), 0.3).unwrap();
                p.color = Vector3::new(0.2, 0.9, 0.4);
                p
            },
        ];
        // big opaque white wall far behind
        let mut bg = prim(SplatKind::Gaussian, 40.0, 30.0);
        bg.pose = PrimitivePose::isotropic(Vector3::new(0.0, 0.0, 8.0), 40.0).unwrap();
        bg.color = Vector3::new(1.0, 1.0, 1.0);
        prims.push(bg);
        let cfg = RenderConfig { transmittance_floor: 1e-9, ..RenderConfig::default() };
        let img = render(&prims, &cam, &cfg);
        // With white background and front-to-back compositing, pure-white
        // channel sum reconstructs 1 − T_final exactly; check the energy
        // identity per pixel through the white channel of the wall:
        // Σ α_i T_i (all prims) = 1 − T_final.
        for (px, t) in img.rgb.iter().zip(img.transmittance.iter()) {
            // wall is white, foreground colors < 1: the blue channel of the
            // foreground prims is 0.1/0.4 — instead verify via transmittance:
            // the identity holds structurally; assert T + coverage = 1 where
            // coverage is reconstructed from a fully-white re-render.
            let _ = px;
            assert!(*t >= 0.0 && *t <= 1.0);
        }
        // all-white scene version for the exact identity
        let white: Vec<Primitive> = prims
            .iter()
            .map(|p| {
                let mut q = *p;
                q.color = Vector3::new(1.0, 1.0, 1.0);
                q
            })
            .collect();
        let img_w = render(&white, &cam, &cfg);
        for (px, t) in img_w.rgb.iter().zip(img_w.transmittance.iter()) {
            assert!(
                (px.x + t - 1.0).abs() < 1e-6,
                "energy accounting broken: sum {} + T {} != 1",
                px.x,
                t
            );
        }
    }

    #[test]
    fn no_contribution_outside_binned_tiles() {
        let cam = test_camera();
        let cfg = RenderConfig::default();
        let p = prim(SplatKind::Gaussian, 0.05, 2.0);
        let (ellipse, _, _) = project_gaussian_full(&p.pose, &cam, cfg.near_clip).unwrap();
        let span = tile_span(&ellipse, 64, 64, cfg.tile_size).unwrap();
        let img = render(&[p], &cam, &cfg);
        for y in 0..64u32 {
            for x in 0..64u32 {
                let (tx, ty) = (x / cfg.tile_size, y / cfg.tile_size);
                let inside =
                    tx >= span.0 && tx <= span.2 && ty >= span.1 && ty <= span.3;
                if !inside {
                    assert_eq!(img.pixel(x, y), Vector3::zeros(), "leak at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn jinc_negative_ring_under_signed_lobes() {
        // σ and focal chosen so pixels ~5px from center have α ≈ 5, inside
        // the first negative lobe of J₁ (zeros at 3.83 and 7.02).
        let mut p = prim(SplatKind::Jinc, 0.05, 30.0);
        p.color = Vector3::new(1.0, 1.0, 1.0);
        let cam = test_camera();
        let signed = RenderConfig {
            negative_lobes: NegativeLobes::Signed,
            ..RenderConfig::default()
        };
        let clamped = RenderConfig::default();
        // find the α at a candidate ring pixel
        let (a, b) = cam.pixel_ray(37.0, 32.0);
        let w = whiten(&p.pose, &a, &b).unwrap();
        assert!(
            w.alpha > 3.9 && w.alpha < 7.0,
            "test geometry drifted: alpha = {}",
            w.alpha
        );
        let img_s = render(&[p], &cam, &signed);
        let img_c = render(&[p], &cam, &clamped);
        assert!(img_s.pixel(37, 32).x < 0.0, "signed ring not negative");
        assert_eq!(img_c.pixel(37, 32).x, 0.0, "clamped ring not zero");
        assert!(img_s.pixel(32, 32).x > 0.9, "main lobe missing");
    }

    #[test]
    fn projected_gaussian_isotropic_footprint_scale() {
        // Isotropic Σ = σ²I at depth z on the axis: Σ₂D ≈ (fσ/z)²·I, so the
        // ρ = 3 footprint has semi-axes 3fσ/z.
        let sigma = 0.05;
        let cam = Camera::new(
            100.0,
            100.0,
            32.0,
            32.0,
            Matrix3::identity(),
            Vector3::zeros(),
            64,
            64,
        )
        .unwrap();
        let pose = PrimitivePose::isotropic(Vector3::new(0.0, 0.0, 2.0), sigma).unwrap();
        let e = project_gaussian_2d(&pose, &cam, 0.01).unwrap();
        let (major, minor) = e.semi_axes();
        let expect = 3.0 * 100.0 * sigma / 2.0;
        assert_abs_diff_eq!(major, expect, epsilon = 1e-6);
        assert_abs_diff_eq!(minor, expect, epsilon = 1e-6);
        // doubling fx doubles the x extent
        let cam2 = Camera::new(
            200.0,
            100.0,
            32.0,
            32.0,
            Matrix3::identity(),
            Vector3::zeros(),
            64,
            64,
        )
        .unwrap();
        let e2 = project_gaussian_2d(&pose, &cam2, 0.01).unwrap();
        let (lo1, hi1) = e.aabb();
        let (lo2, hi2) = e2.aabb();
        assert_abs_diff_eq!(hi2.x - lo2.x, 2.0 * (hi1.x - lo1.x), epsilon = 1e-6);
        assert_abs_diff_eq!(hi2.y - lo2.y, hi1.y - lo1.y, epsilon = 1e-6);
    }

    #[test]
    fn projected_boundary_has_mahalanobis_three()  {
        // sampled footprint boundary pixels have ρ = 3 (exactly, since the
        // ellipse is built from Σ₂D itself)
        let pose = PrimitivePose::new(
            Vector3::new(0.2, -0.1, 0.3),
            Vector4::new(0.8, 0.3, -0.2, 0.1),
            Vector3::new(-2.3, -2.8, -2.0),
        )
        .unwrap();
        let cam = test_camera();
        let (e, data, _) = project_gaussian_full(&pose, &cam, 0.01).unwrap();
        for pt in e.boundary_points(32) {
            let d = pt - data.center;
            let rho2 =
                data.conic.0 * d.x * d.x + 2.0 * data.conic.1 * d.x * d.y + data.conic.2 * d.y * d.y;
            assert!((rho2.sqrt() - 3.0).abs() < 3.0 * 0.02, "rho = {}", rho2.sqrt());
        }
    }

    #[test]
    fn behind_camera_and_non_finite_primitives_are_skipped() {
        let cam = test_camera();
        let mut behind = prim(SplatKind::Gaussian, 0.1, 2.0);
        behind.pose = PrimitivePose::isotropic(Vector3::new(0.0, 0.0, -9.0), 0.1).unwrap();
        let mut broken = prim(SplatKind::Gaussian, 0.1, 2.0);
        broken.opacity_logit = f64::NAN;
        let (img, stats) =
            render_with_stats(&[behind, broken], &cam, &RenderConfig::default());
        assert_eq!(stats.skipped_behind_camera, 1);
        assert_eq!(stats.skipped_non_finite, 1);
        assert_eq!(stats.drawn, 0);
        assert!(img.rgb.iter().all(|p| *p == Vector3::zeros()));
    }

    #[test]
    fn render_is_bit_deterministic_across_runs() {
        let cam = test_camera();
        let prims: Vec<Primitive> = (0..20)
            .map(|i| {
                let f = i as f64;
                let mut p = prim(
                    if i % 2 == 0 { SplatKind::Jinc } else { SplatKind::Gaussian },
                    0.04 + 0.01 * (i % 5) as f64,
                    0.5,
                );
                p.pose = PrimitivePose::isotropic(
                    Vector3::new((f * 0.07).sin() * 0.5, (f * 0.13).cos() * 0.5, (f * 0.05).sin()),
                    0.04 + 0.01 * (i % 5) as f64,
                )
                .unwrap();
                p.color = Vector3::new(0.1 + 0.04 * f % 0.9, 0.5, 0.9 - 0.03 * f % 0.8);
                p
            })
            .collect();
        let a = render(&prims, &cam, &RenderConfig::default());
        let b = render(&prims, &cam, &RenderConfig::default());
        assert_eq!(a, b);
    }

    #[test]
    fn tile_metric_zero_on_constant_image() {
        let mut img = ImageBuffer::new(64, 64);
        for p in &mut img.rgb {
            *p = Vector3::new(0.3, 0.3, 0.3);
        }
        assert_eq!(tile_artifact_metric(&img, 16), 0.0);
    }

    #[test]
    fn ppm_and_raw_writers_have_expected_layout() {
        let mut img = ImageBuffer::new(2, 2);
        img.rgb[0] = Vector3::new(1.0, 0.0, 0.5);
        let ppm = img.to_ppm();
        assert!(ppm.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(ppm.len(), 11 + 12);
        assert_eq!(ppm[11], 255);
        assert_eq!(ppm[12], 0);
        assert_eq!(ppm[13], 128);
        let raw = img.to_raw_f32();
        assert_eq!(&raw[0..4], b"JSPL");
        assert_eq!(u32::from_le_bytes(raw[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(raw[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(raw[12..16].try_into().unwrap()), 3);
        assert_eq!(raw.len(), 16 + 4 * 12);
        assert_eq!(
            f32::from_le_bytes(raw[16..20].try_into().unwrap()),
            1.0f32
        );
    }

    #[test]
    fn backward_rejects_wrong_gradient_size() {
        let cam = test_camera();
        let p = prim(SplatKind::Gaussian, 0.1, 1.0);
        let err = render_backward(&[p], &cam, &RenderConfig::default(), &[Vector3::zeros(); 3]);
        assert!(matches!(err, Err(RasterError::GradientSizeMismatch { .. })));
    }
}
