//! Binary scene persistence.
//!
//! Format: magic `JSC1`, then a little-endian u32 record count, then one
//! 65-byte record per primitive: 14 packed f32 fields (mu ×3, quat ×4,
//! log_scales ×3, opacity_logit, color ×3), a u8 kernel tag, and two more
//! f32 fields (omega_logit, f0). Binary f32 rather than text so that a
//! saved scene reloads and re-saves byte-identically, which the
//! golden-image regression tests rely on.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Vector3, Vector4};

use crate::projection::PrimitivePose;
use crate::raster::{Primitive, SplatKind};

pub const SCENE_MAGIC: [u8; 4] = *b"JSC1";
const RECORD_BYTES: usize = 14 * 4 + 1 + 2 * 4;

// ── Errors ─────────────────────────────────────────────────────────────────

#[derive(Debug)]
pub enum SceneError {
    Io(std::io::Error),
    BadMagic { found: [u8; 4] },
    Truncated { expected: usize, got: usize },
    NonFinite { record: usize, field: &'static str },
    /// Tag does not name any kernel kind.
    UnknownKind { record: usize, tag: u8 },
    /// Tag names a kernel the rasterizer cannot draw (delta, exponential).
    UnsupportedKind { record: usize, tag: u8 },
    InvalidPose { record: usize },
}

impl std::fmt::Display for SceneError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Io(e) => write!(f, "scene io: {e}"),
            Self::BadMagic { found } => write!(f, "bad scene magic {found:?}"),
            Self::Truncated { expected, got } => {
                write!(f, "truncated scene: expected {expected} bytes, got {got}")
            }
            Self::NonFinite { record, field } => {
                write!(f, "record {record}: non-finite {field}")
            }
            Self::UnknownKind { record, tag } => {
                write!(f, "record {record}: unknown kernel tag {tag}")
            }
            Self::UnsupportedKind { record, tag } => {
                write!(f, "record {record}: kernel tag {tag} is not renderable")
            }
            Self::InvalidPose { record } => write!(f, "record {record}: invalid pose"),
        }
    }
}

impl std::error::Error for SceneError {}

impl From<std::io::Error> for SceneError {
    fn from(e: std::io::Error) -> Self {
        SceneError::Io(e)
    }
}

// ── Kind tags ──────────────────────────────────────────────────────────────

/// Wire tags follow the kernel-family enumeration order
/// (0 delta, 1 gaussian, 2 exponential, 3 student-t, 4 jinc,
/// 5 modulated-gaussian, 6 modulated-student-t). Tags 0 and 2 are valid
/// kernels but not renderable primitives, so loading them is an error.
pub fn kind_tag(kind: SplatKind) -> u8 {
    match kind {
        SplatKind::Gaussian => 1,
        SplatKind::StudentT => 3,
        SplatKind::Jinc => 4,
        SplatKind::ModulatedGaussian => 5,
        SplatKind::ModulatedStudentT => 6,
    }
}

pub fn kind_from_tag(tag: u8, record: usize) -> Result<SplatKind, SceneError> {
    match tag {
        1 => Ok(SplatKind::Gaussian),
        3 => Ok(SplatKind::StudentT),
        4 => Ok(SplatKind::Jinc),
        5 => Ok(SplatKind::ModulatedGaussian),
        6 => Ok(SplatKind::ModulatedStudentT),
        0 | 2 => Err(SceneError::UnsupportedKind { record, tag }),
        _ => Err(SceneError::UnknownKind { record, tag }),
    }
}

// ── Encode / decode ────────────────────────────────────────────────────────

pub fn encode_scene(prims: &[Primitive]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + prims.len() * RECORD_BYTES);
    out.extend_from_slice(&SCENE_MAGIC);
    out.extend_from_slice(&(prims.len() as u32).to_le_bytes());
    for p in prims {
        let mut f = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
        f(p.pose.mu.x);
        f(p.pose.mu.y);
        f(p.pose.mu.z);
        f(p.pose.quat[0]);
        f(p.pose.quat[1]);
        f(p.pose.quat[2]);
        f(p.pose.quat[3]);
        f(p.pose.log_scales.x);
        f(p.pose.log_scales.y);
        f(p.pose.log_scales.z);
        f(p.opacity_logit);
        f(p.color.x);
        f(p.color.y);
        f(p.color.z);
        out.push(kind_tag(p.kind));
        let mut f = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
        f(p.omega_logit);
        f(p.f0);
    }
    out
}

pub fn decode_scene(bytes: &[u8]) -> Result<Vec<Primitive>, SceneError> {
    if bytes.len() < 8 {
        return Err(SceneError::Truncated { expected: 8, got: bytes.len() });
    }
    if bytes[0..4] != SCENE_MAGIC {
        return Err(SceneError::BadMagic { found: bytes[0..4].try_into().unwrap() });
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + count * RECORD_BYTES;
    if bytes.len() < expected {
        return Err(SceneError::Truncated { expected, got: bytes.len() });
    }

    let mut prims = Vec::with_capacity(count);
    for rec in 0..count {
        let base = 8 + rec * RECORD_BYTES;
        let f32_at = |slot: usize| -> f64 {
            let o = base + slot * 4;
            f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64
        };
        let fields: Vec<f64> = (0..14).map(f32_at).collect();
        let field_names = [
            "mu.x", "mu.y", "mu.z", "quat.w", "quat.x", "quat.y", "quat.z", "log_scale.x",
            "log_scale.y", "log_scale.z", "opacity_logit", "color.r", "color.g", "color.b",
        ];
        for (v, name) in fields.iter().zip(field_names.iter()) {
            if !v.is_finite() {
                return Err(SceneError::NonFinite { record: rec, field: name });
            }
        }
        let tag = bytes[base + 14 * 4];
        let kind = kind_from_tag(tag, rec)?;
        let tail = base + 14 * 4 + 1;
        let omega_logit = f32::from_le_bytes(bytes[tail..tail + 4].try_into().unwrap()) as f64;
        let f0 = f32::from_le_bytes(bytes[tail + 4..tail + 8].try_into().unwrap()) as f64;
        if !omega_logit.is_finite() {
            return Err(SceneError::NonFinite { record: rec, field: "omega_logit" });
        }
        if !f0.is_finite() {
            return Err(SceneError::NonFinite { record: rec, field: "f0" });
        }

        let pose = PrimitivePose::new(
            Vector3::new(fields[0], fields[1], fields[2]),
            Vector4::new(fields[3], fields[4], fields[5], fields[6]),
            Vector3::new(fields[7], fields[8], fields[9]),
        )
        .map_err(|_| SceneError::InvalidPose { record: rec })?;
        prims.push(Primitive {
            pose,
            opacity_logit: fields[10],
            color: Vector3::new(fields[11], fields[12], fields[13]),
            kind,
            omega_logit,
            f0,
        });
    }
    Ok(prims)
}

pub fn save_scene<P: AsRef<Path>>(path: P, prims: &[Primitive]) -> Result<(), SceneError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_scene(prims))?;
    Ok(())
}

pub fn load_scene<P: AsRef<Path>>(path: P) -> Result<Vec<Primitive>, SceneError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_scene(&bytes)
}

// ── Tests ──────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::make_synthetic_scene;

    #[test]
    fn round_trip_is_byte_exact() {
        let (prims, _) = make_synthetic_scene(42, 17, SplatKind::ModulatedGaussian, 32, 32);
        let bytes = encode_scene(&prims);
        let loaded = decode_scene(&bytes).unwrap();
        assert_eq!(loaded.len(), prims.len());
        // load → save reproduces the exact bytes
        assert_eq!(encode_scene(&loaded), bytes);
        // fields survive to f32 precision
        for (a, b) in prims.iter().zip(loaded.iter()) {
            assert_eq!(a.kind, b.kind);
            assert!((a.pose.mu - b.pose.mu).norm() < 1e-6);
            assert!((a.opacity_logit - b.opacity_logit).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_scene_is_valid() {
        let bytes = encode_scene(&[]);
        assert_eq!(bytes.len(), 8);
        assert!(decode_scene(&bytes).unwrap().is_empty());
    }

    #[test]
    fn corrupted_magic_is_an_error_not_a_crash() {
        let (prims, _) = make_synthetic_scene(1, 2, SplatKind::Gaussian, 32, 32);
        let mut bytes = encode_scene(&prims);
        bytes[0] = b'X';
        assert!(matches!(decode_scene(&bytes), Err(SceneError::BadMagic { .. })));
    }

    #[test]
    fn truncated_file_is_detected() {
        let (prims, _) = make_synthetic_scene(1, 3, SplatKind::Gaussian, 32, 32);
        let bytes = encode_scene(&prims);
        assert!(matches!(
            decode_scene(&bytes[..bytes.len() - 7]),
            Err(SceneError::Truncated { .. })
        ));
        assert!(matches!(decode_scene(&bytes[..3]), Err(SceneError::Truncated { .. })));
    }

    #[test]
    fn non_finite_field_is_detected() {
        let (prims, _) = make_synthetic_scene(1, 1, SplatKind::Gaussian, 32, 32);
        let mut bytes = encode_scene(&prims);
        // poison mu.x with a NaN f32
        bytes[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_scene(&bytes), Err(SceneError::NonFinite { .. })));
    }

    #[test]
    fn unrenderable_and_unknown_tags_are_errors() {
        let (prims, _) = make_synthetic_scene(1, 1, SplatKind::Gaussian, 32, 32);
        let mut bytes = encode_scene(&prims);
        let tag_offset = 8 + 14 * 4;
        bytes[tag_offset] = 0; // delta
        assert!(matches!(decode_scene(&bytes), Err(SceneError::UnsupportedKind { .. })));
        bytes[tag_offset] = 9;
        assert!(matches!(decode_scene(&bytes), Err(SceneError::UnknownKind { .. })));
    }

    #[test]
    fn save_and_load_through_the_filesystem() {
        let (prims, _) = make_synthetic_scene(3, 5, SplatKind::Jinc, 32, 32);
        let dir = std::env::temp_dir().join("jsplat_scene_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scene.jsc");
        save_scene(&path, &prims).unwrap();
        let loaded = load_scene(&path).unwrap();
        assert_eq!(encode_scene(&loaded), encode_scene(&prims));
        std::fs::remove_file(&path).ok();
    }
}
