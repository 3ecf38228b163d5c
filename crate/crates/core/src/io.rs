//! On-disk formats: raw field dumps with JSON sidecars, run records, the
//! summary table, the manifest and error records.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridShape};

pub const FIELD_FORMAT: &str = "f64-le";
pub const AXIS_ORDER: &str = "row-major, axis 0 slowest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSidecar {
    pub format: String,
    pub axis_order: String,
    pub grid: GridShape,
    pub len: usize,
    /// Free-form tags (ε, branch, level, ...).
    #[serde(default)]
    pub tags: serde_json::Map<String, serde_json::Value>,
}

pub fn encode_field(u: &Field) -> Vec<u8> {
    u.values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Rebuild a field from a sidecar and its raw bytes, checking every
/// consistency condition the format promises.
pub fn decode_field(sidecar: &FieldSidecar, bytes: &[u8]) -> Result<Field> {
    if sidecar.format != FIELD_FORMAT {
        return Err(Error::Decode(format!("unsupported format {:?}", sidecar.format)));
    }
    if sidecar.axis_order != AXIS_ORDER {
        return Err(Error::Decode(format!("unsupported axis order {:?}", sidecar.axis_order)));
    }
    let s = &sidecar.grid;
    let expected = s
        .points_per_axis
        .checked_pow(s.dim as u32)
        .filter(|_| (1..=3).contains(&s.dim))
        .ok_or_else(|| Error::Decode("grid shape out of range".into()))?;
    if sidecar.len != expected {
        return Err(Error::Decode(format!("len {} != grid points {expected}", sidecar.len)));
    }
    if bytes.len() != expected.saturating_mul(8) {
        return Err(Error::Decode(format!("{} bytes for {expected} values", bytes.len())));
    }
    let grid = Grid::from_shape(*s).map_err(|e| Error::Decode(e.to_string()))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(&grid, values).map_err(|e| Error::Decode(e.to_string()))
}

pub fn parse_sidecar(text: &str) -> Result<FieldSidecar> {
    serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))
}

/// Write `<dir>/<stem>.f64` and `<dir>/<stem>.json`.
pub fn write_field(
    dir: &Path,
    stem: &str,
    u: &Field,
    tags: serde_json::Map<String, serde_json::Value>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let sidecar = FieldSidecar {
        format: FIELD_FORMAT.into(),
        axis_order: AXIS_ORDER.into(),
        grid: u.grid().shape(),
        len: u.values().len(),
        tags,
    };
    let data = dir.join(format!("{stem}.f64"));
    fs::write(&data, encode_field(u))?;
    write_json(&dir.join(format!("{stem}.json")), &sidecar)?;
    Ok(data)
}

pub fn read_field(data: &Path) -> Result<Field> {
    let side = data.with_extension("json");
    let text = fs::read_to_string(&side).map_err(|e| Error::Io(format!("{}: {e}", side.display())))?;
    let bytes = fs::read(data).map_err(|e| Error::Io(format!("{}: {e}", data.display())))?;
    decode_field(&parse_sidecar(&text)?, &bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub name: String,
    pub status: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub rng_seed: u64,
    pub workers: Option<usize>,
    pub config: String,
    pub wall_seconds: f64,
    pub stages: Vec<StageStatus>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub command: String,
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

/// Short machine-readable name of an error variant.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidGrid(_) => "invalid_grid",
        Error::NonFinite => "non_finite",
        Error::GridMismatch => "grid_mismatch",
        Error::NonpositiveShift(_) => "nonpositive_shift",
        Error::NonpositivePotential(_) => "nonpositive_potential",
        Error::ZeroField => "zero_field",
        Error::NotInTheta(_) => "not_in_theta",
        Error::NoNehariPoint(_) => "no_nehari_point",
        Error::SeedNotInTheta(_) => "seed_not_in_theta",
        Error::Diverged(_) => "diverged",
        Error::SlopeOrdering { .. } => "slope_ordering",
        Error::InvalidInput(_) => "invalid_input",
        Error::BudgetExceeded { .. } => "budget_exceeded",
        Error::OverlappingBoxes(_) => "overlapping_boxes",
        Error::BoundaryNotSeparating { .. } => "boundary_not_separating",
        Error::SeedLeftTheta(_) => "seed_left_theta",
        Error::BranchEscaped(_) => "branch_escaped",
        Error::WindowTooSmall(_) => "window_too_small",
        Error::NonpositiveTail => "nonpositive_tail",
        Error::NoInteriorSolutions => "no_interior_solutions",
        Error::Config(_) => "config",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
        Error::Decode(_) => "decode",
    }
}

/// Process exit code: 1 validation, 2 solver, 3 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Decode(_) => 3,
        Error::Config(_)
        | Error::Validation(_)
        | Error::InvalidInput(_)
        | Error::InvalidGrid(_)
        | Error::SlopeOrdering { .. }
        | Error::OverlappingBoxes(_)
        | Error::BoundaryNotSeparating { .. }
        | Error::NonpositivePotential(_)
        | Error::BudgetExceeded { .. } => 1,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(2, 3.0, 8).unwrap();
        let u = Field::from_fn(&grid, |x| x[0] - 2.0 * x[1]);
        let mut tags = serde_json::Map::new();
        tags.insert("eps".into(), 0.25.into());
        let path = write_field(dir.path(), "u", &u, tags).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(back.grid(), u.grid());
    }

    #[test]
    fn decode_rejects_inconsistent_input() {
        let grid = Grid::new(1, 1.0, 8).unwrap();
        let u = Field::constant(&grid, 1.0);
        let side = FieldSidecar {
            format: FIELD_FORMAT.into(),
            axis_order: AXIS_ORDER.into(),
            grid: grid.shape(),
            len: 8,
            tags: Default::default(),
        };
        let bytes = encode_field(&u);
        assert!(decode_field(&side, &bytes).is_ok());
        assert!(matches!(decode_field(&side, &bytes[..63]), Err(Error::Decode(_))));
        let mut nan = bytes.clone();
        nan[..8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_field(&side, &nan).is_err());
        let wrong = FieldSidecar { len: 9, ..side.clone() };
        assert!(decode_field(&wrong, &bytes).is_err());
        let huge = FieldSidecar {
            grid: GridShape {
                dim: 3,
                half_width: 1.0,
                points_per_axis: usize::MAX / 2,
            },
            ..side
        };
        assert!(decode_field(&huge, &bytes).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Io("x".into())), 3);
        assert_eq!(exit_code(&Error::Validation("x".into())), 1);
        assert_eq!(exit_code(&Error::Diverged(50)), 2);
        assert_eq!(error_kind(&Error::NoInteriorSolutions), "no_interior_solutions");
    }
}
