use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum CmutError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("material `{material}`: field `{field}` {reason}")]
    InvalidMaterial {
        material: String,
        field: &'static str,
        reason: String,
    },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("material `{0}` is a conductor and has no relative permittivity")]
    Conductor(String),

    #[error("invalid geometry: {0}")]
    Geometry(#[from] GeometryError),

    #[error("contact: deflection {deflection:.6e} m reaches gap {gap:.6e} m at r = {radius:.6e} m")]
    Contact { deflection: f64, gap: f64, radius: f64 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("softening collapse: electrostatic stiffness {k_e:.6e} N/m >= plate stiffness {k_m:.6e} N/m")]
    SofteningCollapse { k_e: f64, k_m: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("sweep spec error: {0}")]
    Spec(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One violated geometry invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub other_field: &'static str,
    pub other_value: f64,
    pub rule: &'static str,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // micrometres, rounded to 1 pm
        let um = |v: f64| (v * 1e12).round() / 1e6;
        if self.other_field == "zero" {
            return write!(f, "{} = {} um must be {} 0", self.field, um(self.value), self.rule);
        }
        write!(
            f,
            "{} = {} um must be {} {} = {} um",
            self.field,
            um(self.value),
            self.rule,
            self.other_field,
            um(self.other_value)
        )
    }
}

/// All invariant violations found in a [`crate::geometry::CellGeometry`].
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct GeometryError {
    pub violations: Vec<Violation>,
}

pub type Result<T, E = CmutError> = std::result::Result<T, E>;
