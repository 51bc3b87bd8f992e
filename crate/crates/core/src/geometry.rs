//! Parametric single-cell geometry.
//!
//! The membrane is clamped at the inner edge of the oxide pillar
//! (`cavity_radius`). The electrodes overlap out to `overlap_radius`; the
//! annulus between the two carries the parasitic pillar capacitance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CmutError, GeometryError, Result, Violation};
use crate::num::{Scalar, UM};

/// Overlap radius fitted to the cavity-radius capacitance reference rows
/// (22-25 um, Si3N4 membrane, series-membrane stack). Regenerate with
/// `cmut-cell-sim calibrate`.
pub const CALIBRATED_OVERLAP_RADIUS_UM: f64 = 26.0200;

/// Cell dimensions in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellGeometry<T> {
    pub substrate_radius: T,
    pub substrate_thickness: T,
    pub bottom_electrode_thickness: T,
    pub gap_height: T,
    pub cavity_radius: T,
    pub top_electrode_thickness: T,
    pub membrane_thickness: T,
    pub overlap_radius: T,
}

/// Electrode-overlap areas, m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionAreas<T> {
    /// Disc over the cavity.
    pub gap_area: T,
    /// Annulus over the oxide pillar.
    pub pillar_area: T,
}

/// Length parameters that sweeps and CLI flags address by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthParam {
    SubstrateRadius,
    SubstrateThickness,
    BottomElectrodeThickness,
    GapHeight,
    CavityRadius,
    TopElectrodeThickness,
    MembraneThickness,
    OverlapRadius,
}

impl LengthParam {
    pub const ALL: [LengthParam; 8] = [
        LengthParam::SubstrateRadius,
        LengthParam::SubstrateThickness,
        LengthParam::BottomElectrodeThickness,
        LengthParam::GapHeight,
        LengthParam::CavityRadius,
        LengthParam::TopElectrodeThickness,
        LengthParam::MembraneThickness,
        LengthParam::OverlapRadius,
    ];

    pub fn field_name(self) -> &'static str {
        match self {
            LengthParam::SubstrateRadius => "substrate_radius",
            LengthParam::SubstrateThickness => "substrate_thickness",
            LengthParam::BottomElectrodeThickness => "bottom_electrode_thickness",
            LengthParam::GapHeight => "gap_height",
            LengthParam::CavityRadius => "cavity_radius",
            LengthParam::TopElectrodeThickness => "top_electrode_thickness",
            LengthParam::MembraneThickness => "membrane_thickness",
            LengthParam::OverlapRadius => "overlap_radius",
        }
    }

    /// Short name used in geometry files.
    pub fn table_name(self) -> &'static str {
        match self {
            LengthParam::SubstrateRadius => "subR",
            LengthParam::SubstrateThickness => "subH",
            LengthParam::BottomElectrodeThickness => "belecH",
            LengthParam::GapHeight => "oxiH",
            LengthParam::CavityRadius => "oxiinR",
            LengthParam::TopElectrodeThickness => "telecH",
            LengthParam::MembraneThickness => "memH",
            LengthParam::OverlapRadius => "overlapR",
        }
    }
}

impl<T: Scalar> CellGeometry<T> {
    pub fn get(&self, p: LengthParam) -> T {
        match p {
            LengthParam::SubstrateRadius => self.substrate_radius,
            LengthParam::SubstrateThickness => self.substrate_thickness,
            LengthParam::BottomElectrodeThickness => self.bottom_electrode_thickness,
            LengthParam::GapHeight => self.gap_height,
            LengthParam::CavityRadius => self.cavity_radius,
            LengthParam::TopElectrodeThickness => self.top_electrode_thickness,
            LengthParam::MembraneThickness => self.membrane_thickness,
            LengthParam::OverlapRadius => self.overlap_radius,
        }
    }

    pub fn with(mut self, p: LengthParam, value: T) -> Self {
        let slot = match p {
            LengthParam::SubstrateRadius => &mut self.substrate_radius,
            LengthParam::SubstrateThickness => &mut self.substrate_thickness,
            LengthParam::BottomElectrodeThickness => &mut self.bottom_electrode_thickness,
            LengthParam::GapHeight => &mut self.gap_height,
            LengthParam::CavityRadius => &mut self.cavity_radius,
            LengthParam::TopElectrodeThickness => &mut self.top_electrode_thickness,
            LengthParam::MembraneThickness => &mut self.membrane_thickness,
            LengthParam::OverlapRadius => &mut self.overlap_radius,
        };
        *slot = value;
        self
    }

    pub fn cast<U: Scalar>(&self) -> CellGeometry<U> {
        let c = |x: T| U::lit(x.as_f64());
        CellGeometry {
            substrate_radius: c(self.substrate_radius),
            substrate_thickness: c(self.substrate_thickness),
            bottom_electrode_thickness: c(self.bottom_electrode_thickness),
            gap_height: c(self.gap_height),
            cavity_radius: c(self.cavity_radius),
            top_electrode_thickness: c(self.top_electrode_thickness),
            membrane_thickness: c(self.membrane_thickness),
            overlap_radius: c(self.overlap_radius),
        }
    }
}

/// Reference cell with the calibrated overlap radius.
pub fn default_cell<T: Scalar>() -> CellGeometry<T> {
    let um = |x: f64| T::lit(x * UM);
    CellGeometry {
        substrate_radius: um(28.0),
        substrate_thickness: um(3.0),
        bottom_electrode_thickness: um(1.0),
        gap_height: um(0.5),
        cavity_radius: um(25.0),
        top_electrode_thickness: um(0.1),
        membrane_thickness: um(0.75),
        overlap_radius: um(CALIBRATED_OVERLAP_RADIUS_UM),
    }
}

/// Checks every invariant and reports all violations at once.
pub fn validate<T: Scalar>(g: CellGeometry<T>) -> Result<CellGeometry<T>, GeometryError> {
    let mut violations = Vec::new();
    for p in LengthParam::ALL {
        let v = g.get(p);
        if !(v > T::zero()) || !v.is_finite() {
            violations.push(Violation {
                field: p.field_name(),
                value: v.as_f64(),
                other_field: "zero",
                other_value: 0.0,
                rule: ">",
            });
        }
    }
    if !(g.cavity_radius < g.substrate_radius) {
        violations.push(Violation {
            field: "cavity_radius",
            value: g.cavity_radius.as_f64(),
            other_field: "substrate_radius",
            other_value: g.substrate_radius.as_f64(),
            rule: "<",
        });
    }
    if !(g.cavity_radius <= g.overlap_radius) {
        violations.push(Violation {
            field: "overlap_radius",
            value: g.overlap_radius.as_f64(),
            other_field: "cavity_radius",
            other_value: g.cavity_radius.as_f64(),
            rule: ">=",
        });
    }
    if !(g.overlap_radius <= g.substrate_radius) {
        violations.push(Violation {
            field: "overlap_radius",
            value: g.overlap_radius.as_f64(),
            other_field: "substrate_radius",
            other_value: g.substrate_radius.as_f64(),
            rule: "<=",
        });
    }
    if violations.is_empty() {
        Ok(g)
    } else {
        Err(GeometryError { violations })
    }
}

pub fn region_areas<T: Scalar>(g: &CellGeometry<T>) -> RegionAreas<T> {
    let pi = T::PI();
    let gap_area = pi * g.cavity_radius * g.cavity_radius;
    let outer = pi * g.overlap_radius * g.overlap_radius;
    RegionAreas {
        gap_area,
        pillar_area: (outer - gap_area).max(T::zero()),
    }
}

/// Geometry file: lengths in micrometres keyed by the short table names.
/// Omitted keys take the default cell's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    #[serde(rename = "subR", default, skip_serializing_if = "Option::is_none")]
    pub sub_r: Option<f64>,
    #[serde(rename = "subH", default, skip_serializing_if = "Option::is_none")]
    pub sub_h: Option<f64>,
    #[serde(rename = "belecH", default, skip_serializing_if = "Option::is_none")]
    pub belec_h: Option<f64>,
    #[serde(rename = "oxiH", default, skip_serializing_if = "Option::is_none")]
    pub oxi_h: Option<f64>,
    #[serde(rename = "oxiinR", default, skip_serializing_if = "Option::is_none")]
    pub oxiin_r: Option<f64>,
    #[serde(rename = "telecH", default, skip_serializing_if = "Option::is_none")]
    pub telec_h: Option<f64>,
    #[serde(rename = "memH", default, skip_serializing_if = "Option::is_none")]
    pub mem_h: Option<f64>,
    #[serde(rename = "overlapR", default, skip_serializing_if = "Option::is_none")]
    pub overlap_r: Option<f64>,
}

impl GeometryFile {
    fn entries(&self) -> [(LengthParam, Option<f64>); 8] {
        [
            (LengthParam::SubstrateRadius, self.sub_r),
            (LengthParam::SubstrateThickness, self.sub_h),
            (LengthParam::BottomElectrodeThickness, self.belec_h),
            (LengthParam::GapHeight, self.oxi_h),
            (LengthParam::CavityRadius, self.oxiin_r),
            (LengthParam::TopElectrodeThickness, self.telec_h),
            (LengthParam::MembraneThickness, self.mem_h),
            (LengthParam::OverlapRadius, self.overlap_r),
        ]
    }

    /// Applies the file over `base`, converting micrometres to metres.
    pub fn apply(&self, base: CellGeometry<f64>) -> CellGeometry<f64> {
        self.entries().into_iter().fold(base, |g, (p, v)| match v {
            Some(um) => g.with(p, um * UM),
            None => g,
        })
    }

    pub fn from_geometry(g: &CellGeometry<f64>) -> Self {
        let um = |p| Some(g.get(p) / UM);
        Self {
            sub_r: um(LengthParam::SubstrateRadius),
            sub_h: um(LengthParam::SubstrateThickness),
            belec_h: um(LengthParam::BottomElectrodeThickness),
            oxi_h: um(LengthParam::GapHeight),
            oxiin_r: um(LengthParam::CavityRadius),
            telec_h: um(LengthParam::TopElectrodeThickness),
            mem_h: um(LengthParam::MembraneThickness),
            overlap_r: um(LengthParam::OverlapRadius),
        }
    }
}

/// Loads and validates a geometry file.
pub fn load_geometry(path: impl AsRef<Path>) -> Result<CellGeometry<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CmutError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: GeometryFile = serde_json::from_str(&text).map_err(|e| CmutError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(validate(file.apply(default_cell()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(a.abs())
    }

    #[test]
    fn defaults() {
        let g = default_cell::<f64>();
        assert!(close(g.cavity_radius, 25e-6, 1e-15));
        assert!(close(g.membrane_thickness, 0.75e-6, 1e-15));
        assert!(close(g.gap_height, 0.5e-6, 1e-15));
        assert!(close(g.substrate_radius, 28e-6, 1e-15));
        assert!(validate(g).is_ok());
    }

    #[test]
    fn cavity_beyond_substrate() {
        let g = default_cell::<f64>().with(LengthParam::CavityRadius, 29e-6);
        let err = validate(g).unwrap_err();
        let v = err
            .violations
            .iter()
            .find(|v| v.field == "cavity_radius")
            .expect("cavity violation");
        assert_eq!(v.other_field, "substrate_radius");
        assert_eq!(v.value, 29e-6);
        assert_eq!(v.other_value, 28e-6);
    }

    #[test]
    fn overlap_inside_cavity() {
        let g = default_cell::<f64>().with(LengthParam::OverlapRadius, 20e-6);
        let err = validate(g).unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert_eq!(err.violations[0].field, "overlap_radius");
        assert_eq!(err.violations[0].other_field, "cavity_radius");
        assert!(err
            .to_string()
            .contains("overlap_radius = 20 um must be >= cavity_radius = 25 um"));
    }

    #[test]
    fn nonpositive_lengths() {
        let g = default_cell::<f64>()
            .with(LengthParam::GapHeight, 0.0)
            .with(LengthParam::MembraneThickness, -1e-6);
        let err = validate(g).unwrap_err();
        let fields: Vec<_> = err.violations.iter().map(|v| v.field).collect();
        assert!(fields.contains(&"gap_height"));
        assert!(fields.contains(&"membrane_thickness"));
    }

    #[test]
    fn areas() {
        let g = default_cell::<f64>().with(LengthParam::OverlapRadius, 25e-6);
        let a = region_areas(&g);
        assert!(close(a.gap_area, 1.9635e-9, 1e-4));
        assert_eq!(a.pillar_area, 0.0);

        let g = default_cell::<f64>()
            .with(LengthParam::CavityRadius, 22e-6)
            .with(LengthParam::OverlapRadius, 26.04e-6);
        // pi * (26.04^2 - 22^2) um^2
        assert!(close(region_areas(&g).pillar_area, 6.0973e-10, 1e-4));
    }

    #[test]
    fn geometry_file_overrides() {
        let file: GeometryFile = serde_json::from_str(r#"{"oxiinR": 22, "memH": 1.0}"#).unwrap();
        let g = file.apply(default_cell());
        assert!(close(g.cavity_radius, 22e-6, 1e-12));
        assert!(close(g.membrane_thickness, 1e-6, 1e-12));
        assert!(close(g.gap_height, 0.5e-6, 1e-12));
        assert!(serde_json::from_str::<GeometryFile>(r#"{"radius": 1}"#).is_err());
    }

    #[test]
    fn f32_defaults_valid() {
        assert!(validate(default_cell::<f32>()).is_ok());
    }

    proptest! {
        #[test]
        fn areas_partition_overlap_disc(rc in 1.0f64..27.0, extra in 0.0f64..1.0) {
            let ro = rc + extra * (28.0 - rc);
            let g = default_cell::<f64>()
                .with(LengthParam::CavityRadius, rc * UM)
                .with(LengthParam::OverlapRadius, ro * UM);
            let a = region_areas(&g);
            let disc = std::f64::consts::PI * (ro * UM).powi(2);
            prop_assert!((a.gap_area + a.pillar_area - disc).abs() <= 4.0 * f64::EPSILON * disc);
            prop_assert!(a.pillar_area >= 0.0);
        }

        #[test]
        fn areas_monotone_in_cavity(rc in 1.0f64..25.0, dr in 0.01f64..1.0) {
            let base = default_cell::<f64>().with(LengthParam::OverlapRadius, 26.5 * UM);
            let a1 = region_areas(&base.with(LengthParam::CavityRadius, rc * UM));
            let a2 = region_areas(&base.with(LengthParam::CavityRadius, (rc + dr) * UM));
            prop_assert!(a2.gap_area > a1.gap_area);
            prop_assert!(a2.pillar_area < a1.pillar_area);
        }
    }
}
