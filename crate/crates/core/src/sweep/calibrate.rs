//! Fit of the electrode overlap radius to measured capacitance.

use serde::Serialize;

use super::table::Table;
use crate::capacitance::{cell_capacitance, GapPolicy};
use crate::electrostatics::Device;
use crate::error::{CmutError, Result};
use crate::geometry::validate;

/// Rows carrying this flag in a reference table are kept for comparison but
/// left out of the fit.
pub const HOLDOUT_FLAG: &str = "holdout";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferencePoint {
    /// m
    pub cavity_radius: f64,
    /// F
    pub capacitance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub cavity_radius: f64,
    pub reference: f64,
    pub model: f64,
    /// `(model - reference) / reference`
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// m
    pub overlap_radius: f64,
    /// Sum of squared relative errors at the optimum.
    pub objective: f64,
    pub policy: GapPolicy,
    pub membrane: String,
    pub residuals: Vec<Residual>,
}

/// Points from a cavity-radius reference table, skipping empty cells and
/// [`HOLDOUT_FLAG`] rows.
pub fn reference_points(table: &Table, column: &str) -> Result<Vec<ReferencePoint>> {
    if table.param.name != "cavity_radius" {
        return Err(CmutError::Calibration(format!(
            "reference table varies `{}`, expected `cavity_radius`",
            table.param.name
        )));
    }
    let idx = table
        .column_index(column)
        .ok_or_else(|| CmutError::Calibration(format!("reference table has no column `{column}`")))?;
    Ok(table
        .rows
        .iter()
        .filter(|r| !r.flags.iter().any(|f| f == HOLDOUT_FLAG))
        .filter_map(|r| {
            r.values[idx].map(|c| ReferencePoint {
                cavity_radius: r.param,
                capacitance: c,
            })
        })
        .collect())
}

fn residuals(points: &[ReferencePoint], dev: &Device<f64>, overlap: f64, policy: GapPolicy) -> Result<Vec<Residual>> {
    points
        .iter()
        .map(|p| {
            let mut g = dev.geometry;
            g.cavity_radius = p.cavity_radius;
            g.overlap_radius = overlap;
            let g = validate(g)?;
            let model = cell_capacitance(&g, &dev.membrane, &dev.pillar, policy)?.total;
            Ok(Residual {
                cavity_radius: p.cavity_radius,
                reference: p.capacitance,
                model,
                relative_error: (model - p.capacitance) / p.capacitance,
            })
        })
        .collect()
}

fn objective(r: &[Residual]) -> f64 {
    r.iter().map(|r| r.relative_error * r.relative_error).sum()
}

/// Overlap radius minimizing the summed squared relative error over
/// `points`, searched on `[max cavity radius, substrate radius]` by
/// golden-section. An optimum on either end of that interval is reported as
/// not bracketed.
pub fn calibrate_overlap_radius(
    points: &[ReferencePoint],
    dev: &Device<f64>,
    policy: GapPolicy,
) -> Result<Calibration> {
    if points.len() < 2 {
        return Err(CmutError::Calibration(format!(
            "need at least 2 reference rows, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.capacitance > 0.0) || !(p.cavity_radius > 0.0))
    {
        return Err(CmutError::Calibration(format!(
            "reference row at {} m has non-positive capacitance {}",
            p.cavity_radius, p.capacitance
        )));
    }
    let lo = points.iter().map(|p| p.cavity_radius).fold(f64::MIN, f64::max);
    let hi = dev.geometry.substrate_radius;
    if !(lo < hi) {
        return Err(CmutError::Calibration(format!(
            "largest reference cavity radius {lo} m is not below the substrate radius {hi} m"
        )));
    }
    let f = |x: f64| residuals(points, dev, x, policy).map(|r| objective(&r));

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = (a + b) / 2.0;
    let edge = 1e-3 * (hi - lo);
    if x - lo < edge || hi - x < edge {
        return Err(CmutError::Calibration(format!(
            "optimum not bracketed: best overlap radius {:.4} um lies on the search bound [{:.4}, {:.4}] um under {}",
            x / 1e-6,
            lo / 1e-6,
            hi / 1e-6,
            policy.as_str()
        )));
    }
    let res = residuals(points, dev, x, policy)?;
    Ok(Calibration {
        overlap_radius: x,
        objective: objective(&res),
        policy,
        membrane: dev.membrane.name.clone(),
        residuals: res,
    })
}
