//! Parallel-plate capacitance of the two-region electrode stack.
//!
//! Fringing fields are ignored. The cell is split into the cavity disc
//! (air gap, optionally in series with the membrane dielectric) and the
//! pillar annulus (oxide of the gap height, optionally in series with the
//! membrane). The two regions are in parallel.

use serde::{Deserialize, Serialize};

use crate::error::{CmutError, Result};
use crate::geometry::{region_areas, CellGeometry};
use crate::materials::Material;
use crate::num::{eps0, Scalar};
use crate::plate::DeflectionProfile;

/// Which dielectrics sit between the measured terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    /// Only the air gap (or the oxide, over the pillar).
    GapOnly,
    /// The membrane dielectric in series with the gap.
    #[default]
    SeriesMembrane,
}

impl GapPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            GapPolicy::GapOnly => "gap_only",
            GapPolicy::SeriesMembrane => "series_membrane",
        }
    }
}

/// Per-region and total capacitance, farads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacitanceBreakdown<T> {
    pub gap_region: T,
    pub pillar_region: T,
    pub total: T,
}

/// `eps0 * eps_r * area / separation`.
pub fn parallel_plate<T: Scalar>(area: T, separation: T, relative_permittivity: T) -> Result<T> {
    if !(separation > T::zero()) {
        return Err(CmutError::Domain(format!(
            "plate separation must be > 0, got {separation}"
        )));
    }
    if !(area >= T::zero()) {
        return Err(CmutError::Domain(format!("plate area must be >= 0, got {area}")));
    }
    if !(relative_permittivity >= T::one()) {
        return Err(CmutError::Domain(format!(
            "relative permittivity must be >= 1, got {relative_permittivity}"
        )));
    }
    Ok(eps0::<T>() * relative_permittivity * area / separation)
}

/// Two capacitors in series.
pub fn series_equivalent<T: Scalar>(c_a: T, c_g: T) -> Result<T> {
    if !(c_a >= T::zero() && c_g >= T::zero()) {
        return Err(CmutError::Domain(format!(
            "series capacitances must be >= 0, got {c_a}, {c_g}"
        )));
    }
    if c_a == T::zero() && c_g == T::zero() {
        return Err(CmutError::Domain("series pair of two zero capacitances".into()));
    }
    Ok(c_a * c_g / (c_a + c_g))
}

/// Air-equivalent electrode separation over the cavity: the gap, plus the
/// membrane's electrical thickness under [`GapPolicy::SeriesMembrane`].
pub fn effective_gap<T: Scalar>(g: &CellGeometry<T>, membrane: &Material<T>, policy: GapPolicy) -> Result<T> {
    match policy {
        GapPolicy::GapOnly => Ok(g.gap_height),
        GapPolicy::SeriesMembrane => Ok(g.gap_height + g.membrane_thickness / membrane.permittivity()?),
    }
}

fn region_stack<T: Scalar>(area: T, layer: (T, T), membrane: Option<(T, T)>) -> Result<T> {
    if area == T::zero() {
        return Ok(T::zero());
    }
    let c_layer = parallel_plate(area, layer.0, layer.1)?;
    match membrane {
        None => Ok(c_layer),
        Some((t, er)) => series_equivalent(parallel_plate(area, t, er)?, c_layer),
    }
}

/// Undeflected two-region capacitance.
pub fn cell_capacitance<T: Scalar>(
    g: &CellGeometry<T>,
    membrane: &Material<T>,
    pillar: &Material<T>,
    policy: GapPolicy,
) -> Result<CapacitanceBreakdown<T>> {
    let eps_membrane = membrane.permittivity()?;
    let eps_pillar = pillar.permittivity()?;
    let areas = region_areas(g);
    let membrane_layer = match policy {
        GapPolicy::GapOnly => None,
        GapPolicy::SeriesMembrane => Some((g.membrane_thickness, eps_membrane)),
    };
    let gap_region = region_stack(areas.gap_area, (g.gap_height, T::one()), membrane_layer)?;
    let pillar_region = region_stack(areas.pillar_area, (g.gap_height, eps_pillar), membrane_layer)?;
    Ok(CapacitanceBreakdown {
        gap_region,
        pillar_region,
        total: gap_region + pillar_region,
    })
}

/// Capacitance with the membrane deflected by `w`.
///
/// The cavity term is `2*pi*eps0 * integral r / (d_eff - w(r)) dr` by the
/// trapezoid rule on the profile's grid. The pillar annulus does not move.
pub fn deflected_capacitance<T: Scalar>(
    g: &CellGeometry<T>,
    membrane: &Material<T>,
    pillar: &Material<T>,
    w: &DeflectionProfile<T>,
    policy: GapPolicy,
) -> Result<T> {
    w.check_no_contact(g.gap_height)?;
    let d_eff = effective_gap(g, membrane, policy)?;
    let integrand = |i: usize| w.radii[i] / (d_eff - w.w[i]);
    let mut integral = T::zero();
    for i in 1..w.radii.len() {
        let h = w.radii[i] - w.radii[i - 1];
        integral = integral + T::lit(0.5) * h * (integrand(i - 1) + integrand(i));
    }
    let gap_term = T::lit(2.0) * T::PI() * eps0::<T>() * integral;
    let undeflected = cell_capacitance(g, membrane, pillar, policy)?;
    Ok(gap_term + undeflected.pillar_region)
}
