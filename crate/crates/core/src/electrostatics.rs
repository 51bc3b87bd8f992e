//! Electrostatic actuation of the clamped membrane.
//!
//! The local pressure is the parallel-plate value at the deflected gap,
//! `eps0 V^2 / (2 (d_eff - w)^2)`. Equilibrium is found by under-relaxed
//! fixed-point iteration on the linear plate solve; pull-in is the largest
//! bias for which that iteration converges.

use serde::Serialize;

use crate::capacitance::{deflected_capacitance, effective_gap, GapPolicy};
use crate::error::{CmutError, Result};
use crate::geometry::{region_areas, CellGeometry};
use crate::materials::Material;
use crate::num::{eps0, Scalar};
use crate::plate::{
    first_frequency, flexural_rigidity, radial_grid, static_deflection, DeflectionProfile, PlateConfig,
};

/// Geometry plus the two dielectrics the electrostatics needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Device<T> {
    pub geometry: CellGeometry<T>,
    pub membrane: Material<T>,
    pub pillar: Material<T>,
}

impl<T: Scalar> Device<T> {
    pub fn new(geometry: CellGeometry<T>, membrane: Material<T>, pillar: Material<T>) -> Self {
        Self {
            geometry,
            membrane,
            pillar,
        }
    }

    pub fn with_geometry(&self, geometry: CellGeometry<T>) -> Self {
        Self {
            geometry,
            ..self.clone()
        }
    }

    pub fn with_membrane(&self, membrane: Material<T>) -> Self {
        Self {
            membrane,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingConfig<T> {
    pub pressure_gap_policy: GapPolicy,
    /// Policy for the reported (deflected) capacitance.
    pub capacitance_policy: GapPolicy,
    /// Under-relaxation factor in (0, 1].
    pub relaxation: T,
    /// Max-norm change between iterates that counts as converged, m.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for CouplingConfig<T> {
    fn default() -> Self {
        Self {
            pressure_gap_policy: GapPolicy::SeriesMembrane,
            capacitance_policy: GapPolicy::SeriesMembrane,
            relaxation: T::lit(0.7),
            tol: T::lit(1e-13),
            max_iter: 200,
        }
    }
}

impl<T: Scalar> CouplingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err(CmutError::Domain(format!(
                "relaxation must be in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tol > T::zero()) {
            return Err(CmutError::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CmutError::Domain("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonConvergence {
    Contact,
    MaxIterations,
    Diverged,
}

/// Equilibrium state at one bias voltage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasPoint<T> {
    pub voltage: T,
    /// Last iterate; the equilibrium itself when `converged`.
    pub profile: DeflectionProfile<T>,
    pub center_displacement: T,
    /// Deflected capacitance, F. Only set for converged points.
    pub capacitance: Option<T>,
    pub converged: bool,
    pub iterations: usize,
    pub failure: Option<NonConvergence>,
}

/// Local electrostatic pressure on the plate grid, Pa.
pub fn electrostatic_pressure<T: Scalar>(
    g: &CellGeometry<T>,
    membrane: &Material<T>,
    voltage: T,
    w: &DeflectionProfile<T>,
    policy: GapPolicy,
) -> Result<Vec<T>> {
    let d_eff = effective_gap(g, membrane, policy)?;
    w.check_no_contact(g.gap_height)?;
    let k = eps0::<T>() * voltage * voltage / T::lit(2.0);
    Ok(w.w.iter().map(|&wi| k / ((d_eff - wi) * (d_eff - wi))).collect())
}

/// Coupled electrostatic/plate equilibrium at bias `voltage`, starting from
/// the flat membrane.
pub fn solve_equilibrium<T: Scalar>(
    dev: &Device<T>,
    voltage: T,
    plate: &PlateConfig<T>,
    cfg: &CouplingConfig<T>,
) -> Result<BiasPoint<T>> {
    cfg.validate()?;
    plate.validate()?;
    if !(voltage >= T::zero()) || !voltage.is_finite() {
        return Err(CmutError::Domain(format!("bias voltage must be >= 0, got {voltage}")));
    }
    let g = &dev.geometry;
    let mut w = DeflectionProfile::zeros(radial_grid(g.cavity_radius, plate.radial_nodes));
    let alpha = cfg.relaxation;
    let keep = T::one() - alpha;

    let stop = |w: DeflectionProfile<T>, iterations: usize, failure: NonConvergence| BiasPoint {
        voltage,
        center_displacement: w.center(),
        profile: w,
        capacitance: None,
        converged: false,
        iterations,
        failure: Some(failure),
    };

    for iteration in 1..=cfg.max_iter {
        let pressure = match electrostatic_pressure(g, &dev.membrane, voltage, &w, cfg.pressure_gap_policy) {
            Ok(p) => p,
            Err(CmutError::Contact { .. }) => return Ok(stop(w, iteration, NonConvergence::Contact)),
            Err(e) => return Err(e),
        };
        let target = static_deflection(g, &dev.membrane, &pressure, plate)?;
        let mut delta = T::zero();
        let next: Vec<T> =
            w.w.iter()
                .zip(&target.w)
                .map(|(&old, &new)| {
                    let v = keep * old + alpha * new;
                    delta = delta.max((v - old).abs());
                    v
                })
                .collect();
        w.w = next;
        if !delta.is_finite() || w.w.iter().any(|v| !v.is_finite()) {
            return Ok(stop(w, iteration, NonConvergence::Diverged));
        }
        if w.max() >= g.gap_height {
            return Ok(stop(w, iteration, NonConvergence::Contact));
        }
        if delta < cfg.tol {
            let capacitance = deflected_capacitance(g, &dev.membrane, &dev.pillar, &w, cfg.capacitance_policy)?;
            return Ok(BiasPoint {
                voltage,
                center_displacement: w.center(),
                profile: w,
                capacitance: Some(capacitance),
                converged: true,
                iterations: iteration,
                failure: None,
            });
        }
    }
    Ok(stop(w, cfg.max_iter, NonConvergence::MaxIterations))
}

/// Lumped plate stiffness relating total uniform force to centre deflection,
/// `64 pi D / a^2`, N/m.
pub fn lumped_plate_stiffness<T: Scalar>(g: &CellGeometry<T>, m: &Material<T>) -> T {
    T::lit(64.0) * T::PI() * flexural_rigidity(m, g.membrane_thickness) / (g.cavity_radius * g.cavity_radius)
}

/// Spring-softened fundamental frequency and the lumped quantities behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SoftenedFrequency<T> {
    pub frequency: T,
    pub unbiased_frequency: T,
    /// `eps0 A V^2 / (d_eff - w0)^3` with `A` the cavity disc area, N/m.
    pub electrostatic_stiffness: T,
    /// `64 pi D / a^2`, N/m.
    pub plate_stiffness: T,
    pub center_displacement: T,
}

/// Description of the lumping used by [`softened_frequency`], for output
/// metadata.
pub const SOFTENING_LUMPING: &str =
    "f = f1*sqrt(1 - k_e/k_m); k_e = eps0*A*V^2/(d_eff - w0)^3 with A = pi*a^2 and w0 the equilibrium centre deflection; k_m = 64*pi*D/a^2";

pub fn softened_frequency<T: Scalar>(
    dev: &Device<T>,
    voltage: T,
    plate: &PlateConfig<T>,
    cfg: &CouplingConfig<T>,
) -> Result<SoftenedFrequency<T>> {
    let g = &dev.geometry;
    let f1 = first_frequency(g, &dev.membrane, plate)?;
    let k_m = lumped_plate_stiffness(g, &dev.membrane);
    if voltage == T::zero() {
        return Ok(SoftenedFrequency {
            frequency: f1,
            unbiased_frequency: f1,
            electrostatic_stiffness: T::zero(),
            plate_stiffness: k_m,
            center_displacement: T::zero(),
        });
    }
    let bias = solve_equilibrium(dev, voltage, plate, cfg)?;
    if !bias.converged {
        return Err(CmutError::Solver(format!(
            "equilibrium at {voltage} V did not converge ({:?})",
            bias.failure
        )));
    }
    let d_eff = effective_gap(g, &dev.membrane, cfg.pressure_gap_policy)?;
    let gap = d_eff - bias.center_displacement;
    let area = region_areas(g).gap_area;
    let k_e = eps0::<T>() * area * voltage * voltage / (gap * gap * gap);
    if k_e >= k_m {
        return Err(CmutError::SofteningCollapse {
            k_e: k_e.as_f64(),
            k_m: k_m.as_f64(),
        });
    }
    Ok(SoftenedFrequency {
        frequency: f1 * (T::one() - k_e / k_m).sqrt(),
        unbiased_frequency: f1,
        electrostatic_stiffness: k_e,
        plate_stiffness: k_m,
        center_displacement: bias.center_displacement,
    })
}

/// Result of the pull-in search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullIn<T> {
    /// Largest bias found to converge, V.
    pub voltage: T,
    /// Smallest bias found not to converge, V.
    pub upper: T,
    pub last_converged: BiasPoint<T>,
}

/// Resolution of the pull-in bisection, V.
pub const PULL_IN_RESOLUTION: f64 = 0.1;

/// Largest converging bias, bracketed by doubling from 10 V and refined by
/// bisection to [`PULL_IN_RESOLUTION`].
pub fn pull_in_voltage<T: Scalar>(
    dev: &Device<T>,
    plate: &PlateConfig<T>,
    cfg: &CouplingConfig<T>,
) -> Result<PullIn<T>> {
    let mut lo_point = solve_equilibrium(dev, T::zero(), plate, cfg)?;
    let mut lo = T::zero();
    let mut hi = T::lit(10.0);
    let limit = T::lit(1e6);
    loop {
        let p = solve_equilibrium(dev, hi, plate, cfg)?;
        if !p.converged {
            break;
        }
        lo = hi;
        lo_point = p;
        hi = hi * T::lit(2.0);
        if hi > limit {
            return Err(CmutError::Solver("no pull-in below 1 MV".into()));
        }
    }
    let resolution = T::lit(PULL_IN_RESOLUTION);
    while hi - lo > resolution {
        let mid = (lo + hi) / T::lit(2.0);
        let p = solve_equilibrium(dev, mid, plate, cfg)?;
        if p.converged {
            lo = mid;
            lo_point = p;
        } else {
            hi = mid;
        }
    }
    Ok(PullIn {
        voltage: lo,
        upper: hi,
        last_converged: lo_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacitance::cell_capacitance;
    use crate::geometry::default_cell;
    use crate::materials::builtin_db;

    fn device(membrane: &str) -> Device<f64> {
        let db = builtin_db();
        Device::new(
            default_cell(),
            db.get(membrane).unwrap().clone(),
            db.get("SiO2").unwrap().clone(),
        )
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn pressure_values() {
        let dev = device("Si3N4");
        let g = &dev.geometry;
        let flat = DeflectionProfile::zeros(radial_grid(g.cavity_radius, 401));
        let p0 = electrostatic_pressure(g, &dev.membrane, 0.0, &flat, GapPolicy::SeriesMembrane).unwrap();
        assert!(p0.iter().all(|&p| p == 0.0));
        let p40 = electrostatic_pressure(g, &dev.membrane, 40.0, &flat, GapPolicy::SeriesMembrane).unwrap();
        // eps0 * 1600 / (2 * (0.6 um)^2)
        assert!(rel(p40[0], 1.9676e4) < 1e-4, "{}", p40[0]);
        assert!(p40.iter().all(|&p| p == p40[0]));
        let p80 = electrostatic_pressure(g, &dev.membrane, 80.0, &flat, GapPolicy::SeriesMembrane).unwrap();
        assert!(rel(p80[0], 4.0 * p40[0]) < 1e-15);
        let gap_only = electrostatic_pressure(g, &dev.membrane, 40.0, &flat, GapPolicy::GapOnly).unwrap();
        assert!(rel(gap_only[0], p40[0] * 1.44) < 1e-12);
    }

    #[test]
    fn pressure_contact() {
        let dev = device("Si3N4");
        let g = &dev.geometry;
        let mut w = DeflectionProfile::zeros(radial_grid(g.cavity_radius, 401));
        w.w[0] = g.gap_height;
        assert!(matches!(
            electrostatic_pressure(g, &dev.membrane, 10.0, &w, GapPolicy::SeriesMembrane),
            Err(CmutError::Contact { .. })
        ));
    }

    #[test]
    fn zero_bias() {
        let dev = device("Si3N4");
        let p = solve_equilibrium(&dev, 0.0, &PlateConfig::default(), &CouplingConfig::default()).unwrap();
        assert!(p.converged);
        assert_eq!(p.iterations, 1);
        assert!(p.profile.w.iter().all(|&v| v == 0.0));
        let c0 = cell_capacitance(&dev.geometry, &dev.membrane, &dev.pillar, GapPolicy::SeriesMembrane)
            .unwrap()
            .total;
        assert!(rel(p.capacitance.unwrap(), c0) < 1e-12);
    }

    #[test]
    fn negative_bias_rejected() {
        let dev = device("Si3N4");
        assert!(solve_equilibrium(&dev, -1.0, &PlateConfig::default(), &CouplingConfig::default()).is_err());
    }

    #[test]
    fn bad_coupling_config() {
        let dev = device("Si3N4");
        let cfg = CouplingConfig {
            relaxation: 1.5,
            ..CouplingConfig::default()
        };
        assert!(solve_equilibrium(&dev, 10.0, &PlateConfig::default(), &cfg).is_err());
    }

    #[test]
    fn equilibrium_properties() {
        let dev = device("Si3N4");
        let plate = PlateConfig::default();
        let cfg = CouplingConfig::default();
        let mut last = 0.0;
        let c0 = cell_capacitance(&dev.geometry, &dev.membrane, &dev.pillar, GapPolicy::SeriesMembrane)
            .unwrap()
            .total;
        for v in [20.0, 40.0, 60.0, 80.0, 100.0] {
            let p = solve_equilibrium(&dev, v, &plate, &cfg).unwrap();
            assert!(p.converged, "{v} V");
            assert!(p.center_displacement > last);
            last = p.center_displacement;
            assert!(p.profile.w.windows(2).all(|s| s[1] <= s[0]), "radially non-increasing");
            assert_eq!(p.profile.edge(), 0.0);
            assert!(p.capacitance.unwrap() >= c0);
            assert_eq!(p.center_displacement, p.profile.center());
        }
    }

    #[test]
    fn small_signal_quadratic() {
        // Points of the 40-100 V grid with w0 < 5 % of d_eff.
        let dev = device("Si3N4");
        let d_eff = 0.6e-6;
        let ratios: Vec<f64> = (4..=10)
            .map(|k| k as f64 * 10.0)
            .filter_map(|v| {
                let p = solve_equilibrium(&dev, v, &PlateConfig::default(), &CouplingConfig::default()).unwrap();
                (p.center_displacement < 0.05 * d_eff).then(|| p.center_displacement / (v * v))
            })
            .collect();
        assert!(ratios.len() >= 2);
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo - 1.0 < 0.02, "{ratios:?}");
    }

    #[test]
    fn relaxation_independent() {
        let dev = device("Si3N4");
        let plate = PlateConfig::default();
        let cfg = CouplingConfig::default();
        let a = solve_equilibrium(&dev, 40.0, &plate, &cfg).unwrap();
        let half = CouplingConfig {
            relaxation: cfg.relaxation / 2.0,
            ..cfg
        };
        let b = solve_equilibrium(&dev, 40.0, &plate, &half).unwrap();
        assert!(b.converged);
        assert!((a.center_displacement - b.center_displacement).abs() < 10.0 * cfg.tol);
    }

    #[test]
    fn sic_displaces_less() {
        let plate = PlateConfig::default();
        let cfg = CouplingConfig::default();
        let a = solve_equilibrium(&device("Si3N4"), 60.0, &plate, &cfg).unwrap();
        let b = solve_equilibrium(&device("SiC"), 60.0, &plate, &cfg).unwrap();
        assert!(b.center_displacement < a.center_displacement);
    }

    #[test]
    fn max_iterations_flagged() {
        let dev = device("Si3N4");
        let cfg = CouplingConfig {
            max_iter: 2,
            ..CouplingConfig::default()
        };
        let p = solve_equilibrium(&dev, 60.0, &PlateConfig::default(), &cfg).unwrap();
        assert!(!p.converged);
        assert_eq!(p.failure, Some(NonConvergence::MaxIterations));
        assert!(p.capacitance.is_none());
    }

    #[test]
    fn softening() {
        let dev = device("Si3N4");
        let plate = PlateConfig::default();
        let cfg = CouplingConfig::default();
        let f1 = first_frequency(&dev.geometry, &dev.membrane, &plate).unwrap();
        assert_eq!(softened_frequency(&dev, 0.0, &plate, &cfg).unwrap().frequency, f1);
        let mut last = f1;
        for v in [20.0, 40.0, 60.0, 80.0] {
            let f = softened_frequency(&dev, v, &plate, &cfg).unwrap().frequency;
            assert!(f < last);
            last = f;
        }
    }

    #[test]
    fn softening_collapse_reported() {
        // Above the lumped collapse but below distributed pull-in.
        let dev = device("Si3N4");
        let r = softened_frequency(&dev, 120.0, &PlateConfig::default(), &CouplingConfig::default());
        assert!(matches!(r, Err(CmutError::SofteningCollapse { .. })), "{r:?}");
    }

    #[test]
    fn pull_in_bracketed() {
        let dev = device("Si3N4");
        let p = pull_in_voltage(&dev, &PlateConfig::default(), &CouplingConfig::default()).unwrap();
        assert!(p.voltage > 100.0);
        assert!(p.upper - p.voltage <= PULL_IN_RESOLUTION);
        assert!(p.last_converged.converged);
        assert!(p.last_converged.center_displacement < dev.geometry.gap_height);
    }
}
