//! Clamped circular plate: `D lap^2 w - T lap w = P` for the static case and
//! `D lap^2 w - T lap w = rho t omega^2 w` for free vibration.
//!
//! Static loads are axisymmetric and solved for the slope `dw/dr` (see
//! [`static_deflection`]), which keeps the system second order.
//!
//! For modes the radial operator is discretized on a uniform grid in flux form,
//! `lap_n w = (1/r)(r w')' - n^2 w / r^2`, so that the r-weighted system
//! `K = D S R^-1 S - T S` is symmetric and pentadiagonal with a diagonal
//! mass `M = rho t R`. The centre node uses the control volume of radius
//! `h/2` (equivalent to ghost reflection `w_-1 = w_1`); the clamped rim uses
//! the ghost `w_{N+1} = w_{N-1}`.

use serde::{Deserialize, Serialize};

use crate::banded::{lowest_eigenpairs, solve_tridiagonal, SymBanded};
use crate::bessel::{clamped_mode_shape, clamped_plate_roots};
use crate::error::{CmutError, Result};
use crate::geometry::{validate, CellGeometry};
use crate::materials::Material;
use crate::num::Scalar;

/// Radial deflection samples, positive toward the bottom electrode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeflectionProfile<T> {
    pub radii: Vec<T>,
    pub w: Vec<T>,
}

impl<T: Scalar> DeflectionProfile<T> {
    /// Checks grid shape and finiteness. The clamped-rim condition is a
    /// property of solver output, not enforced here, so synthetic profiles
    /// can be built for tests.
    pub fn new(radii: Vec<T>, w: Vec<T>) -> Result<Self> {
        if radii.len() != w.len() || radii.len() < 2 {
            return Err(CmutError::Domain(format!(
                "profile needs matching grids of >= 2 points, got {} radii and {} values",
                radii.len(),
                w.len()
            )));
        }
        if radii[0] != T::zero() {
            return Err(CmutError::Domain("profile grid must start at r = 0".into()));
        }
        if radii.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(CmutError::Domain("profile grid must be strictly increasing".into()));
        }
        if w.iter().chain(&radii).any(|v| !v.is_finite()) {
            return Err(CmutError::Domain("profile contains non-finite values".into()));
        }
        Ok(Self { radii, w })
    }

    pub fn zeros(radii: Vec<T>) -> Self {
        let w = vec![T::zero(); radii.len()];
        Self { radii, w }
    }

    pub fn center(&self) -> T {
        self.w[0]
    }

    pub fn max(&self) -> T {
        self.w.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn edge(&self) -> T {
        *self.w.last().expect("non-empty profile")
    }

    pub fn check_no_contact(&self, gap: T) -> Result<()> {
        match self.w.iter().position(|&v| v >= gap) {
            Some(i) => Err(CmutError::Contact {
                deflection: self.w[i].as_f64(),
                gap: gap.as_f64(),
                radius: self.radii[i].as_f64(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassLoading {
    #[default]
    None,
    /// Top electrode spread uniformly over the plate.
    TopElectrode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateConfig<T> {
    /// Membrane tension, N/m.
    pub tension: T,
    pub radial_nodes: usize,
    pub mass_loading: MassLoading,
    /// Top-electrode density for [`MassLoading::TopElectrode`], kg/m³.
    pub electrode_density: T,
}

impl<T: Scalar> Default for PlateConfig<T> {
    fn default() -> Self {
        Self {
            tension: T::zero(),
            radial_nodes: 401,
            mass_loading: MassLoading::None,
            electrode_density: T::lit(2700.0),
        }
    }
}

impl<T: Scalar> PlateConfig<T> {
    pub const MIN_NODES: usize = 50;

    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes < Self::MIN_NODES {
            return Err(CmutError::Domain(format!(
                "radial_nodes must be >= {}, got {}",
                Self::MIN_NODES,
                self.radial_nodes
            )));
        }
        if !(self.tension >= T::zero()) || !self.tension.is_finite() {
            return Err(CmutError::Domain(format!("tension must be >= 0, got {}", self.tension)));
        }
        if !(self.electrode_density > T::zero()) {
            return Err(CmutError::Domain("electrode_density must be > 0".into()));
        }
        Ok(())
    }

    /// Mass per unit area of the vibrating stack, kg/m².
    pub fn areal_density(&self, g: &CellGeometry<T>, m: &Material<T>) -> T {
        let base = m.density * g.membrane_thickness;
        match self.mass_loading {
            MassLoading::None => base,
            MassLoading::TopElectrode => base + self.electrode_density * g.top_electrode_thickness,
        }
    }
}

/// One vibration mode. `lambda` is defined by
/// `f = lambda^2 / (2 pi a^2) * sqrt(D / (rho t)_eff)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeResult<T> {
    pub azimuthal_order: usize,
    pub radial_order: usize,
    pub frequency: T,
    pub lambda: T,
    /// Radial shape on the plate grid, unit peak magnitude.
    pub shape: Vec<T>,
}

/// Which eigen solver produced a mode set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Bessel,
    Discrete,
}

pub fn flexural_rigidity<T: Scalar>(m: &Material<T>, thickness: T) -> T {
    m.youngs_modulus * thickness.powi(3) / (T::lit(12.0) * (T::one() - m.poissons_ratio * m.poissons_ratio))
}

/// Uniform grid `0 = r_0 < ... < r_{nodes-1} = radius`.
pub fn radial_grid<T: Scalar>(radius: T, nodes: usize) -> Vec<T> {
    let last = nodes - 1;
    let h = radius / T::from_usize_lossy(last);
    (0..nodes)
        .map(|i| if i == last { radius } else { T::from_usize_lossy(i) * h })
        .collect()
}

/// Discretized radial operator for one azimuthal order.
struct RadialSystem<T> {
    /// grid index of the first unknown (0 for n = 0, else 1: w(0) = 0)
    first: usize,
    stiffness: SymBanded<T>,
    /// r-weights of the unknowns
    weights: Vec<T>,
}

impl<T: Scalar> RadialSystem<T> {
    fn assemble(radius: T, nodes: usize, order: usize, rigidity: T, tension: T) -> Self {
        let intervals = nodes - 1;
        let h = radius / T::from_usize_lossy(intervals);
        let h2 = h * h;
        let half = T::lit(0.5);
        let n2 = T::from_usize_lossy(order * order);
        let first = usize::from(order > 0);
        let unknowns = intervals - first;
        let r = |i: usize| T::from_usize_lossy(i) * h;
        let r_face = |i: usize| (T::from_usize_lossy(i) + half) * h; // r_{i+1/2}
        let weight = |i: usize| if i == 0 { h2 / T::lit(8.0) } else { r(i) };

        // symmetric tridiagonal S over grid nodes first..intervals-1
        let s_diag = |i: usize| {
            let outer = r_face(i);
            let inner = if i == 0 { T::zero() } else { r_face(i - 1) };
            let azimuthal = if i == 0 { T::zero() } else { n2 / r(i) };
            -(outer + inner) / h2 - azimuthal
        };
        let s_off = |i: usize| r_face(i) / h2; // S_{i,i+1}
        let s = |i: usize, j: usize| -> T {
            if i == j {
                s_diag(i)
            } else if j == i + 1 {
                s_off(i)
            } else if i == j + 1 {
                s_off(j)
            } else {
                T::zero()
            }
        };

        let mut k = SymBanded::zeros(unknowns, 2);
        let local = |i: usize| i - first;
        for j in first..intervals {
            let inv_w = T::one() / weight(j);
            let lo = j.saturating_sub(1).max(first);
            let hi = (j + 1).min(intervals - 1);
            for a in lo..=hi {
                for b in lo..=a {
                    k.add(local(a), local(b), rigidity * s(a, j) * s(j, b) * inv_w);
                }
            }
        }
        // rim ghost: (lap w)_N = 2 w_{N-1} / h^2
        let last = intervals - 1;
        k.add(local(last), local(last), rigidity * s_off(last) * T::lit(2.0) / h2);
        if tension > T::zero() {
            for i in first..intervals {
                k.add(local(i), local(i), -tension * s_diag(i));
                if i + 1 < intervals {
                    k.add(local(i + 1), local(i), -tension * s_off(i));
                }
            }
        }
        let weights = (first..intervals).map(weight).collect();
        Self {
            first,
            stiffness: k,
            weights,
        }
    }

    /// Embeds an unknown vector into the full grid (zeros at fixed nodes).
    fn expand(&self, x: &[T], nodes: usize) -> Vec<T> {
        let mut full = vec![T::zero(); nodes];
        full[self.first..self.first + x.len()].copy_from_slice(x);
        full
    }
}

/// Static axisymmetric deflection under a radial pressure field sampled on
/// the plate grid (`cfg.radial_nodes` points over the cavity radius).
pub fn static_deflection<T: Scalar>(
    g: &CellGeometry<T>,
    m: &Material<T>,
    pressure: &[T],
    cfg: &PlateConfig<T>,
) -> Result<DeflectionProfile<T>> {
    cfg.validate()?;
    validate(*g)?;
    let nodes = cfg.radial_nodes;
    if pressure.len() != nodes {
        return Err(CmutError::Domain(format!(
            "pressure field has {} samples, grid has {nodes}",
            pressure.len()
        )));
    }
    if pressure.iter().any(|p| !p.is_finite()) {
        return Err(CmutError::Domain("pressure field contains non-finite values".into()));
    }
    let d = flexural_rigidity(m, g.membrane_thickness);
    let radii = radial_grid(g.cavity_radius, nodes);
    let slope = static_slope(&radii, pressure, d, cfg.tension)?;
    // w(a) = 0, w' = slope; end-corrected trapezoid, exact for cubic slopes
    let curvature = derivative(&radii, &slope);
    let mut w = vec![T::zero(); nodes];
    let half = T::lit(0.5);
    let twelfth = T::one() / T::lit(12.0);
    for i in (0..nodes - 1).rev() {
        let h = radii[i + 1] - radii[i];
        let area = h * half * (slope[i] + slope[i + 1]) - h * h * twelfth * (curvature[i + 1] - curvature[i]);
        w[i] = w[i + 1] - area;
    }
    DeflectionProfile::new(radii, w)
}

/// Three-point derivative on a possibly non-uniform grid: central inside,
/// one-sided at the ends, second order throughout.
fn derivative<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    if n < 3 {
        return vec![(y[n - 1] - y[0]) / (x[n - 1] - x[0]); n];
    }
    let three = |i: usize, at: T| {
        let (x0, x1, x2) = (x[i], x[i + 1], x[i + 2]);
        y[i] * (T::lit(2.0) * at - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y[i + 1] * (T::lit(2.0) * at - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y[i + 2] * (T::lit(2.0) * at - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| match i {
            0 => three(0, x[0]),
            i if i == n - 1 => three(n - 3, x[n - 1]),
            i => three(i - 1, x[i]),
        })
        .collect()
}

/// Slope `theta = dw/dr` of the axisymmetric plate. Integrating the plate
/// equation once from the centre gives
/// `D d/dr[(1/r) d/dr(r theta)] - T theta = (1/r) int_0^r P s ds`
/// with `theta(0) = theta(a) = 0`, a diagonally dominant tridiagonal system.
fn static_slope<T: Scalar>(radii: &[T], pressure: &[T], rigidity: T, tension: T) -> Result<Vec<T>> {
    let nodes = radii.len();
    let half = T::lit(0.5);
    let mut moment = vec![T::zero(); nodes];
    for i in 1..nodes {
        let ds = radii[i] - radii[i - 1];
        moment[i] = moment[i - 1] + ds * half * (pressure[i - 1] * radii[i - 1] + pressure[i] * radii[i]);
    }
    let interior = nodes - 2;
    let (mut sub, mut diag, mut sup, mut rhs) = (
        vec![T::zero(); interior],
        vec![T::zero(); interior],
        vec![T::zero(); interior],
        vec![T::zero(); interior],
    );
    for k in 0..interior {
        let i = k + 1;
        let (hl, hr) = (radii[i] - radii[i - 1], radii[i + 1] - radii[i]);
        let hc = half * (hl + hr);
        let (fl, fr) = (half * (radii[i] + radii[i - 1]), half * (radii[i + 1] + radii[i]));
        sub[k] = rigidity * radii[i - 1] / (fl * hl * hc);
        sup[k] = rigidity * radii[i + 1] / (fr * hr * hc);
        diag[k] = -rigidity * radii[i] * (T::one() / (fl * hl) + T::one() / (fr * hr)) / hc - tension;
        rhs[k] = moment[i] / radii[i];
    }
    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    let mut slope = vec![T::zero(); nodes];
    slope[1..nodes - 1].copy_from_slice(&inner);
    Ok(slope)
}

/// `f = lambda^2/(2 pi a^2) sqrt(D/(rho t))` inverted for `lambda`.
fn lambda_from_omega<T: Scalar>(omega: T, radius: T, rigidity: T, areal_density: T) -> T {
    (omega * radius * radius * (areal_density / rigidity).sqrt()).sqrt()
}

fn normalize_shape<T: Scalar>(mut shape: Vec<T>) -> Vec<T> {
    let peak = shape
        .iter()
        .copied()
        .fold(T::zero(), |a, v| if v.abs() > a.abs() { v } else { a });
    if peak != T::zero() {
        for v in shape.iter_mut() {
            *v = *v / peak;
        }
    }
    shape
}

/// Lowest `count` modes of azimuthal order `order` from the discretized
/// operator (tension included).
pub fn discrete_modes<T: Scalar>(
    g: &CellGeometry<T>,
    m: &Material<T>,
    cfg: &PlateConfig<T>,
    order: usize,
    count: usize,
) -> Result<Vec<ModeResult<T>>> {
    cfg.validate()?;
    validate(*g)?;
    let d = flexural_rigidity(m, g.membrane_thickness);
    let rho_t = cfg.areal_density(g, m);
    let sys = RadialSystem::assemble(g.cavity_radius, cfg.radial_nodes, order, d, cfg.tension);
    let mass: Vec<T> = sys.weights.iter().map(|w| *w * rho_t).collect();
    let pairs = lowest_eigenpairs(&sys.stiffness, &mass, count)?;
    let two_pi = T::lit(2.0) * T::PI();
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(idx, p)| {
            let omega = p.value.max(T::zero()).sqrt();
            ModeResult {
                azimuthal_order: order,
                radial_order: idx + 1,
                frequency: omega / two_pi,
                lambda: lambda_from_omega(omega, g.cavity_radius, d, rho_t),
                shape: normalize_shape(sys.expand(&p.vector, cfg.radial_nodes)),
            }
        })
        .collect())
}

/// Lowest `count` modes of azimuthal order `order` from the clamped-plate
/// characteristic equation. Only valid without tension.
pub fn bessel_modes<T: Scalar>(
    g: &CellGeometry<T>,
    m: &Material<T>,
    cfg: &PlateConfig<T>,
    order: usize,
    count: usize,
) -> Result<Vec<ModeResult<T>>> {
    cfg.validate()?;
    validate(*g)?;
    if cfg.tension != T::zero() {
        return Err(CmutError::Domain("Bessel modes require zero tension".into()));
    }
    let a = g.cavity_radius;
    let d = flexural_rigidity(m, g.membrane_thickness);
    let rho_t = cfg.areal_density(g, m);
    let scale = (d / rho_t).sqrt() / (T::lit(2.0) * T::PI() * a * a);
    let grid = radial_grid(T::one(), cfg.radial_nodes);
    Ok(clamped_plate_roots::<T>(order, count)
        .into_iter()
        .enumerate()
        .map(|(idx, lambda)| ModeResult {
            azimuthal_order: order,
            radial_order: idx + 1,
            frequency: lambda * lambda * scale,
            lambda,
            shape: normalize_shape(grid.iter().map(|&rho| clamped_mode_shape(order, lambda, rho)).collect()),
        })
        .collect())
}

/// Highest azimuthal order included in [`eigenfrequencies`].
pub const MAX_AZIMUTHAL_ORDER: usize = 3;

/// Lowest `n_modes` modes over azimuthal orders 0..=3, each order `n >= 1`
/// listed twice (cos/sin pair). Zero tension uses the characteristic
/// equation; positive tension uses the discretized operator.
pub fn eigenfrequencies<T: Scalar>(
    g: &CellGeometry<T>,
    m: &Material<T>,
    cfg: &PlateConfig<T>,
    n_modes: usize,
) -> Result<Vec<ModeResult<T>>> {
    let method = if cfg.tension > T::zero() {
        EigenMethod::Discrete
    } else {
        EigenMethod::Bessel
    };
    eigenfrequencies_with(g, m, cfg, n_modes, method)
}

pub fn eigenfrequencies_with<T: Scalar>(
    g: &CellGeometry<T>,
    m: &Material<T>,
    cfg: &PlateConfig<T>,
    n_modes: usize,
    method: EigenMethod,
) -> Result<Vec<ModeResult<T>>> {
    if n_modes == 0 {
        return Err(CmutError::Domain("n_modes must be >= 1".into()));
    }
    let mut all = Vec::new();
    for order in 0..=MAX_AZIMUTHAL_ORDER {
        let per_order = n_modes;
        let modes = match method {
            EigenMethod::Bessel => bessel_modes(g, m, cfg, order, per_order)?,
            EigenMethod::Discrete => discrete_modes(g, m, cfg, order, per_order)?,
        };
        for mode in modes {
            if order > 0 {
                all.push(mode.clone());
            }
            all.push(mode);
        }
    }
    all.sort_by(|a, b| {
        a.frequency
            .partial_cmp(&b.frequency)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.azimuthal_order.cmp(&b.azimuthal_order))
    });
    all.truncate(n_modes);
    Ok(all)
}

/// Fundamental (0,1) frequency, Hz.
pub fn first_frequency<T: Scalar>(g: &CellGeometry<T>, m: &Material<T>, cfg: &PlateConfig<T>) -> Result<T> {
    let modes = if cfg.tension > T::zero() {
        discrete_modes(g, m, cfg, 0, 1)?
    } else {
        bessel_modes(g, m, cfg, 0, 1)?
    };
    Ok(modes[0].frequency)
}
