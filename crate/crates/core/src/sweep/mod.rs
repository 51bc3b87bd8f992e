//! Parameter sweeps over one geometry field or the bias voltage.
//!
//! Grid points are evaluated in parallel and collected in grid order, so the
//! emitted table does not depend on thread scheduling. Points the model
//! cannot evaluate (invalid geometry, non-converged equilibrium, contact,
//! softening collapse) stay in the table with empty values and a flag.

mod calibrate;
mod compare;
mod table;

pub use calibrate::{calibrate_overlap_radius, reference_points, Calibration, ReferencePoint, Residual, HOLDOUT_FLAG};
pub use compare::{compare_materials, Comparison, ComparisonRow, CLAIMED_HIGHER};
pub use table::{format_sig6, Column, Row, Table, Unit};

use rayon::prelude::*;
use serde::Serialize;

use crate::capacitance::{cell_capacitance, GapPolicy};
use crate::electrostatics::{
    softened_frequency, solve_equilibrium, CouplingConfig, Device, NonConvergence, SOFTENING_LUMPING,
};
use crate::error::{CmutError, Result};
use crate::geometry::{validate, CellGeometry, LengthParam};
use crate::materials::Material;
use crate::plate::{first_frequency, PlateConfig};

pub const FLAG_OVERLAP_RAISED: &str = "overlap_raised";
pub const FLAG_INVALID_GEOMETRY: &str = "invalid_geometry";
pub const FLAG_NON_CONVERGED: &str = "non_converged";
pub const FLAG_CONTACT: &str = "contact";
pub const FLAG_DIVERGED: &str = "diverged";
pub const FLAG_SOFTENING_COLLAPSE: &str = "softening_collapse";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    CavityRadius,
    MembraneThickness,
    GapHeight,
    Voltage,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::CavityRadius => "cavity_radius",
            SweepParam::MembraneThickness => "membrane_thickness",
            SweepParam::GapHeight => "gap_height",
            SweepParam::Voltage => "voltage",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            SweepParam::Voltage => Unit::Volt,
            _ => Unit::Micrometre,
        }
    }

    fn length(self) -> Option<LengthParam> {
        match self {
            SweepParam::CavityRadius => Some(LengthParam::CavityRadius),
            SweepParam::MembraneThickness => Some(LengthParam::MembraneThickness),
            SweepParam::GapHeight => Some(LengthParam::GapHeight),
            SweepParam::Voltage => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Capacitance,
    Frequency,
    Displacement,
    SoftenedFrequency,
}

impl Response {
    pub fn name(self) -> &'static str {
        match self {
            Response::Capacitance => "capacitance",
            Response::Frequency => "frequency",
            Response::Displacement => "center_displacement",
            Response::SoftenedFrequency => "softened_frequency",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            Response::Capacitance => Unit::Nanofarad,
            Response::Frequency | Response::SoftenedFrequency => Unit::Megahertz,
            Response::Displacement => Unit::Micrometre,
        }
    }

    fn supports(self, vary: SweepParam) -> bool {
        !matches!(
            (self, vary),
            (Response::Capacitance, SweepParam::Voltage) | (Response::Frequency, SweepParam::Voltage)
        )
    }

    fn uses_bias(self) -> bool {
        matches!(self, Response::Displacement | Response::SoftenedFrequency)
    }

    /// Trend the model is expected to show along `vary`.
    pub fn expected_trend(self, vary: SweepParam) -> Option<Trend> {
        use Response::*;
        use SweepParam::*;
        use Trend::*;
        Some(match (self, vary) {
            (Capacitance, CavityRadius | GapHeight) => StrictlyDecreasing,
            (Frequency, CavityRadius) => StrictlyDecreasing,
            (Frequency, MembraneThickness) => StrictlyIncreasing,
            (Frequency, GapHeight) => Constant,
            (Displacement, Voltage | CavityRadius) => StrictlyIncreasing,
            (Displacement, MembraneThickness | GapHeight) => StrictlyDecreasing,
            (SoftenedFrequency, Voltage | CavityRadius) => StrictlyDecreasing,
            (SoftenedFrequency, GapHeight | MembraneThickness) => StrictlyIncreasing,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    StrictlyIncreasing,
    StrictlyDecreasing,
    Constant,
    NonMonotone,
    /// Some rows have no value.
    Incomplete,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::StrictlyIncreasing => "strictly_increasing",
            Trend::StrictlyDecreasing => "strictly_decreasing",
            Trend::Constant => "constant",
            Trend::NonMonotone => "non_monotone",
            Trend::Incomplete => "incomplete",
        }
    }

    pub fn of(values: &[Option<f64>]) -> Trend {
        let Some(v) = values.iter().copied().collect::<Option<Vec<f64>>>() else {
            return Trend::Incomplete;
        };
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if v.iter().all(|x| (x - v[0]).abs() <= 1e-12 * scale) {
            return Trend::Constant;
        }
        if v.windows(2).all(|p| p[1] > p[0]) {
            Trend::StrictlyIncreasing
        } else if v.windows(2).all(|p| p[1] < p[0]) {
            Trend::StrictlyDecreasing
        } else {
            Trend::NonMonotone
        }
    }
}

/// Everything held fixed during a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepContext {
    pub device: Device<f64>,
    /// Bias for displacement and softened-frequency responses, V.
    pub voltage: f64,
    pub capacitance_policy: GapPolicy,
    pub plate: PlateConfig<f64>,
    pub coupling: CouplingConfig<f64>,
}

impl SweepContext {
    pub fn new(device: Device<f64>) -> Self {
        Self {
            device,
            voltage: 0.0,
            capacitance_policy: GapPolicy::default(),
            plate: PlateConfig::default(),
            coupling: CouplingConfig::default(),
        }
    }

    pub fn with_voltage(mut self, voltage: f64) -> Self {
        self.voltage = voltage;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub vary: SweepParam,
    /// SI values (m or V), strictly monotone.
    pub grid: Vec<f64>,
    pub responses: Vec<Response>,
    pub context: SweepContext,
}

impl SweepSpec {
    pub fn new(vary: SweepParam, grid: Vec<f64>, responses: Vec<Response>, context: SweepContext) -> Self {
        Self {
            vary,
            grid,
            responses,
            context,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(CmutError::Spec("empty grid".into()));
        }
        if self.responses.is_empty() {
            return Err(CmutError::Spec("no response requested".into()));
        }
        if let Some(x) = self.grid.iter().find(|x| !x.is_finite()) {
            return Err(CmutError::Spec(format!("grid value {x} is not finite")));
        }
        let inc = self.grid.windows(2).all(|p| p[1] > p[0]);
        let dec = self.grid.windows(2).all(|p| p[1] < p[0]);
        if !(inc || dec) {
            return Err(CmutError::Spec("grid must be strictly monotone".into()));
        }
        let negative_bias = match self.vary {
            SweepParam::Voltage => self.grid.iter().any(|&v| v < 0.0),
            _ => self.context.voltage < 0.0 || !self.context.voltage.is_finite(),
        };
        if negative_bias {
            return Err(CmutError::Domain("bias voltage must be >= 0".into()));
        }
        for r in &self.responses {
            if !r.supports(self.vary) {
                return Err(CmutError::Spec(format!(
                    "{} does not depend on {}",
                    r.name(),
                    self.vary.name()
                )));
            }
        }
        self.context.plate.validate()?;
        self.context.coupling.validate()?;
        validate(self.context.device.geometry)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    /// Fixed-point iterations summed over all equilibrium solves.
    pub iterations: usize,
    pub flagged_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub table: Table,
    pub stats: SolverStats,
}

impl SweepResult {
    pub fn trend(&self, response: Response) -> Option<Trend> {
        let idx = self.spec.responses.iter().position(|r| *r == response)?;
        Some(Trend::of(&self.table.column_values(idx)))
    }
}

struct Point {
    values: Vec<Option<f64>>,
    flags: Vec<String>,
    iterations: usize,
}

fn failure_flag(f: NonConvergence) -> &'static str {
    match f {
        NonConvergence::Contact => FLAG_CONTACT,
        NonConvergence::MaxIterations => FLAG_NON_CONVERGED,
        NonConvergence::Diverged => FLAG_DIVERGED,
    }
}

fn push_flag(flags: &mut Vec<String>, f: &str) {
    if !flags.iter().any(|x| x == f) {
        flags.push(f.to_string());
    }
}

fn evaluate(spec: &SweepSpec, x: f64) -> Result<Point> {
    let ctx = &spec.context;
    let mut flags = Vec::new();
    let mut g = ctx.device.geometry;
    let mut voltage = ctx.voltage;
    match spec.vary.length() {
        Some(p) => {
            g = g.with(p, x);
            if spec.vary == SweepParam::CavityRadius && x > g.overlap_radius {
                g.overlap_radius = x;
                flags.push(FLAG_OVERLAP_RAISED.to_string());
            }
        }
        None => voltage = x,
    }
    let g = match validate(g) {
        Ok(g) => g,
        Err(_) => {
            push_flag(&mut flags, FLAG_INVALID_GEOMETRY);
            return Ok(Point {
                values: vec![None; spec.responses.len()],
                flags,
                iterations: 0,
            });
        }
    };
    let dev = ctx.device.with_geometry(g);
    let mut values = Vec::with_capacity(spec.responses.len());
    let mut iterations = 0;
    let mut bias = None;
    for &r in &spec.responses {
        if r.uses_bias() && voltage > 0.0 && bias.is_none() {
            let b = solve_equilibrium(&dev, voltage, &ctx.plate, &ctx.coupling)?;
            iterations += b.iterations;
            bias = Some(b);
        }
        let converged = bias.as_ref().is_none_or(|b| b.converged);
        let value = match r {
            Response::Capacitance => {
                Some(cell_capacitance(&g, &dev.membrane, &dev.pillar, ctx.capacitance_policy)?.total)
            }
            Response::Frequency => Some(first_frequency(&g, &dev.membrane, &ctx.plate)?),
            Response::Displacement if voltage == 0.0 => Some(0.0),
            Response::Displacement | Response::SoftenedFrequency if !converged => {
                let b = bias.as_ref().expect("bias solved");
                push_flag(
                    &mut flags,
                    failure_flag(b.failure.unwrap_or(NonConvergence::MaxIterations)),
                );
                None
            }
            Response::Displacement => bias.as_ref().map(|b| b.center_displacement),
            Response::SoftenedFrequency => match softened_frequency(&dev, voltage, &ctx.plate, &ctx.coupling) {
                Ok(s) => Some(s.frequency),
                Err(CmutError::SofteningCollapse { .. }) => {
                    push_flag(&mut flags, FLAG_SOFTENING_COLLAPSE);
                    None
                }
                Err(e) => return Err(e),
            },
        };
        values.push(value);
    }
    Ok(Point {
        values,
        flags,
        iterations,
    })
}

fn describe_material(m: &Material<f64>) -> String {
    let eps = m
        .relative_permittivity
        .map_or("conductor".to_string(), |e| format!("eps_r={}", format_sig6(e)));
    format!(
        "{} (rho={} kg/m3, E={} GPa, nu={}, {eps})",
        m.name,
        format_sig6(m.density),
        format_sig6(m.youngs_modulus / 1e9),
        format_sig6(m.poissons_ratio)
    )
}

pub fn describe_geometry(g: &CellGeometry<f64>) -> String {
    LengthParam::ALL
        .iter()
        .map(|&p| format!("{}={}", p.table_name(), format_sig6(g.get(p) / 1e-6)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn metadata(spec: &SweepSpec, table: &Table, stats: SolverStats) -> Vec<(String, String)> {
    let ctx = &spec.context;
    let names: Vec<&str> = spec.responses.iter().map(|r| r.name()).collect();
    let mut m = vec![
        ("generator".into(), format!("cmut {}", env!("CARGO_PKG_VERSION"))),
        (
            "artifact".into(),
            format!("{} vs {}", names.join(", "), spec.vary.name()),
        ),
        ("geometry_um".into(), describe_geometry(&ctx.device.geometry)),
        ("membrane".into(), describe_material(&ctx.device.membrane)),
        ("pillar".into(), describe_material(&ctx.device.pillar)),
    ];
    let any = |f: fn(&Response) -> bool| spec.responses.iter().any(f);
    if any(|r| *r == Response::Capacitance) {
        m.push(("capacitance_policy".into(), ctx.capacitance_policy.as_str().into()));
    }
    if any(|r| *r != Response::Capacitance) {
        let p = &ctx.plate;
        let method = if p.tension == 0.0 { "bessel" } else { "discrete" };
        m.push((
            "plate".into(),
            format!(
                "tension={} N/m, radial_nodes={}, mass_loading={}, eigen_method={method}",
                format_sig6(p.tension),
                p.radial_nodes,
                serde_json::to_value(p.mass_loading)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default()
            ),
        ));
    }
    if any(|r| r.uses_bias()) {
        let c = &ctx.coupling;
        if spec.vary != SweepParam::Voltage {
            m.push(("bias_V".into(), format_sig6(ctx.voltage)));
        }
        m.push((
            "coupling".into(),
            format!(
                "pressure_gap_policy={}, relaxation={}, tol={} m, max_iter={}",
                c.pressure_gap_policy.as_str(),
                format_sig6(c.relaxation),
                format_sig6(c.tol),
                c.max_iter
            ),
        ));
        m.push((
            "solver_stats".into(),
            format!("iterations={}, flagged_rows={}", stats.iterations, stats.flagged_rows),
        ));
    }
    if any(|r| *r == Response::SoftenedFrequency) {
        m.push(("softening".into(), SOFTENING_LUMPING.into()));
    }
    if spec.vary == SweepParam::GapHeight && any(|r| *r == Response::Frequency) {
        m.push((
            "note".into(),
            "the unbiased plate frequency does not depend on gap height; see softened_frequency for the bias-dependent value"
                .into(),
        ));
    }
    let trends: Vec<String> = spec
        .responses
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{}={}", r.name(), Trend::of(&table.column_values(i)).as_str()))
        .collect();
    m.push(("trend".into(), trends.join(", ")));
    let expected: Vec<String> = spec
        .responses
        .iter()
        .filter_map(|r| {
            r.expected_trend(spec.vary)
                .map(|t| format!("{}={}", r.name(), t.as_str()))
        })
        .collect();
    if !expected.is_empty() {
        m.push(("expected_trend".into(), expected.join(", ")));
    }
    m
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec
        .grid
        .par_iter()
        .map(|&x| evaluate(spec, x))
        .collect::<Result<Vec<Point>>>()?;
    let mut table = Table::new(
        Column::new(spec.vary.name(), spec.vary.unit()),
        spec.responses.iter().map(|r| Column::new(r.name(), r.unit())).collect(),
    );
    let mut stats = SolverStats::default();
    for (&x, p) in spec.grid.iter().zip(points) {
        stats.iterations += p.iterations;
        if p.values.iter().any(Option::is_none) {
            stats.flagged_rows += 1;
        }
        table.rows.push(Row {
            param: x,
            values: p.values,
            flags: p.flags,
        });
    }
    table.metadata = metadata(spec, &table, stats).into_iter().collect();
    Ok(SweepResult {
        spec: spec.clone(),
        table,
        stats,
    })
}

/// First-mode frequency along a geometry grid.
pub fn frequency_sweep(context: &SweepContext, vary: SweepParam, grid: Vec<f64>) -> Result<SweepResult> {
    if vary == SweepParam::Voltage {
        return Err(CmutError::Spec(
            "frequency sweeps vary cavity_radius, membrane_thickness or gap_height".into(),
        ));
    }
    run_sweep(&SweepSpec::new(vary, grid, vec![Response::Frequency], context.clone()))
}

/// Centre displacement along a bias grid, V.
pub fn displacement_voltage_sweep(context: &SweepContext, voltages: Vec<f64>) -> Result<SweepResult> {
    run_sweep(&SweepSpec::new(
        SweepParam::Voltage,
        voltages,
        vec![Response::Displacement],
        context.clone(),
    ))
}

/// Inclusive grid `from, from + step, ...` up to `to`, tolerant of rounding
/// at the end point.
pub fn linear_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() || to < from {
        return Err(CmutError::Spec(format!(
            "grid needs from <= to and step > 0, got from={from} to={to} step={step}"
        )));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(CmutError::Spec(format!("grid of {} points is too large", n + 1)));
    }
    Ok((0..=n).map(|i| from + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::default_cell;
    use crate::materials::builtin_db;
    use crate::num::UM;

    fn context(membrane: &str) -> SweepContext {
        let db = builtin_db();
        SweepContext::new(Device::new(
            default_cell(),
            db.get(membrane).unwrap().clone(),
            db.get("SiO2").unwrap().clone(),
        ))
    }

    fn um(xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|x| x * UM).collect()
    }

    #[test]
    fn trend_classification() {
        assert_eq!(Trend::of(&[Some(1.0), Some(2.0)]), Trend::StrictlyIncreasing);
        assert_eq!(Trend::of(&[Some(2.0), Some(1.0)]), Trend::StrictlyDecreasing);
        assert_eq!(Trend::of(&[Some(2.0), Some(2.0)]), Trend::Constant);
        assert_eq!(Trend::of(&[Some(1.0), Some(3.0), Some(2.0)]), Trend::NonMonotone);
        assert_eq!(Trend::of(&[Some(1.0), None]), Trend::Incomplete);
    }

    #[test]
    fn spec_validation() {
        let ctx = context("Si3N4");
        let bad = |vary, grid: Vec<f64>, r| run_sweep(&SweepSpec::new(vary, grid, vec![r], ctx.clone())).unwrap_err();
        assert!(matches!(
            bad(SweepParam::GapHeight, vec![], Response::Capacitance),
            CmutError::Spec(_)
        ));
        assert!(matches!(
            bad(SweepParam::GapHeight, um(&[0.5, 0.4, 0.6]), Response::Capacitance),
            CmutError::Spec(_)
        ));
        assert!(matches!(
            bad(SweepParam::Voltage, vec![10.0], Response::Frequency),
            CmutError::Spec(_)
        ));
        assert!(matches!(
            bad(SweepParam::Voltage, vec![-1.0, 10.0], Response::Displacement),
            CmutError::Domain(_)
        ));
        assert!(matches!(
            frequency_sweep(&ctx, SweepParam::Voltage, vec![1.0]).unwrap_err(),
            CmutError::Spec(_)
        ));
    }

    #[test]
    fn conductor_pillar_propagates() {
        let mut ctx = context("Si3N4");
        ctx.device.pillar = builtin_db().get("Al").unwrap().clone();
        let e = run_sweep(&SweepSpec::new(
            SweepParam::GapHeight,
            um(&[0.4, 0.5]),
            vec![Response::Capacitance],
            ctx,
        ));
        assert!(matches!(e, Err(CmutError::Conductor(_))));
    }

    #[test]
    fn radius_sweep_raises_overlap_and_flags_invalid() {
        let ctx = context("Si3N4");
        let r = run_sweep(&SweepSpec::new(
            SweepParam::CavityRadius,
            um(&[22.0, 27.0, 31.0]),
            vec![Response::Capacitance],
            ctx,
        ))
        .unwrap();
        let rows = &r.table.rows;
        assert!(rows[0].flags.is_empty());
        assert_eq!(rows[1].flags, vec![FLAG_OVERLAP_RAISED]);
        assert!(rows[1].values[0].is_some());
        assert!(rows[2].flags.contains(&FLAG_INVALID_GEOMETRY.to_string()));
        assert_eq!(rows[2].values[0], None);
        assert_eq!(r.stats.flagged_rows, 1);
    }

    #[test]
    fn rows_follow_grid_order() {
        let ctx = context("Si3N4");
        let grid = um(&[1.0, 0.8, 0.6, 0.4]);
        let r = run_sweep(&SweepSpec::new(
            SweepParam::GapHeight,
            grid.clone(),
            vec![Response::Capacitance],
            ctx.clone(),
        ))
        .unwrap();
        for (row, x) in r.table.rows.iter().zip(&grid) {
            assert_eq!(row.param, *x);
            let g = ctx.device.geometry.with(LengthParam::GapHeight, *x);
            let want = cell_capacitance(&g, &ctx.device.membrane, &ctx.device.pillar, ctx.capacitance_policy)
                .unwrap()
                .total;
            assert_eq!(row.values[0], Some(want));
        }
        assert_eq!(r.trend(Response::Capacitance), Some(Trend::StrictlyIncreasing));
    }

    #[test]
    fn frequency_constant_in_gap_with_note() {
        let r = frequency_sweep(&context("Si3N4"), SweepParam::GapHeight, um(&[0.4, 0.5, 0.6])).unwrap();
        assert_eq!(r.trend(Response::Frequency), Some(Trend::Constant));
        assert!(r.table.metadata["note"].contains("gap height"));
    }

    #[test]
    fn displacement_sweep_zero_bias_and_stats() {
        let r = displacement_voltage_sweep(&context("Si3N4"), vec![0.0, 40.0, 80.0]).unwrap();
        assert_eq!(r.table.rows[0].values[0], Some(0.0));
        assert_eq!(r.trend(Response::Displacement), Some(Trend::StrictlyIncreasing));
        assert!(r.stats.iterations > 0);
        assert!(r.table.metadata["solver_stats"].starts_with("iterations="));
    }

    #[test]
    fn collapse_rows_are_flagged() {
        let r = run_sweep(&SweepSpec::new(
            SweepParam::Voltage,
            vec![40.0, 120.0, 200.0],
            vec![Response::Displacement, Response::SoftenedFrequency],
            context("Si3N4"),
        ))
        .unwrap();
        let rows = &r.table.rows;
        assert!(rows[0].values.iter().all(Option::is_some));
        assert_eq!(rows[1].values[1], None);
        assert!(rows[1].flags.contains(&FLAG_SOFTENING_COLLAPSE.to_string()));
        assert_eq!(rows[2].values, vec![None, None]);
        assert!(!rows[2].flags.is_empty());
    }

    #[test]
    fn csv_is_deterministic() {
        let spec = SweepSpec::new(
            SweepParam::CavityRadius,
            um(&[22.0, 23.0, 24.0]),
            vec![Response::Capacitance, Response::Frequency],
            context("SiC"),
        );
        let a = run_sweep(&spec).unwrap().table.to_csv();
        let b = run_sweep(&spec).unwrap().table.to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_grid_endpoints() {
        assert_eq!(linear_grid(40.0, 100.0, 10.0).unwrap().len(), 7);
        let g = linear_grid(0.3, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 8);
        assert!((g[7] - 1.0).abs() < 1e-12);
        assert!(linear_grid(1.0, 0.0, 0.1).is_err());
        assert!(linear_grid(0.0, 1.0, 0.0).is_err());
    }
}
