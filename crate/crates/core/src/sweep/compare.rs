//! Side-by-side comparison of two membrane materials on one cell.

use serde::Serialize;

use super::table::Unit;
use super::{Response, SweepContext};
use crate::capacitance::cell_capacitance;
use crate::electrostatics::solve_equilibrium;
use crate::error::Result;
use crate::materials::Material;
use crate::plate::first_frequency;

/// Material reported as giving the higher capacitance, frequency and
/// displacement in the reference simulations.
pub const CLAIMED_HIGHER: &str = "SiC";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub response: Response,
    pub unit: Unit,
    /// SI values for the two materials, `None` if not evaluable.
    pub first: Option<f64>,
    pub second: Option<f64>,
    /// Name of the material with the larger value, `"tie"` or `"n/a"`.
    pub higher: String,
    pub agrees_with_claim: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub first: String,
    pub second: String,
    pub voltage: f64,
    pub rows: Vec<ComparisonRow>,
}

fn row(
    response: Response,
    first: &Material<f64>,
    second: &Material<f64>,
    a: Option<f64>,
    b: Option<f64>,
) -> ComparisonRow {
    let higher = match (a, b) {
        (Some(a), Some(b)) if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) => "tie".to_string(),
        (Some(a), Some(b)) if a > b => first.name.clone(),
        (Some(_), Some(_)) => second.name.clone(),
        _ => "n/a".to_string(),
    };
    let agrees = higher == CLAIMED_HIGHER;
    let note = (!agrees).then(|| match response {
        Response::Displacement => format!(
            "{higher} deflects more: the stiffer membrane (higher E*t^3/(1-nu^2)) deflects less at equal bias; claim is {CLAIMED_HIGHER}"
        ),
        _ => format!("model gives {higher} higher; claim is {CLAIMED_HIGHER}"),
    });
    ComparisonRow {
        response,
        unit: response.unit(),
        first: a,
        second: b,
        higher,
        agrees_with_claim: agrees,
        note,
    }
}

/// Capacitance, first-mode frequency and centre displacement at the
/// context bias for two membrane materials on the context geometry.
pub fn compare_materials(context: &SweepContext, first: &Material<f64>, second: &Material<f64>) -> Result<Comparison> {
    let mut rows = Vec::new();
    let evaluate = |m: &Material<f64>| -> Result<(f64, f64, Option<f64>)> {
        let dev = context.device.with_membrane(m.clone());
        let g = &dev.geometry;
        let c = cell_capacitance(g, &dev.membrane, &dev.pillar, context.capacitance_policy)?.total;
        let f = first_frequency(g, &dev.membrane, &context.plate)?;
        let w = if context.voltage == 0.0 {
            Some(0.0)
        } else {
            let b = solve_equilibrium(&dev, context.voltage, &context.plate, &context.coupling)?;
            b.converged.then_some(b.center_displacement)
        };
        Ok((c, f, w))
    };
    let (ca, fa, wa) = evaluate(first)?;
    let (cb, fb, wb) = evaluate(second)?;
    rows.push(row(Response::Capacitance, first, second, Some(ca), Some(cb)));
    rows.push(row(Response::Frequency, first, second, Some(fa), Some(fb)));
    rows.push(row(Response::Displacement, first, second, wa, wb));
    Ok(Comparison {
        first: first.name.clone(),
        second: second.name.clone(),
        voltage: context.voltage,
        rows,
    })
}
