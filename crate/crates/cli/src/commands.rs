use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cmut::geometry::{load_geometry, LengthParam};
use cmut::materials::MaterialDb;
use cmut::sweep::{
    calibrate_overlap_radius, compare_materials, describe_geometry, linear_grid, reference_points, run_sweep, Response,
    SweepContext, SweepParam, SweepSpec, Table, CLAIMED_HIGHER,
};
use cmut::{
    builtin_db, cell_capacitance, default_cell, eigenfrequencies_with, load_db, pull_in_voltage, solve_equilibrium,
    validate, CellGeometry, CouplingConfig, Device, EigenMethod, GapPolicy, MassLoading, Material, PlateConfig, UM,
};

use crate::args::{
    CapVary, CellArgs, Cli, Command, CouplingArgs, DispVary, FreqVary, GridArgs, MassLoadingArg, MaterialsCommand,
    MethodArg, PlateArgs, PolicyArg,
};
use crate::output::{Cell, Output};

pub enum Rendered {
    Table(Table),
    Output(Output),
}

impl Rendered {
    pub fn to_csv(&self) -> String {
        match self {
            Rendered::Table(t) => t.to_csv(),
            Rendered::Output(o) => o.to_csv(),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            Rendered::Table(t) => Output::from_table(t).to_json(),
            Rendered::Output(o) => o.to_json(),
        }
    }
}

fn policy(p: PolicyArg) -> GapPolicy {
    match p {
        PolicyArg::GapOnly => GapPolicy::GapOnly,
        PolicyArg::SeriesMembrane => GapPolicy::SeriesMembrane,
    }
}

fn load_materials(path: Option<&Path>) -> Result<MaterialDb> {
    Ok(match path {
        Some(p) => load_db(p)?,
        None => builtin_db(),
    })
}

fn geometry(cell: &CellArgs) -> Result<CellGeometry> {
    let base = match &cell.geometry {
        Some(p) => load_geometry(p)?,
        None => default_cell(),
    };
    let overrides = [
        (LengthParam::SubstrateRadius, cell.sub_r),
        (LengthParam::SubstrateThickness, cell.sub_h),
        (LengthParam::BottomElectrodeThickness, cell.belec_h),
        (LengthParam::GapHeight, cell.gap),
        (LengthParam::CavityRadius, cell.cavity_radius),
        (LengthParam::TopElectrodeThickness, cell.telec_h),
        (LengthParam::MembraneThickness, cell.mem_h),
        (LengthParam::OverlapRadius, cell.overlap_r),
    ];
    let g = overrides.into_iter().fold(base, |g, (p, v)| match v {
        Some(um) => g.with(p, um * UM),
        None => g,
    });
    Ok(validate(g)?)
}

fn material(db: &MaterialDb, name: &str) -> Result<Material> {
    Ok(db.get(name)?.clone())
}

fn plate_config(p: &PlateArgs) -> Result<PlateConfig> {
    let cfg = PlateConfig {
        tension: p.tension,
        radial_nodes: p.nodes,
        mass_loading: match p.mass_loading {
            MassLoadingArg::None => MassLoading::None,
            MassLoadingArg::TopElectrode => MassLoading::TopElectrode,
        },
        ..PlateConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn coupling_config(c: &CouplingArgs, cap_policy: GapPolicy) -> Result<CouplingConfig> {
    let cfg = CouplingConfig {
        pressure_gap_policy: policy(c.pressure_policy),
        capacitance_policy: cap_policy,
        relaxation: c.relaxation,
        tol: c.tol * UM,
        max_iter: c.max_iter,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn context(
    db: &MaterialDb,
    cell: &CellArgs,
    plate: Option<&PlateArgs>,
    coupling: Option<&CouplingArgs>,
) -> Result<SweepContext> {
    let device = Device::new(
        geometry(cell)?,
        material(db, &cell.membrane)?,
        material(db, &cell.pillar)?,
    );
    let mut ctx = SweepContext::new(device);
    ctx.capacitance_policy = policy(cell.cap_policy);
    if let Some(p) = plate {
        ctx.plate = plate_config(p)?;
    }
    if let Some(c) = coupling {
        ctx.coupling = coupling_config(c, ctx.capacitance_policy)?;
    } else {
        ctx.coupling.capacitance_policy = ctx.capacitance_policy;
    }
    Ok(ctx)
}

/// Grid in display units, converted to SI for lengths.
fn grid(args: &GridArgs, param: SweepParam) -> Result<Vec<f64>> {
    let (from, to, step) = match param {
        SweepParam::CavityRadius => (22.0, 27.0, 1.0),
        SweepParam::GapHeight => (0.3, 1.0, 0.1),
        SweepParam::MembraneThickness => (0.5, 1.0, 0.1),
        SweepParam::Voltage => (40.0, 100.0, 10.0),
    };
    let g = linear_grid(
        args.from.unwrap_or(from),
        args.to.unwrap_or(to),
        args.step.unwrap_or(step),
    )?;
    let scale = param.unit().si_scale();
    Ok(g.into_iter().map(|x| x * scale).collect())
}

fn material_row(m: &Material) -> Vec<Cell> {
    vec![
        m.name.as_str().into(),
        m.density.into(),
        m.relative_permittivity.into(),
        (m.youngs_modulus / 1e9).into(),
        m.poissons_ratio.into(),
    ]
}

fn base_meta(out: &mut Output, artifact: &str, ctx: &SweepContext) {
    out.meta("generator", format!("cmut-cell-sim {}", env!("CARGO_PKG_VERSION")));
    out.meta("artifact", artifact);
    out.meta("geometry_um", describe_geometry(&ctx.device.geometry));
    out.meta("membrane", ctx.device.membrane.name.as_str());
    out.meta("pillar", ctx.device.pillar.name.as_str());
}

fn plate_meta(out: &mut Output, p: &PlateConfig) {
    out.meta(
        "plate",
        format!(
            "tension={} N/m, radial_nodes={}, mass_loading={}",
            cmut::sweep::format_sig6(p.tension),
            p.radial_nodes,
            match p.mass_loading {
                MassLoading::None => "none",
                MassLoading::TopElectrode => "top_electrode",
            }
        ),
    );
}

fn coupling_meta(out: &mut Output, c: &CouplingConfig) {
    out.meta(
        "coupling",
        format!(
            "pressure_gap_policy={}, capacitance_policy={}, relaxation={}, tol={} m, max_iter={}",
            c.pressure_gap_policy.as_str(),
            c.capacitance_policy.as_str(),
            cmut::sweep::format_sig6(c.relaxation),
            cmut::sweep::format_sig6(c.tol),
            c.max_iter
        ),
    );
}

fn sweep(vary: SweepParam, grid_args: &GridArgs, responses: Vec<Response>, ctx: SweepContext) -> Result<Rendered> {
    let spec = SweepSpec::new(vary, grid(grid_args, vary)?, responses, ctx);
    Ok(Rendered::Table(run_sweep(&spec)?.table))
}

pub fn run(cli: &Cli) -> Result<Rendered> {
    let db = load_materials(cli.materials.as_deref())?;
    let source = cli
        .materials
        .as_ref()
        .map_or("builtin".to_string(), |p| format!("builtin + {}", p.display()));
    match &cli.command {
        Command::Materials(sub) => {
            let mut out = Output::new(&[
                "name",
                "density(kg/m3)",
                "relative_permittivity",
                "youngs_modulus(GPa)",
                "poissons_ratio",
            ]);
            out.meta("source", source);
            match sub {
                MaterialsCommand::List => {
                    for m in db.iter() {
                        out.row(material_row(m));
                    }
                }
                MaterialsCommand::Show { name } => {
                    out.row(material_row(db.get(name)?));
                }
            }
            Ok(Rendered::Output(out))
        }
        Command::Cap { cell } => {
            let ctx = context(&db, cell, None, None)?;
            let d = &ctx.device;
            let b = cell_capacitance(&d.geometry, &d.membrane, &d.pillar, ctx.capacitance_policy)?;
            let mut out = Output::new(&["quantity", "value", "unit"]);
            base_meta(&mut out, "capacitance breakdown", &ctx);
            out.meta("capacitance_policy", ctx.capacitance_policy.as_str());
            for (name, v) in [
                ("gap_region", b.gap_region),
                ("pillar_region", b.pillar_region),
                ("total", b.total),
            ] {
                out.row(vec![name.into(), (v / 1e-9).into(), "nF".into()]);
            }
            Ok(Rendered::Output(out))
        }
        Command::CapSweep { vary, grid, cell } => {
            let param = match vary {
                CapVary::Radius => SweepParam::CavityRadius,
                CapVary::Gap => SweepParam::GapHeight,
                CapVary::Thickness => SweepParam::MembraneThickness,
            };
            sweep(
                param,
                grid,
                vec![Response::Capacitance],
                context(&db, cell, None, None)?,
            )
        }
        Command::Modes {
            count,
            method,
            cell,
            plate,
        } => {
            let ctx = context(&db, cell, Some(plate), None)?;
            let method = match method {
                MethodArg::Auto if ctx.plate.tension > 0.0 => EigenMethod::Discrete,
                MethodArg::Auto | MethodArg::Bessel => EigenMethod::Bessel,
                MethodArg::Discrete => EigenMethod::Discrete,
            };
            let d = &ctx.device;
            let modes = eigenfrequencies_with(&d.geometry, &d.membrane, &ctx.plate, *count, method)?;
            let mut out = Output::new(&["mode", "n", "m", "lambda", "lambda_squared", "frequency(MHz)"]);
            base_meta(&mut out, "vibration modes", &ctx);
            plate_meta(&mut out, &ctx.plate);
            out.meta(
                "method",
                match method {
                    EigenMethod::Bessel => "bessel",
                    EigenMethod::Discrete => "discrete",
                },
            );
            for (i, m) in modes.iter().enumerate() {
                out.row(vec![
                    (i + 1).into(),
                    m.azimuthal_order.into(),
                    m.radial_order.into(),
                    m.lambda.into(),
                    (m.lambda * m.lambda).into(),
                    (m.frequency / 1e6).into(),
                ]);
            }
            Ok(Rendered::Output(out))
        }
        Command::FreqSweep {
            vary,
            grid,
            voltage,
            cell,
            plate,
            coupling,
        } => {
            let ctx = context(&db, cell, Some(plate), Some(coupling))?.with_voltage(*voltage);
            let (param, responses) = match vary {
                FreqVary::Radius => (SweepParam::CavityRadius, vec![Response::Frequency]),
                FreqVary::Thickness => (SweepParam::MembraneThickness, vec![Response::Frequency]),
                FreqVary::Gap => (
                    SweepParam::GapHeight,
                    vec![Response::Frequency, Response::SoftenedFrequency],
                ),
            };
            sweep(param, grid, responses, ctx)
        }
        Command::Disp {
            voltage,
            cell,
            plate,
            coupling,
        } => {
            let ctx = context(&db, cell, Some(plate), Some(coupling))?;
            let bias = solve_equilibrium(&ctx.device, *voltage, &ctx.plate, &ctx.coupling)?;
            if !bias.converged {
                bail!(
                    "equilibrium at {voltage} V did not converge after {} iterations ({})",
                    bias.iterations,
                    match bias.failure {
                        Some(cmut::NonConvergence::Contact) => "contact",
                        Some(cmut::NonConvergence::Diverged) => "diverged",
                        _ => "iteration limit",
                    }
                );
            }
            let mut out = Output::new(&["quantity", "value", "unit"]);
            base_meta(&mut out, "static equilibrium", &ctx);
            plate_meta(&mut out, &ctx.plate);
            coupling_meta(&mut out, &ctx.coupling);
            out.meta("solver_stats", format!("iterations={}", bias.iterations));
            out.row(vec!["voltage".into(), bias.voltage.into(), "V".into()]);
            out.row(vec![
                "center_displacement".into(),
                (bias.center_displacement / UM).into(),
                "um".into(),
            ]);
            out.row(vec![
                "capacitance".into(),
                bias.capacitance.map(|c| c / 1e-9).into(),
                "nF".into(),
            ]);
            Ok(Rendered::Output(out))
        }
        Command::DispSweep {
            vary,
            grid,
            voltage,
            cell,
            plate,
            coupling,
        } => {
            let ctx = context(&db, cell, Some(plate), Some(coupling))?.with_voltage(*voltage);
            let param = match vary {
                DispVary::Voltage => SweepParam::Voltage,
                DispVary::Thickness => SweepParam::MembraneThickness,
                DispVary::Radius => SweepParam::CavityRadius,
                DispVary::Gap => SweepParam::GapHeight,
            };
            sweep(param, grid, vec![Response::Displacement], ctx)
        }
        Command::PullIn { cell, plate, coupling } => {
            let ctx = context(&db, cell, Some(plate), Some(coupling))?;
            let p = pull_in_voltage(&ctx.device, &ctx.plate, &ctx.coupling)?;
            let mut out = Output::new(&["quantity", "value", "unit"]);
            base_meta(&mut out, "pull-in voltage", &ctx);
            plate_meta(&mut out, &ctx.plate);
            coupling_meta(&mut out, &ctx.coupling);
            out.meta(
                "resolution_V",
                cmut::sweep::format_sig6(cmut::electrostatics::PULL_IN_RESOLUTION),
            );
            out.row(vec!["pull_in_voltage".into(), p.voltage.into(), "V".into()]);
            out.row(vec!["first_non_converged".into(), p.upper.into(), "V".into()]);
            out.row(vec![
                "center_displacement".into(),
                (p.last_converged.center_displacement / UM).into(),
                "um".into(),
            ]);
            Ok(Rendered::Output(out))
        }
        Command::Calibrate { fixtures, column, cell } => {
            let ctx = context(&db, cell, None, None)?;
            let table = Table::read(fixtures)?;
            let column = column.clone().unwrap_or_else(|| ctx.device.membrane.name.clone());
            let points = reference_points(&table, &column)?;
            let cal = calibrate_overlap_radius(&points, &ctx.device, ctx.capacitance_policy)?;
            let mut out = Output::new(&["cavity_radius(um)", "reference(nF)", "model(nF)", "relative_error"]);
            base_meta(&mut out, "overlap radius calibration", &ctx);
            out.meta("capacitance_policy", ctx.capacitance_policy.as_str());
            out.meta("reference", format!("{} column {column}", fixtures.display()));
            out.meta("overlap_radius_um", cmut::sweep::format_sig6(cal.overlap_radius / UM));
            out.meta("objective", cmut::sweep::format_sig6(cal.objective));
            for r in &cal.residuals {
                out.row(vec![
                    (r.cavity_radius / UM).into(),
                    (r.reference / 1e-9).into(),
                    (r.model / 1e-9).into(),
                    r.relative_error.into(),
                ]);
            }
            Ok(Rendered::Output(out))
        }
        Command::Compare {
            against,
            voltage,
            cell,
            plate,
            coupling,
        } => {
            let ctx = context(&db, cell, Some(plate), Some(coupling))?.with_voltage(*voltage);
            let second = material(&db, against)?;
            let cmp = compare_materials(&ctx, &ctx.device.membrane, &second)?;
            let mut out = Output::new(&[
                "response",
                "unit",
                &cmp.first,
                &cmp.second,
                "higher",
                "agrees_with_claim",
            ]);
            base_meta(&mut out, "material comparison", &ctx);
            out.metadata.remove("membrane");
            plate_meta(&mut out, &ctx.plate);
            coupling_meta(&mut out, &ctx.coupling);
            out.meta("bias_V", cmut::sweep::format_sig6(cmp.voltage));
            out.meta("claimed_higher", CLAIMED_HIGHER);
            for r in &cmp.rows {
                if let Some(n) = &r.note {
                    out.meta(&format!("discrepancy_{}", r.response.name()), n.as_str());
                }
                let u = r.unit;
                out.row(vec![
                    r.response.name().into(),
                    u.symbol().into(),
                    r.first.map(|v| u.to_display(v)).into(),
                    r.second.map(|v| u.to_display(v)).into(),
                    r.higher.as_str().into(),
                    r.agrees_with_claim.to_string().into(),
                ]);
            }
            Ok(Rendered::Output(out))
        }
    }
}

pub fn emit(rendered: &Rendered, cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let text = match cli.format {
        crate::args::Format::Csv => rendered.to_csv(),
        crate::args::Format::Json => rendered.to_json(),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => stdout.write_all(text.as_bytes()).context("writing standard output")?,
    }
    Ok(())
}
