use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Single-cell CMUT simulator: capacitance, modes, electrostatic
/// actuation and parameter sweeps.
///
/// Lengths are in um, voltages in V, frequencies in MHz, capacitances in nF.
#[derive(Debug, Parser)]
#[command(name = "cmut-cell-sim", version)]
pub struct Cli {
    /// Material JSON file overlaid on the built-in table
    #[arg(long, global = true, env = "CMUT_MATERIALS", value_name = "PATH")]
    pub materials: Option<PathBuf>,

    /// Write output to PATH instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List or show materials
    #[command(subcommand)]
    Materials(MaterialsCommand),

    /// Capacitance breakdown of one cell [nF]
    Cap {
        #[command(flatten)]
        cell: CellArgs,
    },

    /// Capacitance over a cavity-radius, gap or membrane-thickness grid
    CapSweep {
        #[arg(long, value_enum)]
        vary: CapVary,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        cell: CellArgs,
    },

    /// Lowest vibration modes [MHz]
    Modes {
        /// Number of modes (degenerate pairs count twice)
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        plate: PlateArgs,
    },

    /// First-mode frequency over a geometry grid; a gap grid also reports
    /// the spring-softened frequency at --voltage
    FreqSweep {
        #[arg(long, value_enum)]
        vary: FreqVary,
        #[command(flatten)]
        grid: GridArgs,
        /// Bias for the softened frequency [V]
        #[arg(long, allow_negative_numbers = true, default_value_t = 40.0)]
        voltage: f64,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        plate: PlateArgs,
        #[command(flatten)]
        coupling: CouplingArgs,
    },

    /// Static equilibrium at one bias
    Disp {
        /// Bias voltage [V]
        #[arg(long, allow_negative_numbers = true)]
        voltage: f64,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        plate: PlateArgs,
        #[command(flatten)]
        coupling: CouplingArgs,
    },

    /// Centre displacement over a voltage or geometry grid
    DispSweep {
        #[arg(long, value_enum, default_value_t = DispVary::Voltage)]
        vary: DispVary,
        #[command(flatten)]
        grid: GridArgs,
        /// Bias for geometry grids [V]
        #[arg(long, allow_negative_numbers = true, default_value_t = 40.0)]
        voltage: f64,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        plate: PlateArgs,
        #[command(flatten)]
        coupling: CouplingArgs,
    },

    /// Pull-in voltage search [V]
    PullIn {
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        plate: PlateArgs,
        #[command(flatten)]
        coupling: CouplingArgs,
    },

    /// Fit the overlap radius to a capacitance vs cavity-radius CSV
    Calibrate {
        /// Reference CSV with a cavity_radius(um) column
        #[arg(long, value_name = "PATH")]
        fixtures: PathBuf,
        /// Reference column to fit [default: the membrane name]
        #[arg(long)]
        column: Option<String>,
        #[command(flatten)]
        cell: CellArgs,
    },

    /// Compare the membrane material with another one
    Compare {
        /// Second membrane material
        #[arg(long, default_value = "SiC")]
        against: String,
        /// Bias for the displacement comparison [V]
        #[arg(long, allow_negative_numbers = true, default_value_t = 40.0)]
        voltage: f64,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        plate: PlateArgs,
        #[command(flatten)]
        coupling: CouplingArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum MaterialsCommand {
    /// Names of all available materials
    List,
    /// Properties of one material
    Show { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapVary {
    Radius,
    Gap,
    Thickness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FreqVary {
    Radius,
    Thickness,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DispVary {
    Voltage,
    Thickness,
    Radius,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    GapOnly,
    SeriesMembrane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Bessel without tension, discrete otherwise
    Auto,
    Bessel,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MassLoadingArg {
    None,
    TopElectrode,
}

/// Grid bounds in the swept quantity's unit (um, or V for voltage).
/// Omitted bounds take the defaults of the chosen parameter.
#[derive(Debug, Args)]
pub struct GridArgs {
    /// First grid value [um | V]
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    /// Last grid value, inclusive [um | V]
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    /// Grid spacing [um | V]
    #[arg(long, allow_negative_numbers = true)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    /// Geometry JSON (subR, subH, belecH, oxiH, oxiinR, telecH, memH, overlapR) [um]
    #[arg(long, value_name = "PATH")]
    pub geometry: Option<PathBuf>,
    /// Substrate radius [um]
    #[arg(long, allow_negative_numbers = true)]
    pub sub_r: Option<f64>,
    /// Substrate thickness [um]
    #[arg(long, allow_negative_numbers = true)]
    pub sub_h: Option<f64>,
    /// Bottom electrode thickness [um]
    #[arg(long, allow_negative_numbers = true)]
    pub belec_h: Option<f64>,
    /// Gap (cavity) height [um]
    #[arg(long, allow_negative_numbers = true, alias = "oxi-h")]
    pub gap: Option<f64>,
    /// Cavity radius [um]
    #[arg(long, allow_negative_numbers = true, alias = "oxiin-r")]
    pub cavity_radius: Option<f64>,
    /// Top electrode thickness [um]
    #[arg(long, allow_negative_numbers = true)]
    pub telec_h: Option<f64>,
    /// Membrane thickness [um]
    #[arg(long, allow_negative_numbers = true)]
    pub mem_h: Option<f64>,
    /// Electrode overlap radius [um]
    #[arg(long, allow_negative_numbers = true)]
    pub overlap_r: Option<f64>,
    /// Membrane material
    #[arg(long, default_value = "Si3N4")]
    pub membrane: String,
    /// Pillar (cavity wall) material
    #[arg(long, default_value = "SiO2")]
    pub pillar: String,
    /// Dielectrics counted in the capacitance
    #[arg(long, value_enum, default_value_t = PolicyArg::SeriesMembrane)]
    pub cap_policy: PolicyArg,
}

#[derive(Debug, Args)]
pub struct PlateArgs {
    /// Membrane tension [N/m]
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub tension: f64,
    /// Radial grid nodes
    #[arg(long, default_value_t = 401)]
    pub nodes: usize,
    #[arg(long, value_enum, default_value_t = MassLoadingArg::None)]
    pub mass_loading: MassLoadingArg,
}

#[derive(Debug, Args)]
pub struct CouplingArgs {
    /// Gap used in the electrostatic pressure
    #[arg(long, value_enum, default_value_t = PolicyArg::SeriesMembrane)]
    pub pressure_policy: PolicyArg,
    /// Fixed-point under-relaxation factor, in (0, 1]
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.7)]
    pub relaxation: f64,
    /// Convergence tolerance on the deflection update [um]
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-7)]
    pub tol: f64,
    /// Fixed-point iteration limit
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}
