//! Single-cell non-insulated CMUT simulator.
//!
//! Parallel-plate capacitance of the two-region electrode stack, static and
//! modal analysis of the clamped circular membrane, coupled electrostatic
//! actuation with spring softening and pull-in, and a parameter-sweep
//! engine that writes CSV tables.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32`/`f64`); the
//! aliases below fix them to the precision used by the sweep engine and CLI.

// `!(x > 0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod bessel;
pub mod capacitance;
pub mod electrostatics;
pub mod error;
pub mod geometry;
pub mod materials;
pub mod num;
pub mod plate;
pub mod sweep;

pub use capacitance::{cell_capacitance, deflected_capacitance, parallel_plate, series_equivalent, GapPolicy};
pub use electrostatics::{
    electrostatic_pressure, pull_in_voltage, softened_frequency, solve_equilibrium, NonConvergence,
};
pub use error::{CmutError, GeometryError, Result};
pub use geometry::{default_cell, region_areas, validate, LengthParam};
pub use materials::{builtin_db, load_db, MaterialDb};
pub use num::{Scalar, UM, VACUUM_PERMITTIVITY};
pub use plate::{
    eigenfrequencies, eigenfrequencies_with, first_frequency, flexural_rigidity, static_deflection, EigenMethod,
    MassLoading,
};

pub type Material = materials::Material<f64>;
pub type Material32 = materials::Material<f32>;
pub type CellGeometry = geometry::CellGeometry<f64>;
pub type CellGeometry32 = geometry::CellGeometry<f32>;
pub type RegionAreas = geometry::RegionAreas<f64>;
pub type CapacitanceBreakdown = capacitance::CapacitanceBreakdown<f64>;
pub type DeflectionProfile = plate::DeflectionProfile<f64>;
pub type DeflectionProfile32 = plate::DeflectionProfile<f32>;
pub type ModeResult = plate::ModeResult<f64>;
pub type PlateConfig = plate::PlateConfig<f64>;
pub type PlateConfig32 = plate::PlateConfig<f32>;
pub type CouplingConfig = electrostatics::CouplingConfig<f64>;
pub type BiasPoint = electrostatics::BiasPoint<f64>;
pub type Device = electrostatics::Device<f64>;
pub type Device32 = electrostatics::Device<f32>;
pub type PullIn = electrostatics::PullIn<f64>;
pub type SoftenedFrequency = electrostatics::SoftenedFrequency<f64>;
