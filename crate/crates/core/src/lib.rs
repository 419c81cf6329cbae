//! Dipole-superposition model of a whispering-gallery microdisk topped by two
//! hexagonal perturbation gratings.
//!
//! The cavity near field drives point dipoles in the first grating; their
//! radiation drives the second grating; both radiate into the upper
//! hemisphere. Closed-form Bessel solutions for idealised rings serve as an
//! independent check on the discrete solver, and the resulting far-field maps
//! are reduced to collection efficiency, Gaussian overlap and total
//! efficiency.
//!
//! All lengths are in units of the design wavelength, so `k = 2 pi`.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bessel;
pub mod config;
pub mod dipole;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod nearfield;
pub mod workflow;

use nalgebra::Vector3;
use num_complex::Complex64;

/// Complex Cartesian 3-vector.
pub type CVec3 = Vector3<Complex64>;

pub use analytic::{Orientation, RingSpec};
pub use dipole::{
    cascade_two_layers, induce_moments, superpose_field, CascadeOptions, DipoleSet, FarFieldMap,
    FarFieldMode, HemisphereGrid,
};
pub use error::{Error, Result};
pub use geometry::{AlignmentOffset, DeviceGeometry, LayerId, ScattererLayer};
pub use metrics::EfficiencyReport;
pub use nearfield::{AnalyticMode, CavityMode, EmitterSpec, NearFieldSpec};
pub use workflow::{run_pipeline, RunConfig};
