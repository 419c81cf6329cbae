//! End-to-end runs built from the lower-level modules.

pub mod compare;
mod optimize;
mod sweep;

pub use compare::{model_compare, CompareOptions, CompareRow};
pub use optimize::{
    geometry_objective, nelder_mead, optimize_geometry, GeometryBounds, NelderMeadOptions, NelderMeadResult, OptimizeResult,
    TraceEntry, PARAMETER_NAMES,
};
pub use sweep::{alignment_sweep, SweepResult};

use std::path::PathBuf;

use crate::dipole::{cascade_two_layers, CascadeOptions, FarFieldMap, FarFieldMode, HemisphereGrid};
use crate::error::{Error, Result};
use crate::geometry::{build_layer, select_interacting, AlignmentOffset, Annulus, DeviceGeometry, LayerId};
use crate::metrics::EfficiencyReport;
use crate::nearfield::{zpl_efficiency, AnalyticMode, EmitterSpec, NearFieldSpec};

/// Lengths that follow the geometry unless set explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedLengths {
    /// Annulus peak of the analytic near field tracks `r_d - 0.2`.
    pub rho_m: bool,
    /// First-layer height tracks `d1 / 2`.
    pub z1: bool,
}

/// Everything a single simulation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: DeviceGeometry,
    pub nearfield: NearFieldSpec,
    pub alignment: AlignmentOffset,
    /// Uniform polar and azimuthal node counts of the hemisphere grid.
    pub hemisphere: (usize, usize),
    /// Aperture at which `eta_col` is recorded.
    pub na: f64,
    pub eta_ex: f64,
    pub emitter: EmitterSpec,
    /// Drop the unscattered first-layer radiation from the far field.
    pub layer2_only: bool,
    pub layer1_radius: f64,
    pub layer2_radius: f64,
    pub far_field: FarFieldMode,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub derived: DerivedLengths,
}

impl Default for RunConfig {
    /// Optimised geometry, fully aligned, radial `M = 17` near field, SnV at
    /// `F_p = 62`.
    fn default() -> Self {
        let geometry = DeviceGeometry::default();
        let r_d = geometry.r_d;
        RunConfig {
            nearfield: NearFieldSpec::Analytic(AnalyticMode::radial(17, r_d)),
            alignment: AlignmentOffset::full_alignment(LayerId::Second),
            hemisphere: (181, 256),
            na: 0.7,
            eta_ex: 1.0,
            emitter: EmitterSpec::preset("SnV", 62.0).expect("static preset"),
            layer2_only: false,
            layer1_radius: r_d,
            layer2_radius: 3.0,
            far_field: FarFieldMode::default(),
            seed: 0,
            out_dir: None,
            derived: DerivedLengths { rho_m: true, z1: true },
            geometry,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.nearfield.validate()?;
        self.emitter.validate()?;
        if !(self.na > 0.0 && self.na <= 1.0) {
            return Err(Error::invalid(format!("NA of record must lie in (0, 1], got {}", self.na)));
        }
        if !(0.0..=1.0).contains(&self.eta_ex) {
            return Err(Error::invalid(format!("eta_ex must lie in [0, 1], got {}", self.eta_ex)));
        }
        for (name, r) in [("layer1_radius", self.layer1_radius), ("layer2_radius", self.layer2_radius)] {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {r}")));
            }
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<HemisphereGrid> {
        HemisphereGrid::new(self.hemisphere.0, self.hemisphere.1, &[self.na])
    }

    /// Replaces the geometry, refreshing derived lengths.
    pub fn with_geometry(&self, mut geometry: DeviceGeometry) -> RunConfig {
        let mut out = self.clone();
        if self.derived.z1 {
            geometry.z1 = geometry.d1 / 2.0;
        }
        if self.derived.rho_m {
            if let NearFieldSpec::Analytic(mode) = &mut out.nearfield {
                mode.rho_m = geometry.r_d - 0.2;
            }
        }
        if self.layer1_radius == self.geometry.r_d {
            out.layer1_radius = geometry.r_d;
        }
        out.geometry = geometry;
        out
    }

    pub fn with_alignment(&self, alignment: AlignmentOffset) -> RunConfig {
        RunConfig {
            alignment,
            ..self.clone()
        }
    }
}

/// Products of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: EfficiencyReport,
    pub map: FarFieldMap,
    /// Offset actually simulated, folded into the reduced triangle.
    pub alignment: AlignmentOffset,
    pub layer1_dipoles: usize,
    pub layer2_dipoles: usize,
}

/// Builds both layers, folds the alignment, cascades the near field and
/// reduces the far field to an efficiency report.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let geom = &config.geometry;
    let alignment = config.alignment.folded(geom);
    let grid = config.grid()?;

    let layer1 = build_layer(geom, LayerId::First, &alignment, config.layer1_radius)?;
    let layer1 = match &config.nearfield {
        NearFieldSpec::Analytic(mode) => select_interacting(&layer1, &mode_annulus(mode)?),
        NearFieldSpec::Imported(_) => layer1,
    };
    let layer2 = build_layer(geom, LayerId::Second, &alignment, config.layer2_radius)?;
    let options = CascadeOptions {
        include_direct: !config.layer2_only,
        far_field: config.far_field,
    };
    let cascade = cascade_two_layers(geom.wavenumber(), &config.nearfield, &layer1, &layer2, &grid, &options)?;
    let report = EfficiencyReport::from_map(&cascade.map, zpl_efficiency(&config.emitter), config.na, config.eta_ex)?;
    if report.needs_refinement() {
        log::warn!(
            "halving the hemisphere grid changes eta_col by {:.3}%; consider a finer grid",
            100.0 * report.grid_change
        );
    }
    Ok(RunOutput {
        report,
        map: cascade.map,
        alignment,
        layer1_dipoles: layer1.len(),
        layer2_dipoles: layer2.len(),
    })
}

/// Band of three Gaussian widths around the mode peak; beyond it the field is
/// below `exp(-9)` of its maximum.
fn mode_annulus(mode: &AnalyticMode) -> Result<Annulus> {
    Annulus::new((mode.rho_m - 3.0 * mode.w).max(0.0), mode.rho_m + 3.0 * mode.w)
}
