use std::collections::HashMap;

use rayon::prelude::*;

use super::{run_pipeline, RunConfig, RunOutput};
use crate::dipole::FarFieldMap;
use crate::error::Result;
use crate::geometry::{reduced_domain_grid, AlignmentOffset, LayerId};

/// Collection efficiency over a set of in-plane offsets of one layer.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub layer: LayerId,
    pub offsets: Vec<(f64, f64)>,
    pub eta_col: Vec<f64>,
    /// Far field per offset, in the order of `offsets`.
    pub maps: Vec<FarFieldMap>,
}

impl SweepResult {
    pub fn mean(&self) -> f64 {
        self.eta_col.iter().sum::<f64>() / self.eta_col.len() as f64
    }

    /// Population standard deviation of `eta_col`.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.eta_col.iter().map(|e| (e - m).powi(2)).sum::<f64>() / self.eta_col.len() as f64).sqrt()
    }
}

/// Runs the pipeline with only `layer` translated to each offset. With
/// `offsets = None` the `n x n` reduced-triangle grid of that layer is used.
/// Coincident offsets are simulated once.
pub fn alignment_sweep(
    config: &RunConfig,
    layer: LayerId,
    n: usize,
    offsets: Option<Vec<(f64, f64)>>,
) -> Result<SweepResult> {
    let offsets = offsets.unwrap_or_else(|| reduced_domain_grid(config.geometry.lattice_constant(layer), n));
    let mut unique: Vec<(f64, f64)> = Vec::new();
    let mut slot: HashMap<(u64, u64), usize> = HashMap::new();
    let index: Vec<usize> = offsets
        .iter()
        .map(|&(u, v)| {
            *slot.entry((u.to_bits(), v.to_bits())).or_insert_with(|| {
                unique.push((u, v));
                unique.len() - 1
            })
        })
        .collect();
    let runs: Vec<RunOutput> = unique
        .par_iter()
        .map(|&(u, v)| run_pipeline(&config.with_alignment(AlignmentOffset::new(u, v, layer))))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        layer,
        eta_col: index.iter().map(|&i| runs[i].report.eta_col).collect(),
        maps: index.iter().map(|&i| runs[i].map.clone()).collect(),
        offsets,
    })
}
