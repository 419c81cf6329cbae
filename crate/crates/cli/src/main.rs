//! Command-line front end of the twin-layer grating simulator.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use twinfield_core::analytic::{fig2_profiles, na_samples, write_profiles_csv, RingSpec};
use twinfield_core::io::{flat_json, write_table_file};
use twinfield_core::workflow::{
    alignment_sweep, model_compare, optimize_geometry, run_pipeline, CompareOptions, GeometryBounds,
    PARAMETER_NAMES,
};
use twinfield_core::{LayerId, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "twinfield", version, about = "Dipole-cascade simulator for dual-grating microdisk emitters")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Args)]
struct Common {
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Numerical aperture of record.
    #[arg(long, global = true)]
    na: Option<f64>,
    /// Extraction efficiency into the upper half-space.
    #[arg(long = "eta-ex", global = true, value_name = "X")]
    eta_ex: Option<f64>,
    /// Seed for the optimiser restarts.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    /// Hemisphere grid as polar x azimuthal node counts, e.g. 181x256.
    #[arg(long, global = true, value_name = "TxP", value_parser = parse_pair)]
    hemisphere: Option<(usize, usize)>,
    /// Far field from the second layer only.
    #[arg(long = "layer2-only", global = true)]
    layer2_only: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write its far field and efficiency report.
    Simulate { config: PathBuf },
    /// Collection efficiency over alignment offsets of one layer.
    Sweep {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        layer: u8,
        /// Reduced-triangle samples, e.g. 10x10.
        #[arg(long, value_name = "NxN", value_parser = parse_pair, default_value = "10x10")]
        grid: (usize, usize),
        config: PathBuf,
    },
    /// Derivative-free search over the device geometry.
    Optimize {
        /// Number of pipeline evaluations.
        #[arg(long, value_name = "B")]
        budget: usize,
        /// Half-width of the search box relative to the starting geometry.
        #[arg(long, default_value_t = 0.25)]
        span: f64,
        config: PathBuf,
    },
    /// Closed-form intensity cross sections of the two-ring model.
    Analytic {
        #[arg(long)]
        fig2: bool,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3", allow_negative_numbers = true)]
        charges: Vec<i32>,
        /// NA samples between 0 and 0.99.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Discrete ring against closed form for several ring sizes.
    Compare {
        #[arg(long = "N", value_delimiter = ',', default_value = "6,12,30,60,120")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        charge: i32,
    },
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got `{s}`"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

impl Common {
    fn out_dir(&self, config: Option<&RunConfig>) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| config.and_then(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn load(&self, path: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(na) = self.na {
            cfg.na = na;
        }
        if let Some(eta) = self.eta_ex {
            cfg.eta_ex = eta;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(h) = self.hemisphere {
            cfg.hemisphere = h;
        }
        if self.layer2_only {
            cfg.layer2_only = true;
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
}

fn simulate(common: &Common, config: &Path) -> Result<()> {
    let cfg = common.load(config)?;
    let out = run_pipeline(&cfg)?;
    let dir = common.out_dir(Some(&cfg))?;
    write_file(&dir.join("farfield.csv"), |w| out.map.write_csv(w))?;
    write_file(&dir.join("efficiency_curve.csv"), |w| out.report.write_curve_csv(w))?;
    write_file(&dir.join("report.json"), |w| writeln!(w, "{}", out.report.to_json()))?;
    println!("{}", out.report.to_json());
    Ok(())
}

fn sweep(common: &Common, layer: u8, grid: (usize, usize), config: &Path) -> Result<()> {
    if grid.0 != grid.1 || grid.0 == 0 {
        bail!("sweep grid must be square and nonempty, got {}x{}", grid.0, grid.1);
    }
    let cfg = common.load(config)?;
    let layer = LayerId::try_from(layer)?;
    let result = alignment_sweep(&cfg, layer, grid.0, None)?;
    let dir = common.out_dir(Some(&cfg))?;
    let rows: Vec<Vec<f64>> = result
        .offsets
        .iter()
        .zip(&result.eta_col)
        .map(|(&(u, v), &e)| vec![u, v, e])
        .collect();
    write_table_file(&dir.join(format!("sweep_layer{}.csv", u8::from(layer))), &["u", "v", "eta_col"], &rows)?;
    let snapshots = dir.join(format!("sweep_layer{}_maps", u8::from(layer)));
    fs::create_dir_all(&snapshots).with_context(|| format!("creating {}", snapshots.display()))?;
    for (i, map) in result.maps.iter().enumerate() {
        write_file(&snapshots.join(format!("offset_{i:03}.csv")), |w| map.write_csv(w))?;
    }
    println!(
        "{}",
        flat_json(&[
            ("layer", f64::from(u8::from(layer))),
            ("cells", result.eta_col.len() as f64),
            ("eta_col_mean", result.mean()),
            ("eta_col_std", result.std_dev()),
        ])
    );
    Ok(())
}

fn optimize(common: &Common, budget: usize, span: f64, config: &Path) -> Result<()> {
    let cfg = common.load(config)?;
    let bounds = GeometryBounds::relative(&cfg.geometry, span)?;
    let result = optimize_geometry(&cfg, &bounds, budget)?;
    let dir = common.out_dir(Some(&cfg))?;
    let mut header = vec!["evaluation"];
    header.extend(PARAMETER_NAMES);
    header.extend(["objective", "best_so_far"]);
    let rows: Vec<Vec<f64>> = result
        .trace
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![i as f64];
            row.extend(&t.params);
            row.extend([t.objective, t.best_so_far]);
            row
        })
        .collect();
    write_table_file(&dir.join("optimize_trace.csv"), &header, &rows)?;
    let g = &result.geometry;
    let values = [g.r_d, g.h, g.a1, g.a2, g.d1, g.d2, g.r_h1, g.r_h2];
    let mut fields: Vec<(&str, f64)> = PARAMETER_NAMES.iter().copied().zip(values).collect();
    fields.push(("objective", result.objective));
    fields.push(("evaluations", result.trace.len() as f64));
    let json = flat_json(&fields);
    write_file(&dir.join("best_geometry.json"), |w| writeln!(w, "{json}"))?;
    println!("{json}");
    Ok(())
}

fn analytic(common: &Common, fig2: bool, charges: &[i32], samples: usize) -> Result<()> {
    if !fig2 {
        bail!("choose an output, e.g. --fig2");
    }
    if samples < 2 {
        bail!("--samples must be at least 2");
    }
    let rows = fig2_profiles(charges, &RingSpec::profile_default(0), &na_samples(samples, 0.99))?;
    let dir = common.out_dir(None)?;
    write_file(&dir.join("fig2.csv"), |w| write_profiles_csv(&rows, w))?;
    println!("wrote {} rows to {}", rows.len(), dir.join("fig2.csv").display());
    Ok(())
}

fn compare(common: &Common, ns: &[usize], charge: i32) -> Result<()> {
    let ring = RingSpec::new(ns.first().copied().unwrap_or(1), 1.0, charge, 2.75, 2.0);
    let rows = model_compare(&ring, ns, &CompareOptions::default())?;
    let dir = common.out_dir(None)?;
    let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.n as f64, r.error_if, r.error_ff]).collect();
    write_table_file(&dir.join("compare.csv"), &["N", "error_IF", "error_FF"], &table)?;
    for r in &rows {
        println!("N = {:>4}  IF error {:.6e}  FF error {:.6e}", r.n, r.error_if, r.error_ff);
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { config } => simulate(&cli.common, config),
        Command::Sweep { layer, grid, config } => sweep(&cli.common, *layer, *grid, config),
        Command::Optimize { budget, span, config } => optimize(&cli.common, *budget, *span, config),
        Command::Analytic { fig2, charges, samples } => analytic(&cli.common, *fig2, charges, *samples),
        Command::Compare { n, charge } => compare(&cli.common, n, *charge),
    }
}
