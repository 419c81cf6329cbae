//! Run configuration files.
//!
//! A configuration is TOML with four optional sections. Every key has a
//! default, so an empty file describes the optimised, fully aligned device
//! driven by a radial `M = 17` mode.
//!
//! ```toml
//! [geometry]
//! r_d = 1.4687          # any DeviceGeometry field; alpha1/alpha2 take x or [re, im]
//!
//! [nearfield]
//! kind = "analytic"     # or "imported" with file = "grid.txt"
//! m = 17
//! amp_rho = 1.0
//! amp_z = [0.0, 0.0]
//!
//! [emitter]
//! preset = "SnV"        # or name + branch
//! fp = 62.0
//!
//! [run]
//! na = 0.7
//! eta_ex = 1.0
//! hemisphere = [181, 256]
//! alignment = { u = 0.0, v = 0.0, layer = 2 }   # or preset = "A" | "B"
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::dipole::FarFieldMode;
use crate::error::{Error, Result};
use crate::geometry::{AlignmentOffset, DeviceGeometry, LayerId};
use crate::nearfield::{import_nearfield, AnalyticMode, EmitterSpec, NearFieldSpec};
use crate::workflow::{DerivedLengths, RunConfig};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for Complex64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    nearfield: RawNearField,
    #[serde(default)]
    emitter: RawEmitter,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    r_d: Option<f64>,
    h: Option<f64>,
    a1: Option<f64>,
    a2: Option<f64>,
    d1: Option<f64>,
    d2: Option<f64>,
    r_h1: Option<f64>,
    r_h2: Option<f64>,
    z1: Option<f64>,
    z2: Option<f64>,
    n_diamond: Option<f64>,
    n_ox: Option<f64>,
    n_sio2: Option<f64>,
    lambda0: Option<f64>,
    alpha1: Option<ComplexValue>,
    alpha2: Option<ComplexValue>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNearField {
    kind: Option<String>,
    m: Option<i32>,
    rho_m: Option<f64>,
    w: Option<f64>,
    amp_rho: Option<ComplexValue>,
    amp_z: Option<ComplexValue>,
    file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmitter {
    preset: Option<String>,
    name: Option<String>,
    branch: Option<f64>,
    fp: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlignment {
    preset: Option<String>,
    u: Option<f64>,
    v: Option<f64>,
    layer: Option<u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    na: Option<f64>,
    eta_ex: Option<f64>,
    hemisphere: Option<[usize; 2]>,
    alignment: Option<RawAlignment>,
    layer2_only: Option<bool>,
    layer1_radius: Option<f64>,
    layer2_radius: Option<f64>,
    r_ff: Option<f64>,
    asymptotic: Option<bool>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Dotted key (`section.name`) on the line containing byte `offset`.
fn key_at(text: &str, offset: usize) -> String {
    let offset = offset.min(text.len());
    let line_start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let section = text[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let name = line.split('=').next().unwrap_or("").trim().trim_matches('"');
    match (section, name.is_empty() || line.trim_start().starts_with('[')) {
        (Some(s), false) => format!("{s}.{name}"),
        (Some(s), true) => s,
        (None, false) => name.to_string(),
        (None, true) => "<document>".to_string(),
    }
}

impl RunConfig {
    /// Parses configuration text. Relative file references resolve against
    /// `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let raw: RawFile = toml::from_str(text).map_err(|e| {
            let key = e.span().map_or_else(|| "<document>".to_string(), |s| key_at(text, s.start));
            config_error(&key, e.message().to_string())
        })?;
        build(raw, base_dir)
    }

    /// Reads a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_toml_str(&text, base)
    }
}

fn build(raw: RawFile, base_dir: &Path) -> Result<RunConfig> {
    let defaults = DeviceGeometry::default();
    let g = raw.geometry;
    let d1 = g.d1.unwrap_or(defaults.d1);
    let geometry = DeviceGeometry {
        r_d: g.r_d.unwrap_or(defaults.r_d),
        h: g.h.unwrap_or(defaults.h),
        a1: g.a1.unwrap_or(defaults.a1),
        a2: g.a2.unwrap_or(defaults.a2),
        d1,
        d2: g.d2.unwrap_or(defaults.d2),
        r_h1: g.r_h1.unwrap_or(defaults.r_h1),
        r_h2: g.r_h2.unwrap_or(defaults.r_h2),
        z1: g.z1.unwrap_or(d1 / 2.0),
        z2: g.z2.unwrap_or(defaults.z2),
        n_diamond: g.n_diamond.unwrap_or(defaults.n_diamond),
        n_ox: g.n_ox.unwrap_or(defaults.n_ox),
        n_sio2: g.n_sio2.unwrap_or(defaults.n_sio2),
        lambda0: g.lambda0.unwrap_or(defaults.lambda0),
        alpha1: g.alpha1.map_or(defaults.alpha1, Into::into),
        alpha2: g.alpha2.map_or(defaults.alpha2, Into::into),
    };
    geometry.validate().map_err(|e| config_error("geometry", e.to_string()))?;

    let nf = raw.nearfield;
    let nearfield = match nf.kind.as_deref().unwrap_or("analytic") {
        "analytic" => {
            if nf.file.is_some() {
                return Err(config_error("nearfield.file", "only valid with kind = \"imported\""));
            }
            let mut mode = AnalyticMode::radial(nf.m.unwrap_or(17), geometry.r_d);
            if let Some(r) = nf.rho_m {
                mode.rho_m = r;
            }
            if let Some(w) = nf.w {
                mode.w = w;
            }
            if let Some(a) = nf.amp_rho {
                mode.amp_rho = a.into();
            }
            if let Some(a) = nf.amp_z {
                mode.amp_z = a.into();
            }
            mode.validate().map_err(|e| config_error("nearfield", e.to_string()))?;
            NearFieldSpec::Analytic(mode)
        }
        "imported" => {
            for (key, set) in [
                ("nearfield.m", nf.m.is_some()),
                ("nearfield.rho_m", nf.rho_m.is_some()),
                ("nearfield.w", nf.w.is_some()),
                ("nearfield.amp_rho", nf.amp_rho.is_some()),
                ("nearfield.amp_z", nf.amp_z.is_some()),
            ] {
                if set {
                    return Err(config_error(key, "only valid with kind = \"analytic\""));
                }
            }
            let file = nf
                .file
                .ok_or_else(|| config_error("nearfield.file", "required with kind = \"imported\""))?;
            import_nearfield(base_dir.join(file))?
        }
        other => {
            return Err(config_error(
                "nearfield.kind",
                format!("expected \"analytic\" or \"imported\", got \"{other}\""),
            ))
        }
    };

    let em = raw.emitter;
    let fp = em.fp.unwrap_or(62.0);
    let emitter = match (em.preset, em.branch) {
        (Some(_), Some(_)) => return Err(config_error("emitter.branch", "conflicts with emitter.preset")),
        (Some(p), None) => EmitterSpec::preset(&p, fp).map_err(|e| config_error("emitter.preset", e.to_string()))?,
        (None, Some(b)) => EmitterSpec::new(em.name.unwrap_or_else(|| "custom".into()), b, fp)
            .map_err(|e| config_error("emitter", e.to_string()))?,
        (None, None) => EmitterSpec::preset("SnV", fp).map_err(|e| config_error("emitter.fp", e.to_string()))?,
    };

    let run = raw.run;
    let alignment = match run.alignment {
        None => AlignmentOffset::full_alignment(LayerId::Second),
        Some(a) => {
            let layer = match a.layer {
                None => LayerId::Second,
                Some(id) => {
                    LayerId::try_from(id).map_err(|e| config_error("run.alignment.layer", e.to_string()))?
                }
            };
            match a.preset.as_deref() {
                Some(p) if a.u.is_some() || a.v.is_some() => {
                    return Err(config_error("run.alignment.preset", format!("\"{p}\" conflicts with u/v")))
                }
                Some("A") | Some("a") => AlignmentOffset::full_alignment(layer),
                Some("B") | Some("b") => AlignmentOffset::half_period(&geometry, layer),
                Some(p) => {
                    return Err(config_error("run.alignment.preset", format!("expected \"A\" or \"B\", got \"{p}\"")))
                }
                None => AlignmentOffset::new(a.u.unwrap_or(0.0), a.v.unwrap_or(0.0), layer),
            }
        }
    };
    let far_field = match (run.asymptotic.unwrap_or(false), run.r_ff) {
        (true, Some(_)) => return Err(config_error("run.r_ff", "conflicts with run.asymptotic = true")),
        (true, None) => FarFieldMode::Asymptotic,
        (false, r) => FarFieldMode::Finite { radius: r.unwrap_or(1e4) },
    };
    let hemisphere = run.hemisphere.map_or((181, 256), |[t, p]| (t, p));
    let config = RunConfig {
        nearfield,
        alignment,
        hemisphere,
        na: run.na.unwrap_or(0.7),
        eta_ex: run.eta_ex.unwrap_or(1.0),
        emitter,
        layer2_only: run.layer2_only.unwrap_or(false),
        layer1_radius: run.layer1_radius.unwrap_or(geometry.r_d),
        layer2_radius: run.layer2_radius.unwrap_or(3.0),
        far_field,
        seed: run.seed.unwrap_or(0),
        out_dir: run.out.map(|p| base_dir.join(p)),
        derived: DerivedLengths {
            rho_m: nf.rho_m.is_none(),
            z1: g.z1.is_none(),
        },
        geometry,
    };
    let r_ff = match config.far_field {
        FarFieldMode::Finite { radius } => radius,
        FarFieldMode::Asymptotic => f64::INFINITY,
    };
    for (key, check, value, range) in [
        ("run.na", config.na > 0.0 && config.na <= 1.0, config.na.to_string(), "(0, 1]"),
        ("run.eta_ex", (0.0..=1.0).contains(&config.eta_ex), config.eta_ex.to_string(), "[0, 1]"),
        (
            "run.hemisphere",
            config.hemisphere.0 >= 2 && config.hemisphere.1 >= 1,
            format!("{:?}", config.hemisphere),
            ">= [2, 1]",
        ),
        ("run.layer1_radius", config.layer1_radius > 0.0, config.layer1_radius.to_string(), "> 0"),
        ("run.layer2_radius", config.layer2_radius > 0.0, config.layer2_radius.to_string(), "> 0"),
        ("run.r_ff", r_ff > 0.0, r_ff.to_string(), "> 0"),
    ] {
        if !check {
            return Err(config_error(key, format!("{value} is outside {range}")));
        }
    }
    Ok(config)
}
