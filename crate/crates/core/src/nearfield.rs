//! Cavity near field and emitter-side efficiency formulas.
//!
//! The analytic near field is a whispering-gallery stand-in: a Gaussian
//! annulus around `rho_m` carrying the azimuthal phase `exp(i M phi)` on its
//! radial and vertical components. Measured fields can instead be loaded from
//! a sampled plane (see [`NearFieldGrid`]).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::CVec3;

/// Analytic whispering-gallery near field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMode {
    /// Azimuthal mode number.
    pub m: i32,
    /// Radius of the annulus peak.
    pub rho_m: f64,
    /// Gaussian width of the annulus.
    pub w: f64,
    pub amp_rho: Complex64,
    pub amp_z: Complex64,
}

impl AnalyticMode {
    /// Radially polarised mode with the default annulus for a disk of radius
    /// `r_d`: peak at `r_d - 0.2`, width `0.25`.
    pub fn radial(m: i32, r_d: f64) -> Self {
        AnalyticMode {
            m,
            rho_m: r_d - 0.2,
            w: 0.25,
            amp_rho: Complex64::new(1.0, 0.0),
            amp_z: Complex64::new(0.0, 0.0),
        }
    }

    /// Same annulus, vertical polarisation only.
    pub fn vertical(m: i32, r_d: f64) -> Self {
        AnalyticMode {
            amp_rho: Complex64::new(0.0, 0.0),
            amp_z: Complex64::new(1.0, 0.0),
            ..AnalyticMode::radial(m, r_d)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid(format!("mode number must be >= 1, got {}", self.m)));
        }
        if !(self.w.is_finite() && self.w > 0.0) {
            return Err(Error::invalid(format!("annulus width must be positive, got {}", self.w)));
        }
        if !self.rho_m.is_finite() {
            return Err(Error::invalid("annulus radius must be finite"));
        }
        if self.amp_rho == Complex64::new(0.0, 0.0) && self.amp_z == Complex64::new(0.0, 0.0) {
            return Err(Error::invalid("at least one of amp_rho, amp_z must be nonzero"));
        }
        Ok(())
    }

    /// `(E_rho, E_phi, E_z)` at cylindrical `(rho, phi)`.
    pub fn cylindrical(&self, rho: f64, phi: f64) -> [Complex64; 3] {
        let envelope = (-((rho - self.rho_m) / self.w).powi(2)).exp();
        let phase = Complex64::from_polar(envelope, self.m as f64 * phi);
        [self.amp_rho * phase, Complex64::new(0.0, 0.0), self.amp_z * phase]
    }
}

/// Complex field sampled on a rectangular plane.
#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Height of the sampled plane.
    pub z: f64,
    pub lambda0: f64,
    pub x0: f64,
    pub y0: f64,
    /// Cartesian `E` per node, row-major with `x` fastest.
    pub values: Vec<CVec3>,
}

/// Source of the field that drives the first grating layer.
#[derive(Debug, Clone, PartialEq)]
pub enum NearFieldSpec {
    Analytic(AnalyticMode),
    Imported(NearFieldGrid),
}

impl NearFieldSpec {
    /// Cartesian field at `point`. The analytic mode is independent of height
    /// and the imported plane is applied at whatever height is asked.
    pub fn sample(&self, point: &Vector3<f64>) -> Result<CVec3> {
        match self {
            NearFieldSpec::Analytic(mode) => {
                let rho = point.x.hypot(point.y);
                let phi = point.y.atan2(point.x);
                let [e_rho, e_phi, e_z] = mode.cylindrical(rho, phi);
                let (s, c) = phi.sin_cos();
                Ok(CVec3::new(e_rho * c - e_phi * s, e_rho * s + e_phi * c, e_z))
            }
            NearFieldSpec::Imported(grid) => grid.interpolate(point.x, point.y),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NearFieldSpec::Analytic(mode) => mode.validate(),
            NearFieldSpec::Imported(grid) => grid.validate(),
        }
    }

    /// Mode number, if known.
    pub fn mode_number(&self) -> Option<i32> {
        match self {
            NearFieldSpec::Analytic(mode) => Some(mode.m),
            NearFieldSpec::Imported(_) => None,
        }
    }
}

const HEADER_KEYS: [&str; 6] = ["nx", "ny", "dx", "dy", "z", "lambda0"];
const COLUMN_KEYS: [&str; 8] = ["x", "y", "ex_re", "ex_im", "ey_re", "ey_im", "ez_re", "ez_im"];

impl NearFieldGrid {
    /// Samples any field on a regular grid.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        (x0, y0): (f64, f64),
        (dx, dy): (f64, f64),
        z: f64,
        lambda0: f64,
        mut field: impl FnMut(f64, f64) -> CVec3,
    ) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(field(x0 + i as f64 * dx, y0 + j as f64 * dy));
            }
        }
        NearFieldGrid {
            nx,
            ny,
            dx,
            dy,
            z,
            lambda0,
            x0,
            y0,
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid("grid must have at least one node"));
        }
        if self.values.len() != self.nx * self.ny {
            return Err(Error::invalid(format!(
                "grid has {} samples, expected {} x {}",
                self.values.len(),
                self.nx,
                self.ny
            )));
        }
        if !(self.dx > 0.0 && self.dy > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        Ok(())
    }

    fn x_max(&self) -> f64 {
        self.x0 + (self.nx - 1) as f64 * self.dx
    }

    fn y_max(&self) -> f64 {
        self.y0 + (self.ny - 1) as f64 * self.dy
    }

    /// Bilinear interpolation; exact at the nodes.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<CVec3> {
        let out_of_range = || Error::OutOfRange {
            x,
            y,
            x_min: self.x0,
            x_max: self.x_max(),
            y_min: self.y0,
            y_max: self.y_max(),
        };
        let (i, tx) = cell(x, self.x0, self.dx, self.nx).ok_or_else(out_of_range)?;
        let (j, ty) = cell(y, self.y0, self.dy, self.ny).ok_or_else(out_of_range)?;
        let at = |i: usize, j: usize| self.values[j * self.nx + i];
        let i1 = (i + 1).min(self.nx - 1);
        let j1 = (j + 1).min(self.ny - 1);
        let lower = at(i, j) * Complex64::from(1.0 - tx) + at(i1, j) * Complex64::from(tx);
        let upper = at(i, j1) * Complex64::from(1.0 - tx) + at(i1, j1) * Complex64::from(tx);
        Ok(lower * Complex64::from(1.0 - ty) + upper * Complex64::from(ty))
    }

    /// Loads a grid file.
    ///
    /// Layout (comma separated, `#` starts a comment line):
    ///
    /// ```text
    /// nx,ny,dx,dy,z,lambda0
    /// 2,1,0.025,0.025,0.1,1
    /// x,y,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im
    /// 0,0,1,0,0,0,0,0
    /// 0.025,0,0.5,0.5,0,0,0,0
    /// ```
    ///
    /// Data rows are ordered with `x` fastest and must lie on the lattice
    /// implied by the first row and the header spacing.
    pub fn read_from(mut reader: impl Read) -> Result<Self> {
        let mut text = Vec::new();
        reader.read_to_end(&mut text).map_err(|e| Error::Parse {
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        // The csv reader's own line counter skips comment and blank lines.
        let record_lines: Vec<u64> = text
            .split(|&b| b == b'\n')
            .enumerate()
            .filter(|(_, l)| {
                let l = l.strip_suffix(b"\r").unwrap_or(l);
                !l.is_empty() && l[0] != b'#'
            })
            .map(|(i, _)| i as u64 + 1)
            .collect();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_slice());
        let mut records = rdr.records().enumerate().map(|(i, r)| {
            let line = record_lines.get(i).copied().unwrap_or(0);
            match r {
                Ok(mut rec) => {
                    let mut pos = csv::Position::new();
                    pos.set_line(line);
                    rec.set_position(Some(pos));
                    Ok(rec)
                }
                Err(e) => Err(csv_error(e, line)),
            }
        });

        let mut next = |what: &str| -> Result<csv::StringRecord> {
            match records.next() {
                Some(Ok(r)) => Ok(r),
                Some(Err(e)) => Err(e),
                None => Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("unexpected end of file, expected {what}"),
                }),
            }
        };

        let keys = next("header keys")?;
        expect_keys(&keys, &HEADER_KEYS)?;
        let header = next("header values")?;
        let line = line_of(&header);
        if header.len() != HEADER_KEYS.len() {
            return Err(Error::Parse {
                line,
                column: header.len().min(HEADER_KEYS.len()) + 1,
                message: format!("expected {} header values, found {}", HEADER_KEYS.len(), header.len()),
            });
        }
        let nx = parse_count(&header, 0)?;
        let ny = parse_count(&header, 1)?;
        let dx = parse_field(&header, 2)?;
        let dy = parse_field(&header, 3)?;
        let z = parse_field(&header, 4)?;
        let lambda0 = parse_field(&header, 5)?;
        for (col, v) in [(3, dx), (4, dy), (6, lambda0)] {
            if v <= 0.0 {
                return Err(Error::Parse {
                    line,
                    column: col,
                    message: format!("`{}` must be positive", HEADER_KEYS[col - 1]),
                });
            }
        }

        let columns = next("column names")?;
        expect_keys(&columns, &COLUMN_KEYS)?;

        let mut values = Vec::with_capacity(nx * ny);
        let (mut x0, mut y0) = (0.0, 0.0);
        for idx in 0..nx * ny {
            let row = next("data row")?;
            let line = line_of(&row);
            if row.len() != COLUMN_KEYS.len() {
                return Err(Error::Parse {
                    line,
                    column: row.len().min(COLUMN_KEYS.len()) + 1,
                    message: format!("expected {} columns, found {}", COLUMN_KEYS.len(), row.len()),
                });
            }
            let mut nums = [0.0; 8];
            for (c, slot) in nums.iter_mut().enumerate() {
                *slot = parse_field(&row, c)?;
            }
            let (i, j) = (idx % nx, idx / nx);
            if idx == 0 {
                x0 = nums[0];
                y0 = nums[1];
            }
            let (ex, ey) = (x0 + i as f64 * dx, y0 + j as f64 * dy);
            let tol = 1e-9 * (dx.max(dy) + ex.abs().max(ey.abs()));
            if (nums[0] - ex).abs() > tol || (nums[1] - ey).abs() > tol {
                return Err(Error::Parse {
                    line,
                    column: if (nums[0] - ex).abs() > tol { 1 } else { 2 },
                    message: format!(
                        "non-rectangular grid: node ({i}, {j}) at ({}, {}), expected ({ex}, {ey})",
                        nums[0], nums[1]
                    ),
                });
            }
            values.push(CVec3::new(
                Complex64::new(nums[2], nums[3]),
                Complex64::new(nums[4], nums[5]),
                Complex64::new(nums[6], nums[7]),
            ));
        }
        if let Some(extra) = records.next() {
            let line = extra.map(|r| line_of(&r)).unwrap_or(0);
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("more rows than nx * ny = {}", nx * ny),
            });
        }

        Ok(NearFieldGrid {
            nx,
            ny,
            dx,
            dy,
            z,
            lambda0,
            x0,
            y0,
            values,
        })
    }

    /// Writes the grid in the format accepted by [`NearFieldGrid::read_from`].
    /// Numbers use the shortest representation that parses back to the same
    /// `f64`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&HEADER_KEYS.join(","));
        s.push('\n');
        let _ = writeln!(
            s,
            "{},{},{:?},{:?},{:?},{:?}",
            self.nx, self.ny, self.dx, self.dy, self.z, self.lambda0
        );
        s.push_str(&COLUMN_KEYS.join(","));
        s.push('\n');
        for j in 0..self.ny {
            for i in 0..self.nx {
                let e = self.values[j * self.nx + i];
                let _ = writeln!(
                    s,
                    "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                    self.x0 + i as f64 * self.dx,
                    self.y0 + j as f64 * self.dy,
                    e.x.re,
                    e.x.im,
                    e.y.re,
                    e.y.im,
                    e.z.re,
                    e.z.im
                );
            }
        }
        s
    }
}

/// Reads an imported near field from disk.
pub fn import_nearfield(path: impl AsRef<Path>) -> Result<NearFieldSpec> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(NearFieldSpec::Imported(NearFieldGrid::read_from(file)?))
}

/// Writes a grid to disk.
pub fn export_nearfield(grid: &NearFieldGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid.to_text()).map_err(|e| Error::io(path, e))
}

fn cell(coord: f64, origin: f64, step: f64, n: usize) -> Option<(usize, f64)> {
    let f = (coord - origin) / step;
    let last = (n - 1) as f64;
    let slack = 1e-9;
    if !(f >= -slack && f <= last + slack) {
        return None;
    }
    let f = f.clamp(0.0, last);
    let i = (f.floor() as usize).min(n.saturating_sub(2));
    Some((i, if n == 1 { 0.0 } else { f - i as f64 }))
}

fn csv_error(e: csv::Error, line: u64) -> Error {
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn expect_keys(record: &csv::StringRecord, keys: &[&str]) -> Result<()> {
    for (c, key) in keys.iter().enumerate() {
        match record.get(c) {
            Some(found) if found.eq_ignore_ascii_case(key) => {}
            found => {
                return Err(Error::Parse {
                    line: line_of(record),
                    column: c + 1,
                    message: format!("expected `{key}`, found `{}`", found.unwrap_or("")),
                })
            }
        }
    }
    if record.len() != keys.len() {
        return Err(Error::Parse {
            line: line_of(record),
            column: keys.len() + 1,
            message: format!("expected {} names, found {}", keys.len(), record.len()),
        });
    }
    Ok(())
}

fn parse_field(record: &csv::StringRecord, c: usize) -> Result<f64> {
    let raw = record.get(c).unwrap_or("");
    let err = |message: String| Error::Parse {
        line: line_of(record),
        column: c + 1,
        message,
    };
    let v: f64 = raw.parse().map_err(|_| err(format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(err(format!("non-finite value `{raw}`")));
    }
    Ok(v)
}

fn parse_count(record: &csv::StringRecord, c: usize) -> Result<usize> {
    let raw = record.get(c).unwrap_or("");
    match raw.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Error::Parse {
            line: line_of(record),
            column: c + 1,
            message: format!("`{raw}` is not a positive integer"),
        }),
    }
}

/// Resonator figures that set the Purcell enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    pub q: f64,
    /// Mode volume in units of `(lambda / n_eff)^3`.
    pub v: f64,
    pub n_eff: f64,
}

impl CavityMode {
    /// Converts a volume given in absolute units.
    pub fn from_physical_volume(q: f64, volume: f64, lambda: f64, n_eff: f64) -> Self {
        CavityMode {
            q,
            v: volume / (lambda / n_eff).powi(3),
            n_eff,
        }
    }
}

/// `F_p = 3 / (4 pi^2) * Q / V` with `V` in cubic reduced wavelengths.
pub fn purcell_factor(mode: &CavityMode) -> Result<f64> {
    if !(mode.q.is_finite() && mode.q > 0.0) {
        return Err(Error::invalid(format!("Q must be positive, got {}", mode.q)));
    }
    if !(mode.v.is_finite() && mode.v > 0.0) {
        return Err(Error::invalid(format!("mode volume must be positive, got {}", mode.v)));
    }
    if !(mode.n_eff >= 1.0) {
        return Err(Error::invalid(format!("n_eff must be >= 1, got {}", mode.n_eff)));
    }
    Ok(3.0 / (4.0 * PI * PI) * mode.q / mode.v)
}

/// A color center: its off-ZPL branching `Gamma_tot/Gamma_ZPL - 1` and the
/// Purcell factor it sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub name: String,
    pub branch: f64,
    pub fp: f64,
}

impl EmitterSpec {
    pub fn new(name: impl Into<String>, branch: f64, fp: f64) -> Result<Self> {
        let e = EmitterSpec {
            name: name.into(),
            branch,
            fp,
        };
        e.validate()?;
        Ok(e)
    }

    /// Named color center with the given Purcell factor. Accepts `SnV`, `SiV`
    /// and `NV` in any case.
    pub fn preset(name: &str, fp: f64) -> Result<Self> {
        let (label, branch) = match name.to_ascii_lowercase().as_str() {
            "snv" => ("SnV", 0.25),
            "siv" => ("SiV", 0.66),
            "nv" => ("NV", 32.3),
            _ => return Err(Error::invalid(format!("unknown emitter preset `{name}`"))),
        };
        EmitterSpec::new(label, branch, fp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.branch.is_finite() && self.branch >= 0.0) {
            return Err(Error::invalid(format!("branch must be >= 0, got {}", self.branch)));
        }
        if !(self.fp >= 0.0) {
            return Err(Error::invalid(format!("Purcell factor must be >= 0, got {}", self.fp)));
        }
        Ok(())
    }
}

/// Fraction of emission into the zero-phonon line, `F_p / (F_p + branch)`.
pub fn zpl_efficiency(emitter: &EmitterSpec) -> f64 {
    if emitter.fp == 0.0 {
        return 0.0;
    }
    if emitter.fp.is_infinite() {
        return 1.0;
    }
    emitter.fp / (emitter.fp + emitter.branch)
}

/// Purcell factor needed to reach `eta_target`, inverting [`zpl_efficiency`].
pub fn required_purcell(eta_target: f64, branch: f64) -> Result<f64> {
    if !(eta_target > 0.0 && eta_target < 1.0) {
        return Err(Error::invalid(format!(
            "target efficiency must lie in (0, 1), got {eta_target}"
        )));
    }
    if !(branch.is_finite() && branch >= 0.0) {
        return Err(Error::invalid(format!("branch must be >= 0, got {branch}")));
    }
    Ok(branch * eta_target / (1.0 - eta_target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn radial17() -> AnalyticMode {
        AnalyticMode::radial(17, 1.4687)
    }

    #[test]
    fn analytic_peak_equals_amplitude() {
        let mode = AnalyticMode {
            amp_rho: Complex64::new(0.3, -1.2),
            amp_z: Complex64::new(2.0, 0.5),
            ..radial17()
        };
        let [e_rho, e_phi, e_z] = mode.cylindrical(mode.rho_m, 0.0);
        assert_eq!(e_rho, mode.amp_rho);
        assert_eq!(e_phi, Complex64::new(0.0, 0.0));
        assert_eq!(e_z, mode.amp_z);
    }

    #[test]
    fn analytic_period_is_two_pi_over_m() {
        let mode = radial17();
        let phi = 0.37;
        let a = mode.cylindrical(1.2, phi);
        let b = mode.cylindrical(1.2, phi + 2.0 * PI / 17.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn analytic_winding_is_34_pi() {
        let mode = radial17();
        let steps = 2000;
        let mut total = 0.0;
        let mut prev = mode.cylindrical(mode.rho_m, 0.0)[0].arg();
        for s in 1..=steps {
            let phi = 2.0 * PI * s as f64 / steps as f64;
            let cur = mode.cylindrical(mode.rho_m, phi)[0].arg();
            let mut d = cur - prev;
            d -= 2.0 * PI * (d / (2.0 * PI)).round();
            total += d;
            prev = cur;
        }
        assert!((total - 34.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn analytic_cartesian_is_radial() {
        let spec = NearFieldSpec::Analytic(radial17());
        let p = Vector3::new(0.8, 0.9, 0.1);
        let e = spec.sample(&p).unwrap();
        // E_rho along rho-hat: E x rho-hat has no z part.
        let cross = e.x * p.y - e.y * p.x;
        assert!(cross.norm() < 1e-14);
        assert_eq!(e.z, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn analytic_validation() {
        assert!(radial17().validate().is_ok());
        assert!(AnalyticMode { m: 0, ..radial17() }.validate().is_err());
        assert!(AnalyticMode { w: 0.0, ..radial17() }.validate().is_err());
        let dark = AnalyticMode {
            amp_rho: Complex64::new(0.0, 0.0),
            ..radial17()
        };
        assert!(dark.validate().is_err());
    }

    const TOY: &str = "# two-node toy grid\n\
        nx,ny,dx,dy,z,lambda0\n\
        2,1,0.025,0.025,0.1,1\n\
        x,y,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im\n\
        0,0,1,0,0,0,0,0\n\
        0.025,0,0.5,0.5,0,0,0,2\n";

    #[test]
    fn toy_file_parses() {
        let grid = NearFieldGrid::read_from(TOY.as_bytes()).unwrap();
        assert_eq!(grid.values.len(), 2);
        assert_eq!((grid.nx, grid.ny), (2, 1));
        assert_eq!(grid.z, 0.1);
        assert_eq!(grid.lambda0, 1.0);
        assert_eq!(grid.values[1].z, Complex64::new(0.0, 2.0));
        let mid = grid.interpolate(0.0125, 0.0).unwrap();
        assert!((mid.x - Complex64::new(0.75, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn malformed_files_report_location() {
        let bad_header = TOY.replace("nx,ny", "nq,ny");
        match NearFieldGrid::read_from(bad_header.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }

        let nan = TOY.replace("0.5,0.5", "0.5,NaN");
        match NearFieldGrid::read_from(nan.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (6, 4)),
            other => panic!("unexpected {other:?}"),
        }

        let skew = TOY.replace("0.025,0,0.5", "0.03,0,0.5");
        match NearFieldGrid::read_from(skew.as_bytes()) {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (6, 1));
                assert!(message.contains("non-rectangular"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let short = TOY.replace("2,1,0.025", "3,1,0.025");
        assert!(matches!(
            NearFieldGrid::read_from(short.as_bytes()),
            Err(Error::Parse { .. })
        ));

        let ragged = TOY.replace("0,0,1,0,0,0,0,0", "0,0,1,0,0,0,0");
        assert!(matches!(
            NearFieldGrid::read_from(ragged.as_bytes()),
            Err(Error::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn line_numbers_count_comments_and_blank_lines() {
        let text = TOY.replace("0,0,1,0,0,0,0,0\n", "0,0,1,0,0,0,0,0\n\n# note\n").replace("0.5,0.5", "0.5,x");
        match NearFieldGrid::read_from(text.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (8, 4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_grid_query_is_rejected() {
        let grid = NearFieldGrid::read_from(TOY.as_bytes()).unwrap();
        assert!(matches!(grid.interpolate(0.03, 0.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(grid.interpolate(0.01, 0.01), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn export_import_round_trip() {
        let mode = radial17();
        let spec = NearFieldSpec::Analytic(mode);
        let grid = NearFieldGrid::from_fn(13, 7, (-0.3, 0.9), (0.1, 0.07), 0.2, 1.0, |x, y| {
            spec.sample(&Vector3::new(x, y, 0.0)).unwrap()
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nf.csv");
        export_nearfield(&grid, &path).unwrap();
        match import_nearfield(&path).unwrap() {
            NearFieldSpec::Imported(back) => assert_eq!(back, grid),
            _ => unreachable!(),
        }
    }

    #[test]
    fn purcell_arithmetic() {
        let mode = CavityMode {
            q: 1e4,
            v: 3.0,
            n_eff: 2.4,
        };
        let fp = purcell_factor(&mode).unwrap();
        assert!((fp - 253.302_959_105_844_4).abs() < 1e-9);
        let half = purcell_factor(&CavityMode { v: 6.0, ..mode }).unwrap();
        assert!((half - fp / 2.0).abs() < 1e-12);
        let double = purcell_factor(&CavityMode { q: 2e4, ..mode }).unwrap();
        assert!((double - 2.0 * fp).abs() < 1e-9);
        assert!(purcell_factor(&CavityMode { q: 0.0, ..mode }).is_err());
        assert!(purcell_factor(&CavityMode { v: -1.0, ..mode }).is_err());
    }

    #[test]
    fn physical_volume_conversion() {
        let lambda: f64 = 0.619;
        let n = 2.4;
        let mode = CavityMode::from_physical_volume(1e4, 3.0 * (lambda / n).powi(3), lambda, n);
        assert!((mode.v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zpl_values_for_the_two_alignments() {
        let a = zpl_efficiency(&EmitterSpec::preset("SnV", 62.0).unwrap());
        let b = zpl_efficiency(&EmitterSpec::preset("snv", 66.0).unwrap());
        assert!((a - 0.99598).abs() < 1e-5);
        assert!((b - 0.99623).abs() < 1e-5);
        assert!((((a + b) / 2.0) * 1000.0).round() / 10.0 == 99.6);
    }

    #[test]
    fn zpl_limits() {
        assert_eq!(zpl_efficiency(&EmitterSpec::new("x", 0.25, 0.0).unwrap()), 0.0);
        assert_eq!(zpl_efficiency(&EmitterSpec::new("x", 0.25, f64::INFINITY).unwrap()), 1.0);
        assert!(EmitterSpec::new("x", -0.1, 1.0).is_err());
        assert!(EmitterSpec::preset("GeV", 1.0).is_err());
    }

    #[test]
    fn required_purcell_cases() {
        assert!((required_purcell(0.9375, 0.25).unwrap() - 3.75).abs() < 1e-12);
        assert_eq!(required_purcell(0.9375, 0.25).unwrap().ceil(), 4.0);
        assert!((required_purcell(0.9375, 0.66).unwrap() - 9.9).abs() < 1e-12);
        assert!((required_purcell(0.5, 32.3).unwrap() - 32.3).abs() < 1e-12);
        assert!(required_purcell(1.0, 0.25).is_err());
        assert!(required_purcell(1.5, 0.25).is_err());
    }

    proptest! {
        #[test]
        fn zpl_round_trip(fp in 1e-3f64..1e4, branch in 1e-3f64..100.0) {
            let eta = zpl_efficiency(&EmitterSpec::new("x", branch, fp).unwrap());
            let back = required_purcell(eta, branch).unwrap();
            prop_assert!((back - fp).abs() <= 1e-9 * fp);
        }

        #[test]
        fn zpl_monotone(fp in 0.0f64..1e3, d in 1e-3f64..10.0, branch in 1e-3f64..50.0) {
            let e = |f: f64, b: f64| zpl_efficiency(&EmitterSpec::new("x", b, f).unwrap());
            prop_assert!(e(fp + d, branch) >= e(fp, branch));
            prop_assert!(e(fp, branch + d) <= e(fp, branch));
            let v = e(fp, branch);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn analytic_intensity_is_azimuthally_flat(rho in 0.1f64..3.0, phi in 0.0f64..6.0) {
            let mode = AnalyticMode { amp_z: Complex64::new(0.4, 0.1), ..radial17() };
            let a: f64 = mode.cylindrical(rho, phi).iter().map(|c| c.norm_sqr()).sum();
            let b: f64 = mode.cylindrical(rho, 0.0).iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((a - b).abs() <= 1e-14 * b.max(1e-300));
        }

        #[test]
        fn interpolation_is_exact_at_nodes(i in 0usize..9, j in 0usize..5) {
            let spec = NearFieldSpec::Analytic(radial17());
            let grid = NearFieldGrid::from_fn(9, 5, (0.4, -0.2), (0.1, 0.1), 0.0, 1.0, |x, y| {
                spec.sample(&Vector3::new(x, y, 0.0)).unwrap()
            });
            let got = grid.interpolate(0.4 + i as f64 * 0.1, -0.2 + j as f64 * 0.1).unwrap();
            let want = grid.values[j * 9 + i];
            prop_assert!((got - want).norm() <= 1e-15 * want.norm().max(1.0));
        }
    }
}
