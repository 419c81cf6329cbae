//! Figures of merit computed from far-field maps.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dipole::{FarFieldMap, HemisphereGrid};
use crate::error::{Error, Result};
use crate::io::{round12, write_table};

/// Relative change of `eta_col` on the halved grid above which a run is
/// flagged as under-resolved.
pub const REFINEMENT_TOLERANCE: f64 = 2e-3;

/// Trapezoid weights for a nonuniform axis.
fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; x.len()];
    for i in 1..x.len() {
        let h = 0.5 * (x[i] - x[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

/// `sum_phi I dphi * sin(theta)` per polar node.
fn polar_integrand(map: &FarFieldMap) -> Vec<f64> {
    let dphi = 2.0 * PI / map.n_phi() as f64;
    (0..map.n_theta())
        .map(|i| map.ring_mean(i) * map.n_phi() as f64 * dphi * map.theta[i].sin())
        .collect()
}

/// Running trapezoid integral from the axis to `theta_a`, interpolating
/// linearly inside a partial cell.
fn integral_to(theta: &[f64], f: &[f64], theta_a: f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..theta.len() {
        let (a, b) = (theta[i - 1], theta[i]);
        if theta_a >= b {
            acc += 0.5 * (f[i - 1] + f[i]) * (b - a);
        } else {
            if theta_a > a {
                let t = (theta_a - a) / (b - a);
                let fa = f[i - 1] + t * (f[i] - f[i - 1]);
                acc += 0.5 * (f[i - 1] + fa) * (theta_a - a);
            }
            break;
        }
    }
    acc
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// Collected fraction of the upper-hemisphere power within `na`, times
/// `eta_ex`.
pub fn collection_efficiency(map: &FarFieldMap, na: f64, eta_ex: f64) -> Result<f64> {
    Ok(efficiency_curve(map, eta_ex, &[na])?[0].1)
}

/// `(NA, eta_col)` for each aperture in an ascending grid.
pub fn efficiency_curve(map: &FarFieldMap, eta_ex: f64, na_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_unit("eta_ex", eta_ex)?;
    for &na in na_grid {
        check_unit("NA", na)?;
    }
    if na_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("NA grid must be sorted ascending"));
    }
    let f = polar_integrand(map);
    let total = integral_to(&map.theta, &f, PI / 2.0);
    if !(total > 0.0) {
        return Err(Error::UndefinedRatio("far-field map carries no power".into()));
    }
    Ok(na_grid
        .iter()
        .map(|&na| (na, eta_ex * integral_to(&map.theta, &f, na.asin()) / total))
        .collect())
}

/// Apertures 0, 0.01, ..., 1 plus `extra`, sorted and deduplicated.
pub fn standard_na_grid(extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    g.extend_from_slice(extra);
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

/// Relative change of `eta_col(na)` when the map is restricted to every other
/// grid node.
pub fn refinement_change(map: &FarFieldMap, na: f64, eta_ex: f64) -> Result<f64> {
    let full = collection_efficiency(map, na, eta_ex)?;
    let coarse = map.resample_onto(&map.grid().halved())?;
    let half = collection_efficiency(&coarse, na, eta_ex)?;
    if full == 0.0 {
        return Ok(if half == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((half - full).abs() / full)
}

/// Circular handedness of the target Gaussian mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    /// Jones vector `(1, i)/sqrt(2)`.
    Left,
    /// Jones vector `(1, -i)/sqrt(2)`.
    Right,
}

impl Handedness {
    fn sign(self) -> f64 {
        match self {
            Handedness::Left => 1.0,
            Handedness::Right => -1.0,
        }
    }
}

/// Local `(theta^, phi^)` components of a uniformly circular unit vector.
fn circular_components(h: Handedness, phi: f64) -> (Complex64, Complex64) {
    let s = h.sign();
    let hx = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let hy = Complex64::new(0.0, s * std::f64::consts::FRAC_1_SQRT_2);
    let (sp, cp) = phi.sin_cos();
    (hx * cp + hy * sp, -hx * sp + hy * cp)
}

/// Axis-centred circular Gaussian `exp(-theta^2 / waist^2)` on a grid.
pub fn gaussian_mode_map(grid: &HemisphereGrid, waist: f64, h: Handedness) -> Result<FarFieldMap> {
    if !(waist > 0.0) {
        return Err(Error::invalid(format!("waist must be positive, got {waist}")));
    }
    let (e_theta, e_phi) = grid
        .nodes()
        .map(|(t, p)| {
            let (a, b) = circular_components(h, p);
            let g = (-(t * t) / (waist * waist)).exp();
            (a * g, b * g)
        })
        .unzip();
    FarFieldMap::from_components(grid, e_theta, e_phi)
}

/// Power carried by each circular channel, `sin(theta)`-weighted over the
/// polar nodes selected by `rows`.
fn channel_power(map: &FarFieldMap, rows: std::ops::Range<usize>, weights: &[f64]) -> (f64, f64) {
    let mut left = 0.0;
    let mut right = 0.0;
    for i in rows {
        for (j, &p) in map.phi.iter().enumerate() {
            let idx = map.index(i, j);
            let (e_t, e_p) = (map.e_theta[idx], map.e_phi[idx]);
            let (lt, lp) = circular_components(Handedness::Left, p);
            let (rt, rp) = circular_components(Handedness::Right, p);
            left += weights[i] * (lt.conj() * e_t + lp.conj() * e_p).norm_sqr();
            right += weights[i] * (rt.conj() * e_t + rp.conj() * e_p).norm_sqr();
        }
    }
    (left, right)
}

/// Circular handedness dominating the map on the optical axis, falling back
/// to the whole hemisphere when the axis is dark.
pub fn dominant_handedness(map: &FarFieldMap) -> Result<Handedness> {
    let ones = vec![1.0; map.n_theta()];
    let (l, r) = channel_power(map, 0..1, &ones);
    let (l, r) = if l + r > 1e-12 * map.n_phi() as f64 {
        (l, r)
    } else {
        let w: Vec<f64> = trapezoid_weights(&map.theta)
            .iter()
            .zip(&map.theta)
            .map(|(w, t)| w * t.sin())
            .collect();
        channel_power(map, 0..map.n_theta(), &w)
    };
    if l + r == 0.0 {
        return Err(Error::UndefinedRatio("far-field map carries no power".into()));
    }
    Ok(if l >= r { Handedness::Left } else { Handedness::Right })
}

/// Best modal overlap with an axis-centred circular Gaussian and the waist
/// angle achieving it.
pub fn gaussian_overlap(map: &FarFieldMap) -> Result<(f64, f64)> {
    let h = dominant_handedness(map)?;
    let w: Vec<f64> = trapezoid_weights(&map.theta)
        .iter()
        .zip(&map.theta)
        .map(|(w, t)| w * t.sin())
        .collect();
    let phis: Vec<(Complex64, Complex64)> = map.phi.iter().map(|&p| circular_components(h, p)).collect();
    let mut e_norm = 0.0;
    for i in 0..map.n_theta() {
        for j in 0..map.n_phi() {
            let idx = map.index(i, j);
            e_norm += w[i] * (map.e_theta[idx].norm_sqr() + map.e_phi[idx].norm_sqr());
        }
    }
    if !(e_norm > 0.0) {
        return Err(Error::UndefinedRatio("far-field map carries no power".into()));
    }
    // Per polar node, the projection of E onto the polarisation pattern.
    let proj: Vec<Complex64> = (0..map.n_theta())
        .map(|i| {
            (0..map.n_phi())
                .map(|j| {
                    let idx = map.index(i, j);
                    let (a, b) = phis[j];
                    a.conj() * map.e_theta[idx] + b.conj() * map.e_phi[idx]
                })
                .sum()
        })
        .collect();
    let n_phi = map.n_phi() as f64;
    let overlap = |waist: f64| {
        let mut cross = Complex64::new(0.0, 0.0);
        let mut g_norm = 0.0;
        for (i, &t) in map.theta.iter().enumerate() {
            let g = (-(t * t) / (waist * waist)).exp();
            cross += proj[i] * (w[i] * g);
            g_norm += w[i] * g * g * n_phi;
        }
        if g_norm == 0.0 {
            0.0
        } else {
            cross.norm_sqr() / (e_norm * g_norm)
        }
    };
    let (waist, best) = maximise_scalar(overlap, 0.01, 1.2, 1e-4);
    Ok((best.min(1.0), waist))
}

/// Golden-section maximisation on `[lo, hi]`, bracketed by a coarse scan so
/// that a non-unimodal objective still lands on the best basin.
fn maximise_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const SCAN: usize = 48;
    let xs: Vec<f64> = (0..=SCAN).map(|i| lo + (hi - lo) * i as f64 / SCAN as f64).collect();
    let best = (0..=SCAN)
        .map(|i| (i, f(xs[i])))
        .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
        .0;
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(SCAN)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `eta_zpl * eta_col`.
pub fn total_efficiency(eta_zpl: f64, eta_col: f64) -> f64 {
    eta_zpl * eta_col
}

/// Efficiency summary of one configuration.
///
/// Serialises to a flat JSON object; the curve is written separately as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub eta_zpl: f64,
    pub eta_ex: f64,
    pub na: f64,
    pub eta_col: f64,
    pub overlap_gauss: f64,
    pub waist: f64,
    pub eta_tot: f64,
    /// Relative change of `eta_col` on the halved grid.
    pub grid_change: f64,
    #[serde(skip)]
    pub curve: Vec<(f64, f64)>,
}

impl EfficiencyReport {
    pub fn from_map(map: &FarFieldMap, eta_zpl: f64, na: f64, eta_ex: f64) -> Result<Self> {
        check_unit("eta_zpl", eta_zpl)?;
        let curve = efficiency_curve(map, eta_ex, &standard_na_grid(&[na]))?;
        let eta_col = collection_efficiency(map, na, eta_ex)?;
        let (overlap_gauss, waist) = gaussian_overlap(map)?;
        Ok(EfficiencyReport {
            eta_zpl,
            eta_ex,
            na,
            eta_col,
            overlap_gauss,
            waist,
            eta_tot: total_efficiency(eta_zpl, eta_col),
            grid_change: refinement_change(map, na, eta_ex)?,
            curve,
        })
    }

    pub fn needs_refinement(&self) -> bool {
        self.grid_change > REFINEMENT_TOLERANCE
    }

    /// Flat JSON with every number rounded to 12 significant digits.
    pub fn to_json(&self) -> String {
        let rounded = EfficiencyReport {
            eta_zpl: round12(self.eta_zpl),
            eta_ex: round12(self.eta_ex),
            na: round12(self.na),
            eta_col: round12(self.eta_col),
            overlap_gauss: round12(self.overlap_gauss),
            waist: round12(self.waist),
            eta_tot: round12(self.eta_tot),
            grid_change: round12(self.grid_change),
            curve: Vec::new(),
        };
        serde_json::to_string_pretty(&rounded).expect("report serialises")
    }

    /// CSV with columns `NA,eta_col`.
    pub fn write_curve_csv(&self, out: impl Write) -> std::io::Result<()> {
        let rows: Vec<Vec<f64>> = self.curve.iter().map(|&(a, b)| vec![a, b]).collect();
        write_table(out, &["NA", "eta_col"], &rows)
    }
}
