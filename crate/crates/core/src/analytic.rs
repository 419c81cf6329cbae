//! Closed-form fields of an idealised dipole ring.
//!
//! A ring of `N` equal-amplitude dipoles whose phase winds `L` times
//! (`L = M - N`) produces, under the Fresnel approximation, an intermediate
//! field that is a left-circular vortex of charge `L - 1` plus a
//! right-circular vortex of charge `L + 1`, with Bessel profiles in
//! `k rho_n tan(theta)`. A second ring of `Q` dipoles on the circle
//! `(r_q, theta_q)` re-radiates the transverse part into the far field
//! (Fraunhofer), multiplying each channel by a second Bessel factor in
//! `k r_q sin(theta) sin(theta_q)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j, bessel_j_over_x, bessel_j_prime};
use crate::dipole::{FarFieldMap, HemisphereGrid};
use crate::error::{Error, Result};
use crate::io::write_table;

/// Near-field component that drives the first ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Radial dipoles, polarisation pattern `2 rho^ + 3 z^`.
    Rho,
    /// Vertical dipoles, polarisation pattern `3 rho^ + 2 z^`.
    Z,
}

impl Orientation {
    /// Weights of the `(rho, z)` parts of the ring's intermediate field.
    fn weights(self) -> (f64, f64) {
        match self {
            Orientation::Rho => (2.0, 3.0),
            Orientation::Z => (3.0, 2.0),
        }
    }
}

/// Two-ring model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    /// Dipoles on the first ring.
    pub n: usize,
    pub rho_n: f64,
    /// Topological charge `M - N`.
    pub charge: i32,
    pub orientation: Orientation,
    /// Dipoles on the second ring.
    pub q_ring: usize,
    /// Spherical radius and polar angle of the second ring, seen from the
    /// centre of the first.
    pub r_q: f64,
    pub theta_q: f64,
    /// `alpha_1 E_NF`, the common first-ring dipole amplitude.
    pub source_amplitude: Complex64,
    pub alpha2: Complex64,
    pub k: f64,
}

impl RingSpec {
    /// Ring with the second circle given in cylindrical coordinates.
    pub fn new(n: usize, rho_n: f64, charge: i32, rho_q: f64, z_q: f64) -> Self {
        RingSpec {
            n,
            rho_n,
            charge,
            orientation: Orientation::Rho,
            q_ring: n,
            r_q: rho_q.hypot(z_q),
            theta_q: rho_q.atan2(z_q),
            source_amplitude: Complex64::new(1.0, 0.0),
            alpha2: Complex64::new(1.0, 0.0),
            k: 2.0 * PI,
        }
    }

    /// Ring used for the charge-resolved cross sections: 60 dipoles at
    /// radius 0.9, second ring of radius 2.75 at height 2.
    pub fn profile_default(charge: i32) -> Self {
        RingSpec::new(60, 0.9, charge, 2.75, 2.0)
    }

    pub fn with_charge(&self, charge: i32) -> Self {
        RingSpec {
            charge,
            ..self.clone()
        }
    }

    pub fn with_orientation(&self, orientation: Orientation) -> Self {
        RingSpec {
            orientation,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.q_ring < 1 {
            return Err(Error::invalid("rings need at least one dipole"));
        }
        if !(self.rho_n > 0.0) {
            return Err(Error::invalid(format!("rho_n must be positive, got {}", self.rho_n)));
        }
        if !(self.r_q > 0.0) {
            return Err(Error::invalid(format!("r_q must be positive, got {}", self.r_q)));
        }
        if !(self.theta_q > 0.0 && self.theta_q < PI / 2.0) {
            return Err(Error::invalid(format!(
                "theta_q must lie in (0, pi/2), got {}",
                self.theta_q
            )));
        }
        Ok(())
    }

    /// Cylindrical radius of the second ring.
    pub fn rho_q(&self) -> f64 {
        self.r_q * self.theta_q.sin()
    }

    /// Height of the second ring above the first.
    pub fn z_q(&self) -> f64 {
        self.r_q * self.theta_q.cos()
    }

    /// Fresnel propagator `f(rho, z)` from the first ring.
    pub fn f(&self, rho: f64, z: f64) -> Complex64 {
        let k = self.k;
        let phase = Complex64::from_polar(1.0, k * z * (1.0 + rho * rho / (2.0 * z * z)));
        Complex64::new(0.0, -k) * self.source_amplitude * phase / (z * z)
    }

    /// Far-field prefactor `g(r, theta)` with `exp(ikr)/r` divided out.
    pub fn g(&self, theta: f64) -> Complex64 {
        let k = self.k;
        let f_q = self.f(self.rho_q(), self.z_q());
        let phase = Complex64::from_polar(1.0, -k * self.r_q * theta.cos() * self.theta_q.cos());
        self.alpha2 * (k * k * self.n as f64) * f_q * phase
    }
}

fn i_pow(n: i32) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn check_intermediate_angle(theta: f64) -> Result<()> {
    if !(0.0..PI / 2.0).contains(&theta) {
        return Err(Error::invalid(format!(
            "intermediate field needs 0 <= theta < pi/2, got {theta}"
        )));
    }
    Ok(())
}

/// Intermediate field `(E_rho, E_phi, E_z)` on the second ring's plane in
/// direction `(theta, phi)`.
pub fn if_components(ring: &RingSpec, theta: f64, phi: f64) -> Result<[Complex64; 3]> {
    check_intermediate_angle(theta)?;
    let l = ring.charge;
    let z = ring.z_q();
    let x = ring.k * ring.rho_n * theta.tan();
    let f = ring.f(z * theta.tan(), z);
    let n = ring.n as f64;
    let (w_rho, w_z) = ring.orientation.weights();
    let wind = Complex64::from_polar(1.0, l as f64 * phi);
    let common = f * n * wind;
    Ok([
        -i_pow(l) * common * (w_rho * l as f64 * bessel_j_over_x(l, x)),
        i_pow(l - 1) * common * (w_rho * bessel_j_prime(l, x)),
        i_pow(l) * common * (w_z * bessel_j(l, x)),
    ])
}

/// Transverse intermediate field `(E_x, E_y)`: LHCP charge `L - 1` plus RHCP
/// charge `L + 1`.
pub fn if_transverse(ring: &RingSpec, theta: f64, phi: f64) -> Result<(Complex64, Complex64)> {
    check_intermediate_angle(theta)?;
    let l = ring.charge;
    let z = ring.z_q();
    let x = ring.k * ring.rho_n * theta.tan();
    let (w_rho, _) = ring.orientation.weights();
    let pre = ring.f(z * theta.tan(), z) * (ring.n as f64 * w_rho / 2.0);
    let lhcp = Complex64::from_polar(bessel_j(l - 1, x), (l - 1) as f64 * phi);
    let rhcp = Complex64::from_polar(bessel_j(l + 1, x), (l + 1) as f64 * phi);
    Ok(circular_pair(pre, lhcp, rhcp))
}

/// Far field `(E_x, E_y)` after the second ring, with `exp(ikr)/r` divided
/// out.
pub fn ff_closed_form(ring: &RingSpec, theta: f64, phi: f64) -> Result<(Complex64, Complex64)> {
    if !(0.0..=PI / 2.0).contains(&theta) {
        return Err(Error::invalid(format!("far field needs 0 <= theta <= pi/2, got {theta}")));
    }
    let l = ring.charge;
    let k = ring.k;
    let (w_rho, _) = ring.orientation.weights();
    let src = k * ring.rho_n * ring.theta_q.sin();
    let obs = k * ring.r_q * theta.sin() * ring.theta_q.sin();
    let pre = ring.g(theta) * (ring.q_ring as f64 * w_rho / 2.0);
    let lhcp = Complex64::from_polar(bessel_j(l - 1, src) * bessel_j(l - 1, obs), (l - 1) as f64 * phi);
    let rhcp = Complex64::from_polar(bessel_j(l + 1, src) * bessel_j(l + 1, obs), (l + 1) as f64 * phi);
    Ok(circular_pair(pre, lhcp, rhcp))
}

/// `pre * [lhcp (1, i) + rhcp (1, -i)]`.
fn circular_pair(pre: Complex64, lhcp: Complex64, rhcp: Complex64) -> (Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    (pre * (lhcp + rhcp), pre * i * (lhcp - rhcp))
}

/// Whether the far field of charge `L` is bright on the optical axis: one of
/// the two circular channels must carry charge zero.
pub fn onaxis_selection(charge: i32) -> bool {
    charge == 1 || charge == -1
}

/// Closed-form far field sampled on a hemisphere grid.
pub fn ff_map(ring: &RingSpec, grid: &HemisphereGrid) -> Result<FarFieldMap> {
    ring.validate()?;
    FarFieldMap::from_cartesian(grid, |t, p| ff_closed_form(ring, t, p).expect("theta on grid"))
}

/// Which closed-form field a profile refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Intermediate,
    Far,
}

/// Transverse intensity at `phi = 0` for numerical aperture `na`.
pub fn profile_intensity(ring: &RingSpec, which: Profile, na: f64) -> Result<f64> {
    let theta = na.asin();
    let (ex, ey) = match which {
        Profile::Intermediate => if_transverse(ring, theta, 0.0)?,
        Profile::Far => ff_closed_form(ring, theta, 0.0)?,
    };
    Ok(ex.norm_sqr() + ey.norm_sqr())
}

/// One sample of a charge-resolved cross section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub charge: i32,
    pub na: f64,
    pub intensity_if: f64,
    pub intensity_ff: f64,
}

/// Normalised (peak 1) intermediate and far-field cross sections versus NA
/// for each charge.
pub fn fig2_profiles(charges: &[i32], ring: &RingSpec, na_samples: &[f64]) -> Result<Vec<ProfileRow>> {
    ring.validate()?;
    if let Some(bad) = na_samples.iter().find(|na| !(0.0..1.0).contains(*na)) {
        return Err(Error::invalid(format!("NA samples must lie in [0, 1), got {bad}")));
    }
    let mut rows = Vec::with_capacity(charges.len() * na_samples.len());
    for &l in charges {
        let r = ring.with_charge(l);
        let inter = na_samples
            .iter()
            .map(|&na| profile_intensity(&r, Profile::Intermediate, na))
            .collect::<Result<Vec<_>>>()?;
        let far = na_samples
            .iter()
            .map(|&na| profile_intensity(&r, Profile::Far, na))
            .collect::<Result<Vec<_>>>()?;
        let norm = |v: &[f64]| {
            let m = v.iter().copied().fold(0.0, f64::max);
            if m > 0.0 {
                1.0 / m
            } else {
                0.0
            }
        };
        let (si, sf) = (norm(&inter), norm(&far));
        for (j, &na) in na_samples.iter().enumerate() {
            rows.push(ProfileRow {
                charge: l,
                na,
                intensity_if: inter[j] * si,
                intensity_ff: far[j] * sf,
            });
        }
    }
    Ok(rows)
}

/// CSV with columns `L,NA,intensity_IF,intensity_FF`.
pub fn write_profiles_csv(rows: &[ProfileRow], out: impl Write) -> std::io::Result<()> {
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.charge as f64, r.na, r.intensity_if, r.intensity_ff])
        .collect();
    write_table(out, &["L", "NA", "intensity_IF", "intensity_FF"], &table)
}

/// `count` NA samples evenly spaced on `[0, na_max]`.
pub fn na_samples(count: usize, na_max: f64) -> Vec<f64> {
    if count < 2 {
        return vec![0.0];
    }
    (0..count).map(|i| na_max * i as f64 / (count - 1) as f64).collect()
}

/// Fraction of the power inside `na_cut` relative to the power inside
/// `na_max`, for the azimuthally symmetric closed-form intensity.
pub fn encircled_fraction(ring: &RingSpec, which: Profile, na_cut: f64, na_max: f64) -> Result<f64> {
    if !(0.0..=na_max).contains(&na_cut) || !(na_max < 1.0) {
        return Err(Error::invalid(format!(
            "need 0 <= na_cut <= na_max < 1, got {na_cut}, {na_max}"
        )));
    }
    let steps = 4000;
    let theta_max = na_max.asin();
    let theta_cut = na_cut.asin();
    let h = theta_max / steps as f64;
    let weight = |t: f64| -> Result<f64> {
        let na = t.sin().min(na_max);
        Ok(profile_intensity(ring, which, na)? * t.sin())
    };
    let mut total = 0.0;
    let mut inside = 0.0;
    let mut prev = weight(0.0)?;
    for s in 1..=steps {
        let (a, b) = ((s - 1) as f64 * h, s as f64 * h);
        let cur = weight(b)?;
        let area = 0.5 * (prev + cur) * h;
        total += area;
        if b <= theta_cut {
            inside += area;
        } else if a < theta_cut {
            let mid = weight(theta_cut)?;
            inside += 0.5 * (prev + mid) * (theta_cut - a);
        }
        prev = cur;
    }
    if total == 0.0 {
        return Err(Error::UndefinedRatio("profile carries no power".into()));
    }
    Ok(inside / total)
}
