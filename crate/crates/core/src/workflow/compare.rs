use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::analytic::{ff_closed_form, if_transverse, Orientation, RingSpec};
use crate::dipole::{superpose_field, DipoleSet};
use crate::error::{Error, Result};
use crate::CVec3;

/// Sampling used by [`model_compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Height of the plane on which intermediate fields are compared.
    pub z_obs: f64,
    pub theta_max: f64,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            z_obs: 1000.0,
            theta_max: 0.3,
            n_theta: 31,
            n_phi: 8,
        }
    }
}

/// RMS discrepancy of normalised intensities for one ring size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub n: usize,
    pub error_if: f64,
    pub error_ff: f64,
}

/// Point dipoles of an ideal ring of `n` at radius `radius`, height `z`, with
/// phase winding `charge` and the ring's orientation.
pub fn ring_dipoles(ring: &RingSpec, n: usize, radius: f64, z: f64, amplitude: Complex64) -> Result<DipoleSet> {
    let mut positions = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    for j in 0..n {
        let phi = 2.0 * PI * j as f64 / n as f64;
        let (s, c) = phi.sin_cos();
        let p = amplitude * Complex64::from_polar(1.0, ring.charge as f64 * phi);
        let zero = Complex64::new(0.0, 0.0);
        positions.push(Vector3::new(radius * c, radius * s, z));
        moments.push(match ring.orientation {
            Orientation::Rho => CVec3::new(p * c, p * s, zero),
            Orientation::Z => CVec3::new(zero, zero, p),
        });
    }
    DipoleSet::new(positions, moments, ring.k)
}

fn directions(opts: &CompareOptions) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(opts.n_theta * opts.n_phi);
    for i in 0..opts.n_theta {
        let t = opts.theta_max * i as f64 / (opts.n_theta - 1) as f64;
        for j in 0..opts.n_phi {
            out.push((t, 2.0 * PI * j as f64 / opts.n_phi as f64));
        }
    }
    out
}

/// RMS difference of two intensity lists, each scaled to unit peak.
fn normalised_rms(a: &[f64], b: &[f64]) -> f64 {
    let peak = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let (pa, pb) = (peak(a), peak(b));
    let sa = if pa > 0.0 { 1.0 / pa } else { 0.0 };
    let sb = if pb > 0.0 { 1.0 / pb } else { 0.0 };
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x * sa - y * sb).powi(2)).sum();
    (sum / a.len() as f64).sqrt()
}

/// Discrete transverse intensity of one ring on the plane `z_obs`.
pub fn discrete_if_intensity(ring: &RingSpec, n: usize, opts: &CompareOptions) -> Result<Vec<f64>> {
    let set = ring_dipoles(ring, n, ring.rho_n, 0.0, ring.source_amplitude)?;
    let points: Vec<Vector3<f64>> = directions(opts)
        .iter()
        .map(|&(t, p)| {
            let rho = opts.z_obs * t.tan();
            Vector3::new(rho * p.cos(), rho * p.sin(), opts.z_obs)
        })
        .collect();
    let field = superpose_field(&set, &points)?;
    Ok(field.values.iter().map(|e| e.x.norm_sqr() + e.y.norm_sqr()).collect())
}

/// Discrete far-field transverse intensity after the second ring.
pub fn discrete_ff_intensity(ring: &RingSpec, n: usize, opts: &CompareOptions) -> Result<Vec<f64>> {
    let first = ring_dipoles(ring, n, ring.rho_n, 0.0, ring.source_amplitude)?;
    let q = n;
    let second_pos: Vec<Vector3<f64>> = (0..q)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / q as f64;
            Vector3::new(ring.rho_q() * phi.cos(), ring.rho_q() * phi.sin(), ring.z_q())
        })
        .collect();
    let incident = superpose_field(&first, &second_pos)?;
    let moments = incident.values.iter().map(|e| e * ring.alpha2).collect();
    let second = DipoleSet::new(second_pos, moments, ring.k)?;
    let k = ring.k;
    Ok(directions(opts)
        .iter()
        .map(|&(t, p)| {
            let n_hat = Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
            let mut acc = CVec3::zeros();
            for (pos, m) in second.positions.iter().zip(&second.moments) {
                let n_dot_p = m.x * n_hat.x + m.y * n_hat.y + m.z * n_hat.z;
                let phase = Complex64::from_polar(k * k, -k * n_hat.dot(pos));
                acc += CVec3::new(
                    (m.x - n_dot_p * n_hat.x) * phase,
                    (m.y - n_dot_p * n_hat.y) * phase,
                    (m.z - n_dot_p * n_hat.z) * phase,
                );
            }
            acc.x.norm_sqr() + acc.y.norm_sqr()
        })
        .collect())
}

/// Closed-form counterparts of the discrete intensities.
fn closed_intensities(ring: &RingSpec, opts: &CompareOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let on_plane = RingSpec {
        r_q: opts.z_obs,
        theta_q: 1e-9,
        ..ring.clone()
    };
    let mut inter = Vec::new();
    let mut far = Vec::new();
    for (t, p) in directions(opts) {
        let (a, b) = if_transverse(&on_plane, t, p)?;
        inter.push(a.norm_sqr() + b.norm_sqr());
        let (c, d) = ff_closed_form(ring, t, p)?;
        far.push(c.norm_sqr() + d.norm_sqr());
    }
    Ok((inter, far))
}

/// Discrete-versus-closed-form error for each ring size in `ns`. The second
/// ring always has as many dipoles as the first.
pub fn model_compare(ring: &RingSpec, ns: &[usize], opts: &CompareOptions) -> Result<Vec<CompareRow>> {
    ring.validate()?;
    if ns.is_empty() || ns.contains(&0) || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("ring sizes must be positive and strictly ascending"));
    }
    if opts.n_theta < 2 || opts.n_phi < 1 || !(opts.theta_max > 0.0 && opts.theta_max < PI / 2.0) || !(opts.z_obs > 0.0)
    {
        return Err(Error::invalid("comparison sampling is degenerate"));
    }
    ns.iter()
        .map(|&n| {
            let r = RingSpec {
                n,
                q_ring: n,
                ..ring.clone()
            };
            let (inter, far) = closed_intensities(&r, opts)?;
            Ok(CompareRow {
                n,
                error_if: normalised_rms(&discrete_if_intensity(&r, n, opts)?, &inter),
                error_ff: normalised_rms(&discrete_ff_intensity(&r, n, opts)?, &far),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_dipoles_compare_worse() {
        let ring = RingSpec::new(6, 1.0, 1, 3.25, 1.82);
        let rows = model_compare(&ring, &[6, 60], &CompareOptions::default()).unwrap();
        assert!(rows[1].error_if < rows[0].error_if);
        assert!(rows[1].error_if < 0.05);
    }

    #[test]
    fn symmetric_ring_is_rotation_invariant() {
        let n = 12;
        let ring = RingSpec::new(n, 1.0, 0, 3.0, 2.0);
        let opts = CompareOptions {
            z_obs: 5.0,
            n_phi: n,
            ..CompareOptions::default()
        };
        let inten = discrete_if_intensity(&ring, n, &opts).unwrap();
        for row in inten.chunks(n) {
            for v in row {
                assert!((v - row[0]).abs() <= 1e-10 * row[0].max(1e-300));
            }
        }
    }

    #[test]
    fn rejects_unsorted_sizes() {
        let ring = RingSpec::new(6, 1.0, 1, 3.25, 1.82);
        assert!(model_compare(&ring, &[12, 6], &CompareOptions::default()).is_err());
        assert!(model_compare(&ring, &[], &CompareOptions::default()).is_err());
    }
}
