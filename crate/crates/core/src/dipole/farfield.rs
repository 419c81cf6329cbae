//! Upper-hemisphere far-field maps.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{superpose_field, DipoleSet};
use crate::error::{Error, Result};
use crate::io::sig12;

/// Polar and azimuthal sampling of the upper hemisphere.
///
/// `theta` runs from 0 to pi/2 inclusive, uniform except for extra nodes placed
/// exactly on requested aperture circles. `phi` is uniform and periodic on
/// `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HemisphereGrid {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl HemisphereGrid {
    /// `n_theta` uniform polar nodes plus one node at `asin(NA)` for each
    /// aperture in `apertures` not already on the grid.
    pub fn new(n_theta: usize, n_phi: usize, apertures: &[f64]) -> Result<Self> {
        if n_theta < 2 || n_phi < 1 {
            return Err(Error::invalid(format!(
                "hemisphere grid needs >= 2 polar and >= 1 azimuthal nodes, got {n_theta} x {n_phi}"
            )));
        }
        let step = PI / 2.0 / (n_theta - 1) as f64;
        let mut theta: Vec<f64> = (0..n_theta).map(|i| i as f64 * step).collect();
        theta[n_theta - 1] = PI / 2.0;
        for &na in apertures {
            if !(0.0..=1.0).contains(&na) {
                return Err(Error::invalid(format!("numerical aperture {na} outside [0, 1]")));
            }
            let t = na.asin();
            if theta.iter().all(|x| (x - t).abs() > 1e-9) {
                theta.push(t);
            }
        }
        theta.sort_by(f64::total_cmp);
        let phi = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        Ok(HemisphereGrid { theta, phi })
    }

    /// 181 x 256 with a node on the NA = 0.7 circle.
    pub fn standard() -> Self {
        HemisphereGrid::new(181, 256, &[0.7]).expect("static grid is valid")
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(theta, phi)` of every node, polar-major.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.theta
            .iter()
            .flat_map(move |&t| self.phi.iter().map(move |&p| (t, p)))
    }

    /// Every other polar and azimuthal node, keeping both polar end points.
    pub fn halved(&self) -> Self {
        let mut theta: Vec<f64> = self.theta.iter().copied().step_by(2).collect();
        if theta.last() != self.theta.last() {
            theta.push(*self.theta.last().expect("nonempty grid"));
        }
        let phi = self.phi.iter().copied().step_by(2).collect();
        HemisphereGrid { theta, phi }
    }
}

/// Unit vectors `(r^, theta^, phi^)` for a direction.
pub fn spherical_basis(theta: f64, phi: f64) -> [Vector3<f64>; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [
        Vector3::new(st * cp, st * sp, ct),
        Vector3::new(ct * cp, ct * sp, -st),
        Vector3::new(-sp, cp, 0.0),
    ]
}

/// How the hemisphere field is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarFieldMode {
    /// Full dipole field on a sphere of this radius, with `exp(ikR)/R`
    /// divided out.
    Finite { radius: f64 },
    /// Direction-only radiation limit `k^2 (r^ x p) x r^ exp(-ik r^.r_n)`.
    Asymptotic,
}

impl Default for FarFieldMode {
    fn default() -> Self {
        FarFieldMode::Finite { radius: 1e4 }
    }
}

/// Transverse far field on a hemisphere grid, normalised to unit peak
/// intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldMap {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Polar-major, `theta.len() * phi.len()` entries each.
    pub e_theta: Vec<Complex64>,
    pub e_phi: Vec<Complex64>,
    pub intensity: Vec<f64>,
    /// Peak intensity divided out by the normalisation, 0 for a dark map.
    pub peak: f64,
}

impl FarFieldMap {
    /// Builds a normalised map from raw components.
    pub fn from_components(
        grid: &HemisphereGrid,
        mut e_theta: Vec<Complex64>,
        mut e_phi: Vec<Complex64>,
    ) -> Result<Self> {
        if e_theta.len() != grid.len() || e_phi.len() != grid.len() {
            return Err(Error::invalid(format!(
                "component lengths {} / {} do not match grid size {}",
                e_theta.len(),
                e_phi.len(),
                grid.len()
            )));
        }
        let raw: Vec<f64> = e_theta
            .iter()
            .zip(&e_phi)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect();
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite far-field sample"));
        }
        let peak = raw.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            let s = 1.0 / peak.sqrt();
            for v in e_theta.iter_mut().chain(e_phi.iter_mut()) {
                *v *= s;
            }
        }
        let intensity = e_theta
            .iter()
            .zip(&e_phi)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect();
        Ok(FarFieldMap {
            theta: grid.theta.clone(),
            phi: grid.phi.clone(),
            e_theta,
            e_phi,
            intensity,
            peak,
        })
    }

    /// Map of a field given by its Cartesian transverse components
    /// `(E_x, E_y)` per direction.
    pub fn from_cartesian(
        grid: &HemisphereGrid,
        field: impl Fn(f64, f64) -> (Complex64, Complex64),
    ) -> Result<Self> {
        let mut e_theta = Vec::with_capacity(grid.len());
        let mut e_phi = Vec::with_capacity(grid.len());
        for (t, p) in grid.nodes() {
            let (ex, ey) = field(t, p);
            let [_, th, ph] = spherical_basis(t, p);
            e_theta.push(ex * th.x + ey * th.y);
            e_phi.push(ex * ph.x + ey * ph.y);
        }
        FarFieldMap::from_components(grid, e_theta, e_phi)
    }

    /// Radiation of a dipole set over the hemisphere.
    pub fn radiate(sources: &DipoleSet, grid: &HemisphereGrid, mode: FarFieldMode) -> Result<Self> {
        let k = sources.k;
        let dirs: Vec<[Vector3<f64>; 3]> = grid.nodes().map(|(t, p)| spherical_basis(t, p)).collect();
        let fields: Vec<[Complex64; 3]> = match mode {
            FarFieldMode::Finite { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::invalid(format!("far-field radius must be positive, got {radius}")));
                }
                let obs: Vec<Vector3<f64>> = dirs.iter().map(|b| b[0] * radius).collect();
                let grid_field = superpose_field(sources, &obs)?;
                let undo = Complex64::from_polar(radius, -k * radius);
                grid_field
                    .values
                    .iter()
                    .map(|e| [e.x * undo, e.y * undo, e.z * undo])
                    .collect()
            }
            FarFieldMode::Asymptotic => dirs
                .par_iter()
                .map(|b| {
                    let n = b[0];
                    let mut acc = [Complex64::new(0.0, 0.0); 3];
                    for (pos, p) in sources.positions.iter().zip(&sources.moments) {
                        let phase = Complex64::from_polar(k * k, -k * n.dot(pos));
                        let n_dot_p = p.x * n.x + p.y * n.y + p.z * n.z;
                        acc[0] += (p.x - n_dot_p * n.x) * phase;
                        acc[1] += (p.y - n_dot_p * n.y) * phase;
                        acc[2] += (p.z - n_dot_p * n.z) * phase;
                    }
                    acc
                })
                .collect(),
        };
        let (e_theta, e_phi) = fields
            .iter()
            .zip(&dirs)
            .map(|(e, b)| {
                let th = b[1];
                let ph = b[2];
                (
                    e[0] * th.x + e[1] * th.y + e[2] * th.z,
                    e[0] * ph.x + e[1] * ph.y + e[2] * ph.z,
                )
            })
            .unzip();
        FarFieldMap::from_components(grid, e_theta, e_phi)
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn index(&self, i_theta: usize, i_phi: usize) -> usize {
        i_theta * self.phi.len() + i_phi
    }

    pub fn grid(&self) -> HemisphereGrid {
        HemisphereGrid {
            theta: self.theta.clone(),
            phi: self.phi.clone(),
        }
    }

    /// Intensity averaged over the azimuth at polar node `i_theta`.
    pub fn ring_mean(&self, i_theta: usize) -> f64 {
        let n = self.n_phi();
        self.intensity[i_theta * n..(i_theta + 1) * n].iter().sum::<f64>() / n as f64
    }

    /// Restriction to a coarser grid whose nodes are a subset of this map's.
    pub fn resample_onto(&self, coarse: &HemisphereGrid) -> Result<FarFieldMap> {
        let find = |axis: &[f64], x: f64| {
            axis.iter()
                .position(|v| (v - x).abs() < 1e-12)
                .ok_or_else(|| Error::invalid(format!("node {x} not on the source grid")))
        };
        let mut e_theta = Vec::with_capacity(coarse.len());
        let mut e_phi = Vec::with_capacity(coarse.len());
        for &t in &coarse.theta {
            let i = find(&self.theta, t)?;
            for &p in &coarse.phi {
                let j = find(&self.phi, p)?;
                e_theta.push(self.e_theta[self.index(i, j)]);
                e_phi.push(self.e_phi[self.index(i, j)]);
            }
        }
        FarFieldMap::from_components(coarse, e_theta, e_phi)
    }

    /// CSV with columns `theta,phi,e_theta_re,e_theta_im,e_phi_re,e_phi_im,intensity`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "theta,phi,e_theta_re,e_theta_im,e_phi_re,e_phi_im,intensity")?;
        for (i, &t) in self.theta.iter().enumerate() {
            for (j, &p) in self.phi.iter().enumerate() {
                let idx = self.index(i, j);
                let (a, b) = (self.e_theta[idx], self.e_phi[idx]);
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    sig12(t),
                    sig12(p),
                    sig12(a.re),
                    sig12(a.im),
                    sig12(b.re),
                    sig12(b.im),
                    sig12(self.intensity[idx])
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_axis_and_aperture_circle() {
        let g = HemisphereGrid::standard();
        assert_eq!(g.theta[0], 0.0);
        assert_eq!(*g.theta.last().unwrap(), PI / 2.0);
        assert!(g.theta.iter().any(|&t| (t - 0.7f64.asin()).abs() < 1e-15));
        assert_eq!(g.theta.len(), 182);
        assert_eq!(g.phi.len(), 256);
        assert!(g.theta.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(HemisphereGrid::new(1, 4, &[]).is_err());
        assert!(HemisphereGrid::new(4, 0, &[]).is_err());
        assert!(HemisphereGrid::new(4, 4, &[1.2]).is_err());
    }

    #[test]
    fn halved_grid_is_a_subset() {
        let g = HemisphereGrid::new(10, 8, &[0.7]).unwrap();
        let h = g.halved();
        assert_eq!(h.phi.len(), 4);
        assert_eq!(h.theta.last(), g.theta.last());
        assert!(h.theta.iter().all(|t| g.theta.contains(t)));
    }

    #[test]
    fn intensity_is_sum_of_components_and_peak_is_one() {
        let g = HemisphereGrid::new(7, 6, &[]).unwrap();
        let e_t: Vec<_> = (0..g.len()).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let e_p: Vec<_> = (0..g.len()).map(|i| Complex64::new(0.5, -(i as f64))).collect();
        let map = FarFieldMap::from_components(&g, e_t, e_p).unwrap();
        let max = map.intensity.iter().copied().fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-15);
        for i in 0..g.len() {
            let want = map.e_theta[i].norm_sqr() + map.e_phi[i].norm_sqr();
            assert_eq!(map.intensity[i], want);
        }
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let g = HemisphereGrid::new(3, 4, &[]).unwrap();
        let map = FarFieldMap::from_cartesian(&g, |t, _| {
            (Complex64::new(t.cos(), 0.0), Complex64::new(0.0, 0.0))
        })
        .unwrap();
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 12);
        assert!(text.starts_with("theta,phi,e_theta_re"));
    }
}
