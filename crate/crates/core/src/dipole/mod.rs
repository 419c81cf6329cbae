//! Discrete dipole superposition.
//!
//! Every hole is a point dipole `p = alpha E_local`. Its field is the full
//! three-term expression
//!
//! ```text
//! E = exp(ikR) * [ k^2/R (R^ x p) x R^ + (1/R^3 - ik/R^2) (3 R^ (R^.p) - p) ]
//! ```
//!
//! with `1/(4 pi eps0)` folded into the unit of `p`. Layer 1 is driven by the
//! cavity near field, layer 2 by the radiation of layer 1 (single scattering,
//! no back-action), and the hemisphere sees both.

mod farfield;

pub use farfield::{FarFieldMap, FarFieldMode, HemisphereGrid};

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ScattererLayer;
use crate::nearfield::NearFieldSpec;
use crate::CVec3;

/// Observation points closer than this to a dipole are rejected.
pub const SINGULARITY_GUARD: f64 = 1e-6;

/// Point dipoles radiating at wavenumber `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleSet {
    pub positions: Vec<Vector3<f64>>,
    pub moments: Vec<CVec3>,
    pub k: f64,
}

/// Sampled field: one complex vector per observation point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub points: Vec<Vector3<f64>>,
    pub values: Vec<CVec3>,
}

/// The three radial orders of a single dipole's field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleFieldTerms {
    /// `(kR)^-1` part.
    pub radiation: CVec3,
    /// `(kR)^-2` part.
    pub induction: CVec3,
    /// `(kR)^-3` part.
    pub quasi_static: CVec3,
}

impl DipoleFieldTerms {
    pub fn total(&self) -> CVec3 {
        self.radiation + self.induction + self.quasi_static
    }
}

/// Field of one dipole split by order.
pub fn dipole_field_terms(
    p: &CVec3,
    src: &Vector3<f64>,
    obs: &Vector3<f64>,
    k: f64,
) -> Result<DipoleFieldTerms> {
    let r = obs - src;
    let dist = r.norm();
    if !(dist >= SINGULARITY_GUARD) {
        return Err(Error::Singularity {
            observation: 0,
            dipole: 0,
            distance: dist,
            guard: SINGULARITY_GUARD,
        });
    }
    let n = r / dist;
    let n_dot_p = p.x * n.x + p.y * n.y + p.z * n.z;
    let along = |s: Complex64| CVec3::new(s * n.x, s * n.y, s * n.z);
    let phase = Complex64::from_polar(1.0, k * dist);

    let transverse = p - along(n_dot_p);
    let longitudinal = along(n_dot_p * 3.0) - p;
    Ok(DipoleFieldTerms {
        radiation: transverse * (phase * (k * k / dist)),
        induction: longitudinal * (phase * Complex64::new(0.0, -k / (dist * dist))),
        quasi_static: longitudinal * (phase / (dist * dist * dist)),
    })
}

/// Complete field of one dipole at `obs`.
pub fn dipole_field_at(p: &CVec3, src: &Vector3<f64>, obs: &Vector3<f64>, k: f64) -> Result<CVec3> {
    let r = obs - src;
    let dist = r.norm();
    if !(dist >= SINGULARITY_GUARD) {
        return Err(Error::Singularity {
            observation: 0,
            dipole: 0,
            distance: dist,
            guard: SINGULARITY_GUARD,
        });
    }
    Ok(field_kernel(p, &r, dist, k))
}

#[inline]
fn field_kernel(p: &CVec3, r: &Vector3<f64>, dist: f64, k: f64) -> CVec3 {
    let inv = 1.0 / dist;
    let (nx, ny, nz) = (r.x * inv, r.y * inv, r.z * inv);
    let n_dot_p = p.x * nx + p.y * ny + p.z * nz;
    let (s, c) = (k * dist).sin_cos();
    let phase = Complex64::new(c, s);
    let far = phase * (k * k * inv);
    let near = phase * Complex64::new(inv * inv * inv, -k * inv * inv);
    // far * (p - n (n.p)) + near * (3 n (n.p) - p)
    let a = far - near;
    let b = near * 3.0 - far;
    let bn = b * n_dot_p;
    CVec3::new(a * p.x + bn * nx, a * p.y + bn * ny, a * p.z + bn * nz)
}

impl DipoleSet {
    pub fn new(positions: Vec<Vector3<f64>>, moments: Vec<CVec3>, k: f64) -> Result<Self> {
        if positions.len() != moments.len() {
            return Err(Error::invalid(format!(
                "{} positions but {} moments",
                positions.len(),
                moments.len()
            )));
        }
        Ok(DipoleSet {
            positions,
            moments,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// All dipoles of both sets. Wavenumbers must agree.
    pub fn union(&self, other: &DipoleSet) -> Result<DipoleSet> {
        if self.k != other.k {
            return Err(Error::invalid("cannot merge dipole sets with different wavenumbers"));
        }
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let mut moments = self.moments.clone();
        moments.extend_from_slice(&other.moments);
        DipoleSet::new(positions, moments, self.k)
    }

    /// Every moment times `factor`.
    pub fn scaled(&self, factor: Complex64) -> DipoleSet {
        DipoleSet {
            positions: self.positions.clone(),
            moments: self.moments.iter().map(|m| m * factor).collect(),
            k: self.k,
        }
    }

    /// Field at one point, summed in dipole order.
    pub fn field_at_point(&self, obs: &Vector3<f64>) -> Result<CVec3> {
        let mut total = CVec3::zeros();
        for (j, (src, p)) in self.positions.iter().zip(&self.moments).enumerate() {
            let r = obs - src;
            let dist = r.norm();
            if !(dist >= SINGULARITY_GUARD) {
                return Err(Error::Singularity {
                    observation: 0,
                    dipole: j,
                    distance: dist,
                    guard: SINGULARITY_GUARD,
                });
            }
            total += field_kernel(p, &r, dist, self.k);
        }
        Ok(total)
    }
}

/// Superposed field of all dipoles at each observation point.
///
/// Points are evaluated in parallel; each point's sum runs over the dipoles in
/// index order, so results do not depend on the thread count.
pub fn superpose_field(dipoles: &DipoleSet, obs: &[Vector3<f64>]) -> Result<FieldGrid> {
    let values: Vec<Result<CVec3>> = obs
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            dipoles.field_at_point(o).map_err(|e| match e {
                Error::Singularity {
                    dipole,
                    distance,
                    guard,
                    ..
                } => Error::Singularity {
                    observation: i,
                    dipole,
                    distance,
                    guard,
                },
                other => other,
            })
        })
        .collect();
    Ok(FieldGrid {
        points: obs.to_vec(),
        values: values.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Anything that can supply the local field at scatterer positions.
pub trait IncidentField {
    fn field_at(&self, point: &Vector3<f64>) -> Result<CVec3>;

    fn fields_at(&self, points: &[Vector3<f64>]) -> Result<Vec<CVec3>> {
        points.iter().map(|p| self.field_at(p)).collect()
    }
}

impl IncidentField for NearFieldSpec {
    fn field_at(&self, point: &Vector3<f64>) -> Result<CVec3> {
        self.sample(point)
    }
}

impl IncidentField for DipoleSet {
    fn field_at(&self, point: &Vector3<f64>) -> Result<CVec3> {
        self.field_at_point(point)
    }

    fn fields_at(&self, points: &[Vector3<f64>]) -> Result<Vec<CVec3>> {
        Ok(superpose_field(self, points)?.values)
    }
}

impl<F> IncidentField for F
where
    F: Fn(&Vector3<f64>) -> CVec3,
{
    fn field_at(&self, point: &Vector3<f64>) -> Result<CVec3> {
        Ok(self(point))
    }
}

/// Moments `p_n = alpha E_incident(r_n)` for every scatterer of a layer.
pub fn induce_moments(
    layer: &ScattererLayer,
    incident: &(impl IncidentField + ?Sized),
    k: f64,
) -> Result<DipoleSet> {
    let fields = incident.fields_at(&layer.positions)?;
    let moments = fields.into_iter().map(|e| e * layer.alpha).collect();
    DipoleSet::new(layer.positions.clone(), moments, k)
}

/// Knobs for [`cascade_two_layers`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOptions {
    /// Add the layer-1 radiation that passes layer 2 unscattered.
    pub include_direct: bool,
    pub far_field: FarFieldMode,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions {
            include_direct: true,
            far_field: FarFieldMode::default(),
        }
    }
}

/// Intermediate products of a cascade run.
#[derive(Debug, Clone)]
pub struct Cascade {
    pub layer1: DipoleSet,
    pub layer2: DipoleSet,
    pub map: FarFieldMap,
}

/// Near field -> layer 1 -> layer 2 -> hemisphere.
pub fn cascade_two_layers(
    k: f64,
    nearfield: &NearFieldSpec,
    layer1: &ScattererLayer,
    layer2: &ScattererLayer,
    grid: &HemisphereGrid,
    options: &CascadeOptions,
) -> Result<Cascade> {
    if let (Some(z1), Some(z2)) = (
        layer1.positions.first().map(|p| p.z),
        layer2.positions.first().map(|p| p.z),
    ) {
        if !(z1 < z2) {
            return Err(Error::invalid(format!(
                "layer 1 (z = {z1}) must lie below layer 2 (z = {z2})"
            )));
        }
    }
    let first = induce_moments(layer1, nearfield, k)?;
    let second = induce_moments(layer2, &first, k)?;
    let sources = if options.include_direct {
        first.union(&second)?
    } else {
        second.clone()
    };
    let map = FarFieldMap::radiate(&sources, grid, options.far_field)?;
    Ok(Cascade {
        layer1: first,
        layer2: second,
        map,
    })
}
