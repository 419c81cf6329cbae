//! Hexagonal grating layouts.
//!
//! Both grating layers are triangular lattices of circular holes. Each hole is
//! represented by one point scatterer at its centre. Lattice points are
//! enumerated trace by trace: trace `l` is the perimeter of the hexagon of
//! "radius" `l` lattice steps around the reference hole.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Rotation2, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Which of the two grating layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum LayerId {
    /// Near-field grating directly above the disk.
    First,
    /// Intermediate-field grating above the spacer.
    Second,
}

impl TryFrom<u8> for LayerId {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(LayerId::First),
            2 => Ok(LayerId::Second),
            other => Err(Error::invalid(format!("unknown layer id {other}, expected 1 or 2"))),
        }
    }
}

impl From<LayerId> for u8 {
    fn from(id: LayerId) -> u8 {
        match id {
            LayerId::First => 1,
            LayerId::Second => 2,
        }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Device dimensions. Every length is in units of the design wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    /// Disk radius.
    pub r_d: f64,
    /// Disk thickness.
    pub h: f64,
    /// Lattice constants of layers 1 and 2.
    pub a1: f64,
    pub a2: f64,
    /// Hole heights.
    pub d1: f64,
    pub d2: f64,
    /// Hole radii.
    pub r_h1: f64,
    pub r_h2: f64,
    /// Layer centre heights above the disk top.
    pub z1: f64,
    pub z2: f64,
    pub n_diamond: f64,
    pub n_ox: f64,
    pub n_sio2: f64,
    /// Free-space design wavelength. Defines the length unit, so it is 1 unless
    /// lengths are being reported in some physical unit.
    pub lambda0: f64,
    /// Dimensionless polarizabilities of the holes in each layer.
    pub alpha1: Complex64,
    pub alpha2: Complex64,
}

impl Default for DeviceGeometry {
    /// The optimised dual-grating design.
    fn default() -> Self {
        let d1 = 0.3561;
        DeviceGeometry {
            r_d: 1.4687,
            h: 0.9491,
            a1: 0.5234,
            a2: 0.3406,
            d1,
            d2: 0.3561,
            r_h1: 0.1875,
            r_h2: 0.1562,
            z1: d1 / 2.0,
            z2: 2.0,
            n_diamond: 2.4,
            n_ox: 1.8,
            n_sio2: 1.4,
            lambda0: 1.0,
            alpha1: Complex64::new(1.0, 0.0),
            alpha2: Complex64::new(1.0, 0.0),
        }
    }
}

impl DeviceGeometry {
    /// Checks positivity, hole overlap and layer ordering.
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("r_d", self.r_d),
            ("h", self.h),
            ("a1", self.a1),
            ("a2", self.a2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("r_h1", self.r_h1),
            ("r_h2", self.r_h2),
            ("lambda0", self.lambda0),
            ("n_diamond", self.n_diamond),
            ("n_ox", self.n_ox),
            ("n_sio2", self.n_sio2),
        ];
        for (name, value) in lengths {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if self.r_h1 >= self.a1 / 2.0 {
            return Err(Error::invalid(format!(
                "layer 1 holes overlap: r_h1 = {} >= a1/2 = {}",
                self.r_h1,
                self.a1 / 2.0
            )));
        }
        if self.r_h2 >= self.a2 / 2.0 {
            return Err(Error::invalid(format!(
                "layer 2 holes overlap: r_h2 = {} >= a2/2 = {}",
                self.r_h2,
                self.a2 / 2.0
            )));
        }
        if !(self.z1.is_finite() && self.z1 >= 0.0) {
            return Err(Error::invalid(format!("z1 must be >= 0, got {}", self.z1)));
        }
        if !(self.z2 > self.z1) {
            return Err(Error::invalid(format!(
                "layer 2 must sit above layer 1 (z1 = {}, z2 = {})",
                self.z1, self.z2
            )));
        }
        Ok(())
    }

    /// Free-space wavenumber in the internal unit system.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda0
    }

    pub fn lattice_constant(&self, layer: LayerId) -> f64 {
        match layer {
            LayerId::First => self.a1,
            LayerId::Second => self.a2,
        }
    }

    pub fn layer_height(&self, layer: LayerId) -> f64 {
        match layer {
            LayerId::First => self.z1,
            LayerId::Second => self.z2,
        }
    }

    pub fn polarizability(&self, layer: LayerId) -> Complex64 {
        match layer {
            LayerId::First => self.alpha1,
            LayerId::Second => self.alpha2,
        }
    }
}

/// In-plane displacement of one layer's reference hole from the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOffset {
    pub u: f64,
    pub v: f64,
    pub layer: LayerId,
}

impl AlignmentOffset {
    pub fn new(u: f64, v: f64, layer: LayerId) -> Self {
        AlignmentOffset { u, v, layer }
    }

    /// Configuration A: reference hole on the optical axis.
    pub fn full_alignment(layer: LayerId) -> Self {
        AlignmentOffset::new(0.0, 0.0, layer)
    }

    /// Configuration B: reference hole displaced by half a lattice constant.
    pub fn half_period(geom: &DeviceGeometry, layer: LayerId) -> Self {
        AlignmentOffset::new(geom.lattice_constant(layer) / 2.0, 0.0, layer)
    }

    /// Offset folded into the reduced-symmetry triangle of the translated
    /// layer's lattice.
    pub fn folded(&self, geom: &DeviceGeometry) -> Self {
        let (u, v) = fold_to_reduced_domain(self.u, self.v, geom.lattice_constant(self.layer));
        AlignmentOffset::new(u, v, self.layer)
    }

    fn shift_for(&self, layer: LayerId) -> Vector2<f64> {
        if self.layer == layer {
            Vector2::new(self.u, self.v)
        } else {
            Vector2::zeros()
        }
    }
}

/// Point scatterers of one grating layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererLayer {
    pub positions: Vec<Vector3<f64>>,
    /// Hexagon trace of each scatterer, counted from the reference hole.
    pub trace_index: Vec<usize>,
    pub alpha: Complex64,
    pub layer: LayerId,
}

impl ScattererLayer {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same layer with a different polarizability.
    pub fn with_alpha(mut self, alpha: Complex64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Perimeter points of the `l`-th hexagon around the origin, counter-clockwise
/// from `(l a, 0)`. Neighbouring points are exactly one lattice constant apart.
pub fn hex_trace(l: i64, a: f64) -> Result<Vec<Vector2<f64>>> {
    if l < 0 {
        return Err(Error::invalid(format!("trace index must be >= 0, got {l}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("lattice constant must be positive, got {a}")));
    }
    if l == 0 {
        return Ok(vec![Vector2::zeros()]);
    }
    let l = l as usize;
    let corners: Vec<Vector2<f64>> = (0..6)
        .map(|c| {
            let t = c as f64 * PI / 3.0;
            Vector2::new(t.cos(), t.sin()) * (l as f64 * a)
        })
        .collect();
    let mut points = Vec::with_capacity(6 * l);
    for c in 0..6 {
        let from = corners[c];
        let to = corners[(c + 1) % 6];
        for j in 0..l {
            points.push(from + (to - from) * (j as f64 / l as f64));
        }
    }
    Ok(points)
}

/// Lattice points of one layer within `max_radius` of the optical axis.
///
/// The offset applies only if it names this layer; the other layer stays
/// centred.
pub fn build_layer(
    geom: &DeviceGeometry,
    layer: LayerId,
    offset: &AlignmentOffset,
    max_radius: f64,
) -> Result<ScattererLayer> {
    if !(max_radius.is_finite() && max_radius > 0.0) {
        return Err(Error::invalid(format!("max_radius must be positive, got {max_radius}")));
    }
    let a = geom.lattice_constant(layer);
    let z = geom.layer_height(layer);
    let shift = offset.shift_for(layer);

    // Trace l stays at least l*a*sqrt(3)/2 from the reference hole.
    let inradius = a * SQRT3 / 2.0;
    let last = ((max_radius + shift.norm()) / inradius).ceil() as i64 + 1;
    let limit = max_radius * (1.0 + 1e-12);

    let mut positions = Vec::new();
    let mut trace_index = Vec::new();
    for l in 0..=last {
        for p in hex_trace(l, a)? {
            let q = p + shift;
            if q.norm() <= limit {
                positions.push(Vector3::new(q.x, q.y, z));
                trace_index.push(l as usize);
            }
        }
    }
    Ok(ScattererLayer {
        positions,
        trace_index,
        alpha: geom.polarizability(layer),
        layer,
    })
}

/// Closed radial band `[inner, outer]` around the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    inner: f64,
    outer: f64,
}

impl Annulus {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner >= 0.0 && inner < outer) || inner.is_nan() {
            return Err(Error::invalid(format!(
                "annulus needs 0 <= inner < outer, got [{inner}, {outer}]"
            )));
        }
        Ok(Annulus { inner, outer })
    }

    /// Everything, `[0, inf)`.
    pub fn everything() -> Self {
        Annulus {
            inner: 0.0,
            outer: f64::INFINITY,
        }
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn contains(&self, radius: f64) -> bool {
        radius >= self.inner && radius <= self.outer
    }
}

/// Scatterers whose distance from the axis lies inside the annulus.
pub fn select_interacting(layer: &ScattererLayer, annulus: &Annulus) -> ScattererLayer {
    let mut positions = Vec::new();
    let mut trace_index = Vec::new();
    for (p, &t) in layer.positions.iter().zip(&layer.trace_index) {
        if annulus.contains(p.x.hypot(p.y)) {
            positions.push(*p);
            trace_index.push(t);
        }
    }
    ScattererLayer {
        positions,
        trace_index,
        alpha: layer.alpha,
        layer: layer.layer,
    }
}

/// Folds an offset into the fundamental triangle of the hexagonal lattice's
/// full symmetry group: vertices `(0, 0)`, `(a/2, 0)` and `(a/2, a/(2 sqrt 3))`.
///
/// The triangle's edges lie on mirror lines, so each orbit meets the closed
/// triangle exactly once; no tie rule beyond a fixed candidate order is needed.
///
/// # Panics
/// If `a` is not positive.
pub fn fold_to_reduced_domain(u: f64, v: f64, a: f64) -> (f64, f64) {
    assert!(a > 0.0, "lattice constant must be positive");
    let p = Vector2::new(u, v);

    // Fractional coordinates on the basis (a, 0), (a/2, a sqrt(3)/2).
    let f2 = v / (a * SQRT3 / 2.0);
    let f1 = u / a - f2 / 2.0;
    let (i0, j0) = (f1.floor(), f2.floor());
    let mut best = Vector2::zeros();
    let mut best_dist = f64::INFINITY;
    for (di, dj) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
        let (i, j) = (i0 + di, j0 + dj);
        let site = Vector2::new(a * (i + j / 2.0), a * j * SQRT3 / 2.0);
        let dist = (p - site).norm_squared();
        if dist < best_dist {
            best_dist = dist;
            best = site;
        }
    }
    let d = p - best;
    let r = d.norm();
    if r == 0.0 {
        return (0.0, 0.0);
    }

    let sector = PI / 3.0;
    let mut t = d.y.atan2(d.x).rem_euclid(sector);
    if t > sector / 2.0 {
        t = sector - t;
    }
    let folded = Rotation2::new(t) * Vector2::new(r, 0.0);
    (folded.x, folded.y.max(0.0))
}

/// Corners of the reduced-symmetry triangle.
pub fn reduced_domain_vertices(a: f64) -> [Vector2<f64>; 3] {
    [
        Vector2::zeros(),
        Vector2::new(a / 2.0, 0.0),
        Vector2::new(a / 2.0, a / (2.0 * SQRT3)),
    ]
}

/// `n x n` samples of the reduced triangle, mapped from the unit square by
/// `O + s (B - O) + s t (C - B)`. Row-major in `s`; the `s = 0` row collapses
/// onto the origin.
pub fn reduced_domain_grid(a: f64, n: usize) -> Vec<(f64, f64)> {
    let [o, b, c] = reduced_domain_vertices(a);
    let step = |i: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let s = step(i);
        for j in 0..n {
            let t = step(j);
            let p = o + (b - o) * s + (c - b) * (s * t);
            out.push((p.x, p.y));
        }
    }
    out
}
