//! Planar affine maps, triangles and their dilatation.
//!
//! An orientation-preserving affine map `z ↦ M z + t` has constant complex
//! derivatives
//!
//! ```text
//! ∂f  = ((m11 + m22) + i (m21 − m12)) / 2
//! ∂̄f  = ((m11 − m22) + i (m21 + m12)) / 2
//! ```
//!
//! with Jacobian `|∂f|² − |∂̄f|² = det M`. The real dilatation is
//! `K = (|∂f| + |∂̄f|) / (|∂f| − |∂̄f|)`, which equals the ratio of the
//! singular values of `M`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};

/// Default geometric tolerance for validators.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dist(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Chebyshev (max-coordinate) distance.
    #[inline]
    pub fn dist_inf(&self, other: Point) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    #[inline]
    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Twice the signed area of the triangle `(a, b, c)`; positive when counterclockwise.
#[inline]
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Affine map `(x, y) ↦ (m11 x + m12 y + tx, m21 x + m22 y + ty)`.
///
/// Fields are public so that deliberately invalid maps can be built in
/// tests; [`AffineMap::new`] checks the orientation invariant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineMap {
    pub fn new(m11: f64, m12: f64, m21: f64, m22: f64, tx: f64, ty: f64) -> Result<Self> {
        let a = Self {
            m11,
            m12,
            m21,
            m22,
            tx,
            ty,
        };
        if ![m11, m12, m21, m22, tx, ty].iter().all(|v| v.is_finite()) {
            return Err(QcError::Geometry("non-finite affine map entry".into()));
        }
        let det = a.det();
        if det <= 0.0 {
            return Err(QcError::Orientation { det });
        }
        Ok(a)
    }

    pub const fn identity() -> Self {
        Self {
            m11: 1.0,
            m12: 0.0,
            m21: 0.0,
            m22: 1.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub const fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m11: 1.0,
            m12: 0.0,
            m21: 0.0,
            m22: 1.0,
            tx,
            ty,
        }
    }

    /// `z ↦ scale · z + shift`, the placement similarity used throughout.
    pub const fn scale_shift(scale: f64, shift: Point) -> Self {
        Self {
            m11: scale,
            m12: 0.0,
            m21: 0.0,
            m22: scale,
            tx: shift.x,
            ty: shift.y,
        }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.m11 * p.x + self.m12 * p.y + self.tx,
            self.m21 * p.x + self.m22 * p.y + self.ty,
        )
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            m11: self.m11 * other.m11 + self.m12 * other.m21,
            m12: self.m11 * other.m12 + self.m12 * other.m22,
            m21: self.m21 * other.m11 + self.m22 * other.m21,
            m22: self.m21 * other.m12 + self.m22 * other.m22,
            tx: self.m11 * other.tx + self.m12 * other.ty + self.tx,
            ty: self.m21 * other.tx + self.m22 * other.ty + self.ty,
        }
    }

    #[inline]
    pub fn d_z(&self) -> Complex64 {
        Complex64::new((self.m11 + self.m22) * 0.5, (self.m21 - self.m12) * 0.5)
    }

    #[inline]
    pub fn d_zbar(&self) -> Complex64 {
        Complex64::new((self.m11 - self.m22) * 0.5, (self.m21 + self.m12) * 0.5)
    }

    pub fn is_similarity(&self, tol: f64) -> bool {
        self.d_zbar().norm() <= tol * self.d_z().norm()
    }
}

impl Default for AffineMap {
    fn default() -> Self {
        Self::identity()
    }
}

/// Real dilatation of an orientation-preserving affine map.
///
/// Uses `K = (|∂f| + |∂̄f|)² / det`, which avoids the cancellation in
/// `|∂f| − |∂̄f|` for strongly anisotropic maps.
pub fn dilatation(a: &AffineMap) -> Result<f64> {
    let det = a.det();
    if !(det > 0.0) {
        return Err(QcError::Orientation { det });
    }
    let s = a.d_z().norm() + a.d_zbar().norm();
    Ok((s * s / det).max(1.0))
}

/// Complex dilatation (Beltrami coefficient) `∂̄f / ∂f`.
pub fn beltrami(a: &AffineMap) -> Result<Complex64> {
    let det = a.det();
    if !(det > 0.0) {
        return Err(QcError::Orientation { det });
    }
    Ok(a.d_zbar() / a.d_z())
}

pub fn invert_affine(a: &AffineMap) -> Result<AffineMap> {
    let det = a.det();
    if !(det > 0.0) {
        return Err(QcError::Orientation { det });
    }
    let m11 = a.m22 / det;
    let m12 = -a.m12 / det;
    let m21 = -a.m21 / det;
    let m22 = a.m11 / det;
    Ok(AffineMap {
        m11,
        m12,
        m21,
        m22,
        tx: -(m11 * a.tx + m12 * a.ty),
        ty: -(m21 * a.tx + m22 * a.ty),
    })
}

/// Positively oriented, nondegenerate triangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    v: [Point; 3],
}

impl Triangle {
    /// Builds a triangle, reordering the vertices if needed so that it is
    /// counterclockwise.
    pub fn new(v1: Point, v2: Point, v3: Point) -> Result<Self> {
        match Self::oriented(v1, v2, v3) {
            Ok(t) => Ok(t),
            Err(QcError::Orientation { .. }) => Self::oriented(v1, v3, v2),
            Err(e) => Err(e),
        }
    }

    /// Builds a triangle that must already be counterclockwise; vertex
    /// order is kept, which matters when the triangle encodes a vertex
    /// correspondence.
    pub fn oriented(v1: Point, v2: Point, v3: Point) -> Result<Self> {
        if !(v1.is_finite() && v2.is_finite() && v3.is_finite()) {
            return Err(QcError::Geometry("non-finite triangle vertex".into()));
        }
        let o = orient2d(v1, v2, v3);
        let scale = (v2 - v1)
            .dist_inf(Point::default())
            .max((v3 - v1).dist_inf(Point::default()));
        if o.abs() <= 1e-300 || o.abs() <= f64::EPSILON * scale * scale * 1e-3 {
            return Err(QcError::Geometry(format!("degenerate triangle {v1:?} {v2:?} {v3:?}")));
        }
        if o < 0.0 {
            return Err(QcError::Orientation { det: o });
        }
        Ok(Self { v: [v1, v2, v3] })
    }

    #[inline]
    pub fn vertices(&self) -> [Point; 3] {
        self.v
    }

    #[inline]
    pub fn area(&self) -> f64 {
        0.5 * orient2d(self.v[0], self.v[1], self.v[2])
    }

    pub fn centroid(&self) -> Point {
        Point::new(
            (self.v[0].x + self.v[1].x + self.v[2].x) / 3.0,
            (self.v[0].y + self.v[1].y + self.v[2].y) / 3.0,
        )
    }

    /// Barycentric coordinates of `p`.
    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let [a, b, c] = self.v;
        let total = orient2d(a, b, c);
        [
            orient2d(p, b, c) / total,
            orient2d(a, p, c) / total,
            orient2d(a, b, p) / total,
        ]
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.barycentric(p).iter().all(|&l| l >= -tol)
    }

    pub fn map(&self, a: &AffineMap) -> [Point; 3] {
        self.v.map(|p| a.apply(p))
    }
}

/// The affine map sending the vertices of `src` to those of `dst`, in order.
pub fn affine_three_point(src: &Triangle, dst: &Triangle) -> Result<AffineMap> {
    if src == dst {
        return Ok(AffineMap::identity());
    }
    let [p0, p1, p2] = src.v;
    let [q0, q1, q2] = dst.v;
    // M S = D with S, D the edge matrices from the first vertex.
    let (s11, s12, s21, s22) = (p1.x - p0.x, p2.x - p0.x, p1.y - p0.y, p2.y - p0.y);
    let (d11, d12, d21, d22) = (q1.x - q0.x, q2.x - q0.x, q1.y - q0.y, q2.y - q0.y);
    let sdet = s11 * s22 - s12 * s21;
    if !(sdet > 0.0) {
        return Err(QcError::Geometry("degenerate source triangle".into()));
    }
    let (i11, i12, i21, i22) = (s22 / sdet, -s12 / sdet, -s21 / sdet, s11 / sdet);
    let m11 = d11 * i11 + d12 * i21;
    let m12 = d11 * i12 + d12 * i22;
    let m21 = d21 * i11 + d22 * i21;
    let m22 = d21 * i12 + d22 * i22;
    let tx = q0.x - (m11 * p0.x + m12 * p0.y);
    let ty = q0.y - (m21 * p0.x + m22 * p0.y);
    AffineMap::new(m11, m12, m21, m22, tx, ty)
}

/// The affine map fixing 0 and 1 and sending `z` to `w`, both in the upper
/// half-plane.
pub fn affine_fixing_unit(z: Point, w: Point) -> Result<AffineMap> {
    check_upper(z)?;
    check_upper(w)?;
    let o = Point::new(0.0, 0.0);
    let one = Point::new(1.0, 0.0);
    affine_three_point(&Triangle::oriented(o, one, z)?, &Triangle::oriented(o, one, w)?)
}

fn check_upper(p: Point) -> Result<()> {
    if p.is_finite() && p.y > 0.0 {
        Ok(())
    } else {
        Err(QcError::Domain(format!(
            "point {p:?} is not in the open upper half-plane"
        )))
    }
}

/// Closed-form dilatation of the affine map fixing 0, 1 and sending `z` to `w`:
/// `(|z − w̄| + |z − w|) / (|z − w̄| − |z − w|)`.
pub fn dilatation_three_point(z: Point, w: Point) -> Result<f64> {
    check_upper(z)?;
    check_upper(w)?;
    let far = (z.x - w.x).hypot(z.y + w.y);
    let near = (z.x - w.x).hypot(z.y - w.y);
    // far − near = 4 Im z Im w / (far + near)
    let diff = 4.0 * z.y * w.y / (far + near);
    Ok(((far + near) / diff).max(1.0))
}
