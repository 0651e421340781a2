//! Piecewise-affine extensions across square annuli and across the
//! two-hole "twist" regions, and a validator for such maps.

use serde::Serialize;

use crate::error::{QcError, Result};
use crate::export::{compensated_sum, Real};
use crate::geometry::{affine_three_point, dilatation, invert_affine, orient2d, AffineMap, Point, Triangle};

/// Axis-aligned square, used to describe boundary components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxRegion {
    pub center: Point,
    pub half_width: f64,
    pub half_height: f64,
}

impl BoxRegion {
    pub const fn square(center: Point, side: f64) -> Self {
        Self {
            center,
            half_width: 0.5 * side,
            half_height: 0.5 * side,
        }
    }

    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        let dx = (p.x - self.center.x).abs();
        let dy = (p.y - self.center.y).abs();
        let inside = dx <= self.half_width + tol && dy <= self.half_height + tol;
        inside && ((dx - self.half_width).abs() <= tol || (dy - self.half_height).abs() <= tol)
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_height
    }
}

/// A hole of the source region together with the target hole it is sent
/// onto by the unique translation-and-scaling between them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoleMap {
    pub source: BoxRegion,
    pub target: BoxRegion,
}

impl HoleMap {
    pub fn apply(&self, p: Point) -> Point {
        let s = self.target.half_width / self.source.half_width;
        self.target.center + (p - self.source.center).scale(s)
    }

    pub fn swapped(&self) -> Self {
        Self {
            source: self.target,
            target: self.source,
        }
    }
}

/// Declared boundary behavior: identity on `outer`, the hole similarities
/// on the inner components.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryData {
    pub outer: BoxRegion,
    pub holes: Vec<HoleMap>,
}

impl BoundaryData {
    pub fn source_area(&self) -> f64 {
        self.outer.area() - self.holes.iter().map(|h| h.source.area()).sum::<f64>()
    }

    pub fn target_area(&self) -> f64 {
        self.outer.area() - self.holes.iter().map(|h| h.target.area()).sum::<f64>()
    }

    pub fn swapped(&self) -> Self {
        Self {
            outer: self.outer,
            holes: self.holes.iter().map(HoleMap::swapped).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    /// `A_a → A_b`
    Annulus {
        a: f64,
        b: f64,
    },
    /// Two side-by-side holes to two stacked holes.
    Twist {
        a: f64,
    },
    /// Two stacked holes back to two side-by-side holes.
    TwistInverse {
        a: f64,
    },
    Composite,
}

impl DomainKind {
    fn inverse(self) -> Self {
        match self {
            DomainKind::Annulus { a, b } => DomainKind::Annulus { a: b, b: a },
            DomainKind::Twist { a } => DomainKind::TwistInverse { a },
            DomainKind::TwistInverse { a } => DomainKind::Twist { a },
            DomainKind::Composite => DomainKind::Composite,
        }
    }
}

impl Serialize for DomainKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Tagged {
            #[serde(rename = "type")]
            tag: &'static str,
            #[serde(skip_serializing_if = "Option::is_none")]
            a: Option<Real>,
            #[serde(skip_serializing_if = "Option::is_none")]
            b: Option<Real>,
        }
        let t = match *self {
            DomainKind::Annulus { a, b } => Tagged {
                tag: "annulus",
                a: Some(Real(a)),
                b: Some(Real(b)),
            },
            DomainKind::Twist { a } => Tagged {
                tag: "twist",
                a: Some(Real(a)),
                b: None,
            },
            DomainKind::TwistInverse { a } => Tagged {
                tag: "twist_inverse",
                a: Some(Real(a)),
                b: None,
            },
            DomainKind::Composite => Tagged {
                tag: "composite",
                a: None,
                b: None,
            },
        };
        t.serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub cell: Triangle,
    pub map: AffineMap,
    /// Dilatation of `map`, computed once and shared with the inverse
    /// piece so both directions report bit-identical values.
    pub dilatation: f64,
}

/// A triangulated region with one affine map per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffineMap {
    pub pieces: Vec<Piece>,
    pub domain_kind: DomainKind,
    pub boundary: BoundaryData,
}

/// A source triangle and its prescribed image, vertex by vertex.
pub type VertexPair = ([Point; 3], [Point; 3]);

impl PiecewiseAffineMap {
    /// Builds the map from vertex correspondences. Both triangles of every
    /// pair must be counterclockwise.
    pub fn from_pairs(domain_kind: DomainKind, boundary: BoundaryData, pairs: &[VertexPair]) -> Result<Self> {
        let pieces = pairs
            .iter()
            .map(|(s, d)| {
                let cell = Triangle::oriented(s[0], s[1], s[2])?;
                let image = Triangle::oriented(d[0], d[1], d[2])?;
                let map = affine_three_point(&cell, &image)?;
                Ok(Piece {
                    cell,
                    map,
                    dilatation: dilatation(&map)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pieces,
            domain_kind,
            boundary,
        })
    }

    /// Cell-wise affine inverse, defined on the image region.
    pub fn inverse(&self) -> Result<Self> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let [a, b, c] = p.cell.map(&p.map);
                Ok(Piece {
                    cell: Triangle::oriented(a, b, c)?,
                    map: invert_affine(&p.map)?,
                    dilatation: p.dilatation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pieces,
            domain_kind: self.domain_kind.inverse(),
            boundary: self.boundary.swapped(),
        })
    }

    pub fn max_dilatation(&self) -> Result<f64> {
        Ok(self.pieces.iter().fold(1.0f64, |m, p| m.max(p.dilatation)))
    }

    /// Index of a cell containing `p`, choosing the one where `p` is deepest
    /// inside when it lies on shared edges.
    pub fn locate(&self, p: Point, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, piece) in self.pieces.iter().enumerate() {
            let depth = piece.cell.barycentric(p).into_iter().fold(f64::INFINITY, f64::min);
            if depth >= -tol && best.is_none_or(|(_, d)| depth > d) {
                best = Some((i, depth));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn apply(&self, p: Point, tol: f64) -> Option<Point> {
        self.locate(p, tol).map(|i| self.pieces[i].map.apply(p))
    }

    pub fn source_area(&self) -> f64 {
        compensated_sum(self.pieces.iter().map(|p| p.cell.area()))
    }

    pub fn image_area(&self) -> f64 {
        compensated_sum(self.pieces.iter().map(|p| {
            let [a, b, c] = p.cell.map(&p.map);
            0.5 * orient2d(a, b, c)
        }))
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct PieceOut {
            cell: [[Real; 2]; 3],
            map: [Real; 6],
        }
        #[derive(Serialize)]
        struct Out {
            domain_kind: DomainKind,
            pieces: Vec<PieceOut>,
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let m = &p.map;
                PieceOut {
                    cell: p.cell.vertices().map(|v| [Real(v.x), Real(v.y)]),
                    map: [m.m11, m.m12, m.m21, m.m22, m.tx, m.ty].map(Real),
                }
            })
            .collect();
        crate::export::to_json(&Out {
            domain_kind: self.domain_kind,
            pieces,
        })
    }
}

fn unit_outer() -> BoxRegion {
    BoxRegion::square(Point::new(0.0, 0.0), 1.0)
}

/// Vertex correspondences of the square-annulus map `A_a → A_b` for any
/// `a, b ∈ (0, 1/2)`.
///
/// Each of the four trapezoids between the outer corner `O_i` and inner
/// corner `I_i` is cut along one diagonal. The pairs for `a > b` are the
/// swapped pairs of `(b, a)`, so the two directions are exact inverses.
pub fn annulus_pairs(a: f64, b: f64) -> Vec<VertexPair> {
    if a > b {
        return annulus_pairs(b, a).into_iter().map(|(s, d)| (d, s)).collect();
    }
    let corners = |h: f64| {
        [
            Point::new(-h, -h),
            Point::new(h, -h),
            Point::new(h, h),
            Point::new(-h, h),
        ]
    };
    let o = corners(0.5);
    let ia = corners(0.5 - a);
    let ib = corners(0.5 - b);
    let mut out = Vec::with_capacity(8);
    for i in 0..4 {
        let j = (i + 1) % 4;
        out.push(([o[i], o[j], ia[j]], [o[i], o[j], ib[j]]));
        out.push(([o[i], ia[j], ia[i]], [o[i], ib[j], ib[i]]));
    }
    out
}

fn check_annulus_param(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 0.5 {
        Ok(())
    } else {
        Err(QcError::Domain(format!(
            "annulus parameter {name} = {v} is outside (0, 1/2)"
        )))
    }
}

/// Annulus boundary data: identity outside, the central similarity with
/// ratio `(1 − 2b)/(1 − 2a)` on the inner square.
pub fn annulus_boundary(a: f64, b: f64) -> BoundaryData {
    let o = Point::new(0.0, 0.0);
    BoundaryData {
        outer: unit_outer(),
        holes: vec![HoleMap {
            source: BoxRegion::square(o, 1.0 - 2.0 * a),
            target: BoxRegion::square(o, 1.0 - 2.0 * b),
        }],
    }
}

/// Piecewise-affine map from the square annulus `A_a` (between the unit
/// square and the concentric square of side `1 − 2a`) onto `A_b`.
///
/// Its dilatation is comparable to `b(1 − 2a) / (a(1 − 2b))`.
pub fn annulus_extension(a: f64, b: f64) -> Result<PiecewiseAffineMap> {
    check_annulus_param("a", a)?;
    check_annulus_param("b", b)?;
    if a > b {
        return Err(QcError::Domain(format!(
            "annulus extension needs a ≤ b, got a = {a}, b = {b}"
        )));
    }
    annulus_between(a, b)
}

/// As [`annulus_extension`] without the ordering requirement.
pub fn annulus_between(a: f64, b: f64) -> Result<PiecewiseAffineMap> {
    check_annulus_param("a", a)?;
    check_annulus_param("b", b)?;
    PiecewiseAffineMap::from_pairs(
        DomainKind::Annulus { a, b },
        annulus_boundary(a, b),
        &annulus_pairs(a, b),
    )
}

/// Frozen band for `max K / annulus_rate(a, b)` over the grid
/// `a ≤ b` in `{0.05, 0.10, …, 0.45}`; measured range `[1, 1.9756]`.
pub const ANNULUS_BAND: (f64, f64) = (0.99, 2.0);

/// Frozen band for `a · max K` of the twist map over
/// `a ∈ {0.02, 0.04, …, 0.18}`; measured range `[2.8874, 3.6196]`.
pub const TWIST_BAND: (f64, f64) = (2.85, 3.65);

/// The comparison quantity `b(1 − 2a) / (a(1 − 2b))`.
pub fn annulus_rate(a: f64, b: f64) -> f64 {
    b * (1.0 - 2.0 * a) / (a * (1.0 - 2.0 * b))
}

// Interior vertices of the twist triangulation. The numbers were chosen by
// a small search that keeps every cell well shaped for a ∈ (0, 1/5).
const TWIST_CHANNEL: [(f64, f64); 4] = [(0.04, -0.19), (0.2, -0.085), (0.3, 0.085), (0.46, 0.19)];
const TWIST_CHANNEL_IMAGE: [f64; 2] = [0.44, 0.58];

/// The 180° rotation about `(1/4, 0)`, which swaps the two holes.
fn half_turn(p: Point) -> Point {
    Point::new(0.5 - p.x, -p.y)
}

/// Vertex correspondences of the twist map for parameter `a`.
///
/// The domain is `[0, 1/2] × [−1/2, 1/2]` minus the squares of side 1/8
/// centered at `(1/8, 0)` and `(3/8, 0)`; the target is the same rectangle
/// minus the squares of side `1/2 − 2a` centered at `(1/4, ±1/4)`. Twelve
/// triangles fill the part above a zigzag channel running between the
/// holes; the other twelve are their images under the half turn.
pub fn twist_pairs(a: f64) -> Vec<VertexPair> {
    let p = Point::new;
    let m = 0.5 - a;
    let [c1, c2, c3, c4] = TWIST_CHANNEL.map(|(x, y)| p(x, y));
    let [f1, f2] = TWIST_CHANNEL_IMAGE;
    // (source, target)
    let top = (p(0.0, 0.5), p(0.0, 0.5));
    let mid = (p(0.0, 0.0), p(0.0, 0.0));
    let right = (p(0.5, 0.0), p(0.5, 0.0));
    let corner = (p(0.5, 0.5), p(0.5, 0.5));
    let v1 = (c1, p(f1 * a, 0.0));
    let v2 = (c2, p(f2 * a, 0.0));
    let v3 = (c3, p(0.5 - f2 * a, 0.0));
    let v4 = (c4, p(0.5 - f1 * a, 0.0));
    let tl = (p(1.0 / 16.0, 1.0 / 16.0), p(a, m));
    let bl = (p(1.0 / 16.0, -1.0 / 16.0), p(a, a));
    let br = (p(3.0 / 16.0, -1.0 / 16.0), p(m, a));
    let tr = (p(3.0 / 16.0, 1.0 / 16.0), p(m, m));
    let cells = [
        [top, mid, tl],
        [mid, bl, tl],
        [mid, v1, bl],
        [v1, v2, bl],
        [v2, br, bl],
        [v2, v3, br],
        [v3, tr, br],
        [v3, v4, corner],
        [v4, right, corner],
        [v3, corner, tr],
        [corner, tl, tr],
        [corner, top, tl],
    ];
    let mut out = Vec::with_capacity(24);
    for c in cells {
        let src = c.map(|v| v.0);
        let dst = c.map(|v| v.1);
        out.push((src, dst));
        out.push((src.map(half_turn), dst.map(half_turn)));
    }
    out
}

/// Boundary data of the twist: identity on the rectangle, left hole onto
/// the upper target hole and right hole onto the lower one.
pub fn twist_boundary(a: f64) -> BoundaryData {
    let side = 0.5 - 2.0 * a;
    BoundaryData {
        outer: BoxRegion {
            center: Point::new(0.25, 0.0),
            half_width: 0.25,
            half_height: 0.5,
        },
        holes: vec![
            HoleMap {
                source: BoxRegion::square(Point::new(0.125, 0.0), 0.125),
                target: BoxRegion::square(Point::new(0.25, 0.25), side),
            },
            HoleMap {
                source: BoxRegion::square(Point::new(0.375, 0.0), 0.125),
                target: BoxRegion::square(Point::new(0.25, -0.25), side),
            },
        ],
    }
}

/// Piecewise-affine map between the two triply connected regions described
/// in [`twist_pairs`]. Its dilatation is comparable to `1/a`.
pub fn twist_extension(a: f64) -> Result<PiecewiseAffineMap> {
    if !(a.is_finite() && a > 0.0 && a < 0.2) {
        return Err(QcError::Domain(format!("twist parameter a = {a} is outside (0, 1/5)")));
    }
    PiecewiseAffineMap::from_pairs(DomainKind::Twist { a }, twist_boundary(a), &twist_pairs(a))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub continuous: bool,
    pub oriented: bool,
    pub surjective_area_defect: f64,
    pub boundary_ok: bool,
    pub max_dilatation: f64,
    pub dilatation_by_cell: Vec<(usize, f64)>,
}

impl ValidationReport {
    pub fn passes(&self, area_tol: f64) -> bool {
        self.continuous && self.oriented && self.boundary_ok && self.surjective_area_defect <= area_tol
    }
}

/// Checks the homeomorphism properties of a piecewise-affine map.
///
/// Continuity compares, for every cell vertex lying in another closed cell,
/// the images under both cells' maps; this covers shared edges and
/// T-junctions alike.
pub fn validate(map: &PiecewiseAffineMap, target_area: f64, tol: f64) -> ValidationReport {
    let oriented = map.pieces.iter().all(|p| p.map.det() > 0.0);
    let mut continuous = true;
    'outer: for (i, pi) in map.pieces.iter().enumerate() {
        for v in pi.cell.vertices() {
            let image = pi.map.apply(v);
            for (j, pj) in map.pieces.iter().enumerate() {
                if i != j && pj.cell.contains(v, tol) && pj.map.apply(v).dist(image) > tol {
                    continuous = false;
                    break 'outer;
                }
            }
        }
    }

    let b = &map.boundary;
    let boundary_ok = map.pieces.iter().all(|p| {
        p.cell.vertices().iter().all(|&v| {
            let image = p.map.apply(v);
            let mut ok = true;
            if b.outer.on_boundary(v, tol) {
                ok &= image.dist(v) <= tol;
            }
            for h in &b.holes {
                if h.source.on_boundary(v, tol) {
                    ok &= image.dist(h.apply(v)) <= tol;
                }
            }
            ok
        })
    });

    let dilatation_by_cell: Vec<(usize, f64)> = map
        .pieces
        .iter()
        .enumerate()
        .map(|(i, p)| (i, dilatation(&p.map).unwrap_or(f64::INFINITY)))
        .collect();
    let max_dilatation = dilatation_by_cell.iter().fold(1.0f64, |m, &(_, k)| m.max(k));

    ValidationReport {
        continuous,
        oriented,
        surjective_area_defect: (map.image_area() - target_area).abs(),
        boundary_ok,
        max_dilatation,
        dilatation_by_cell,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_annulus() {
        let m = annulus_extension(0.1, 0.1).unwrap();
        assert_eq!(m.pieces.len(), 8);
        for p in &m.pieces {
            assert_eq!(dilatation(&p.map).unwrap(), 1.0);
        }
        let r = validate(&m, 1.0 - 0.8f64.powi(2), 1e-9);
        assert!(r.passes(1e-12), "{r:?}");
        assert_eq!(r.max_dilatation, 1.0);
    }

    #[test]
    fn annulus_area_and_validity() {
        let m = annulus_extension(0.1, 0.3).unwrap();
        let r = validate(&m, 1.0 - 0.4f64.powi(2), 1e-9);
        assert!(r.passes(1e-9), "{r:?}");
        assert_relative_eq!(m.source_area(), 1.0 - 0.64, epsilon = 1e-14);
    }

    #[test]
    fn annulus_domain_errors() {
        assert!(annulus_extension(0.3, 0.1).is_err());
        assert!(annulus_extension(0.0, 0.1).is_err());
        assert!(annulus_extension(0.1, 0.5).is_err());
        assert!(annulus_between(0.3, 0.1).is_ok());
    }

    #[test]
    fn flipped_cell_is_reported() {
        let mut m = annulus_extension(0.1, 0.2).unwrap();
        let q = m.pieces[3].map;
        m.pieces[3].map = AffineMap {
            m11: q.m11,
            m12: q.m12,
            m21: -q.m21,
            m22: -q.m22,
            tx: q.tx,
            ty: -q.ty,
        };
        let r = validate(&m, 1.0 - 0.36, 1e-9);
        assert!(!r.oriented);
    }

    #[test]
    fn twist_is_valid_and_sends_holes_correctly() {
        for a in [0.02, 0.1, 0.19] {
            let m = twist_extension(a).unwrap();
            assert_eq!(m.pieces.len(), 24);
            let target = 0.5 - 2.0 * (0.5 - 2.0 * a).powi(2);
            let r = validate(&m, target, 1e-9);
            assert!(r.passes(1e-9), "a = {a}: {r:?}");
            assert_relative_eq!(m.source_area(), 0.5 - 2.0 / 64.0, epsilon = 1e-14);
            let hole = m.boundary.holes[0];
            let c = hole.apply(Point::new(0.125, 0.0));
            assert!(hole.target.center.dist(c) < 1e-15);
        }
        assert!(twist_extension(0.2).is_err());
        assert!(twist_extension(0.0).is_err());
    }

    #[test]
    fn inverse_validates() {
        let m = twist_extension(0.07).unwrap();
        let inv = m.inverse().unwrap();
        let r = validate(&inv, m.source_area(), 1e-9);
        assert!(r.passes(1e-9), "{r:?}");
        assert_relative_eq!(
            inv.max_dilatation().unwrap(),
            m.max_dilatation().unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn json_shape() {
        let m = annulus_extension(0.1, 0.1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["domain_kind"]["type"], "annulus");
        assert_eq!(v["pieces"].as_array().unwrap().len(), 8);
        assert_eq!(v["pieces"][0]["map"].as_array().unwrap().len(), 6);
    }
}
