//! Level-indexed homeomorphisms between nested Cantor constructions.
//!
//! A [`HierarchicalMap`] of depth `n` sends every level-`n` source square
//! onto its corresponding target square by a similarity and is piecewise
//! affine on the gaskets between consecutive levels. All gaskets of one
//! level are congruent, so the map stores a single template per level, in
//! coordinates where the parent square is `[−1/2, 1/2]²`, and derives the
//! placement of each copy from the square hierarchy.

use serde::Serialize;

use crate::cantor::{check_depth, open_interval_boxes, BoxCountable, CantorLevel, Family, GaugeSequence};
use crate::error::{QcError, Result};
use crate::export::Real;
use crate::geometry::{dilatation, Point, Triangle};
use crate::qcmaps::{
    annulus_pairs, twist_pairs, BoundaryData, BoxRegion, DomainKind, HoleMap, PiecewiseAffineMap, VertexPair,
};

/// Deepest hierarchy accepted by the constructors.
pub const MAX_HIERARCHY_DEPTH: usize = 64;

/// Largest polyline that [`curve_polyline`] will materialize.
pub const MAX_POLYLINE_VERTICES: usize = 1 << 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

/// The gasket map of one level, in parent-normalized coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelTemplate {
    pub level: usize,
    /// Congruent gasket components per parent square (4 annuli or 2 twist regions).
    pub regions_per_parent: usize,
    /// Parameters of one component, in its own normalization.
    pub component: DomainKind,
    pub forward: PiecewiseAffineMap,
    pub backward: PiecewiseAffineMap,
    /// Dilatation of cell `i` (shared by `forward` and `backward`).
    pub cell_k: Vec<f64>,
    pub max_k: f64,
}

impl LevelTemplate {
    /// Builds both directions from one list of vertex pairs. When
    /// `k_from_backward` is set the cell dilatations are measured on the
    /// backward maps, which keeps them bit-identical to the template built
    /// for the reverse construction.
    fn from_pairs(
        level: usize,
        regions_per_parent: usize,
        component: DomainKind,
        boundary: BoundaryData,
        pairs: &[VertexPair],
        k_from_backward: bool,
    ) -> Result<Self> {
        let swapped: Vec<VertexPair> = pairs.iter().map(|(s, d)| (*d, *s)).collect();
        let forward = PiecewiseAffineMap::from_pairs(DomainKind::Composite, boundary.clone(), pairs)?;
        let backward = PiecewiseAffineMap::from_pairs(DomainKind::Composite, boundary.swapped(), &swapped)?;
        let measured = if k_from_backward { &backward } else { &forward };
        let cell_k = measured
            .pieces
            .iter()
            .map(|p| dilatation(&p.map))
            .collect::<Result<Vec<_>>>()?;
        let max_k = cell_k.iter().copied().fold(1.0, f64::max);
        Ok(Self {
            level,
            regions_per_parent,
            component,
            forward,
            backward,
            cell_k,
            max_k,
        })
    }

    fn swapped(&self) -> Self {
        let component = match self.component {
            DomainKind::Annulus { a, b } => DomainKind::Annulus { a: b, b: a },
            DomainKind::Twist { a } => DomainKind::TwistInverse { a },
            DomainKind::TwistInverse { a } => DomainKind::Twist { a },
            DomainKind::Composite => DomainKind::Composite,
        };
        Self {
            level: self.level,
            regions_per_parent: self.regions_per_parent,
            component,
            forward: self.backward.clone(),
            backward: self.forward.clone(),
            cell_k: self.cell_k.clone(),
            max_k: self.max_k,
        }
    }

    /// Source-side cell areas in parent-normalized units.
    pub fn source_areas(&self) -> Vec<f64> {
        self.forward.pieces.iter().map(|p| p.cell.area()).collect()
    }

    /// Target-side cell areas in parent-normalized units.
    pub fn target_areas(&self) -> Vec<f64> {
        self.backward.pieces.iter().map(|p| p.cell.area()).collect()
    }
}

/// φ_n (or its inverse) between two nested constructions.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalMap {
    depth: usize,
    source: Family,
    target: Family,
    /// `levels[k − 1]` is the level-`k` template.
    levels: Vec<LevelTemplate>,
    /// Source child `j` goes to target child `correspondence[j]`.
    correspondence: [usize; 4],
    direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub point: Point,
    /// Distance bound between `point` and the image under the limit map.
    pub error_bound: f64,
    /// Level at which evaluation stopped (0 outside the unit square).
    pub level: usize,
    /// `error_bound ≤ tol`.
    pub resolved: bool,
}

fn place(pairs: &[VertexPair], f: impl Fn(Point) -> Point) -> Vec<VertexPair> {
    pairs.iter().map(|(s, d)| (s.map(&f), d.map(&f))).collect()
}

fn quadrant_template(level: usize, a: f64, b: f64, src: &Family, dst: &Family) -> Result<LevelTemplate> {
    let base = annulus_pairs(a, b);
    let mut pairs = Vec::with_capacity(32);
    let centers = src.child_centers();
    for c in centers {
        pairs.extend(place(&base, |p| *c + p.scale(0.5)));
    }
    let rs = src.child_ratio(level);
    let rt = dst.child_ratio(level);
    let boundary = BoundaryData {
        outer: BoxRegion::square(Point::default(), 1.0),
        holes: centers
            .iter()
            .zip(dst.child_centers())
            .map(|(cs, ct)| HoleMap {
                source: BoxRegion::square(*cs, rs),
                target: BoxRegion::square(*ct, rt),
            })
            .collect(),
    };
    LevelTemplate::from_pairs(level, 4, DomainKind::Annulus { a, b }, boundary, &pairs, a > b)
}

/// The standard homeomorphism of depth `n` from `Λ(src)` to `Λ(dst)`.
///
/// At level `k` each quadrant of a parent square is the annulus between
/// the quadrant and its child; with `ρ_k = d_k / d_{k−1}` its normalized
/// inset is `(1 − ρ_k) / 2`, and the quadrant is mapped by the annulus
/// extension between the source and target insets. Square correspondence
/// is index-preserving.
pub fn standard_homeo(src: &GaugeSequence, dst: &GaugeSequence, n: usize) -> Result<HierarchicalMap> {
    check_depth(n, MAX_HIERARCHY_DEPTH)?;
    src.check_supports(n)?;
    dst.check_supports(n)?;
    let source = Family::Lambda(src.clone());
    let target = Family::Lambda(dst.clone());
    let levels = (1..=n)
        .map(|k| {
            let a = 0.5 * (1.0 - src.ratio(k));
            let b = 0.5 * (1.0 - dst.ratio(k));
            quadrant_template(k, a, b, &source, &target)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HierarchicalMap {
        depth: n,
        source,
        target,
        levels,
        correspondence: [0, 1, 2, 3],
        direction: Direction::Forward,
    })
}

/// Twist parameter `(1 − d_k / d_{k−1}) / 4` used at level `k` of
/// [`sigma_to_lambda`].
pub fn twist_parameter(gauge: &GaugeSequence, k: usize) -> f64 {
    0.25 * (1.0 - gauge.ratio(k))
}

/// Map of depth `n` from the linear set `Σ` onto `Λ(gauge)`.
///
/// The four `Σ` children of a parent, left to right, go to the NW, SW, NE
/// and SE children of the corresponding `Λ` square. Each parent gasket
/// splits into two twist regions: the right half uses the twist map with
/// parameter [`twist_parameter`], the left half its conjugate by `z ↦ −z`.
/// Requires `d_k / d_{k−1} > 1/5` at every level.
pub fn sigma_to_lambda(gauge: &GaugeSequence, n: usize) -> Result<HierarchicalMap> {
    check_depth(n, MAX_HIERARCHY_DEPTH)?;
    gauge.check_supports(n)?;
    let source = Family::Sigma;
    let target = Family::Lambda(gauge.clone());
    let levels = (1..=n)
        .map(|k| {
            let a = twist_parameter(gauge, k);
            if !(a > 0.0 && a < 0.2) {
                return Err(QcError::Domain(format!(
                    "level {k} twist parameter {a} is outside (0, 1/5) for gauge {gauge}"
                )));
            }
            let right = twist_pairs(a);
            let mut pairs: Vec<VertexPair> = right.clone();
            pairs.extend(place(&right, |p: Point| -p));
            let boundary = BoundaryData {
                outer: BoxRegion::square(Point::default(), 1.0),
                holes: source
                    .child_centers()
                    .iter()
                    .zip(target.child_centers())
                    .map(|(cs, ct)| HoleMap {
                        source: BoxRegion::square(*cs, source.child_ratio(k)),
                        target: BoxRegion::square(*ct, target.child_ratio(k)),
                    })
                    .collect(),
            };
            LevelTemplate::from_pairs(k, 2, DomainKind::Twist { a }, boundary, &pairs, false)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HierarchicalMap {
        depth: n,
        source,
        target,
        levels,
        correspondence: [0, 1, 2, 3],
        direction: Direction::Forward,
    })
}

/// [`sigma_to_lambda`] with the gauge `d_n = 2^{−√n}`; the image of the
/// segment `[−1/2, 1/2]` under the limit map is an arc of dimension 2.
pub fn curve_homeo(n: usize) -> Result<HierarchicalMap> {
    sigma_to_lambda(&GaugeSequence::sqrt(), n)
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

impl HierarchicalMap {
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn source(&self) -> &Family {
        &self.source
    }
    pub fn target(&self) -> &Family {
        &self.target
    }
    pub fn direction(&self) -> Direction {
        self.direction
    }
    pub fn levels(&self) -> &[LevelTemplate] {
        &self.levels
    }
    pub fn correspondence(&self) -> [usize; 4] {
        self.correspondence
    }

    /// The same construction truncated at a smaller depth.
    pub fn truncated(&self, depth: usize) -> Self {
        let depth = depth.min(self.depth);
        Self {
            depth,
            levels: self.levels[..depth].to_vec(),
            ..self.clone()
        }
    }

    /// Number of gasket components at level `k ≥ 1`.
    pub fn gasket_regions(&self, k: usize) -> u128 {
        4u128.pow(k as u32 - 1) * self.levels[k - 1].regions_per_parent as u128
    }

    /// Similarity sending the source square with base-4 `digits` onto its
    /// target square, as `(source center, source side, target center, target side)`.
    pub fn square_pair(&self, digits: &[usize]) -> (Point, f64, Point, f64) {
        let (mut c, mut s, mut ct, mut st) = (Point::default(), 1.0, Point::default(), 1.0);
        for (k, &j) in digits.iter().enumerate() {
            let jt = self.correspondence[j];
            c = c + self.source.child_centers()[j].scale(s);
            ct = ct + self.target.child_centers()[jt].scale(st);
            s *= self.source.child_ratio(k + 1);
            st *= self.target.child_ratio(k + 1);
        }
        (c, s, ct, st)
    }

    /// Image of `z` under the limit map, resolved down to the stored depth.
    ///
    /// Points in a gasket get their exact piecewise-affine image. Points in
    /// a deepest-level square (or in a square whose image is already
    /// smaller than `tol`) get the similarity image together with the
    /// image-square diameter as error bound.
    pub fn evaluate(&self, z: Point, tol: f64) -> Evaluation {
        if z.x.abs() > 0.5 || z.y.abs() > 0.5 || !z.is_finite() {
            return Evaluation {
                point: z,
                error_bound: 0.0,
                level: 0,
                resolved: true,
            };
        }
        let (mut c, mut s, mut ct, mut st) = (Point::default(), 1.0, Point::default(), 1.0);
        let mut level = 0;
        while level < self.depth && SQRT2 * st >= tol {
            let k = level + 1;
            let u = (z - c).scale(1.0 / s);
            let rs = self.source.child_ratio(k);
            let child = self
                .source
                .child_centers()
                .iter()
                .position(|cc| cc.dist_inf(u) <= 0.5 * rs);
            match child {
                Some(j) => {
                    let jt = self.correspondence[j];
                    c = c + self.source.child_centers()[j].scale(s);
                    ct = ct + self.target.child_centers()[jt].scale(st);
                    s *= rs;
                    st *= self.target.child_ratio(k);
                    level = k;
                }
                None => {
                    let t = &self.levels[level].forward;
                    let i = t.locate(u, 1e-9).unwrap_or_else(|| nearest_cell(t, u));
                    let v = t.pieces[i].map.apply(u);
                    return Evaluation {
                        point: ct + v.scale(st),
                        error_bound: 0.0,
                        level: k,
                        resolved: true,
                    };
                }
            }
        }
        let point = ct + (z - c).scale(st / s);
        let error_bound = SQRT2 * st;
        Evaluation {
            point,
            error_bound,
            level,
            resolved: error_bound <= tol,
        }
    }

    /// Maximum cell dilatation of each level's gasket template.
    pub fn max_dilatation_per_level(&self) -> Vec<(usize, f64)> {
        self.levels.iter().map(|t| (t.level, t.max_k)).collect()
    }

    /// Overall dilatation bound of the depth-`n` map (1 at depth 0).
    pub fn max_dilatation(&self) -> f64 {
        self.levels.iter().map(|t| t.max_k).fold(1.0, f64::max)
    }

    /// The inverse map: source and target swap and every template is
    /// replaced by its cell-wise inverse. Cell dilatations are carried over
    /// unchanged, so `invert` is an exact involution.
    pub fn invert(&self) -> Self {
        let mut correspondence = [0; 4];
        for (j, &jt) in self.correspondence.iter().enumerate() {
            correspondence[jt] = j;
        }
        Self {
            depth: self.depth,
            source: self.target.clone(),
            target: self.source.clone(),
            levels: self.levels.iter().map(LevelTemplate::swapped).collect(),
            correspondence,
            direction: self.direction.flipped(),
        }
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct LevelOut {
            level: usize,
            #[serde(rename = "max_K")]
            max_k: Real,
            gasket_cells: usize,
            gasket_regions: String,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            depth: usize,
            direction: Direction,
            source: &'a Family,
            target: &'a Family,
            per_level: Vec<LevelOut>,
        }
        let per_level = self
            .levels
            .iter()
            .map(|t| LevelOut {
                level: t.level,
                max_k: Real(t.max_k),
                gasket_cells: t.forward.pieces.len(),
                gasket_regions: self.gasket_regions(t.level).to_string(),
            })
            .collect();
        crate::export::to_json(&Out {
            depth: self.depth,
            direction: self.direction,
            source: &self.source,
            target: &self.target,
            per_level,
        })
    }
}

fn nearest_cell(t: &PiecewiseAffineMap, u: Point) -> usize {
    let depth = |tri: &Triangle| tri.barycentric(u).into_iter().fold(f64::INFINITY, f64::min);
    (0..t.pieces.len())
        .max_by(|&i, &j| depth(&t.pieces[i].cell).total_cmp(&depth(&t.pieces[j].cell)))
        .expect("templates are nonempty")
}

/// Image of a segment as a polyline with parameter marks.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<Point>,
    /// Source abscissa of each vertex, in `[−1/2, 1/2]`.
    pub marks: Vec<f64>,
}

impl Polyline {
    pub fn to_csv(&self) -> String {
        crate::export::csv(
            &["t", "x", "y"],
            self.vertices
                .iter()
                .zip(&self.marks)
                .map(|(p, t)| [*t, p.x, p.y].into_iter().map(crate::export::fmt_real)),
        )
    }

    /// Indices of the squares of `level` containing polyline vertices, in
    /// order of first visit.
    pub fn visit_order(&self, level: &CantorLevel) -> Vec<usize> {
        let n = level.level;
        let mut seen = std::collections::HashSet::new();
        let mut order = Vec::new();
        for &p in &self.vertices {
            if let Some(idx) = locate_square(&level.family, n, p) {
                if seen.insert(idx) {
                    order.push(idx);
                }
            }
        }
        order
    }
}

/// Digit-major index of the closed level-`n` square containing `p`.
pub fn locate_square(family: &Family, n: usize, p: Point) -> Option<usize> {
    let tol = 1e-12;
    let (mut c, mut s, mut idx) = (Point::default(), 1.0, 0usize);
    if c.dist_inf(p) > 0.5 + tol {
        return None;
    }
    for k in 1..=n {
        let r = family.child_ratio(k);
        let u = (p - c).scale(1.0 / s);
        let j = family
            .child_centers()
            .iter()
            .position(|cc| cc.dist_inf(u) <= 0.5 * r + tol / s)?;
        c = c + family.child_centers()[j].scale(s);
        s *= r;
        idx = idx * 4 + j;
    }
    Some(idx)
}

/// A polyline together with the scale it should be box-counted at.
pub struct CurveSample {
    pub polyline: Polyline,
    pub scale: f64,
}

impl BoxCountable for CurveSample {
    fn box_scale(&self) -> f64 {
        self.scale
    }

    /// Number of lattice boxes (centered on `hℤ²`) met by some edge.
    fn count_boxes(&self, h: f64) -> u64 {
        let mut cells: Vec<(i64, i64)> = Vec::new();
        for w in self.polyline.vertices.windows(2) {
            segment_boxes(w[0], w[1], h, &mut cells);
        }
        cells.sort_unstable();
        cells.dedup();
        cells.len() as u64
    }
}

/// Appends the lattice boxes met by the closed segment `pq`.
fn segment_boxes(p: Point, q: Point, h: f64, out: &mut Vec<(i64, i64)>) {
    let (x0, x1) = (p.x.min(q.x), p.x.max(q.x));
    let (ix0, ix1) = open_interval_boxes(x0 - 1e-12, x1 + 1e-12, h);
    for i in ix0..=ix1 {
        // portion of the segment inside the column of box i
        let lo = ((i as f64 - 0.5) * h).max(x0);
        let hi = ((i as f64 + 0.5) * h).min(x1);
        let y_at = |x: f64| {
            if (q.x - p.x).abs() < 1e-300 {
                None
            } else {
                Some(p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x))
            }
        };
        let (ya, yb) = match (y_at(lo), y_at(hi)) {
            (Some(a), Some(b)) => (a.min(b), a.max(b)),
            _ => (p.y.min(q.y), p.y.max(q.y)),
        };
        let (iy0, iy1) = open_interval_boxes(ya - 1e-12, yb + 1e-12, h);
        for j in iy0..=iy1 {
            out.push((i, j));
        }
    }
}

#[derive(Clone, Debug)]
enum PlanItem {
    Cell { x0: f64, x1: f64, cell: usize },
    Child { j: usize },
}

/// Decomposition of the source segment `y = 0, |x| ≤ 1/2` of a
/// parent-normalized level into template cells and child squares.
fn level_plan(map: &HierarchicalMap, k: usize) -> Vec<PlanItem> {
    let t = &map.levels[k - 1].forward;
    let r = map.source.child_ratio(k);
    let mut items: Vec<(f64, PlanItem)> = Vec::new();
    for (j, c) in map.source.child_centers().iter().enumerate() {
        if c.y.abs() <= 0.5 * r {
            items.push((c.x - 0.5 * r, PlanItem::Child { j }));
        }
    }
    for (i, piece) in t.pieces.iter().enumerate() {
        if let Some((x0, x1)) = clip_horizontal(&piece.cell, 0.0) {
            if x1 - x0 > 1e-12 {
                items.push((x0, PlanItem::Cell { x0, x1, cell: i }));
            }
        }
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    items.into_iter().map(|(_, it)| it).collect()
}

/// The interval `{x : (x, y) ∈ tri}`, if nonempty.
fn clip_horizontal(tri: &Triangle, y: f64) -> Option<(f64, f64)> {
    let v = tri.vertices();
    let mut xs = Vec::with_capacity(3);
    for i in 0..3 {
        let (p, q) = (v[i], v[(i + 1) % 3]);
        if (p.y - y) * (q.y - y) <= 0.0 {
            if p.y == q.y {
                xs.push(p.x);
                xs.push(q.x);
            } else {
                xs.push(p.x + (q.x - p.x) * (y - p.y) / (q.y - p.y));
            }
        }
    }
    if xs.is_empty() {
        return None;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

fn check_curve_map(map: &HierarchicalMap) -> Result<()> {
    if map.source != Family::Sigma || map.direction != Direction::Forward {
        return Err(QcError::Domain(
            "curve extraction needs a forward map with the linear set as source".into(),
        ));
    }
    Ok(())
}

/// Number of level-`depth` target squares met by the image of the segment,
/// counted level by level from the segment's decomposition.
pub fn curve_square_count(map: &HierarchicalMap) -> Result<u128> {
    check_curve_map(map)?;
    let mut count: u128 = 1;
    for k in 1..=map.depth {
        let children = level_plan(map, k)
            .iter()
            .filter(|it| matches!(it, PlanItem::Child { .. }))
            .count();
        count *= children as u128;
    }
    Ok(count)
}

/// Image of `[−1/2, 1/2] × {0}` under a map from [`sigma_to_lambda`].
///
/// Vertices are inserted exactly where the segment crosses template cell
/// boundaries; inside deepest-level squares the image is the similarity
/// image of the segment. Consecutive vertices closer than `tol` are merged.
pub fn curve_polyline(map: &HierarchicalMap, tol: f64) -> Result<Polyline> {
    check_curve_map(map)?;
    let plans: Vec<Vec<PlanItem>> = (1..=map.depth).map(|k| level_plan(map, k)).collect();
    let mut estimate: usize = 2;
    for plan in plans.iter().rev() {
        let cells = plan.iter().filter(|it| matches!(it, PlanItem::Cell { .. })).count();
        let children = plan.len() - cells;
        estimate = estimate.saturating_mul(children).saturating_add(2 * cells);
    }
    if estimate > MAX_POLYLINE_VERTICES {
        let mut limit = map.depth;
        while limit > 0 && 2 * 4usize.pow(limit as u32) * 8 > MAX_POLYLINE_VERTICES {
            limit -= 1;
        }
        return Err(QcError::DepthGuard {
            requested: map.depth,
            limit,
        });
    }
    let mut line = Polyline {
        vertices: Vec::with_capacity(estimate),
        marks: Vec::with_capacity(estimate),
    };
    let mut push = |t: f64, p: Point| {
        if let Some(last) = line.vertices.last() {
            if last.dist(p) <= tol {
                return;
            }
        }
        line.vertices.push(p);
        line.marks.push(t);
    };
    emit(map, &plans, 1, Point::default(), 1.0, Point::default(), 1.0, &mut push);
    if line.vertices.len() < 2 {
        return Err(QcError::Geometry("curve collapsed to a point".into()));
    }
    Ok(line)
}

#[allow(clippy::too_many_arguments)]
fn emit(
    map: &HierarchicalMap,
    plans: &[Vec<PlanItem>],
    k: usize,
    c: Point,
    s: f64,
    ct: Point,
    st: f64,
    push: &mut impl FnMut(f64, Point),
) {
    if k > map.depth {
        // deepest square: the similarity image of its middle segment
        for x in [-0.5, 0.5] {
            push(c.x + s * x, ct + Point::new(x, 0.0).scale(st));
        }
        return;
    }
    let t = &map.levels[k - 1].forward;
    for item in &plans[k - 1] {
        match *item {
            PlanItem::Cell { x0, x1, cell } => {
                let m = &t.pieces[cell].map;
                for x in [x0, x1] {
                    push(c.x + s * x, ct + m.apply(Point::new(x, 0.0)).scale(st));
                }
            }
            PlanItem::Child { j } => {
                let jt = map.correspondence[j];
                let cc = c + map.source.child_centers()[j].scale(s);
                let cct = ct + map.target.child_centers()[jt].scale(st);
                let ns = s * map.source.child_ratio(k);
                let nst = st * map.target.child_ratio(k);
                emit(map, plans, k + 1, cc, ns, cct, nst, push);
            }
        }
    }
}

/// Checks that the template triangles of a map tile the parent gasket:
/// every template validates against its declared boundary data.
pub fn validate_templates(map: &HierarchicalMap, tol: f64) -> Vec<crate::qcmaps::ValidationReport> {
    map.levels
        .iter()
        .map(|t| crate::qcmaps::validate(&t.forward, t.forward.boundary.target_area(), tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geo(nu: f64) -> GaugeSequence {
        GaugeSequence::geometric(nu).unwrap()
    }

    #[test]
    fn identity_construction() {
        let g = GaugeSequence::slow();
        let m = standard_homeo(&g, &g, 5).unwrap();
        assert!(m.max_dilatation_per_level().iter().all(|&(_, k)| k == 1.0));
        let z = Point::new(0.3, -0.17);
        let e = m.evaluate(z, 1e-300);
        assert!(e.point.dist(z) < 1e-15);
    }

    #[test]
    fn off_square_is_fixed() {
        let m = standard_homeo(&geo(1.0), &geo(2.0), 4).unwrap();
        let e = m.evaluate(Point::new(10.0, 10.0), 1e-9);
        assert_eq!(e.point, Point::new(10.0, 10.0));
        assert_eq!(e.error_bound, 0.0);
    }

    #[test]
    fn geometric_ratio_is_level_independent() {
        let m = standard_homeo(&geo(1.0), &geo(2.0), 8).unwrap();
        let ks: Vec<f64> = m.max_dilatation_per_level().iter().map(|p| p.1).collect();
        for k in &ks {
            assert_relative_eq!(*k, ks[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn templates_validate() {
        let m = standard_homeo(&GaugeSequence::slow(), &GaugeSequence::fast(), 6).unwrap();
        for r in validate_templates(&m, 1e-9) {
            assert!(r.passes(1e-9), "{r:?}");
        }
        let b = curve_homeo(6).unwrap();
        for r in validate_templates(&b, 1e-9) {
            assert!(r.passes(1e-9), "{r:?}");
        }
    }

    #[test]
    fn first_level_correspondence() {
        let m = curve_homeo(1).unwrap();
        let left = m.evaluate(Point::new(-0.375, 0.0), 1e-300);
        assert!(left.point.x < 0.0 && left.point.y > 0.0);
        let right = m.evaluate(Point::new(0.375, 0.0), 1e-300);
        assert!(right.point.x > 0.0 && right.point.y < 0.0);
        assert_relative_eq!(twist_parameter(&GaugeSequence::sqrt(), 1), 0.125);
    }

    #[test]
    fn invert_is_involution() {
        let m = standard_homeo(&GaugeSequence::slow(), &geo(1.0), 6).unwrap();
        assert_eq!(m.invert().invert(), m);
        let b = curve_homeo(4).unwrap();
        assert_eq!(b.invert().invert(), b);
    }

    #[test]
    fn curve_depth_zero_is_segment() {
        let line = curve_polyline(&curve_homeo(0).unwrap(), 1e-12).unwrap();
        assert_eq!(line.vertices, vec![Point::new(-0.5, 0.0), Point::new(0.5, 0.0)]);
        assert_eq!(line.marks, vec![-0.5, 0.5]);
    }

    #[test]
    fn curve_visits_every_square_in_order() {
        for n in 1..=4 {
            let m = curve_homeo(n).unwrap();
            let line = curve_polyline(&m, 1e-13).unwrap();
            let level = crate::cantor::build_family_level(m.target(), n, 14).unwrap();
            let order = line.visit_order(&level);
            assert_eq!(order, (0..4usize.pow(n as u32)).collect::<Vec<_>>());
            assert_eq!(curve_square_count(&m).unwrap(), 4u128.pow(n as u32));
            assert!(line.marks.windows(2).all(|w| w[0] <= w[1]));
            assert_relative_eq!(line.marks[0], -0.5);
            assert_relative_eq!(*line.marks.last().unwrap(), 0.5);
        }
    }
}
