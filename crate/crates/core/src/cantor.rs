//! Gauge-driven square Cantor sets, the 8-adic linear Cantor set, and
//! dimension estimators.
//!
//! A gauge `d_0 = 1 > d_1 > d_2 > …` determines the nested construction
//! `Λ_n`: each level-`(n−1)` square of side `2^{1−n} d_{n−1}` contains four
//! children of side `2^{−n} d_n`, one per quadrant, each inset
//! `a_n = 2^{−(n+1)} (d_{n−1} − d_n)` from the quadrant boundary. The
//! linear set `Σ` replaces the 2×2 pattern by four squares of ratio `1/8`
//! centered on the real axis.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QcError, Result};
use crate::export::{compensated_sum, Real};
use crate::geometry::Point;

/// Default limit for materialized square lists.
pub const DEFAULT_DEPTH_GUARD: usize = 14;

/// Environment variable overriding [`DEFAULT_DEPTH_GUARD`].
pub const DEPTH_GUARD_ENV: &str = "QCFORGE_DEPTH_GUARD";

/// The materialization depth limit currently in effect.
pub fn depth_guard() -> usize {
    std::env::var(DEPTH_GUARD_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DEPTH_GUARD)
}

pub(crate) fn check_depth(requested: usize, limit: usize) -> Result<()> {
    if requested > limit {
        Err(QcError::DepthGuard { requested, limit })
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GaugeKind {
    /// `d_n = 2^{−νn}`
    Geometric { nu: f64 },
    /// `d_n = 2^{−n / ln(n + e)}`
    Slow,
    /// `d_n = 2^{−n ln(n + 1)}`
    Fast,
    /// `d_n = 2^{−√n}`
    Sqrt,
    /// Explicit values `d_0, d_1, …`.
    Custom { table: Vec<f64> },
}

/// A validated, strictly decreasing gauge with `d_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSequence {
    kind: GaugeKind,
}

pub fn make_gauge(kind: GaugeKind) -> Result<GaugeSequence> {
    match &kind {
        GaugeKind::Geometric { nu } => {
            if !(nu.is_finite() && *nu > 0.0) {
                return Err(QcError::Validation(format!("geometric gauge needs ν > 0, got {nu}")));
            }
        }
        GaugeKind::Custom { table } => {
            if table.is_empty() || table[0] != 1.0 {
                return Err(QcError::Validation("custom gauge must start with d_0 = 1".into()));
            }
            if let Some(w) = table.windows(2).find(|w| !(w[1] < w[0] && w[1] > 0.0)) {
                return Err(QcError::Validation(format!(
                    "custom gauge is not strictly decreasing and positive at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        GaugeKind::Slow | GaugeKind::Fast | GaugeKind::Sqrt => {}
    }
    Ok(GaugeSequence { kind })
}

impl GaugeSequence {
    pub fn geometric(nu: f64) -> Result<Self> {
        make_gauge(GaugeKind::Geometric { nu })
    }
    pub fn slow() -> Self {
        Self { kind: GaugeKind::Slow }
    }
    pub fn fast() -> Self {
        Self { kind: GaugeKind::Fast }
    }
    pub fn sqrt() -> Self {
        Self { kind: GaugeKind::Sqrt }
    }
    pub fn custom(table: Vec<f64>) -> Result<Self> {
        make_gauge(GaugeKind::Custom { table })
    }

    pub fn kind(&self) -> &GaugeKind {
        &self.kind
    }

    /// Largest `n` for which `d_n` is defined, if finite.
    pub fn max_index(&self) -> Option<usize> {
        match &self.kind {
            GaugeKind::Custom { table } => Some(table.len() - 1),
            _ => None,
        }
    }

    pub fn supports(&self, n: usize) -> bool {
        self.max_index().is_none_or(|m| n <= m)
    }

    pub(crate) fn check_supports(&self, n: usize) -> Result<()> {
        if self.supports(n) {
            Ok(())
        } else {
            Err(QcError::Domain(format!(
                "gauge {self} is only defined up to n = {}",
                self.max_index().unwrap_or(0)
            )))
        }
    }

    /// `−log₂ d_n`.
    ///
    /// # Panics
    /// For custom gauges when `n` is past the end of the table.
    pub fn exponent(&self, n: usize) -> f64 {
        let x = n as f64;
        match &self.kind {
            GaugeKind::Geometric { nu } => nu * x,
            GaugeKind::Slow => x / (x + std::f64::consts::E).ln(),
            GaugeKind::Fast => x * (x + 1.0).ln(),
            GaugeKind::Sqrt => x.sqrt(),
            GaugeKind::Custom { table } => -table[n].log2(),
        }
    }

    /// `d_n`.
    ///
    /// # Panics
    /// For custom gauges when `n` is past the end of the table.
    pub fn d(&self, n: usize) -> f64 {
        match &self.kind {
            GaugeKind::Custom { table } => table[n],
            _ if n == 0 => 1.0,
            _ => (-self.exponent(n)).exp2(),
        }
    }

    /// Ratio `d_n / d_{n−1}` for `n ≥ 1`, computed without underflow.
    pub fn ratio(&self, n: usize) -> f64 {
        match &self.kind {
            GaugeKind::Custom { table } => table[n] / table[n - 1],
            _ => (self.exponent(n - 1) - self.exponent(n)).exp2(),
        }
    }

    /// Side length `2^{−n} d_n` of the level-`n` squares.
    pub fn side(&self, n: usize) -> f64 {
        ldexp(self.d(n), -(n as i32))
    }

    /// Boundary inset `a_n = 2^{−(n+1)} (d_{n−1} − d_n)` for `n ≥ 1`.
    pub fn inset(&self, n: usize) -> f64 {
        ldexp(self.d(n - 1) - self.d(n), -(n as i32 + 1))
    }
}

fn ldexp(x: f64, e: i32) -> f64 {
    x * (e as f64).exp2()
}

impl fmt::Display for GaugeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GaugeKind::Geometric { nu } => write!(f, "geometric:{nu}"),
            GaugeKind::Slow => f.write_str("slow"),
            GaugeKind::Fast => f.write_str("fast"),
            GaugeKind::Sqrt => f.write_str("sqrt"),
            GaugeKind::Custom { table } => {
                let parts: Vec<String> = table.iter().map(|v| v.to_string()).collect();
                write!(f, "custom:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for GaugeSequence {
    type Err = QcError;

    /// Parses `kind[:param]`, e.g. `geometric:1`, `slow`, `custom:1,0.5,0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let no_param = |g: GaugeSequence| match param {
            None => Ok(g),
            Some(_) => Err(QcError::Validation(format!("gauge '{kind}' takes no parameter"))),
        };
        match kind {
            "geometric" | "geo" => {
                let nu = match param {
                    Some(p) => p
                        .parse::<f64>()
                        .map_err(|_| QcError::Validation(format!("bad ν in '{s}'")))?,
                    None => return Err(QcError::Validation("geometric gauge needs ':ν'".into())),
                };
                GaugeSequence::geometric(nu)
            }
            "slow" => no_param(GaugeSequence::slow()),
            "fast" => no_param(GaugeSequence::fast()),
            "sqrt" => no_param(GaugeSequence::sqrt()),
            "custom" => {
                let p = param.ok_or_else(|| QcError::Validation("custom gauge needs a table".into()))?;
                let table = p
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| QcError::Validation(format!("bad table in '{s}'")))?;
                GaugeSequence::custom(table)
            }
            other => Err(QcError::Validation(format!("unknown gauge kind '{other}'"))),
        }
    }
}

impl Serialize for GaugeSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GaugeSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which nested construction a set of squares belongs to.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Lambda(GaugeSequence),
    Sigma,
}

const QUADRANT_CENTERS: [Point; 4] = [
    Point::new(-0.25, 0.25),
    Point::new(-0.25, -0.25),
    Point::new(0.25, 0.25),
    Point::new(0.25, -0.25),
];

const SIGMA_CENTERS: [Point; 4] = [
    Point::new(-0.375, 0.0),
    Point::new(-0.125, 0.0),
    Point::new(0.125, 0.0),
    Point::new(0.375, 0.0),
];

impl Family {
    /// Child centers relative to a parent normalized to `[−1/2, 1/2]²`.
    ///
    /// For `Λ` the order is NW, SW, NE, SE; for `Σ` it is left to right.
    pub fn child_centers(&self) -> &'static [Point; 4] {
        match self {
            Family::Lambda(_) => &QUADRANT_CENTERS,
            Family::Sigma => &SIGMA_CENTERS,
        }
    }

    /// Child side divided by parent side at level `n ≥ 1`.
    pub fn child_ratio(&self, n: usize) -> f64 {
        match self {
            Family::Lambda(g) => 0.5 * g.ratio(n),
            Family::Sigma => 0.125,
        }
    }

    /// Side length of the level-`n` squares.
    pub fn side(&self, n: usize) -> f64 {
        match self {
            Family::Lambda(g) => g.side(n),
            Family::Sigma => (-3.0 * n as f64).exp2(),
        }
    }

    /// Total area `4ⁿ · side²` of level `n`.
    pub fn level_area(&self, n: usize) -> f64 {
        match self {
            Family::Lambda(g) => {
                let d = g.d(n);
                d * d
            }
            Family::Sigma => (-4.0 * n as f64).exp2(),
        }
    }

    pub fn check_supports(&self, n: usize) -> Result<()> {
        match self {
            Family::Lambda(g) => g.check_supports(n),
            Family::Sigma => Ok(()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Lambda(g) => write!(f, "lambda({g})"),
            Family::Sigma => f.write_str("sigma"),
        }
    }
}

impl Serialize for Family {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Square {
    pub center: Point,
    pub side: f64,
}

impl Square {
    pub fn contains_square(&self, other: &Square, tol: f64) -> bool {
        let h = 0.5 * (self.side - other.side) + tol;
        (self.center.x - other.center.x).abs() <= h && (self.center.y - other.center.y).abs() <= h
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.center.dist_inf(p) <= 0.5 * self.side + tol
    }
}

/// The level-`n` stage of a construction: `4ⁿ` congruent closed squares.
///
/// Squares are ordered digit-major: the index written in base 4 lists the
/// child chosen at levels `1, 2, …, n`, most significant first.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorLevel {
    pub family: Family,
    pub level: usize,
    pub side: f64,
    pub squares: Vec<Square>,
}

impl CantorLevel {
    pub fn total_area(&self) -> f64 {
        compensated_sum(self.squares.iter().map(|s| s.side * s.side))
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            family: &'a Family,
            level: usize,
            side: Real,
            squares: Vec<[Real; 2]>,
        }
        crate::export::to_json(&Out {
            family: &self.family,
            level: self.level,
            side: Real(self.side),
            squares: self
                .squares
                .iter()
                .map(|s| [Real(s.center.x), Real(s.center.y)])
                .collect(),
        })
    }
}

/// Materializes level `n` of any family, refusing depths above `limit`.
pub fn build_family_level(family: &Family, n: usize, limit: usize) -> Result<CantorLevel> {
    check_depth(n, limit)?;
    family.check_supports(n)?;
    let offsets = family.child_centers();
    let mut centers = vec![Point::default()];
    for k in 1..=n {
        let parent_side = family.side(k - 1);
        let mut next = Vec::with_capacity(centers.len() * 4);
        for c in &centers {
            next.extend(offsets.iter().map(|o| *c + o.scale(parent_side)));
        }
        centers = next;
    }
    let side = family.side(n);
    Ok(CantorLevel {
        family: family.clone(),
        level: n,
        side,
        squares: centers.into_iter().map(|center| Square { center, side }).collect(),
    })
}

/// Level `n` of `Λ(gauge)`, subject to the configured depth guard.
pub fn build_level(gauge: &GaugeSequence, n: usize) -> Result<CantorLevel> {
    build_family_level(&Family::Lambda(gauge.clone()), n, depth_guard())
}

/// Level `n` of `Σ`, subject to the configured depth guard.
pub fn build_sigma_level(n: usize) -> Result<CantorLevel> {
    build_family_level(&Family::Sigma, n, depth_guard())
}

/// Center of the level-`n` square with base-4 digits `digits` (level 1 first).
pub fn square_center(family: &Family, digits: &[usize]) -> Point {
    let offsets = family.child_centers();
    let mut c = Point::default();
    for (k, &j) in digits.iter().enumerate() {
        c = c + offsets[j].scale(family.side(k));
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionMethod {
    GaugeBounds,
    BoxCounting,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: DimensionMethod,
    pub scales_used: Vec<f64>,
}

/// Finite-depth version of the two-sided gauge bound on the Hausdorff
/// dimension of `Λ(gauge)`: the limsup and liminf are replaced by the
/// max and min over the tail `n ∈ [N − ⌊N/4⌋, N]`.
pub fn dimension_bounds(gauge: &GaugeSequence, big_n: usize) -> Result<DimensionEstimate> {
    if big_n < 3 {
        return Err(QcError::Domain(format!("dimension bounds need N ≥ 3, got {big_n}")));
    }
    gauge.check_supports(big_n + 1)?;
    let tail = (big_n - big_n / 4)..=big_n;
    let mut hi_ratio = f64::NEG_INFINITY;
    let mut lo_ratio = f64::INFINITY;
    let mut scales = Vec::new();
    for n in tail {
        // with logs in base 2: −log d_n + n log 2 ∝ e_n + n
        let denom = gauge.exponent(n) + n as f64;
        hi_ratio = hi_ratio.max(2.0 * gauge.exponent(n + 1) / denom);
        lo_ratio = lo_ratio.min(2.0 * gauge.exponent(n) / denom);
        scales.push(gauge.side(n));
    }
    let lower = (2.0 - hi_ratio).clamp(0.0, 2.0);
    let upper = (2.0 - lo_ratio).clamp(0.0, 2.0);
    Ok(DimensionEstimate {
        value: 0.5 * (lower + upper),
        lower,
        upper,
        method: DimensionMethod::GaugeBounds,
        scales_used: scales,
    })
}

/// Sets that can be covered by a square lattice for box counting.
pub trait BoxCountable {
    /// Scale at which this sample is counted.
    fn box_scale(&self) -> f64;
    /// Number of lattice boxes of side `h` meeting the set.
    fn count_boxes(&self, h: f64) -> u64;
}

/// Lattice index range `i` with `((i − ½)h, (i + ½)h)` meeting the open interval `(lo, hi)`.
///
/// The lattice boxes are centered on `hℤ`. Endpoints within `1e−9` of a box
/// boundary are snapped onto it so that exactly aligned sets count exactly.
pub(crate) fn open_interval_boxes(lo: f64, hi: f64, h: f64) -> (i64, i64) {
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() <= 1e-9 {
            r
        } else {
            v
        }
    };
    let p = snap(lo / h - 0.5);
    let q = snap(hi / h + 0.5);
    let i_min = if p == p.floor() { p as i64 + 1 } else { p.ceil() as i64 };
    let i_max = if q == q.floor() { q as i64 - 1 } else { q.floor() as i64 };
    (i_min, i_max)
}

impl BoxCountable for CantorLevel {
    fn box_scale(&self) -> f64 {
        self.side
    }

    /// Counts boxes meeting the interior of some square.
    fn count_boxes(&self, h: f64) -> u64 {
        let mut cells: Vec<(i64, i64)> = Vec::with_capacity(self.squares.len());
        for s in &self.squares {
            let r = 0.5 * s.side;
            let (x0, x1) = open_interval_boxes(s.center.x - r, s.center.x + r, h);
            let (y0, y1) = open_interval_boxes(s.center.y - r, s.center.y + r, h);
            for i in x0..=x1 {
                for j in y0..=y1 {
                    cells.push((i, j));
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();
        cells.len() as u64
    }
}

/// Pointwise box-counting estimate `log N / −log h`.
pub fn box_count_estimate(count: u64, scale: f64) -> f64 {
    (count as f64).ln() / -scale.ln()
}

/// Box-counting dimension from samples at several depths: the least-squares
/// slope of `log N(h)` against `−log h`, with the natural scale of each
/// sample as `h`.
pub fn box_dimension<S, F>(mut source: F, depths: &[usize]) -> Result<DimensionEstimate>
where
    S: BoxCountable,
    F: FnMut(usize) -> Result<S>,
{
    let mut samples = Vec::with_capacity(depths.len());
    for &n in depths {
        let set = source(n)?;
        let h = set.box_scale();
        samples.push((h, set.count_boxes(h)));
    }
    box_dimension_from_counts(&samples)
}

/// As [`box_dimension`], from precomputed `(scale, count)` pairs.
pub fn box_dimension_from_counts(samples: &[(f64, u64)]) -> Result<DimensionEstimate> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(QcError::Validation(
            "box counting needs at least two distinct scales".into(),
        ));
    }
    let xs: Vec<f64> = samples.iter().map(|s| -s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.1 as f64).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let pointwise = samples.iter().map(|&(h, c)| box_count_estimate(c, h));
    let (lo, hi) = pointwise.fold((slope, slope), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(DimensionEstimate {
        value: slope.clamp(0.0, 2.0),
        lower: lo.clamp(0.0, 2.0),
        upper: hi.clamp(0.0, 2.0),
        method: DimensionMethod::BoxCounting,
        scales_used: samples.iter().map(|s| s.0).collect(),
    })
}

/// Area of `{(u, v) : 0 ≤ u ≤ x, 0 ≤ v ≤ y, u² + v² ≤ r²}`, extended to be
/// odd in `x` and in `y`.
fn quarter_disk_area(x: f64, y: f64, r: f64) -> f64 {
    let sign = x.signum() * y.signum();
    let x = x.abs().min(r);
    let y = y.abs().min(r);
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let g = |t: f64| 0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).clamp(-1.0, 1.0).asin());
    let area = if x * x + y * y <= r * r {
        x * y
    } else {
        let u = (r * r - y * y).max(0.0).sqrt();
        y * u + g(x) - g(u)
    };
    sign * area
}

/// Exact area of the disk `D(c, r)` intersected with `[x0, x1] × [y0, y1]`.
pub fn disk_rect_area(c: Point, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (x0, x1, y0, y1) = (x0 - c.x, x1 - c.x, y0 - c.y, y1 - c.y);
    let a = quarter_disk_area(x1, y1, r) - quarter_disk_area(x0, y1, r) - quarter_disk_area(x1, y0, r)
        + quarter_disk_area(x0, y0, r);
    a.max(0.0)
}

struct MassTree<'a> {
    family: &'a Family,
    depth: usize,
    sides: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> MassTree<'a> {
    fn new(family: &'a Family, depth: usize) -> Self {
        Self {
            family,
            depth,
            sides: (0..=depth).map(|k| family.side(k)).collect(),
            weights: (0..=depth).map(|k| (-2.0 * k as f64).exp2()).collect(),
        }
    }

    /// Mass of `D(x, eps)` under the uniform level-`depth` measure.
    fn mass(&self, center: Point, k: usize, x: Point, eps: f64) -> f64 {
        let h = 0.5 * self.sides[k];
        let dx = ((x.x - center.x).abs() - h).max(0.0);
        let dy = ((x.y - center.y).abs() - h).max(0.0);
        if dx * dx + dy * dy >= eps * eps {
            return 0.0;
        }
        let fx = (x.x - center.x).abs() + h;
        let fy = (x.y - center.y).abs() + h;
        if fx * fx + fy * fy <= eps * eps {
            return self.weights[k];
        }
        if k == self.depth {
            let a = disk_rect_area(x, eps, center.x - h, center.x + h, center.y - h, center.y + h);
            return self.weights[k] * a / (4.0 * h * h);
        }
        let side = self.sides[k];
        self.family
            .child_centers()
            .iter()
            .map(|o| self.mass(center + o.scale(side), k + 1, x, eps))
            .sum()
    }
}

/// Per-radius maxima of `μ(D(x, ε)) / ε^s` over seeded random centers `x`
/// of level-`n` squares, for dyadic `ε = 2^{−m}` with `2^{−n} d_n ≤ ε ≤ 1`.
///
/// `μ` gives mass `4^{−n}` to each level-`n` square, spread uniformly.
/// Returns `(ε, max ratio)` pairs from the largest radius down.
pub fn frostman_profile(gauge: &GaugeSequence, n: usize, s: f64, samples: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(0.0..2.0).contains(&s) {
        return Err(QcError::Domain(format!("exponent s must lie in [0, 2), got {s}")));
    }
    if samples == 0 {
        return Err(QcError::Domain("at least one sample center is required".into()));
    }
    gauge.check_supports(n)?;
    let family = Family::Lambda(gauge.clone());
    let tree = MassTree::new(&family, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Point> = (0..samples)
        .map(|_| {
            let digits: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            square_center(&family, &digits)
        })
        .collect();
    let finest = family.side(n);
    let mut out = Vec::new();
    let mut eps = 1.0f64;
    while eps >= finest {
        let best = centers
            .iter()
            .map(|&x| tree.mass(Point::default(), 0, x, eps) / eps.powf(s))
            .fold(0.0f64, f64::max);
        out.push((eps, best));
        eps *= 0.5;
    }
    Ok(out)
}

/// Largest value of [`frostman_profile`].
pub fn frostman_check(gauge: &GaugeSequence, n: usize, s: f64, samples: usize, seed: u64) -> Result<f64> {
    Ok(frostman_profile(gauge, n, s, samples, seed)?
        .into_iter()
        .map(|(_, r)| r)
        .fold(0.0, f64::max))
}

/// Least-squares slope of `log ratio` against `−log ε`; positive means the
/// ratio grows as the radius shrinks.
pub fn frostman_trend(profile: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = profile.iter().map(|&(e, r)| (-e.ln(), r.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauge_values() {
        let g = GaugeSequence::geometric(1.0).unwrap();
        assert_eq!(g.d(3), 0.125);
        assert_eq!(GaugeSequence::sqrt().d(4), 0.25);
        for g in [GaugeSequence::slow(), GaugeSequence::fast(), GaugeSequence::sqrt()] {
            assert_eq!(g.d(0), 1.0);
            for n in 1..=50 {
                assert!(g.d(n) < g.d(n - 1), "{g} at {n}");
            }
        }
    }

    #[test]
    fn gauge_validation() {
        assert!(GaugeSequence::custom(vec![1.0, 0.5, 0.6]).is_err());
        assert!(GaugeSequence::custom(vec![0.9, 0.5]).is_err());
        assert!(GaugeSequence::geometric(0.0).is_err());
        assert!(GaugeSequence::geometric(f64::NAN).is_err());
        let c = GaugeSequence::custom(vec![1.0, 0.5, 0.2]).unwrap();
        assert_relative_eq!(c.ratio(2), 0.4);
    }

    #[test]
    fn gauge_parse_round_trip() {
        for s in [
            "geometric:1",
            "geometric:0.5",
            "slow",
            "fast",
            "sqrt",
            "custom:1,0.5,0.25",
        ] {
            let g: GaugeSequence = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert!("geometric".parse::<GaugeSequence>().is_err());
        assert!("slow:2".parse::<GaugeSequence>().is_err());
        assert!("wobbly".parse::<GaugeSequence>().is_err());
    }

    #[test]
    fn first_level_geometric() {
        let g = GaugeSequence::geometric(1.0).unwrap();
        let l = build_level(&g, 1).unwrap();
        assert_eq!(l.squares.len(), 4);
        assert_eq!(l.side, 0.25);
        assert_eq!(g.inset(1), 0.125);
        assert_eq!(l.total_area(), 0.25);
        let l0 = build_level(&g, 0).unwrap();
        assert_eq!(
            l0.squares,
            vec![Square {
                center: Point::default(),
                side: 1.0
            }]
        );
    }

    #[test]
    fn sigma_levels() {
        let l = build_sigma_level(1).unwrap();
        let xs: Vec<f64> = l.squares.iter().map(|s| s.center.x).collect();
        assert_eq!(xs, vec![-0.375, -0.125, 0.125, 0.375]);
        assert_eq!(l.side, 0.125);
        let l2 = build_sigma_level(2).unwrap();
        assert_eq!(l2.squares.len(), 16);
        assert_relative_eq!(l2.squares[0].center.x, -27.0 / 64.0);
    }

    #[test]
    fn depth_guard_is_enforced() {
        let g = GaugeSequence::sqrt();
        let err = build_family_level(&Family::Lambda(g), 5, 4).unwrap_err();
        assert_eq!(err, QcError::DepthGuard { requested: 5, limit: 4 });
    }

    #[test]
    fn gauge_bounds_geometric() {
        let g = GaugeSequence::geometric(1.0).unwrap();
        let e = dimension_bounds(&g, 50).unwrap();
        assert!(e.lower <= e.upper);
        assert_relative_eq!(e.upper, 1.0, epsilon = 1e-12);
        assert!((e.lower - 1.0).abs() < 0.05);
        assert!(dimension_bounds(&g, 2).is_err());
    }

    #[test]
    fn gauge_bounds_extremes() {
        assert!(dimension_bounds(&GaugeSequence::sqrt(), 400).unwrap().upper >= 1.9);
        let fast100 = dimension_bounds(&GaugeSequence::fast(), 100).unwrap();
        let fast400 = dimension_bounds(&GaugeSequence::fast(), 400).unwrap();
        assert!(fast400.upper < fast100.upper);
        assert!(fast400.upper <= 0.3);
    }

    #[test]
    fn disk_rect_area_cases() {
        let o = Point::default();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(disk_rect_area(o, 1.0, -2.0, 2.0, -2.0, 2.0), pi, epsilon = 1e-14);
        assert_relative_eq!(disk_rect_area(o, 1.0, 0.0, 2.0, -2.0, 2.0), pi / 2.0, epsilon = 1e-14);
        assert_relative_eq!(disk_rect_area(o, 2.0, -0.5, 0.5, -0.5, 0.5), 1.0, epsilon = 1e-14);
        assert_eq!(disk_rect_area(o, 1.0, 3.0, 4.0, 3.0, 4.0), 0.0);
        // square [0,1]^2 against the unit disk at the origin: a quarter disk
        assert_relative_eq!(disk_rect_area(o, 1.0, 0.0, 1.0, 0.0, 1.0), pi / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn interval_boxes_snap() {
        assert_eq!(open_interval_boxes(-0.5, 0.5, 1.0), (0, 0));
        assert_eq!(open_interval_boxes(-0.5, 0.5 + 1e-14, 1.0), (0, 0));
        assert_eq!(open_interval_boxes(-0.4, 0.6, 1.0), (0, 1));
    }
}
