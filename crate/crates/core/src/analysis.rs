//! Exact dilatation-exceedance profiles, David-type area checks, and the
//! growth-rate scenario reports.
//!
//! A David map is allowed unbounded dilatation as long as
//! `area{K > t} ≤ C e^{−α t}` for all `t > K₀`. For a hierarchical map the
//! left side is known exactly: every level contributes `4^{k−1}` scaled
//! copies of one template, so the profile is a short list of
//! `(K, area)` pairs no matter how many squares the map touches.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::cantor::{box_dimension, build_sigma_level, dimension_bounds, DimensionEstimate, Family, GaugeSequence};
use crate::error::{QcError, Result};
use crate::export::{compensated_sum, fmt_real, Real};
use crate::homeo::{curve_homeo, standard_homeo, HierarchicalMap};

/// Relative tolerance under which two cell dilatations count as equal.
pub const THRESHOLD_MERGE_REL: f64 = 1e-12;

/// Relative slack when comparing an area with `C e^{−αt}`.
const DAVID_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSide {
    /// Areas measured in the source of the map.
    Domain,
    /// Areas measured in the target (the domain of the inverse).
    Image,
}

impl FromStr for ProfileSide {
    type Err = QcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "domain" => Ok(ProfileSide::Domain),
            "image" => Ok(ProfileSide::Image),
            _ => Err(QcError::Validation(format!("unknown profile side '{s}'"))),
        }
    }
}

/// `area{K > t}` at every distinct cell dilatation `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DilatationProfile {
    /// `(t, area{K > t})`, sorted by `t`; always starts at `t = 1`.
    pub entries: Vec<(f64, f64)>,
    /// Area of the deepest-level squares, where the limit map is not yet determined.
    pub truncation_bound: f64,
    /// Total area of all gasket cells (including those with `K = 1`).
    pub classified_area: f64,
    pub side: ProfileSide,
}

impl DilatationProfile {
    /// `classified_area + truncation_bound`; equals the unit-square area.
    pub fn total_area(&self) -> f64 {
        self.classified_area + self.truncation_bound
    }

    pub fn max_threshold(&self) -> f64 {
        self.entries.last().map_or(1.0, |e| e.0)
    }

    /// `area{K > t}` for any `t ≥ 1`.
    pub fn exceedance(&self, t: f64) -> f64 {
        match self.entries.iter().rposition(|e| e.0 <= t) {
            Some(i) => self.entries[i].1,
            None => self.entries.first().map_or(0.0, |e| e.1),
        }
    }

    /// CSV with columns `K, exceedance_area, bound_C_alpha, truncation`.
    pub fn to_csv(&self, params: &DavidParams) -> String {
        crate::export::csv(
            &["K", "exceedance_area", "bound_C_alpha", "truncation"],
            self.entries
                .iter()
                .map(|&(k, a)| [k, a, params.bound(k), self.truncation_bound].into_iter().map(fmt_real)),
        )
    }
}

/// Builds `(K, area)` samples into a profile: sorts, merges near-equal
/// dilatations and accumulates exceedance areas from the top.
pub fn profile_from_cells(mut cells: Vec<(f64, f64)>, truncation_bound: f64, side: ProfileSide) -> DilatationProfile {
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let classified_area = compensated_sum(cells.iter().map(|c| c.1));
    let mut groups: Vec<(f64, Vec<f64>)> = vec![(1.0, Vec::new())];
    for (k, area) in cells {
        let last = groups.last_mut().expect("nonempty");
        if (k - last.0).abs() <= THRESHOLD_MERGE_REL * last.0.max(k) {
            last.1.push(area);
        } else {
            groups.push((k, vec![area]));
        }
    }
    let mut entries = vec![(0.0, 0.0); groups.len()];
    let mut above: Vec<f64> = Vec::new();
    for (i, (k, areas)) in groups.iter().enumerate().rev() {
        entries[i] = (*k, compensated_sum(above.iter().copied()));
        above.extend(areas.iter().copied());
    }
    DilatationProfile {
        entries,
        truncation_bound,
        classified_area,
        side,
    }
}

/// Exact exceedance profile of a hierarchical map on the chosen side.
pub fn dilatation_profile(map: &HierarchicalMap, side: ProfileSide) -> DilatationProfile {
    let family: &Family = match side {
        ProfileSide::Domain => map.source(),
        ProfileSide::Image => map.target(),
    };
    let mut cells = Vec::new();
    for t in map.levels() {
        let scale = family.level_area(t.level - 1);
        let areas = match side {
            ProfileSide::Domain => t.source_areas(),
            ProfileSide::Image => t.target_areas(),
        };
        cells.extend(t.cell_k.iter().zip(areas).map(|(&k, a)| (k, a * scale)));
    }
    profile_from_cells(cells, family.level_area(map.depth()), side)
}

/// Constants of the area bound `C e^{−α t}` for `t > K₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DavidParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
}

impl DavidParams {
    pub fn new(c: f64, alpha: f64, k0: f64) -> Result<Self> {
        if !(c > 0.0 && alpha > 0.0 && k0 >= 1.0) || !(c.is_finite() && alpha.is_finite()) {
            return Err(QcError::Domain(format!(
                "invalid David parameters C={c}, α={alpha}, K0={k0}"
            )));
        }
        Ok(Self { c, alpha, k0 })
    }

    pub fn bound(&self, t: f64) -> f64 {
        self.c * (-self.alpha * t).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DavidVerdict {
    pub passed: bool,
    /// `min ln(C e^{−αt} / (area + truncation))` over checked thresholds;
    /// `+∞` when nothing is checked.
    pub margin: f64,
    /// Thresholds above `K₀`, i.e. the number of comparisons made.
    pub thresholds_checked: usize,
}

/// Checks `area{K > t} + truncation ≤ C e^{−αt}` at every profile
/// threshold `t > K₀`.
pub fn check_david(profile: &DilatationProfile, params: &DavidParams) -> DavidVerdict {
    let mut margin = f64::INFINITY;
    let mut passed = true;
    let mut checked = 0;
    let log_c = params.c.ln();
    for &(t, area) in profile.entries.iter().filter(|e| e.0 > params.k0) {
        checked += 1;
        let lhs = area + profile.truncation_bound;
        let log_bound = log_c - params.alpha * t;
        if lhs > 0.0 {
            margin = margin.min(log_bound - lhs.ln());
            if lhs > params.bound(t) * (1.0 + DAVID_SLACK) {
                passed = false;
            }
        }
    }
    DavidVerdict {
        passed,
        margin,
        thresholds_checked: checked,
    }
}

/// Smallest `K₀ ∈ {1} ∪ thresholds` for which [`check_david`] passes with
/// the given `C` and `α`.
pub fn minimal_k0(profile: &DilatationProfile, c: f64, alpha: f64) -> f64 {
    let bound = |t: f64| c * (-alpha * t).exp();
    profile
        .entries
        .iter()
        .filter(|&&(t, a)| a + profile.truncation_bound > bound(t) * (1.0 + DAVID_SLACK))
        .map(|e| e.0)
        .fold(1.0, f64::max)
}

/// Fits `C` and `α` by least squares of `ln(area + truncation)` against
/// `t` over the thresholds above the median, then takes the smallest `K₀`
/// that makes the fitted bound pass.
pub fn fit_david(profile: &DilatationProfile) -> Result<DavidParams> {
    let pts: Vec<(f64, f64)> = profile
        .entries
        .iter()
        .map(|&(t, a)| (t, a + profile.truncation_bound))
        .filter(|p| p.1 > 0.0)
        .collect();
    if pts.len() < 3 {
        return Err(QcError::DegenerateFit(format!(
            "need at least 3 thresholds with positive area, found {}",
            pts.len()
        )));
    }
    let tail = &pts[pts.len() / 2..];
    let m = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let my = tail.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(QcError::DegenerateFit("tail thresholds coincide".into()));
    }
    let alpha = -sxy / sxx;
    if !(alpha > 0.0) {
        return Err(QcError::DegenerateFit(format!(
            "tail areas do not decay (slope {})",
            -alpha
        )));
    }
    let c = (my + alpha * mx).exp();
    let k0 = minimal_k0(profile, c, alpha);
    DavidParams::new(c, alpha, k0)
}

/// Range of Hausdorff dimensions a `K`-quasiconformal map can send a set of
/// dimension `alpha` to: `(1/K)(1/α − 1/2) ≤ 1/β − 1/2 ≤ K(1/α − 1/2)`.
pub fn qc_dimension_bounds(k: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(QcError::Domain(format!("dilatation must be ≥ 1, got {k}")));
    }
    if !(0.0..=2.0).contains(&alpha) {
        return Err(QcError::Domain(format!("dimension must lie in [0, 2], got {alpha}")));
    }
    if alpha == 0.0 || alpha == 2.0 {
        return Ok((alpha, alpha));
    }
    let c = 1.0 / alpha - 0.5;
    let lo = 1.0 / (0.5 + c * k);
    let hi = 1.0 / (0.5 + c / k);
    Ok((lo.clamp(0.0, 2.0), hi.clamp(0.0, 2.0)))
}

/// Critical integrability exponent `K / (K − 1)` of a `K`-quasiconformal map.
pub fn p_of_k(k: f64) -> Result<f64> {
    if !(k > 1.0) {
        return Err(QcError::Domain(format!("exponent is defined for K > 1, got {k}")));
    }
    Ok(k / (k - 1.0))
}

/// The growth scenarios: pairs of constructions whose standard maps have
/// unbounded but controlled dilatation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scenario {
    /// `slow → geometric(ν)`: level dilatation grows like `ln k`.
    SlowToGeometric { nu: f64 },
    /// `geometric(ν) → fast`: grows like `k^{ln 2}`.
    GeometricToFast { nu: f64 },
    /// `slow → fast`: grows like `k^{ln 2} ln k`.
    SlowToFast,
    /// Linear set `Σ` onto `Λ(sqrt)`: grows like `√k`.
    SigmaToSqrt,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::SlowToGeometric { nu } => write!(f, "slow-to-geometric:{nu}"),
            Scenario::GeometricToFast { nu } => write!(f, "geometric-to-fast:{nu}"),
            Scenario::SlowToFast => f.write_str("slow-to-fast"),
            Scenario::SigmaToSqrt => f.write_str("sigma-to-sqrt"),
        }
    }
}

impl FromStr for Scenario {
    type Err = QcError;
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let nu = || -> Result<f64> {
            let nu = match param {
                Some(p) => p
                    .parse::<f64>()
                    .map_err(|_| QcError::Validation(format!("bad ν in '{s}'")))?,
                None => 1.0,
            };
            if nu > 0.0 && nu.is_finite() {
                Ok(nu)
            } else {
                Err(QcError::Validation(format!("ν must be positive in '{s}'")))
            }
        };
        let no_param = |sc: Scenario| match param {
            None => Ok(sc),
            Some(_) => Err(QcError::Validation(format!("scenario '{name}' takes no parameter"))),
        };
        match name {
            "slow-to-geometric" => Ok(Scenario::SlowToGeometric { nu: nu()? }),
            "geometric-to-fast" => Ok(Scenario::GeometricToFast { nu: nu()? }),
            "slow-to-fast" => no_param(Scenario::SlowToFast),
            "sigma-to-sqrt" => no_param(Scenario::SigmaToSqrt),
            _ => Err(QcError::Validation(format!("unknown scenario '{s}'"))),
        }
    }
}

/// Frozen `K₀` with `(C, α) = (1, 1)` as `(forward, inverse)`: the largest
/// minimal passing `K₀` over depths `1..=64`, rounded up. Only the
/// scenarios with `ν = 1` are frozen.
///
/// For `slow-to-fast` and `sigma-to-sqrt` the minimal value equals the top
/// threshold at every depth up to 64, so their checks are vacuous there.
pub const FROZEN_K0: [(&str, f64, f64); 4] = [
    ("slow-to-geometric:1", 10.2501, 4.1972),
    ("geometric-to-fast:1", 26.3568, 1.9680),
    ("slow-to-fast", 505.9031, 505.9031),
    ("sigma-to-sqrt", 353.7559, 353.7559),
];

/// Frozen bands for `K_k / rate(k)` over `k ∈ [3, 14]` (`[2, 20]` for
/// `sigma-to-sqrt`). Measured ranges: `[3.319, 3.821]`, `[1.982, 3.286]`,
/// `[6.285, 7.008]`, `[34.25, 43.09]`.
pub const FROZEN_GROWTH_BANDS: [(&str, f64, f64); 4] = [
    ("slow-to-geometric:1", 3.3, 3.85),
    ("geometric-to-fast:1", 1.95, 3.3),
    ("slow-to-fast", 6.25, 7.05),
    ("sigma-to-sqrt", 34.0, 43.5),
];

fn frozen_lookup(table: &[(&str, f64, f64)], key: &str) -> Option<(f64, f64)> {
    table.iter().find(|e| e.0 == key).map(|e| (e.1, e.2))
}

impl Scenario {
    pub fn build(&self, n: usize) -> Result<HierarchicalMap> {
        match *self {
            Scenario::SlowToGeometric { nu } => {
                standard_homeo(&GaugeSequence::slow(), &GaugeSequence::geometric(nu)?, n)
            }
            Scenario::GeometricToFast { nu } => {
                standard_homeo(&GaugeSequence::geometric(nu)?, &GaugeSequence::fast(), n)
            }
            Scenario::SlowToFast => standard_homeo(&GaugeSequence::slow(), &GaugeSequence::fast(), n),
            Scenario::SigmaToSqrt => curve_homeo(n),
        }
    }

    /// Expected growth of the level-`k` dilatation.
    pub fn rate(&self, k: usize) -> f64 {
        let x = k as f64;
        let l2 = std::f64::consts::LN_2;
        match self {
            Scenario::SlowToGeometric { .. } => x.ln(),
            Scenario::GeometricToFast { .. } => x.powf(l2),
            Scenario::SlowToFast => x.powf(l2) * x.ln(),
            Scenario::SigmaToSqrt => x.sqrt(),
        }
    }

    pub fn rate_name(&self) -> &'static str {
        match self {
            Scenario::SlowToGeometric { .. } => "ln k",
            Scenario::GeometricToFast { .. } => "k^ln2",
            Scenario::SlowToFast => "k^ln2 ln k",
            Scenario::SigmaToSqrt => "sqrt k",
        }
    }

    /// Levels over which the growth band is asserted.
    pub fn band_levels(&self) -> std::ops::RangeInclusive<usize> {
        match self {
            Scenario::SigmaToSqrt => 2..=20,
            _ => 3..=14,
        }
    }

    /// Frozen `(forward, inverse)` K₀, if this scenario has one.
    pub fn frozen_k0(&self) -> Option<(f64, f64)> {
        frozen_lookup(&FROZEN_K0, &self.to_string())
    }

    pub fn frozen_growth_band(&self) -> Option<(f64, f64)> {
        frozen_lookup(&FROZEN_GROWTH_BANDS, &self.to_string())
    }

    fn endpoint_dimensions(&self) -> Result<(DimensionEstimate, DimensionEstimate)> {
        let bounds = |g: GaugeSequence| dimension_bounds(&g, ENDPOINT_DEPTH);
        Ok(match *self {
            Scenario::SlowToGeometric { nu } => {
                (bounds(GaugeSequence::slow())?, bounds(GaugeSequence::geometric(nu)?)?)
            }
            Scenario::GeometricToFast { nu } => {
                (bounds(GaugeSequence::geometric(nu)?)?, bounds(GaugeSequence::fast())?)
            }
            Scenario::SlowToFast => (bounds(GaugeSequence::slow())?, bounds(GaugeSequence::fast())?),
            Scenario::SigmaToSqrt => (
                box_dimension(build_sigma_level, &[4, 6, 8])?,
                bounds(GaugeSequence::sqrt())?,
            ),
        })
    }
}

/// Tail depth used for endpoint dimension bounds in reports.
pub const ENDPOINT_DEPTH: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelGrowth {
    pub level: usize,
    #[serde(rename = "K")]
    pub k: Real,
    #[serde(rename = "K_inverse")]
    pub k_inverse: Real,
    pub rate: Real,
    pub ratio: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionCheck {
    pub passed: bool,
    pub margin: Real,
    #[serde(rename = "K0")]
    pub k0: Real,
    /// Profile thresholds above `K₀`; 0 means the check was vacuous.
    pub thresholds_checked: usize,
    #[serde(rename = "minimal_K0")]
    pub minimal_k0: Real,
    pub max_threshold: Real,
    pub truncation: Real,
    pub conservation_defect: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthCheck {
    pub depth: usize,
    pub forward: DirectionCheck,
    pub inverse: DirectionCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndpointDimensions {
    pub source: DimensionEstimate,
    pub target: DimensionEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub n_max: usize,
    pub rate: &'static str,
    #[serde(rename = "C")]
    pub c: Real,
    pub alpha: Real,
    pub per_level: Vec<LevelGrowth>,
    pub per_depth: Vec<DepthCheck>,
    pub endpoint_dimensions: EndpointDimensions,
}

impl ScenarioReport {
    pub fn all_passed(&self) -> bool {
        self.per_depth.iter().all(|d| d.forward.passed && d.inverse.passed)
    }

    pub fn to_json(&self) -> String {
        crate::export::to_json(self)
    }
}

/// Per-depth David verdict for one direction.
pub fn direction_check(map: &HierarchicalMap, side: ProfileSide, params: &DavidParams) -> DirectionCheck {
    let profile = dilatation_profile(map, side);
    let verdict = check_david(&profile, params);
    DirectionCheck {
        passed: verdict.passed,
        margin: Real(verdict.margin),
        k0: Real(params.k0),
        thresholds_checked: verdict.thresholds_checked,
        minimal_k0: Real(minimal_k0(&profile, params.c, params.alpha)),
        max_threshold: Real(profile.max_threshold()),
        truncation: Real(profile.truncation_bound),
        conservation_defect: Real((profile.total_area() - 1.0).abs()),
    }
}

/// Growth rates and David checks of a scenario for all depths `1..=n_max`.
///
/// `k0` overrides the frozen `(forward, inverse)` constants; it is required
/// for scenarios without frozen values.
pub fn scenario_report(scenario: Scenario, n_max: usize, k0: Option<(f64, f64)>) -> Result<ScenarioReport> {
    if n_max < 3 {
        return Err(QcError::Domain(format!("reports need n_max ≥ 3, got {n_max}")));
    }
    let (k0_fwd, k0_inv) = k0
        .or_else(|| scenario.frozen_k0())
        .ok_or_else(|| QcError::Validation(format!("no frozen K0 for {scenario}; pass one explicitly")))?;
    let fwd = DavidParams::new(1.0, 1.0, k0_fwd)?;
    let inv = DavidParams::new(1.0, 1.0, k0_inv)?;
    let full = scenario.build(n_max)?;
    let inverse = full.invert();
    let per_level = full
        .max_dilatation_per_level()
        .into_iter()
        .zip(inverse.max_dilatation_per_level())
        .map(|((level, k), (_, ki))| {
            let rate = scenario.rate(level);
            LevelGrowth {
                level,
                k: Real(k),
                k_inverse: Real(ki),
                rate: Real(rate),
                ratio: Real(k / rate),
            }
        })
        .collect();
    let per_depth = (1..=n_max)
        .map(|n| {
            let m = full.truncated(n);
            DepthCheck {
                depth: n,
                forward: direction_check(&m, ProfileSide::Domain, &fwd),
                inverse: direction_check(&m.invert(), ProfileSide::Domain, &inv),
            }
        })
        .collect();
    let (source, target) = scenario.endpoint_dimensions()?;
    Ok(ScenarioReport {
        scenario: scenario.to_string(),
        n_max,
        rate: scenario.rate_name(),
        c: Real(1.0),
        alpha: Real(1.0),
        per_level,
        per_depth,
        endpoint_dimensions: EndpointDimensions { source, target },
    })
}
