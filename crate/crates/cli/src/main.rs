#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qcforge_core::acceptance::{run_criterion, CRITERIA};
use qcforge_core::analysis::{
    dilatation_profile, direction_check, scenario_report, DavidParams, ProfileSide, Scenario,
};
use qcforge_core::cantor::{
    box_dimension, build_family_level, build_sigma_level, depth_guard, dimension_bounds, frostman_profile,
    frostman_trend, CantorLevel, Family, GaugeSequence,
};
use qcforge_core::export::{csv, fmt_real, to_json, Real};
use qcforge_core::geometry::Point;
use qcforge_core::homeo::{
    curve_homeo, curve_polyline, curve_square_count, sigma_to_lambda, standard_homeo, HierarchicalMap,
};
use qcforge_core::qcmaps::{annulus_between, annulus_rate, twist_extension, validate, PiecewiseAffineMap};

#[derive(Parser)]
#[command(
    name = "qcforge",
    version,
    about = "Cantor constructions, piecewise-affine extensions and dilatation checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// Write to this file (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// Selects a hierarchical map either by scenario or by an explicit pair.
#[derive(Args)]
struct MapArgs {
    /// Scenario: slow-to-geometric[:ν], geometric-to-fast[:ν], slow-to-fast, sigma-to-sqrt.
    #[arg(long = "case", conflicts_with_all = ["gauge", "target"])]
    case: Option<Scenario>,
    /// Source gauge (`kind[:param]`) or `sigma`.
    #[arg(long)]
    gauge: Option<String>,
    /// Target gauge (`kind[:param]`).
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 10)]
    depth: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Squares of level `depth` of Λ(gauge).
    Cantor {
        #[arg(long)]
        gauge: GaugeSequence,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Squares of level `depth` of the linear set Σ.
    Sigma {
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Dimension bounds at tail depth N, or box counting for `--gauge sigma`.
    Dims {
        #[arg(long)]
        gauge: String,
        #[arg(long, default_value_t = 50)]
        depth: usize,
        /// Also run the mass-distribution check with this exponent.
        #[arg(long)]
        frostman: Option<f64>,
        #[arg(long, default_value_t = 8)]
        frostman_depth: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Extension between square annuli with holes of half-width a and b.
    Annulus {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Twist map exchanging side-by-side holes for stacked holes.
    Twist {
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Per-level summary of a hierarchical map, optionally evaluated at a point.
    Homeo {
        #[command(flatten)]
        map: MapArgs,
        /// Evaluate at `x,y`.
        #[arg(long, value_parser = parse_point)]
        point: Option<Point>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Exceedance-area profile `area{K > t}`.
    Profile {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_enum, default_value = "domain")]
        side: SideArg,
        /// Profile the inverse map instead.
        #[arg(long)]
        inverse: bool,
        #[command(flatten)]
        david: DavidArgs,
        #[command(flatten)]
        output: Output,
    },
    /// David-condition check, forward and inverse. Exit code 2 on failure.
    David {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        david: DavidArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Image of the unit segment under the curve map, as a polyline.
    Curve {
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Full scenario report, or the acceptance checks. Exit code 2 on failure.
    Report {
        #[arg(long = "case", required_unless_present = "acceptance")]
        case: Option<Scenario>,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// `F[,I]`: K₀ for the forward and inverse checks.
        #[arg(long, value_parser = parse_k0)]
        k0: Option<(f64, f64)>,
        /// Criterion number 1–10 or `all`.
        #[arg(long, conflicts_with = "case")]
        acceptance: Option<String>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Domain,
    Image,
}

#[derive(Args)]
struct DavidArgs {
    /// `F[,I]`: K₀ for the forward and inverse checks; defaults to the frozen values.
    #[arg(long, value_parser = parse_k0)]
    k0: Option<(f64, f64)>,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = y.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Point::new(x, y))
}

fn parse_k0(s: &str) -> Result<(f64, f64), String> {
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    match s.split_once(',') {
        Some((f, i)) => Ok((parse(f)?, parse(i)?)),
        None => parse(s).map(|v| (v, v)),
    }
}

/// Outcome of a command that ran to completion.
enum Verdict {
    Ok,
    Failed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> anyhow::Result<Verdict> {
    match command {
        Command::Cantor { gauge, depth, output } => {
            let level = build_family_level(&Family::Lambda(gauge), depth, depth_guard())?;
            emit_level(&level, &output)
        }
        Command::Sigma { depth, output } => {
            let level = build_family_level(&Family::Sigma, depth, depth_guard())?;
            emit_level(&level, &output)
        }
        Command::Dims {
            gauge,
            depth,
            frostman,
            frostman_depth,
            samples,
            seed,
            output,
        } => dims(&gauge, depth, frostman, frostman_depth, samples, seed, &output),
        Command::Annulus { a, b, tol, output } => {
            let map = annulus_between(a, b)?;
            let rate = annulus_rate(a.min(b), a.max(b));
            extension(
                &map,
                tol,
                json!({ "a": Real(a), "b": Real(b), "rate": Real(rate) }),
                &output,
            )
        }
        Command::Twist { a, tol, output } => {
            let map = twist_extension(a)?;
            extension(&map, tol, json!({ "a": Real(a) }), &output)
        }
        Command::Homeo {
            map,
            point,
            tol,
            output,
        } => {
            let m = build_map(&map)?;
            homeo(&m, point, tol, &output)
        }
        Command::Profile {
            map,
            side,
            inverse,
            david,
            output,
        } => {
            let m = build_map(&map)?;
            let (m, k0) = if inverse {
                (m.invert(), david_k0(&map, &david)?.1)
            } else {
                (m, david_k0(&map, &david)?.0)
            };
            let side = match side {
                SideArg::Domain => ProfileSide::Domain,
                SideArg::Image => ProfileSide::Image,
            };
            let params = DavidParams::new(david.c, david.alpha, k0)?;
            let profile = dilatation_profile(&m, side);
            let text = match output.format.unwrap_or(Format::Csv) {
                Format::Csv => profile.to_csv(&params),
                Format::Json => to_json(&json!({
                    "depth": m.depth(),
                    "side": side_name(side),
                    "inverse": inverse,
                    "params": params_json(&params),
                    "truncation": Real(profile.truncation_bound),
                    "classified_area": Real(profile.classified_area),
                    "entries": profile.entries.iter().map(|&(k, a)| [Real(k), Real(a)]).collect::<Vec<_>>(),
                })),
            };
            write_output(&output, &text)?;
            Ok(Verdict::Ok)
        }
        Command::David { map, david, output } => {
            let m = build_map(&map)?;
            let (kf, ki) = david_k0(&map, &david)?;
            let fwd = direction_check(&m, ProfileSide::Domain, &DavidParams::new(david.c, david.alpha, kf)?);
            let inv = direction_check(
                &m.invert(),
                ProfileSide::Domain,
                &DavidParams::new(david.c, david.alpha, ki)?,
            );
            let passed = fwd.passed && inv.passed;
            let text = match output.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&json!({
                    "depth": m.depth(),
                    "C": Real(david.c),
                    "alpha": Real(david.alpha),
                    "passed": passed,
                    "forward": fwd,
                    "inverse": inv,
                })),
                Format::Csv => csv(
                    &[
                        "direction",
                        "passed",
                        "margin",
                        "K0",
                        "thresholds_checked",
                        "minimal_K0",
                        "truncation",
                    ],
                    [("forward", &fwd), ("inverse", &inv)].into_iter().map(|(name, c)| {
                        vec![
                            name.to_string(),
                            c.passed.to_string(),
                            fmt_real(c.margin.0),
                            fmt_real(c.k0.0),
                            c.thresholds_checked.to_string(),
                            fmt_real(c.minimal_k0.0),
                            fmt_real(c.truncation.0),
                        ]
                    }),
                ),
            };
            write_output(&output, &text)?;
            Ok(if passed { Verdict::Ok } else { Verdict::Failed })
        }
        Command::Curve { depth, tol, output } => curve(depth, tol, &output),
        Command::Report {
            case,
            depth,
            k0,
            acceptance,
            output,
        } => match acceptance {
            Some(which) => acceptance_report(&which, &output),
            None => {
                let case = case.expect("clap requires --case without --acceptance");
                let report = scenario_report(case, depth, k0)?;
                write_output(&output, &report.to_json())?;
                Ok(if report.all_passed() {
                    Verdict::Ok
                } else {
                    Verdict::Failed
                })
            }
        },
    }
}

fn side_name(side: ProfileSide) -> &'static str {
    match side {
        ProfileSide::Domain => "domain",
        ProfileSide::Image => "image",
    }
}

fn params_json(p: &DavidParams) -> Value {
    json!({ "C": Real(p.c), "alpha": Real(p.alpha), "K0": Real(p.k0) })
}

fn build_map(args: &MapArgs) -> anyhow::Result<HierarchicalMap> {
    if let Some(case) = args.case {
        return Ok(case.build(args.depth)?);
    }
    let (Some(src), Some(dst)) = (&args.gauge, &args.target) else {
        bail!("either --case or both --gauge and --target are required");
    };
    let dst: GaugeSequence = dst.parse()?;
    if src == "sigma" {
        Ok(sigma_to_lambda(&dst, args.depth)?)
    } else {
        let src: GaugeSequence = src.parse()?;
        Ok(standard_homeo(&src, &dst, args.depth)?)
    }
}

fn david_k0(map: &MapArgs, david: &DavidArgs) -> anyhow::Result<(f64, f64)> {
    if let Some(k0) = david.k0 {
        return Ok(k0);
    }
    map.case
        .and_then(|c| c.frozen_k0())
        .context("no frozen K0 for this map; pass --k0")
}

fn emit_level(level: &CantorLevel, output: &Output) -> anyhow::Result<Verdict> {
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => level.to_json(),
        Format::Csv => csv(
            &["index", "x", "y", "side"],
            level.squares.iter().enumerate().map(|(i, s)| {
                vec![
                    i.to_string(),
                    fmt_real(s.center.x),
                    fmt_real(s.center.y),
                    fmt_real(s.side),
                ]
            }),
        ),
    };
    write_output(output, &text)?;
    Ok(Verdict::Ok)
}

fn dims(
    gauge: &str,
    depth: usize,
    frostman: Option<f64>,
    frostman_depth: usize,
    samples: usize,
    seed: u64,
    output: &Output,
) -> anyhow::Result<Verdict> {
    let mut out = serde_json::Map::new();
    out.insert("gauge".into(), json!(gauge));
    let estimate = if gauge == "sigma" {
        if frostman.is_some() {
            bail!("--frostman applies to gauge constructions only");
        }
        let depths: Vec<usize> = (2..=depth)
            .rev()
            .step_by(2)
            .take(3)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        if depths.len() < 2 {
            bail!("box counting needs --depth ≥ 4");
        }
        box_dimension(build_sigma_level, &depths)?
    } else {
        let g: GaugeSequence = gauge.parse()?;
        if let Some(s) = frostman {
            let profile = frostman_profile(&g, frostman_depth, s, samples, seed)?;
            out.insert(
                "frostman".into(),
                json!({
                    "s": Real(s),
                    "depth": frostman_depth,
                    "samples": samples,
                    "seed": seed,
                    "trend": Real(frostman_trend(&profile)),
                    "profile": profile.iter().map(|&(e, r)| [Real(e), Real(r)]).collect::<Vec<_>>(),
                }),
            );
        }
        dimension_bounds(&g, depth)?
    };
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => {
            out.insert("depth".into(), json!(depth));
            out.insert(
                "estimate".into(),
                json!({
                    "value": Real(estimate.value),
                    "lower": Real(estimate.lower),
                    "upper": Real(estimate.upper),
                    "method": estimate.method,
                    "scales_used": estimate.scales_used.iter().copied().map(Real).collect::<Vec<_>>(),
                }),
            );
            to_json(&Value::Object(out))
        }
        Format::Csv => csv(
            &["lower", "value", "upper"],
            [[estimate.lower, estimate.value, estimate.upper].map(fmt_real)],
        ),
    };
    write_output(output, &text)?;
    Ok(Verdict::Ok)
}

fn extension(map: &PiecewiseAffineMap, tol: f64, head: Value, output: &Output) -> anyhow::Result<Verdict> {
    if !(tol > 0.0) {
        bail!("--tol must be positive");
    }
    let report = validate(map, map.boundary.target_area(), tol);
    let passed = report.passes(tol);
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = head;
            let obj = v.as_object_mut().expect("object");
            obj.insert("max_K".into(), json!(Real(report.max_dilatation)));
            obj.insert(
                "validation".into(),
                json!({
                    "passed": passed,
                    "continuous": report.continuous,
                    "oriented": report.oriented,
                    "boundary_ok": report.boundary_ok,
                    "area_defect": Real(report.surjective_area_defect),
                }),
            );
            obj.insert("map".into(), serde_json::from_str(&map.to_json())?);
            to_json(&v)
        }
        Format::Csv => csv(
            &["cell", "K"],
            report
                .dilatation_by_cell
                .iter()
                .map(|&(i, k)| vec![i.to_string(), fmt_real(k)]),
        ),
    };
    write_output(output, &text)?;
    Ok(if passed { Verdict::Ok } else { Verdict::Failed })
}

fn homeo(m: &HierarchicalMap, point: Option<Point>, tol: f64, output: &Output) -> anyhow::Result<Verdict> {
    if !(tol > 0.0) {
        bail!("--tol must be positive");
    }
    let text = match (output.format.unwrap_or(Format::Json), point) {
        (Format::Json, None) => m.summary_json(),
        (Format::Json, Some(z)) => {
            let e = m.evaluate(z, tol);
            to_json(&json!({
                "point": [Real(z.x), Real(z.y)],
                "image": [Real(e.point.x), Real(e.point.y)],
                "error_bound": Real(e.error_bound),
                "level": e.level,
                "resolved": e.resolved,
            }))
        }
        (Format::Csv, _) => csv(
            &["level", "max_K", "gasket_regions"],
            m.max_dilatation_per_level()
                .into_iter()
                .map(|(k, kk)| vec![k.to_string(), fmt_real(kk), m.gasket_regions(k).to_string()]),
        ),
    };
    write_output(output, &text)?;
    Ok(Verdict::Ok)
}

fn curve(depth: usize, tol: f64, output: &Output) -> anyhow::Result<Verdict> {
    let map = curve_homeo(depth)?;
    let text = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let guard = depth_guard();
            if depth > guard {
                bail!("polyline depth {depth} exceeds the materialization guard {guard}");
            }
            curve_polyline(&map, tol)?.to_csv()
        }
        Format::Json => {
            let count = curve_square_count(&map)?;
            let scale = map.target().side(depth);
            let estimate = if depth == 0 {
                f64::NAN
            } else {
                (count as f64).ln() / -scale.ln()
            };
            let expected = if depth == 0 {
                f64::NAN
            } else {
                2.0 / (1.0 + (depth as f64).powf(-0.5))
            };
            to_json(&json!({
                "depth": depth,
                "squares_met": count.to_string(),
                "square_side": Real(scale),
                "dimension_estimate": Real(estimate),
                "expected": Real(expected),
                "max_K": Real(map.max_dilatation()),
            }))
        }
    };
    write_output(output, &text)?;
    Ok(Verdict::Ok)
}

fn acceptance_report(which: &str, output: &Output) -> anyhow::Result<Verdict> {
    let ids: Vec<usize> = if which == "all" {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        let id: usize = which.parse().with_context(|| format!("bad criterion '{which}'"))?;
        if !CRITERIA.iter().any(|c| c.0 == id) {
            bail!("criterion {id} does not exist (1–{})", CRITERIA.len());
        }
        vec![id]
    };
    let results: Vec<_> = ids.into_iter().filter_map(run_criterion).collect();
    let passed = results.iter().all(|r| r.passed);
    let text = match output.format {
        Some(Format::Json) => to_json(&results),
        Some(Format::Csv) => csv(
            &["id", "name", "passed", "seconds", "detail"],
            results.iter().map(|r| {
                vec![
                    r.id.to_string(),
                    r.name.to_string(),
                    r.passed.to_string(),
                    format!("{:.3}", r.seconds),
                    format!("\"{}\"", r.detail.replace('"', "\"\"")),
                ]
            }),
        ),
        None => results.iter().map(|r| r.line() + "\n").collect(),
    };
    write_output(output, &text)?;
    Ok(if passed { Verdict::Ok } else { Verdict::Failed })
}

/// Writes to `--out` through a temporary sibling file and a rename, or to stdout.
fn write_output(output: &Output, text: &str) -> anyhow::Result<()> {
    match &output.out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => write_atomic(path, text)?,
    }
    Ok(())
}

fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("invalid output path {}", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(text.as_bytes())?;
            f.sync_all()
        })
        .and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}
