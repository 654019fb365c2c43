use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::{json, Value};

use hetbias_core::experiments::{run_invariance_study, ExperimentConfig};
use hetbias_core::inference::{
    hccme_report, screening, HccmeReport, RegressionDataset, ReportLabel, ScreeningOutcome,
};
use hetbias_core::minimax::{
    a_star_analytic, bias_profile, default_a_max, minimax_a_numeric, normal_asymptotic_biases,
    normal_asymptotic_profile, worst_case_pair, Normalization,
};
use hetbias_core::regressor::{
    generate_with_moments, nearest_three_point_m, standardize, three_point_sequence, MomentTarget,
    RegressorSequence,
};
use hetbias_core::Error as CoreError;

use crate::args::{AuditArgs, BiasCurveArgs, GridArgs, MinimaxArgs, SourceArgs, Table1Args};
use crate::data::read_columns;
use crate::error::{CliError, CliResult};
use crate::table::{fmt_human, fmt_machine, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha) standard normals";
/// Relative slack when snapping a command-line M to an exact three-point shape.
const THREE_POINT_SNAP: f64 = 1e-6;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone)]
enum Source {
    ThreePoint {
        t: usize,
        m: f64,
    },
    Generate {
        t: usize,
        skewness: f64,
        kurtosis: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        column: String,
    },
    AsymptoticNormal,
}

impl Source {
    fn resolve(args: &SourceArgs, asymptotic_normal: bool) -> CliResult<Self> {
        let chosen = [
            args.three_point.is_some(),
            args.generate.is_some(),
            args.csv.is_some(),
            asymptotic_normal,
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if chosen != 1 {
            return Err(usage("choose exactly one regressor source: --three-point, --generate, --csv or --asymptotic-normal"));
        }
        if args.col.is_some() && args.csv.is_none() {
            return Err(usage("--col requires --csv"));
        }
        if asymptotic_normal {
            return Ok(Source::AsymptoticNormal);
        }
        if let Some(v) = &args.three_point {
            return Ok(Source::ThreePoint {
                t: sample_size(v[0])?,
                m: v[1],
            });
        }
        if let Some(v) = &args.generate {
            return Ok(Source::Generate {
                t: sample_size(v[0])?,
                skewness: v[1],
                kurtosis: v[2],
                seed: args.seed,
            });
        }
        let path = args.csv.clone().expect("csv source");
        let column = args
            .col
            .clone()
            .ok_or_else(|| usage("--csv requires --col"))?;
        Ok(Source::Csv { path, column })
    }

    fn describe(&self) -> String {
        match self {
            Source::ThreePoint { t, m } => format!("three-point T={t} M={m}"),
            Source::Generate {
                t,
                skewness,
                kurtosis,
                ..
            } => {
                format!("generate T={t} skewness={skewness} kurtosis={kurtosis}")
            }
            Source::Csv { path, column } => format!("csv {} column {column}", path.display()),
            Source::AsymptoticNormal => "asymptotic-normal".into(),
        }
    }

    fn sequence(&self) -> CliResult<RegressorSequence> {
        match self {
            Source::ThreePoint { t, m } => {
                let m = nearest_three_point_m(*t, *m, THREE_POINT_SNAP)?;
                Ok(three_point_sequence(*t, m)?)
            }
            Source::Generate {
                t,
                skewness,
                kurtosis,
                seed,
            } => {
                let target = MomentTarget::new(*skewness, *kurtosis)?;
                Ok(generate_with_moments(*t, &target, *seed)?)
            }
            Source::Csv { path, column } => {
                let cols = read_columns(path, &[column.as_str()])?;
                Ok(standardize(&cols[0])?)
            }
            Source::AsymptoticNormal => {
                Err(usage("the asymptotic-normal source has no finite sequence"))
            }
        }
    }
}

fn sample_size(v: f64) -> CliResult<usize> {
    if v >= 3.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(usage(format!(
            "sample size must be an integer >= 3, got {v}"
        )))
    }
}

fn grid(args: &GridArgs) -> CliResult<Vec<f64>> {
    if args.a_steps == 0 {
        return Err(usage("--a-steps must be at least 1"));
    }
    if !(args.a_min >= 0.0 && args.a_min.is_finite() && args.a_max.is_finite()) {
        return Err(usage("a-grid bounds must be finite with --a-min >= 0"));
    }
    if args.a_steps == 1 {
        return Ok(vec![args.a_min]);
    }
    if !(args.a_max > args.a_min) {
        return Err(usage("--a-max must exceed --a-min"));
    }
    let step = (args.a_max - args.a_min) / (args.a_steps - 1) as f64;
    Ok((0..args.a_steps)
        .map(|i| {
            if i + 1 == args.a_steps {
                args.a_max
            } else {
                args.a_min + step * i as f64
            }
        })
        .collect())
}

fn check_u(u: f64) -> CliResult<f64> {
    if u > 0.0 && u.is_finite() {
        Ok(u)
    } else {
        Err(usage(format!("--u must be positive, got {u}")))
    }
}

fn describe_sequence(table: &mut Table, reg: &RegressorSequence) {
    table
        .meta("t", reg.t_count())
        .meta("s_squared", fmt_machine(reg.s_squared()))
        .meta("skewness", fmt_machine(reg.skewness()))
        .meta("kurtosis", fmt_machine(reg.kurtosis()));
}

pub fn bias_curve(args: &BiasCurveArgs, command: &str) -> CliResult<String> {
    let source = Source::resolve(&args.source, args.asymptotic_normal)?;
    let a_grid = grid(&args.grid)?;
    let u = check_u(args.grid.u)?;

    let mut table = Table::new(["a", "b_plus", "b_minus", "marker"]);
    table
        .meta("command", command)
        .meta("version", VERSION)
        .meta("source", source.describe())
        .meta("seed", args.source.seed);

    let (profile, crossing) = if let Source::AsymptoticNormal = source {
        match args.grid.normalization {
            None | Some(Normalization::TSquaredSSquaredOverU) => {}
            Some(other) => {
                return Err(usage(format!(
                    "asymptotic-normal curves are T->inf limits of T^2 s^2 B/U; --normalization {other} is not available"
                )))
            }
        }
        let profile = normal_asymptotic_profile(&a_grid)?;
        // the two limits differ by exactly a - 4
        let (plus, minus) = normal_asymptotic_biases(4.0)?;
        (profile, Some((4.0, plus, -minus)))
    } else {
        let normalization = args.grid.normalization.unwrap_or(Normalization::TOverU);
        let reg = source.sequence()?;
        describe_sequence(&mut table, &reg);
        let profile = bias_profile(&reg, u, &a_grid, normalization)?;
        let crossing = match minimax_a_numeric(&reg, u, default_a_max(&reg)) {
            Ok(a) => {
                let (plus, minus) = worst_case_pair(a, &reg, u)?;
                let n = |b| normalization.apply(b, reg.t_count(), reg.s_squared(), u);
                Some((a, n(plus), n(minus)))
            }
            Err(CoreError::NoBracket { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        (profile, crossing)
    };

    table
        .meta("u", fmt_machine(profile.bound_u))
        .meta("normalization", profile.normalization)
        .meta("a_min", fmt_machine(args.grid.a_min))
        .meta("a_max", fmt_machine(args.grid.a_max))
        .meta("a_steps", args.grid.a_steps)
        .meta(
            "crossing",
            crossing.map_or("none".to_string(), |c| fmt_machine(c.0)),
        );
    for i in 0..profile.a_grid.len() {
        table.push(vec![
            fmt_machine(profile.a_grid[i]),
            fmt_machine(profile.b_plus[i]),
            fmt_machine(profile.b_minus[i]),
            "grid".into(),
        ]);
    }
    if let Some((a, plus, minus)) = crossing {
        table.push(vec![
            fmt_machine(a),
            fmt_machine(plus),
            fmt_machine(minus),
            "crossing".into(),
        ]);
    }
    Ok(table.to_csv())
}

fn envelope(command: &str, config: Value, result: Value) -> String {
    let doc = json!({
        "command": command,
        "config": config,
        "result": result,
        "version": VERSION,
    });
    let mut out = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    out.push('\n');
    out
}

pub fn minimax(args: &MinimaxArgs) -> CliResult<String> {
    let source = Source::resolve(&args.source, false)?;
    let u = check_u(args.u)?;
    let normalization = args.normalization.unwrap_or(Normalization::TOverU);
    let reg = source.sequence()?;
    let numeric = minimax_a_numeric(&reg, u, default_a_max(&reg))?;
    let analytic = a_star_analytic(reg.kurtosis(), reg.t_count()).ok();
    let (plus, minus) = worst_case_pair(numeric, &reg, u)?;
    let n = |b| normalization.apply(b, reg.t_count(), reg.s_squared(), u);

    let config = json!({
        "normalization": normalization.as_str(),
        "rng": RNG_NAME,
        "seed": args.source.seed,
        "source": source.describe(),
        "u": u,
    });
    let result = json!({
        "a_star_analytic": analytic,
        "a_star_numeric": numeric,
        "agreement": analytic.map(|a| (numeric - a).abs()),
        "b_minus_at_star": n(minus),
        "b_plus_at_star": n(plus),
        "kurtosis": reg.kurtosis(),
        "s_squared": reg.s_squared(),
        "skewness": reg.skewness(),
        "t": reg.t_count(),
    });
    Ok(envelope("minimax", config, result))
}

fn cell_label(kurtosis: f64, skewness: f64) -> String {
    format!("k{kurtosis}_s{skewness}")
}

pub fn table1(args: &Table1Args) -> CliResult<String> {
    let normalization = args.normalization.unwrap_or(Normalization::TOverU);
    let cfg = ExperimentConfig {
        t_count: args.t,
        kurtosis_targets: args.kurtosis.clone(),
        skewness_targets: args.skewness.clone(),
        samples_per_cell: args.samples,
        seed: args.seed,
        bound_u: check_u(args.u)?,
    };
    let rows = run_invariance_study(&cfg)?;
    let cells = cfg.cells();

    let mut header = vec!["sample".to_string()];
    for cell in &cells {
        let label = cell_label(cell.kurtosis, cell.skewness);
        header.push(format!("a_star_{label}"));
        header.push(format!("mb_{label}"));
    }
    let mut table = Table::new(header);
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    table
        .meta("command", "table1")
        .meta("version", VERSION)
        .meta("t", cfg.t_count)
        .meta("kurtosis", list(&cfg.kurtosis_targets))
        .meta("skewness", list(&cfg.skewness_targets))
        .meta("samples", cfg.samples_per_cell)
        .meta("seed", cfg.seed)
        .meta("rng", RNG_NAME)
        .meta("u", fmt_machine(cfg.bound_u))
        .meta("normalization", normalization);
    for cell in &cells {
        let analytic = a_star_analytic(cell.kurtosis, cfg.t_count)
            .map(fmt_machine)
            .unwrap_or_else(|_| "undefined".into());
        table.meta(
            format!(
                "a_star_analytic_{}",
                cell_label(cell.kurtosis, cell.skewness)
            ),
            analytic,
        );
    }

    let mut failures = Vec::new();
    for sample in 1..=cfg.samples_per_cell {
        let mut row = vec![sample.to_string()];
        for cell in &cells {
            let entry = rows
                .iter()
                .find(|r| r.cell.index == cell.index && r.sample_index == sample)
                .expect("one row per cell and sample");
            match &entry.outcome {
                Ok(m) => {
                    row.push(fmt_machine(m.a_star_numeric));
                    row.push(fmt_machine(m.max_bias(normalization)));
                }
                Err(e) => {
                    failures.push(format!(
                        "{} sample {sample}: {e}",
                        cell_label(cell.kurtosis, cell.skewness)
                    ));
                    row.push("failed".into());
                    row.push("failed".into());
                }
            }
        }
        table.push(row);
    }
    for (i, f) in failures.iter().enumerate() {
        table.meta(format!("failure_{}", i + 1), f);
    }
    Ok(table.to_csv())
}

pub struct AuditOutput {
    pub report: HccmeReport,
    pub screening: Option<ScreeningOutcome>,
}

pub fn audit_compute(args: &AuditArgs) -> CliResult<AuditOutput> {
    let mut names = vec![args.y.as_str(), args.x.as_str()];
    names.extend(args.controls.iter().map(String::as_str));
    let mut cols = read_columns(&args.csv, &names)?;
    let controls = cols.split_off(2);
    let x = cols.pop().expect("x column");
    let y = cols.pop().expect("y column");
    if let Some(u) = args.u {
        check_u(u)?;
    }
    let data = RegressionDataset::with_controls(y, x, controls)?;
    let report = hccme_report(&data, args.u)?;
    let screening = if args.controls.is_empty() {
        None
    } else {
        Some(screening(&data)?)
    };
    Ok(AuditOutput { report, screening })
}

pub fn audit(args: &AuditArgs) -> CliResult<String> {
    let out = audit_compute(args)?;
    if args.json {
        let config = json!({
            "controls": args.controls,
            "csv": args.csv.display().to_string(),
            "headline_interval": if args.asymptotic_interval { "asymptotic" } else { "finite" },
            "interval_multiplier": hetbias_core::inference::INTERVAL_MULTIPLIER,
            "u": args.u,
            "x": args.x,
            "y": args.y,
        });
        let mut result = json!({ "report": out.report });
        if let Some(s) = &out.screening {
            result["screening"] = json!(s);
        }
        return Ok(envelope("audit", config, result));
    }
    Ok(render_audit(&out, args))
}

fn label_name(label: ReportLabel) -> &'static str {
    match label {
        ReportLabel::EickerWhite => "Eicker-White",
        ReportLabel::Hinkley => "Hinkley",
        ReportLabel::MinimaxFinite => "Minimax (finite T)",
        ReportLabel::MinimaxAsymptotic => "Minimax (a = K+1)",
    }
}

fn render_audit(out: &AuditOutput, args: &AuditArgs) -> String {
    let r = &out.report;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "audit: y = {}, x = {} ({} observations)",
        args.y, args.x, r.t_count
    );
    let _ = writeln!(
        s,
        "intercept {}   slope {}",
        fmt_human(r.beta1),
        fmt_human(r.beta2)
    );
    let _ = writeln!(
        s,
        "s^2 {}   kurtosis K {}   finite-sample a* {}",
        fmt_human(r.s_squared),
        fmt_human(r.kurtosis_used),
        fmt_human(r.a_star_used)
    );
    let _ = writeln!(s);
    let bound = r
        .bound_u
        .map(|u| format!("worst-case bias (U = {})", fmt_human(u)));
    let _ = writeln!(
        s,
        "{:<20} {:>10} {:>12} {:>12} {}",
        "estimator",
        "a",
        "variance",
        "std. error",
        bound.as_deref().unwrap_or("")
    );
    let headline = if args.asymptotic_interval {
        ReportLabel::MinimaxAsymptotic
    } else {
        ReportLabel::MinimaxFinite
    };
    for e in &r.entries {
        let marker = if e.label == headline { " *" } else { "" };
        let _ = writeln!(
            s,
            "{:<20} {:>10} {:>12} {:>12} {}{}",
            label_name(e.label),
            fmt_human(e.a),
            fmt_human(e.variance_estimate),
            fmt_human(e.std_error),
            e.worst_case_bias_bound.map(fmt_human).unwrap_or_default(),
            marker
        );
    }
    let _ = writeln!(s);
    let yes_no = |b: bool| if b { "significant" } else { "not significant" };
    let (first, second) = if args.asymptotic_interval {
        (
            ("a = K + 1", r.significance_interval, r.significant),
            ("finite-sample a*", r.finite_interval, r.finite_significant),
        )
    } else {
        (
            ("finite-sample a*", r.finite_interval, r.finite_significant),
            ("a = K + 1", r.significance_interval, r.significant),
        )
    };
    for (i, (name, iv, sig)) in [first, second].into_iter().enumerate() {
        let prefix = if i == 0 {
            "* worst-case interval"
        } else {
            "  worst-case interval"
        };
        let _ = writeln!(
            s,
            "{prefix} ({name}): slope ± 2 SE = [{}, {}]  {}",
            fmt_human(iv.low),
            fmt_human(iv.high),
            yes_no(sig)
        );
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    if let Some(sc) = &out.screening {
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "screening with controls {}: {:?}",
            args.controls.join(", "),
            sc.verdict
        );
        let _ = writeln!(
            s,
            "  x alone:            [{}, {}]",
            fmt_human(sc.alone.low),
            fmt_human(sc.alone.high)
        );
        if let Some(p) = sc.purged {
            let _ = writeln!(
                s,
                "  purged response:    [{}, {}]",
                fmt_human(p.low),
                fmt_human(p.high)
            );
        }
    }
    s
}

pub fn figure1(args: &GridArgs) -> CliResult<String> {
    let curve = BiasCurveArgs {
        source: SourceArgs {
            three_point: None,
            generate: None,
            csv: None,
            col: None,
            seed: crate::args::DEFAULT_SEED,
        },
        asymptotic_normal: true,
        grid: args.clone(),
    };
    bias_curve(&curve, "figure1-data")
}
