//! Command-line driver: metric-plan recommendation, dataset evaluation,
//! and the synthetic root-finding benchmark. One config file drives a
//! run; exit code 2 flags bad input, 1 a failure during computation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use modeval::metrics::{metric_at_target, SweepPoint};
use modeval::pipeline::{evaluate_cases, run_sweep, EvalOptions, SweepParameter, SweepSpec};
use modeval::recommend::{recommend_with_options, MetricPlan, RecommendOptions};
use modeval::toybench::{run_toy_benchmark, PredictorRun, ToyBenchConfig};
use modeval::{load_dataset, write_dataset, Error, Fingerprint};

#[derive(Parser)]
#[command(
    name = "modeval",
    version,
    about = "Mode-centric validation of multimodal posterior predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a problem fingerprint into a metric plan with rationale
    Recommend(RecommendArgs),
    /// Run the evaluation pipeline described by a run-config file
    Evaluate(EvaluateArgs),
    /// Run the synthetic complex-roots benchmark end to end
    Toybench(ToybenchArgs),
}

#[derive(Args)]
struct RecommendArgs {
    /// Fingerprint file (JSON object with the seven properties)
    #[arg(required_unless_present = "all", conflicts_with = "all")]
    fingerprint: Option<PathBuf>,
    /// Enumerate plans for every possible fingerprint instead
    #[arg(long)]
    all: bool,
    /// Directory to write the plan file(s) into
    #[arg(long)]
    out: Option<PathBuf>,
    /// Operating-point sweep declared for the run, e.g. min_samples=3..500
    #[arg(long, value_name = "SPEC")]
    sweep: Option<String>,
    /// Solution space too high-dimensional for histogram discretization
    #[arg(long)]
    high_dimensional: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run-config file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's sweep grid, e.g. threshold=0.05..0.5
    #[arg(long, value_name = "SPEC")]
    sweep: Option<String>,
}

#[derive(Args)]
struct ToybenchArgs {
    /// Benchmark config file (JSON); flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of benchmark cases
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "toybench-out")]
    out: PathBuf,
    /// Hyperparameter grid, e.g. min_samples=3..500 or eps=0.05,0.1,0.2
    #[arg(long, value_name = "SPEC")]
    sweep: Option<String>,
    /// Screen surplus predictions through the forward model
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    resimulation: Switch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// One evaluation run: where the cases live, how to evaluate them, and
/// optionally a hyperparameter sweep with a metric-at-target pick.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    dataset: PathBuf,
    #[serde(default)]
    out: Option<PathBuf>,
    eval: EvalOptions,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    #[serde(default)]
    target: Option<TargetSpec>,
}

/// Operating-point selection over a sweep: among points where
/// `target_metric` reaches `target_value`, report `report_metric`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSpec {
    target_metric: String,
    target_value: f64,
    report_metric: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Recommend(args) => cmd_recommend(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Toybench(args) => cmd_toybench(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Parses a JSON file, reporting the path of the offending field on
/// failure so a bad enum value names where it sits.
fn parse_json_file<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        Error::Config(format!(
            "{what} {}: field '{}': {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn cmd_recommend(args: &RecommendArgs) -> Result<(), Error> {
    let opts = RecommendOptions {
        sweep_declared: args.sweep.is_some(),
        high_dimensional: args.high_dimensional,
    };
    if args.all {
        let fingerprints = Fingerprint::enumerate_all();
        let mut lines = String::new();
        let mut empty = 0usize;
        for fp in &fingerprints {
            let plan = recommend_with_options(fp, &opts);
            if plan.distribution_metrics.is_empty() && plan.detection_plan.is_none() {
                empty += 1;
            }
            let record = serde_json::json!({ "fingerprint": fp, "plan": plan });
            lines.push_str(&serde_json::to_string(&record).expect("plan serializes"));
            lines.push('\n');
        }
        println!(
            "{} fingerprints enumerated, {} empty plans",
            fingerprints.len(),
            empty
        );
        if let Some(dir) = &args.out {
            ensure_dir(dir)?;
            let path = dir.join("plans.jsonl");
            write_text(&path, &lines)?;
            println!("wrote {}", path.display());
        }
        return Ok(());
    }

    let path = args.fingerprint.as_ref().expect("clap enforces presence");
    let fp: Fingerprint = parse_json_file(path, "fingerprint file")?;
    let plan = recommend_with_options(&fp, &opts);
    let text = plan_text(&plan);
    print!("{text}");
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let json_path = dir.join("plan.json");
        let mut json = serde_json::to_string_pretty(&plan).expect("plan serializes");
        json.push('\n');
        write_text(&json_path, &json)?;
        write_text(&dir.join("plan.txt"), &text)?;
        println!("wrote {}", json_path.display());
    }
    Ok(())
}

fn plan_text(plan: &MetricPlan) -> String {
    let mut s = String::from("metric plan\n");
    if plan.distribution_metrics.is_empty() {
        s.push_str("  distribution metrics: none\n");
    } else {
        s.push_str("  distribution metrics:\n");
        for m in &plan.distribution_metrics {
            if m.params.is_empty() {
                s.push_str(&format!("    - {}\n", m.name));
            } else {
                let params: Vec<String> =
                    m.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                s.push_str(&format!("    - {} ({})\n", m.name, params.join(", ")));
            }
        }
    }
    match &plan.detection_plan {
        None => s.push_str("  detection plan: none\n"),
        Some(d) => {
            s.push_str("  detection plan:\n");
            s.push_str(&format!(
                "    localization criterion: {}{}\n",
                d.localization_criterion,
                alternatives(&d.localization_alternatives)
            ));
            s.push_str(&format!(
                "    assignment strategy: {}{}\n",
                d.assignment_strategy,
                alternatives(&d.assignment_alternatives)
            ));
            s.push_str(&format!(
                "    classification metrics: {}\n",
                d.classification_metrics.join(", ")
            ));
            if d.fppi_upper_bound {
                s.push_str("    fp-derived counts are upper bounds (reference list may be incomplete)\n");
            }
            if d.matched_mode_distance {
                s.push_str("    matched-mode distances reported with hierarchical aggregation\n");
            }
        }
    }
    if plan.metric_at_target_offered {
        s.push_str("  metric@target: applicable (operating-point sweep declared)\n");
    }
    s.push_str("  notes:\n");
    for note in &plan.notes {
        s.push_str(&format!("    - {note}\n"));
    }
    s
}

fn alternatives(alts: &[String]) -> String {
    if alts.is_empty() {
        String::new()
    } else {
        format!(" (alternatives: {})", alts.join(", "))
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let mut cfg: RunConfig = parse_json_file(&args.config, "run config")?;
    if let Some(seed) = args.seed {
        cfg.eval.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(spec) = &args.sweep {
        cfg.sweep = Some(parse_sweep_arg(spec)?);
    }
    if cfg.sweep.is_some() {
        cfg.eval.sweep_declared = true;
    }
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));

    let cases = load_dataset(&cfg.dataset)?;
    let report = evaluate_cases(&cases, &cfg.eval)?;
    ensure_dir(&out_dir)?;
    let written = report.write_artifacts(&out_dir, "run")?;
    print_report_summary(&report);
    for path in &written {
        println!("wrote {}", path.display());
    }

    if let Some(spec) = &cfg.sweep {
        let points = run_sweep(&cases, &cfg.eval, spec)?;
        let path = out_dir.join("run.sweep.csv");
        write_text(&path, &sweep_csv(&points))?;
        println!("wrote {}", path.display());
        if let Some(target) = &cfg.target {
            let pick = metric_at_target(
                &points,
                &target.target_metric,
                target.target_value,
                &target.report_metric,
            )?;
            let path = out_dir.join("run.target.json");
            let mut json = serde_json::to_string_pretty(&pick).expect("pick serializes");
            json.push('\n');
            write_text(&path, &json)?;
            println!(
                "{} at {} >= {}: {:.6} (operating point {}, target {})",
                target.report_metric,
                target.target_metric,
                target.target_value,
                pick.reported_value,
                pick.point.operating_point,
                if pick.target_met { "met" } else { "NOT met" }
            );
            println!("wrote {}", path.display());
        }
    } else if cfg.target.is_some() {
        return Err(Error::Config(
            "a target pick needs a sweep grid to select from".into(),
        ));
    }
    Ok(())
}

fn print_report_summary(report: &modeval::report::MetricReport) {
    for (name, scalar) in &report.scalars {
        let flags = if scalar.flags.is_empty() {
            String::new()
        } else {
            format!("  [{}]", scalar.flags.join("; "))
        };
        match scalar.value {
            Some(v) => println!("{name} = {v:.6}{flags}"),
            None => println!("{name} = undefined{flags}"),
        }
    }
    if !report.diagnostics.is_empty() {
        println!("{} diagnostic(s); see the report file", report.diagnostics.len());
    }
}

fn cmd_toybench(args: &ToybenchArgs) -> Result<(), Error> {
    let mut cfg: ToyBenchConfig = match &args.config {
        Some(path) => parse_json_file(path, "benchmark config")?,
        None => ToyBenchConfig::default(),
    };
    if let Some(cases) = args.cases {
        cfg.cases = cases;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(spec) = &args.sweep {
        cfg.sweep = Some(parse_sweep_arg(spec)?);
    }
    if args.resimulation == Switch::On {
        cfg.resimulation = true;
    }

    let result = run_toy_benchmark(&cfg)?;
    ensure_dir(&args.out)?;
    for run in [&result.multimodal, &result.mean_point] {
        let stem = match run.predictor {
            modeval::toybench::Predictor::Multimodal => "multimodal",
            modeval::toybench::Predictor::MeanPoint => "mean_point",
        };
        let written = run.report.write_artifacts(&args.out, stem)?;
        for path in &written {
            println!("wrote {}", path.display());
        }
        let cases_path = args.out.join(format!("{stem}.cases.jsonl"));
        write_dataset(&cases_path, &run.cases)?;
        println!("wrote {}", cases_path.display());
        if let Some(points) = &run.sweep {
            let path = args.out.join(format!("{stem}.sweep.csv"));
            write_text(&path, &sweep_csv(points))?;
            println!("wrote {}", path.display());
        }
        print_predictor_line(stem, run);
    }

    let summary = serde_json::json!({
        "config": &cfg,
        "multimodal": predictor_summary(&result.multimodal),
        "mean_point": predictor_summary(&result.mean_point),
    });
    let path = args.out.join("toybench.summary.json");
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_text(&path, &json)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_predictor_line(stem: &str, run: &PredictorRun) {
    let fmt = |name: &str| {
        run.report
            .scalar(name)
            .map_or("undefined".to_string(), |v| format!("{v:.4}"))
    };
    println!(
        "{stem}: recall={} precision={} ap={} conventional_error={:.4}",
        fmt("recall"),
        fmt("precision"),
        fmt("ap"),
        run.conventional.mean_error()
    );
}

fn predictor_summary(run: &PredictorRun) -> serde_json::Value {
    serde_json::json!({
        "recall": run.report.scalar("recall"),
        "precision": run.report.scalar("precision"),
        "f_beta": run.report.scalar("f_beta"),
        "ap": run.report.scalar("ap"),
        "fppi": run.report.scalar("fppi"),
        "conventional_mean_error": run.conventional.mean_error(),
        "conventional_mean_error_multi_root": run.conventional.mean_error_for(&[2, 3]),
    })
}

/// Parses `parameter=lo..hi[:step]` (default step spans the range in 20
/// points) or `parameter=v1,v2,...` into a sweep grid.
fn parse_sweep_arg(spec: &str) -> Result<SweepSpec, Error> {
    let (name, rest) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "sweep spec '{spec}' must look like parameter=lo..hi[:step] or parameter=v1,v2,..."
        ))
    })?;
    let parameter = match name.trim() {
        "eps" => SweepParameter::Eps,
        "min_samples" => SweepParameter::MinSamples,
        "threshold" => SweepParameter::Threshold,
        other => {
            return Err(Error::Config(format!(
                "unknown sweep parameter '{other}' (expected eps, min_samples, or threshold)"
            )))
        }
    };
    let rest = rest.trim();
    let mut values = if rest.contains("..") {
        let (range, step) = match rest.split_once(':') {
            Some((r, s)) => (r, Some(parse_number(s, spec)?)),
            None => (rest, None),
        };
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("bad range in sweep spec '{spec}'")))?;
        let lo = parse_number(lo, spec)?;
        let hi = parse_number(hi, spec)?;
        if !(hi > lo) {
            return Err(Error::Config(format!(
                "sweep range must increase, got {lo}..{hi}"
            )));
        }
        let step = match step {
            Some(s) if s > 0.0 => s,
            Some(s) => {
                return Err(Error::Config(format!("sweep step must be positive, got {s}")))
            }
            None => (hi - lo) / 19.0,
        };
        let count = (((hi - lo) / step) + 1e-9).floor() as usize + 1;
        let mut values: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
        if hi - values.last().copied().unwrap_or(lo) > 1e-6 * step {
            values.push(hi);
        }
        values
    } else {
        rest.split(',')
            .map(|v| parse_number(v, spec))
            .collect::<Result<Vec<f64>, Error>>()?
    };
    if parameter == SweepParameter::MinSamples {
        values = values.iter().map(|v| v.round().max(1.0)).collect();
        values.dedup();
    }
    if values.is_empty() {
        return Err(Error::Config(format!("sweep spec '{spec}' yields no values")));
    }
    Ok(SweepSpec { parameter, values })
}

fn parse_number(text: &str, spec: &str) -> Result<f64, Error> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad number '{}' in sweep spec '{spec}'", text.trim())))?;
    if !v.is_finite() {
        return Err(Error::Config(format!(
            "non-finite value in sweep spec '{spec}'"
        )));
    }
    Ok(v)
}

/// Sweep table: one row per operating point, one column per metric that
/// is defined anywhere in the sweep; cells stay empty where undefined.
fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut cols: BTreeSet<&str> = BTreeSet::new();
    for p in points {
        cols.extend(p.metrics.keys().map(String::as_str));
    }
    let mut out = String::from("operating_point");
    for c in &cols {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for p in points {
        out.push_str(&format!("{}", p.operating_point));
        for c in &cols {
            out.push(',');
            if let Some(v) = p.metrics.get(*c) {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}
