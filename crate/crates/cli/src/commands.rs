//! Subcommand implementations.

use std::fs;
use std::path::Path;

use clap::Args;
use serde_json::json;
use xsdr::benchmark::{expectile_curves, DeltaMetric, SweepAxis};
use xsdr::expectile::default_levels;
use xsdr::inverse::parse_method_label;
use xsdr::{
    estimate_order, fit_sdr, loocv_delta_tau, run_simulation, run_sweep, Bandwidth, BenchRow,
    FitOptions, Flavor, LambdaChoice, ModelId, PermutationConfig, SimConfig, DEFAULT_LAMBDA_GRID,
};

use crate::data::{read_dataset, Dataset};
use crate::manifest::{resolved_options, write_json, InputRecord, RunManifest};
use crate::{svg, CliError, EstimatorArgs, InputArgs};

pub fn flavor_name(f: Flavor) -> &'static str {
    match f {
        Flavor::Classical => "classical",
        Flavor::Projective => "projective",
        Flavor::Pooled => "pooled",
    }
}

fn parse_method(label: &str) -> Result<(xsdr::Method, Flavor), CliError> {
    parse_method_label(label).ok_or_else(|| {
        CliError::Config(format!(
            "unknown method '{label}'; expected sir, save or dr with an optional ea- or mea- prefix"
        ))
    })
}

fn parse_lambda(text: &str, grid: Option<&[f64]>) -> Result<LambdaChoice, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        let grid = grid.map(<[f64]>::to_vec).unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec());
        if grid.is_empty() || grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CliError::Config("lambda grid values must be nonnegative numbers".into()));
        }
        return Ok(LambdaChoice::Auto(grid));
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaChoice::Fixed(v)),
        _ => Err(CliError::Config(format!(
            "--lambda must be 'auto' or a nonnegative number, got '{text}'"
        ))),
    }
}

fn bandwidth(r: Option<f64>, r_mult: Option<f64>) -> Result<Bandwidth, CliError> {
    match (r, r_mult) {
        (Some(r), _) if r > 0.0 && r.is_finite() => Ok(Bandwidth::Fixed(r)),
        (None, Some(m)) if m > 0.0 && m.is_finite() => Ok(Bandwidth::Scaled(m)),
        (None, None) => Ok(Bandwidth::Heuristic),
        _ => Err(CliError::Config("--r and --r-mult must be positive".into())),
    }
}

pub fn build_options(est: &EstimatorArgs) -> Result<FitOptions, CliError> {
    let (method, flavor) = parse_method(&est.method)?;
    if est.k == 0 {
        return Err(CliError::Config("--k must be positive".into()));
    }
    let levels = est.levels.clone().unwrap_or_else(|| default_levels(est.k));
    Ok(FitOptions::new(method, flavor, est.d)
        .with_slices(est.slices)
        .with_projections(est.projections)
        .with_levels(levels)
        .with_lambda(parse_lambda(&est.lambda, est.lambda_grid.as_deref())?)
        .with_bandwidth(bandwidth(est.r, est.r_mult)?)
        .with_seed(est.seed))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Output(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn input_record(input: &InputArgs, data: &Dataset) -> InputRecord {
    InputRecord {
        path: input.csv.display().to_string(),
        sha256: data.digest.clone(),
        n: data.n(),
        p: data.p(),
        response: data.response_name.clone(),
        predictors: data.predictor_names.clone(),
    }
}

fn load(input: &InputArgs) -> Result<Dataset, CliError> {
    read_dataset(&input.csv, &input.response, input.predictors.as_deref())
}

pub fn fit(input: &InputArgs, est: &EstimatorArgs) -> Result<(), CliError> {
    let opts = build_options(est)?;
    let data = load(input)?;
    let fitted = fit_sdr(&data.predictors, &data.response, &opts)?;
    prepare_dir(&input.out)?;

    let d = fitted.d();
    let mut header = strings(["predictor"]);
    header.extend((1..=d).map(|j| format!("b{j}")));
    let rows: Vec<Vec<String>> = data
        .predictor_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut r = vec![name.clone()];
            r.extend(fitted.basis.row(i).iter().map(|v| v.to_string()));
            r
        })
        .collect();
    write_csv(&input.out.join("basis.csv"), &header, &rows)?;

    let eig: Vec<Vec<String>> = fitted
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()])
        .collect();
    write_csv(&input.out.join("eigenvalues.csv"), &strings(["index", "eigenvalue"]), &eig)?;

    let reduced = fitted.reduce(&data.predictors);
    let mut header = strings(["row"]);
    header.extend((1..=d).map(|j| format!("u{j}")));
    let rows: Vec<Vec<String>> = (0..data.n())
        .map(|i| {
            let mut r = vec![(i + 1).to_string()];
            r.extend(reduced.row(i).iter().map(|v| v.to_string()));
            r
        })
        .collect();
    write_csv(&input.out.join("reduced.csv"), &header, &rows)?;

    let mut options =
        resolved_options(&opts, fitted.options.as_ref(), fitted.lambda_selection.as_ref());
    options["rank_deficient"] = json!(fitted.rank_deficient);
    if let Some(c) = fitted.expectile_crossings {
        options["expectile_crossings"] = json!(c);
    }
    let mut manifest = RunManifest::new("fit", options);
    manifest.input = Some(input_record(input, &data));
    manifest.outputs = strings(["basis.csv", "eigenvalues.csv", "reduced.csv"]);
    manifest.write(&input.out)
}

pub fn order(
    input: &InputArgs,
    est: &EstimatorArgs,
    alpha: f64,
    permutations: usize,
    refit: bool,
) -> Result<(), CliError> {
    let opts = build_options(est)?;
    let data = load(input)?;
    let cfg = PermutationConfig {
        alpha,
        permutations,
        seed: opts.seed,
        refit_expectiles: refit,
    };
    let result = estimate_order(&data.predictors, &data.response, &opts, &cfg)?;
    prepare_dir(&input.out)?;
    let report = json!({
        "d_hat": result.d_hat,
        "alpha": result.alpha,
        "permutations": result.permutations,
        "lambda": result.lambda,
        "steps": result.steps,
    });
    write_json(&input.out.join("order.json"), &report)?;
    let mut options = resolved_options(&opts, None, None);
    options["lambda_used"] = json!(result.lambda);
    options["alpha"] = json!(alpha);
    options["B"] = json!(permutations);
    options["refit_expectiles"] = json!(refit);
    let mut manifest = RunManifest::new("order", options);
    manifest.input = Some(input_record(input, &data));
    manifest.outputs = strings(["order.json"]);
    manifest.write(&input.out)
}

fn check_taus(taus: &[f64]) -> Result<(), CliError> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(CliError::Config("every tau must lie in (0, 1)".into()));
    }
    Ok(())
}

pub fn loocv(
    input: &InputArgs,
    est: &EstimatorArgs,
    taus: &[f64],
    curve_lambda: f64,
) -> Result<(), CliError> {
    check_taus(taus)?;
    let opts = build_options(est)?;
    let data = load(input)?;
    let out = loocv_delta_tau(&data.predictors, &data.response, &opts, taus, curve_lambda)?;
    prepare_dir(&input.out)?;
    let rows: Vec<Vec<String>> = out.iter().map(|(t, d)| vec![t.to_string(), d.to_string()]).collect();
    write_csv(&input.out.join("loocv.csv"), &strings(["tau", "delta"]), &rows)?;
    let mut options = resolved_options(&opts, None, None);
    options["taus"] = json!(taus);
    options["curve_lambda"] = json!(curve_lambda);
    let mut manifest = RunManifest::new("loocv", options);
    manifest.input = Some(input_record(input, &data));
    manifest.outputs = strings(["loocv.csv"]);
    manifest.write(&input.out)
}

pub fn plot_expectiles(
    input: &InputArgs,
    est: &EstimatorArgs,
    taus: &[f64],
    curve_lambda: f64,
    render_svg: bool,
) -> Result<(), CliError> {
    check_taus(taus)?;
    let opts = build_options(est)?;
    let data = load(input)?;
    let fitted = fit_sdr(&data.predictors, &data.response, &opts)?;
    let table = expectile_curves(&data.predictors, &data.response, &fitted, taus, curve_lambda)?;
    prepare_dir(&input.out)?;
    let mut header = strings(["index", "b1x", "y"]);
    header.extend(taus.iter().map(|t| format!("f_{t}")));
    let rows: Vec<Vec<String>> = (0..table.index.len())
        .map(|i| {
            let mut r = vec![
                (table.index[i] + 1).to_string(),
                table.reduced[i].to_string(),
                table.response[i].to_string(),
            ];
            r.extend(table.curves.iter().map(|c| c[i].to_string()));
            r
        })
        .collect();
    write_csv(&input.out.join("curves.csv"), &header, &rows)?;
    let mut outputs = strings(["curves.csv"]);
    if render_svg {
        let path = input.out.join("curves.svg");
        fs::write(&path, svg::render(&table, "first direction", &data.response_name))
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        outputs.push("curves.svg".into());
    }
    let mut options =
        resolved_options(&opts, fitted.options.as_ref(), fitted.lambda_selection.as_ref());
    options["taus"] = json!(taus);
    options["curve_lambda"] = json!(curve_lambda);
    let mut manifest = RunManifest::new("plot-expectiles", options);
    manifest.input = Some(input_record(input, &data));
    manifest.outputs = outputs;
    manifest.write(&input.out)
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// I, II, III, IV or V.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 6)]
    pub p: usize,
    #[arg(long = "H", default_value_t = xsdr::inverse::DEFAULT_SLICES)]
    pub slices: usize,
    #[arg(long = "N", default_value_t = xsdr::inverse::DEFAULT_PROJECTIONS)]
    pub projections: usize,
    #[arg(long, default_value_t = xsdr::inverse::DEFAULT_LEVELS)]
    pub k: usize,
    /// Number of directions (default: the model's true dimension).
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Comma-separated estimator labels.
    #[arg(long, value_delimiter = ',', default_value = "sir,save,dr,ea-sir,ea-save,ea-dr")]
    pub methods: Vec<String>,
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub r_mult: Option<f64>,
    #[arg(long, default_value_t = xsdr::benchmark::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, env = "XSDR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// frobenius or squared.
    #[arg(long, default_value = "frobenius")]
    pub metric: String,
    /// Sweep axis: H, N, k, r-multiplier or lambda.
    #[arg(long, requires = "values")]
    pub sweep: Option<String>,
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    pub values: Option<Vec<f64>>,
    /// Fill the seconds column with wall-clock time (makes output run-dependent).
    #[arg(long)]
    pub record_time: bool,
    #[arg(long, short, default_value = "xsdr-out")]
    pub out: std::path::PathBuf,
}

const TABLE_HEADER: [&str; 13] = [
    "model", "method", "flavor", "n", "p", "H", "N", "k", "d", "mean_delta", "se_delta", "reps",
    "seconds",
];

fn bench_fields(r: &BenchRow, record_time: bool) -> Vec<String> {
    vec![
        r.model.clone(),
        r.method.clone(),
        flavor_name(r.flavor).to_string(),
        r.n.to_string(),
        r.p.to_string(),
        r.h.to_string(),
        r.n_proj.to_string(),
        r.k.to_string(),
        r.d.to_string(),
        r.mean_delta.to_string(),
        r.se_delta.to_string(),
        r.reps.to_string(),
        if record_time { format!("{:.3}", r.seconds) } else { "0".into() },
    ]
}

fn bench_json(r: &BenchRow, record_time: bool) -> serde_json::Value {
    json!({
        "model": r.model,
        "method": r.method,
        "flavor": flavor_name(r.flavor),
        "n": r.n,
        "p": r.p,
        "H": r.h,
        "N": r.n_proj,
        "k": r.k,
        "d": r.d,
        "mean_delta": r.mean_delta,
        "se_delta": r.se_delta,
        "reps": r.reps,
        "seconds": if record_time { r.seconds } else { 0.0 },
        "failed": r.failed,
    })
}

pub fn simulate_config(args: &SimulateArgs) -> Result<SimConfig, CliError> {
    let model: ModelId = args.model.parse()?;
    let metric: DeltaMetric = args.metric.parse()?;
    if !(args.sigma >= 0.0 && args.sigma.is_finite()) {
        return Err(CliError::Config("--sigma must be nonnegative".into()));
    }
    if args.k == 0 {
        return Err(CliError::Config("--k must be positive".into()));
    }
    let d = args.d.unwrap_or_else(|| model.true_dim());
    let lambda = parse_lambda(&args.lambda, args.lambda_grid.as_deref())?;
    let bw = bandwidth(None, args.r_mult)?;
    let mut cfg = SimConfig::new(model, args.n, args.p, args.reps, args.seed).with_metric(metric);
    cfg.sigma = args.sigma;
    for label in &args.methods {
        let (method, flavor) = parse_method(label)?;
        cfg = cfg.with_estimator(
            FitOptions::new(method, flavor, d)
                .with_slices(args.slices)
                .with_projections(args.projections)
                .with_levels(default_levels(args.k))
                .with_lambda(lambda.clone())
                .with_bandwidth(bw),
        );
    }
    Ok(cfg)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = simulate_config(args)?;
    let sweep = match (&args.sweep, &args.values) {
        (Some(axis), Some(values)) => Some((axis.parse::<SweepAxis>()?, values.clone())),
        _ => None,
    };
    let (header, rows, json_rows) = match &sweep {
        None => {
            let rows = run_simulation(&cfg)?;
            (
                TABLE_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                rows.iter().map(|r| bench_fields(r, args.record_time)).collect::<Vec<_>>(),
                rows.iter().map(|r| bench_json(r, args.record_time)).collect::<Vec<_>>(),
            )
        }
        Some((axis, values)) => {
            let rows = run_sweep(&cfg, *axis, values)?;
            let mut header = strings(["axis", "value"]);
            header.extend(TABLE_HEADER.iter().map(|s| s.to_string()));
            let csv_rows = rows
                .iter()
                .map(|s| {
                    let mut f = vec![s.axis.to_string(), s.value.to_string()];
                    f.extend(bench_fields(&s.row, args.record_time));
                    f
                })
                .collect();
            let json_rows = rows
                .iter()
                .map(|s| {
                    let mut v = bench_json(&s.row, args.record_time);
                    v["axis"] = json!(s.axis.to_string());
                    v["value"] = json!(s.value);
                    v
                })
                .collect();
            (header, csv_rows, json_rows)
        }
    };
    prepare_dir(&args.out)?;
    write_csv(&args.out.join("table.csv"), &header, &rows)?;
    write_json(&args.out.join("table.json"), &json!(json_rows))?;

    let template = &cfg.estimators[0];
    let options = json!({
        "model": cfg.model.to_string(),
        "n": cfg.n,
        "p": cfg.p,
        "sigma": cfg.sigma,
        "reps": cfg.reps,
        "seed": cfg.seed,
        "metric": args.metric,
        "methods": cfg.estimators.iter().map(|e| e.label()).collect::<Vec<_>>(),
        "H": template.slices,
        "N": template.projections,
        "k": template.levels.len(),
        "levels": template.levels,
        "d": template.d,
        "lambda": match &template.lambda {
            LambdaChoice::Fixed(l) => json!(l),
            LambdaChoice::Auto(grid) => json!({ "mode": "data-driven", "grid": grid }),
        },
        "r_multiplier": args.r_mult,
        "sweep": sweep.as_ref().map(|(a, v)| json!({ "axis": a.to_string(), "values": v })),
        "record_time": args.record_time,
    });
    let mut manifest = RunManifest::new("simulate", options);
    manifest.outputs = strings(["table.csv", "table.json"]);
    manifest.write(&args.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_parsing() {
        assert_eq!(parse_lambda("auto", None).unwrap(), LambdaChoice::auto());
        assert_eq!(parse_lambda("AUTO", Some(&[0.5])).unwrap(), LambdaChoice::Auto(vec![0.5]));
        assert_eq!(parse_lambda("0.1", None).unwrap(), LambdaChoice::Fixed(0.1));
        assert!(parse_lambda("-1", None).is_err());
        assert!(parse_lambda("abc", None).is_err());
    }

    #[test]
    fn bandwidth_parsing() {
        assert_eq!(bandwidth(None, None).unwrap(), Bandwidth::Heuristic);
        assert_eq!(bandwidth(Some(2.0), None).unwrap(), Bandwidth::Fixed(2.0));
        assert_eq!(bandwidth(None, Some(0.5)).unwrap(), Bandwidth::Scaled(0.5));
        assert!(bandwidth(Some(0.0), None).is_err());
    }

    #[test]
    fn config_errors_map_to_exit_four() {
        let e: CliError = xsdr::SdrError::InvalidP(3).into();
        assert_eq!(e.code(), 4);
        let e: CliError = xsdr::SdrError::SingularCovariance.into();
        assert_eq!(e.code(), 3);
        assert_eq!(parse_method("qux").unwrap_err().code(), 4);
    }
}
