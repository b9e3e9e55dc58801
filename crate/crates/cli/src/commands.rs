//! Subcommand implementations. Every command writes its artifacts into the
//! output directory together with `resolved_config.txt`.

use std::fs;
use std::path::Path;

use log::info;
use roundtrip::estimators::{batch_estimate_raw, estimate_laplace, estimate_is_seeded, Method, ProposalParams};
use roundtrip::kde::{fit_kde, select_kde, BandwidthRule, KdeModel};
use roundtrip::metrics::{
    format_grid_csv, mean_log_likelihood, outlier_scores, precision_at_k, render_grid, spearman,
    EvalReport, GridBounds,
};
use roundtrip::model::{load_checkpoint, save_checkpoint, train_with_validation, Architecture, RoundtripConfig};
use roundtrip::simdata::{format_csv, make_outlier_dataset, read_csv, CsvTable, NormStats, SimTask, SplitSpec};
use roundtrip::{Error, ExecMode, Matrix, Rng, RoundtripModel, Stream};

use crate::args::*;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Columns that describe points rather than being coordinates.
const NON_FEATURE_COLUMNS: [&str; 2] = ["true_log_density", "label"];

fn exec_mode(common: &Common) -> ExecMode {
    match common.exec {
        ExecArg::Parallel => ExecMode::Parallel,
        ExecArg::Sequential => ExecMode::Sequential,
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("invalid {what} entry '{s}'"))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EvalMethod {
    RoundtripIs,
    RoundtripLp,
    Kde,
}

impl EvalMethod {
    fn name(self) -> &'static str {
        match self {
            EvalMethod::RoundtripIs => "roundtrip-is",
            EvalMethod::RoundtripLp => "roundtrip-lp",
            EvalMethod::Kde => "kde",
        }
    }
}

fn parse_methods(text: &str) -> Result<Vec<EvalMethod>> {
    let methods: Vec<EvalMethod> = parse_list::<String>("method", text)?
        .iter()
        .map(|m| match m.as_str() {
            "roundtrip-is" => Ok(EvalMethod::RoundtripIs),
            "roundtrip-lp" => Ok(EvalMethod::RoundtripLp),
            "kde" => Ok(EvalMethod::Kde),
            other => Err(CliError::Usage(format!(
                "unknown method '{other}' (expected roundtrip-is, roundtrip-lp or kde)"
            ))),
        })
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(CliError::Usage("no methods requested".into()));
    }
    Ok(methods)
}

fn proposal(is: &IsArgs) -> ProposalParams {
    ProposalParams {
        scale: is.proposal_scale,
        dof: is.proposal_dof,
    }
}

fn is_method(is: &IsArgs, seed: u64) -> Result<Method> {
    let p = proposal(is);
    p.validate()?;
    if is.n_is == 0 {
        return Err(CliError::Usage("--n-is must be positive".into()));
    }
    Ok(Method::ImportanceSampling {
        num_samples: is.n_is,
        proposal: p,
        seed,
    })
}

fn build_config(args: &TrainArgs, is: &IsArgs, data_dim: usize, seed: u64) -> Result<RoundtripConfig> {
    let mut cfg = RoundtripConfig::new(args.latent_dim.unwrap_or(data_dim), data_dim);
    cfg.architecture = match args.preset {
        PresetArg::Small => Architecture::small(),
        PresetArg::Full => Architecture::full(),
    };
    cfg.alpha = args.alpha;
    cfg.beta = args.beta;
    cfg.adam.learning_rate = args.lr;
    cfg.patience_epochs = args.patience;
    cfg.max_epochs = args.max_epochs;
    cfg.pretrain_epochs = args.pretrain_epochs;
    cfg.batch_size = args.batch_size;
    cfg.iterations_per_epoch = args.iterations_per_epoch;
    cfg.val_is_samples = args.val_is_samples;
    cfg.val_max_points = args.val_max_points;
    cfg.sigma_grid = parse_list("sigma grid", &args.sigma_grid)?;
    cfg.proposal = proposal(is);
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

/// Trains on `train` with `val` for model selection, normalizing both with
/// statistics of `train` when requested (`from_csv` picks the default).
fn fit_roundtrip(
    train: &Matrix,
    val: &Matrix,
    args: &TrainArgs,
    is: &IsArgs,
    seed: u64,
    from_csv: bool,
) -> Result<(RoundtripModel, roundtrip::TrainLog)> {
    let cfg = build_config(args, is, train.cols(), seed)?;
    if args.normalize.unwrap_or(from_csv) {
        let rows: Vec<usize> = (0..train.rows()).collect();
        let stats = NormStats::fit(train, &rows)?;
        let (model, log) = train_with_validation(&stats.normalize(train)?, &stats.normalize(val)?, &cfg)?;
        Ok((model.with_norm_stats(stats)?, log))
    } else {
        Ok(train_with_validation(train, val, &cfg)?)
    }
}

/// Splits off a 10% validation set (at least one row) with the split stream.
fn holdout(data: &Matrix, seed: u64) -> Result<(Matrix, Matrix)> {
    if data.rows() < 2 {
        return Err(CliError::Core(Error::Input("need at least two rows".into())));
    }
    let mut idx: Vec<usize> = (0..data.rows()).collect();
    Rng::new(seed, Stream::Split).shuffle(&mut idx);
    let n_val = ((data.rows() as f64 * 0.1).round() as usize).clamp(1, data.rows() - 1);
    let (val, train) = idx.split_at(n_val);
    Ok((data.select_rows(train), data.select_rows(val)))
}

fn fit_kde_rule(train: &Matrix, val: Option<&Matrix>, rule: RuleArg, mode: ExecMode) -> Result<KdeModel> {
    Ok(match rule {
        RuleArg::Scott => fit_kde(train, BandwidthRule::Scott)?,
        RuleArg::Silverman => fit_kde(train, BandwidthRule::Silverman)?,
        RuleArg::Auto => match val {
            Some(v) => select_kde(train, v, mode)?.best_model().clone(),
            None => {
                let (t, v) = holdout(train, 0)?;
                let rule = select_kde(&t, &v, mode)?.best_model().rule().clone();
                fit_kde(train, rule)?
            }
        },
    })
}

fn feature_table(path: &Path) -> Result<(Matrix, CsvTable)> {
    let table = read_csv(path)?;
    let mut features = table.clone();
    for name in NON_FEATURE_COLUMNS {
        if let Some(j) = features.column_index(name) {
            features = features.take_column(j).0;
        }
    }
    if features.data.rows() == 0 || features.data.cols() == 0 {
        return Err(CliError::Core(Error::Input(format!("{} has no data rows", path.display()))));
    }
    Ok((features.data, table))
}

fn column_csv(name: &str, values: &[f64]) -> String {
    let mut out = format!("{name}\n");
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

fn coordinate_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).collect()
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut task = SimTask::from_name(&a.task, a.dim)?;
    if let SimTask::Involute { quad_points } = &mut task {
        *quad_points = a.quad_points;
    }
    if a.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let mode = exec_mode(&a.common);
    let points = task.sample(a.count, &mut Rng::new(a.common.seed, Stream::Simulation));
    let truth = roundtrip::exec::map_indexed(mode, points.rows(), |i| task.log_density(points.row(i)));
    let mut table = Matrix::zeros(points.rows(), points.cols() + 1);
    for i in 0..points.rows() {
        let row = table.row_mut(i);
        row[..points.cols()].copy_from_slice(points.row(i));
        row[points.cols()] = truth[i];
    }
    let mut header = coordinate_header(task.dim());
    header.push("true_log_density".into());
    write(&a.common.out, "samples.csv", &format_csv(&header, &table))?;
    println!("wrote {} {} samples", a.count, task.name());
    Ok(())
}

pub fn train(a: &TrainCmdArgs) -> Result<()> {
    let (data, _) = feature_table(&a.data)?;
    let (train, val) = holdout(&data, a.common.seed)?;
    let (model, log) = fit_roundtrip(&train, &val, &a.train, &a.is, a.common.seed, true)?;
    save_checkpoint(&model, &a.common.out.join("model.rtde"))?;
    write(&a.common.out, "train_log.csv", &log.to_csv())?;
    println!(
        "sigma={} epochs={} best_epoch={}",
        model.sigma(),
        log.stopped_epoch,
        log.best_epoch.map_or("none".to_string(), |e| e.to_string())
    );
    Ok(())
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let (data, _) = feature_table(&a.data)?;
    if data.cols() != model.data_dim() {
        return Err(CliError::Core(Error::Shape(format!(
            "{} has {} feature columns but the checkpoint expects {}",
            a.data.display(),
            data.cols(),
            model.data_dim()
        ))));
    }
    let method = match a.method {
        MethodArg::Is => is_method(&a.is, a.common.seed)?,
        MethodArg::Lp => Method::Laplace,
    };
    let values = batch_estimate_raw(&data, &model, method, exec_mode(&a.common))?;
    write(&a.common.out, "log_density.csv", &column_csv("log_density", &values))?;
    println!("estimated {} points", values.len());
    Ok(())
}

fn parse_bounds(text: &str) -> Result<GridBounds> {
    let v: Vec<f64> = parse_list("bounds", text)?;
    if v.len() != 4 {
        return Err(CliError::Usage("--bounds needs x1_lo,x1_hi,x2_lo,x2_hi".into()));
    }
    Ok(GridBounds::new((v[0], v[1]), (v[2], v[3]))?)
}

pub fn grid(a: &GridArgs) -> Result<()> {
    let mode = exec_mode(&a.common);
    let task = a.task.as_deref().map(|t| SimTask::from_name(t, 2)).transpose()?;
    let bounds = match (&a.bounds, task) {
        (Some(b), _) => parse_bounds(b)?,
        (None, Some(t)) => {
            let [x1, x2] = t.default_bounds();
            GridBounds::new(x1, x2)?
        }
        (None, None) => return Err(CliError::Usage("--bounds or --task is required".into())),
    };
    let need = |what: Option<&std::path::PathBuf>, flag: &str| {
        what.cloned().ok_or_else(|| CliError::Usage(format!("evaluator needs --{flag}")))
    };
    let (points, values) = match a.evaluator {
        EvaluatorArg::True => {
            let t = task.ok_or_else(|| CliError::Usage("evaluator true needs --task".into()))?;
            render_grid(bounds, a.resolution, t.dim(), mode, |x| Ok(t.log_density(x)))?
        }
        EvaluatorArg::Is | EvaluatorArg::Lp => {
            let model = load_checkpoint(&need(a.checkpoint.as_ref(), "checkpoint")?)?;
            let stats = model.norm_stats().cloned();
            let shift = stats.as_ref().map_or(0.0, NormStats::log_jacobian);
            let is = a.evaluator == EvaluatorArg::Is;
            let (p, seed, n) = (proposal(&a.is), a.common.seed, a.is.n_is);
            if is {
                is_method(&a.is, seed)?;
            }
            render_grid(bounds, a.resolution, model.data_dim(), mode, |x| {
                let x = match &stats {
                    Some(s) => s.normalize(&Matrix::row_vector(x))?.into_vec(),
                    None => x.to_vec(),
                };
                let v = if is {
                    estimate_is_seeded(&x, &model, n, p, seed)?.log_density
                } else {
                    estimate_laplace(&x, &model)?
                };
                Ok(v + shift)
            })?
        }
        EvaluatorArg::Kde => {
            let (data, _) = feature_table(&need(a.data.as_ref(), "data")?)?;
            let kde = fit_kde_rule(&data, None, a.kde_rule, mode)?;
            render_grid(bounds, a.resolution, kde.dim(), mode, |x| kde.log_density(x))?
        }
    };
    write(&a.common.out, "grid.csv", &format_grid_csv(&points, &values))?;
    println!("wrote {}×{} grid", a.resolution, a.resolution);
    Ok(())
}

fn emit(dir: &Path, name: &str, report: &EvalReport) -> Result<()> {
    let text = report.to_text();
    println!("{text}");
    write(dir, name, &text)
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mode = exec_mode(&a.common);
    let methods = parse_methods(&a.methods)?;
    let dims: Vec<usize> = parse_list("dims", &a.dims)?;
    if dims.is_empty() {
        return Err(CliError::Usage("no dimensions requested".into()));
    }
    let seed = a.common.seed;
    let mut summary = String::from("dim,method,spearman,mean_log_likelihood\n");
    for &dim in &dims {
        let task = SimTask::from_name(&a.task, dim)?;
        if task.dim() != dim {
            return Err(CliError::Usage(format!("task {} is {}-D only", task.name(), task.dim())));
        }
        let data = task.sample(a.count, &mut Rng::new(seed, Stream::Simulation).child(dim as u64));
        let split = SplitSpec::new(data.rows(), seed);
        let train = data.select_rows(&split.train);
        let val = data.select_rows(&split.validation);
        let mut test_idx = split.test.clone();
        if let Some(cap) = a.test_points {
            test_idx.truncate(cap);
        }
        let test = data.select_rows(&test_idx);
        let truth = roundtrip::exec::map_indexed(mode, test.rows(), |i| task.log_density(test.row(i)));

        let needs_model = methods.iter().any(|m| *m != EvalMethod::Kde);
        let trained = if needs_model {
            let (model, log) = fit_roundtrip(&train, &val, &a.train, &a.is, seed, false)?;
            write(&a.common.out, &format!("train_log_d{dim}.csv"), &log.to_csv())?;
            info!("dim {dim}: trained, sigma {}", model.sigma());
            Some(model)
        } else {
            None
        };

        let mut columns = vec![("true_log_density".to_string(), truth.clone())];
        for &method in &methods {
            let mut report;
            let values = match method {
                EvalMethod::Kde => {
                    let sel = select_kde(&train, &val, mode)?;
                    let kde = sel.best_model();
                    let v = kde.log_density_batch(&test, mode)?;
                    report = EvalReport::new(task.name(), method.name(), v.clone())
                        .with_config("kde_rule", kde.rule().name());
                    for (m, ll) in &sel.fits {
                        report = report.with_config(format!("kde_val_ll_{}", m.rule().name()), ll);
                    }
                    v
                }
                EvalMethod::RoundtripIs | EvalMethod::RoundtripLp => {
                    let model = trained.as_ref().expect("model trained above");
                    let m = if method == EvalMethod::RoundtripIs {
                        is_method(&a.is, seed)?
                    } else {
                        Method::Laplace
                    };
                    let v = batch_estimate_raw(&test, model, m, mode)?;
                    report = EvalReport::new(task.name(), method.name(), v.clone())
                        .with_config("sigma", model.sigma());
                    if method == EvalMethod::RoundtripIs {
                        report = report
                            .with_config("n_is", a.is.n_is)
                            .with_config("proposal_dof", a.is.proposal_dof)
                            .with_config("proposal_scale", a.is.proposal_scale);
                    }
                    v
                }
            };
            report.spearman = Some(spearman(&values, &truth)?);
            report.mean_log_likelihood = Some(mean_log_likelihood(&values)?);
            report = report.with_config("dim", dim).with_config("seed", seed);
            summary.push_str(&format!(
                "{dim},{},{},{}\n",
                method.name(),
                report.spearman.unwrap(),
                report.mean_log_likelihood.unwrap()
            ));
            emit(&a.common.out, &format!("report_d{dim}_{}.txt", method.name()), &report)?;
            columns.push((method.name().to_string(), values));
        }
        let header: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();
        let mut table = Matrix::zeros(test.rows(), columns.len());
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                table.row_mut(i)[j] = *v;
            }
        }
        write(&a.common.out, &format!("estimates_d{dim}.csv"), &format_csv(&header, &table))?;
    }
    write(&a.common.out, "summary.csv", &summary)
}

pub fn outlier(a: &OutlierArgs) -> Result<()> {
    let mode = exec_mode(&a.common);
    let methods = parse_methods(&a.methods)?;
    let seed = a.common.seed;
    let (points, labels, source) = match (&a.data, a.fraction) {
        (Some(path), None) => {
            let table = read_csv(path)?;
            let j = table.column_index(&a.label_column).ok_or_else(|| {
                CliError::Usage(format!("{} has no '{}' column", path.display(), a.label_column))
            })?;
            let (rest, labels) = table.take_column(j);
            let mut features = rest;
            if let Some(t) = features.column_index("true_log_density") {
                features = features.take_column(t).0;
            }
            let labels: Vec<bool> = labels.iter().map(|&v| v != 0.0).collect();
            (features.data, labels, "labeled-csv".to_string())
        }
        (None, Some(fraction)) => {
            let ds = make_outlier_dataset(a.dim, a.count, fraction, &mut Rng::new(seed, Stream::Simulation))?;
            let mut table = Matrix::zeros(ds.points.rows(), ds.points.cols() + 1);
            for i in 0..ds.points.rows() {
                let row = table.row_mut(i);
                row[..a.dim].copy_from_slice(ds.points.row(i));
                row[a.dim] = if ds.labels[i] { 1.0 } else { 0.0 };
            }
            let mut header = coordinate_header(a.dim);
            header.push("label".into());
            write(&a.common.out, "dataset.csv", &format_csv(&header, &table))?;
            (ds.points, ds.labels, "synthetic".to_string())
        }
        _ => return Err(CliError::Usage("exactly one of --data or --fraction is required".into())),
    };
    let from_csv = a.data.is_some();
    let k = labels.iter().filter(|&&l| l).count();
    if k == 0 {
        return Err(CliError::Core(Error::Input("no outliers in the labels".into())));
    }
    let (train, val) = holdout(&points, seed)?;
    let model = if methods.iter().any(|m| *m != EvalMethod::Kde) {
        let (model, log) = fit_roundtrip(&train, &val, &a.train, &a.is, seed, from_csv)?;
        write(&a.common.out, "train_log.csv", &log.to_csv())?;
        Some(model)
    } else {
        None
    };
    let mut summary = String::from("method,precision_at_k,k\n");
    for &method in &methods {
        let (values, mut report) = match method {
            EvalMethod::Kde => {
                let sel = select_kde(&train, &val, mode)?;
                let kde = fit_kde(&points, sel.best_model().rule().clone())?;
                let v = kde.log_density_batch(&points, mode)?;
                (v.clone(), EvalReport::new(source.clone(), method.name(), v).with_config("kde_rule", kde.rule().name()))
            }
            _ => {
                let model = model.as_ref().expect("model trained above");
                let m = if method == EvalMethod::RoundtripIs { is_method(&a.is, seed)? } else { Method::Laplace };
                let v = batch_estimate_raw(&points, model, m, mode)?;
                let mut r = EvalReport::new(source.clone(), method.name(), v.clone()).with_config("sigma", model.sigma());
                if method == EvalMethod::RoundtripIs {
                    r = r.with_config("n_is", a.is.n_is);
                }
                (v, r)
            }
        };
        let p = precision_at_k(&outlier_scores(&values), &labels, k)?;
        report.precision_at_k = Some(p);
        report = report.with_config("k", k).with_config("seed", seed);
        summary.push_str(&format!("{},{p},{k}\n", method.name()));
        emit(&a.common.out, &format!("report_{}.txt", method.name()), &report)?;
    }
    write(&a.common.out, "summary.csv", &summary)
}

pub fn kde(a: &KdeArgs) -> Result<()> {
    let mode = exec_mode(&a.common);
    let (data, _) = feature_table(&a.data)?;
    let query = match &a.query {
        Some(q) => feature_table(q)?.0,
        None => data.clone(),
    };
    let kde = fit_kde_rule(&data, None, a.rule, mode)?;
    let values = kde.log_density_batch(&query, mode)?;
    write(&a.common.out, "log_density.csv", &column_csv("log_density", &values))?;
    let mut report = EvalReport::new("kde", "kde", values.clone())
        .with_config("rule", kde.rule().name())
        .with_config(
            "bandwidths",
            kde.bandwidths().iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
    report.mean_log_likelihood = mean_log_likelihood(&values).ok();
    emit(&a.common.out, "report.txt", &report)
}
