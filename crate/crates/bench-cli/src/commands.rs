use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use asrl_core::data::{self, DatasetSpec, LoadReport, Registry, SplitIndices, SplitSpec};
use asrl_core::metrics::{self, EvalReport};
use asrl_core::{
    train, AsrlConfig, AsrlState, Curvature, Dataset, ExecMode, GbdtModel, LossFunction, Region,
    TrainConfig,
};
use sha2::{Digest, Sha256};

use crate::cli::{
    BenchArgs, Command, CurvatureArg, DataArgs, LossArg, LossCurveArgs, ScatterArgs, SummaryArgs,
    TrainArgs,
};
use crate::error::CliError;
use crate::report::{KvReport, REPORT_FORMAT_VERSION};

/// Column order of every table and report.
pub const LOSS_ORDER: [&str; 4] = ["asrl", "squared", "absolute", "huber"];

const MAX_CURVE_POINTS: usize = 1_000_001;

pub fn run(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Bench(args) => {
            let outcome = bench(args)?;
            if let Some(path) = &args.out {
                write_file(path, &outcome.report.render())?;
            }
            emit(out, &outcome.table)
        }
        Command::Losscurve(args) => {
            let text = losscurve(args)?.text;
            match &args.out {
                Some(path) => write_file(path, &text),
                None => emit(out, &text),
            }
        }
        Command::Scatter(args) => {
            let text = scatter(args)?.text;
            match &args.out {
                Some(path) => write_file(path, &text),
                None => emit(out, &text),
            }
        }
        Command::Summary(args) => {
            let outcome = summary(args)?;
            for warning in &outcome.warnings {
                writeln!(err, "{warning}").map_err(|e| CliError::Internal(e.to_string()))?;
            }
            if let Some(path) = &args.out {
                write_file(path, &outcome.text)?;
            }
            emit(out, &outcome.text)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Internal(format!("writing output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Validated hyperparameters shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub config: TrainConfig,
    pub asrl: AsrlConfig,
    pub huber_delta: f64,
    pub split: SplitSpec,
    pub standardize: bool,
}

impl Settings {
    pub fn from_args(t: &TrainArgs) -> Result<Self, CliError> {
        let config = TrainConfig {
            n_rounds: t.rounds,
            learning_rate: t.lr,
            max_depth: t.max_depth,
            min_child_weight: t.min_child_weight,
            lambda: t.lambda,
            h_floor: t.h_floor,
            seed: t.seed,
            exec: if t.sequential {
                ExecMode::Sequential
            } else {
                ExecMode::Parallel
            },
            curvature: match t.curvature {
                CurvatureArg::Exact => Curvature::Exact,
                CurvatureArg::Irls => Curvature::Irls,
            },
            normalize_loss_scale: !t.no_scale_norm,
        };
        config.validate()?;
        let asrl = AsrlConfig::new(t.q_low, t.q_high, t.epsilon)?;
        LossFunction::huber(t.huber_delta)?;
        if !(t.test_fraction > 0.0 && t.test_fraction < 1.0) {
            return Err(CliError::Usage(format!(
                "--test-fraction must lie in (0, 1), got {}",
                t.test_fraction
            )));
        }
        Ok(Self {
            config,
            asrl,
            huber_delta: t.huber_delta,
            split: SplitSpec {
                test_fraction: t.test_fraction,
                seed: t.seed,
            },
            standardize: t.standardize,
        })
    }

    pub fn loss(&self, which: LossArg) -> LossFunction {
        match which {
            LossArg::Asrl => LossFunction::asrl(self.asrl).expect("validated"),
            LossArg::Squared => LossFunction::Squared,
            LossArg::Absolute => LossFunction::Absolute,
            LossArg::Huber => LossFunction::huber(self.huber_delta).expect("validated"),
        }
    }

    pub fn all_losses(&self) -> Vec<LossFunction> {
        [
            LossArg::Asrl,
            LossArg::Squared,
            LossArg::Absolute,
            LossArg::Huber,
        ]
        .into_iter()
        .map(|l| self.loss(l))
        .collect()
    }

    fn echo(&self, report: &mut KvReport) {
        let c = &self.config;
        report.push("config.rounds", c.n_rounds);
        report.push("config.lr", c.learning_rate);
        report.push("config.max_depth", c.max_depth);
        report.push("config.min_child_weight", c.min_child_weight);
        report.push("config.lambda", c.lambda);
        report.push("config.h_floor", c.h_floor);
        report.push("config.curvature", curvature_name(c.curvature));
        report.push("config.normalize_loss_scale", c.normalize_loss_scale);
        report.push("config.q_low", self.asrl.q_low);
        report.push("config.q_high", self.asrl.q_high);
        report.push("config.epsilon", self.asrl.epsilon);
        report.push("config.huber_delta", self.huber_delta);
        report.push("config.seed", self.split.seed);
        report.push("config.test_fraction", self.split.test_fraction);
        report.push("config.standardize", self.standardize);
    }
}

fn curvature_name(c: Curvature) -> &'static str {
    match c {
        Curvature::Exact => "exact",
        Curvature::Irls => "irls",
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Fingerprint of a partition: both index lists in order.
pub fn split_hash(indices: &SplitIndices) -> String {
    let mut bytes = Vec::with_capacity(8 * (indices.train.len() + indices.test.len() + 2));
    for side in [&indices.train, &indices.test] {
        bytes.extend((side.len() as u64).to_le_bytes());
        for &i in side {
            bytes.extend((i as u64).to_le_bytes());
        }
    }
    hex_digest(&bytes)
}

/// Fingerprint of every training hyperparameter.
pub fn config_hash(config: &TrainConfig) -> String {
    hex_digest(
        serde_json::to_string(config)
            .expect("config serializes")
            .as_bytes(),
    )
}

/// A dataset loaded and split once, shared by every training run.
#[derive(Debug)]
pub struct Prepared {
    pub name: String,
    pub source: String,
    pub spec: DatasetSpec,
    pub load: LoadReport,
    pub indices: SplitIndices,
    pub train: Dataset,
    pub test: Dataset,
}

/// Resolves `dataset` as a registered name, else as a file path.
pub fn load(
    dataset: &str,
    args: &DataArgs,
) -> Result<(Dataset, LoadReport, DatasetSpec, String), CliError> {
    let registry = Registry::builtin();
    if let (Ok(spec), None) = (registry.get(dataset), &args.target) {
        let mut spec = spec.clone();
        if let Some(features) = &args.features {
            spec.feature_columns = features.clone();
        }
        let (data, report) = data::load_registered(&args.data_dir, &spec)?;
        return Ok((
            data,
            report,
            spec.clone(),
            format!("registry:{}", spec.name),
        ));
    }
    let path = Path::new(dataset);
    if !path.is_file() {
        return Err(CliError::Data(format!(
            "unknown dataset '{dataset}': neither a registered name ({}) nor an existing file",
            registry.names().join(", ")
        )));
    }
    let target = args.target.clone().ok_or_else(|| {
        CliError::Usage("--target is required when --dataset is a file path".into())
    })?;
    let features = match &args.features {
        Some(f) => f.clone(),
        None => data::header_columns(path)?
            .into_iter()
            .filter(|c| *c != target)
            .collect(),
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dataset.to_string());
    let spec = DatasetSpec::ad_hoc(&name, &target, features);
    let (data, report) = data::load_csv(path, &spec)?;
    Ok((data, report, spec, format!("file:{dataset}")))
}

pub fn prepare(dataset: &str, args: &DataArgs, settings: &Settings) -> Result<Prepared, CliError> {
    let (data, load, spec, source) = load(dataset, args)?;
    let indices = data::split_indices(data.n_rows(), &settings.split)?;
    let mut train = data.select_rows(&indices.train)?;
    let mut test = data.select_rows(&indices.test)?;
    if settings.standardize {
        (train, test) = data::standardize(&train, &test)?;
    }
    Ok(Prepared {
        name: spec.name.clone(),
        source,
        spec,
        load,
        indices,
        train,
        test,
    })
}

#[derive(Debug)]
pub struct LossRun {
    pub loss: LossFunction,
    pub model: GbdtModel,
    pub predictions: Vec<f64>,
    pub eval: EvalReport,
    pub split_hash: String,
    pub config_hash: String,
}

pub fn run_loss(
    loss: &LossFunction,
    prepared: &Prepared,
    config: &TrainConfig,
) -> Result<LossRun, CliError> {
    let split_hash = split_hash(&prepared.indices);
    let config_hash = config_hash(config);
    let (model, seconds) = metrics::timed(|| train(&prepared.train, config, loss));
    let model = model?;
    let predictions = model.predict(&prepared.test)?;
    let eval = EvalReport::evaluate(prepared.test.target(), &predictions, seconds)?;
    Ok(LossRun {
        loss: *loss,
        model,
        predictions,
        eval,
        split_hash,
        config_hash,
    })
}

#[derive(Debug)]
pub struct BenchOutcome {
    pub prepared: Prepared,
    pub runs: Vec<LossRun>,
    pub report: KvReport,
    pub table: String,
}

pub fn bench(args: &BenchArgs) -> Result<BenchOutcome, CliError> {
    let settings = Settings::from_args(&args.train)?;
    let prepared = prepare(&args.dataset, &args.data, &settings)?;
    let losses = settings.all_losses();
    let runs: Vec<LossRun> = if args.concurrent {
        std::thread::scope(|scope| {
            let handles: Vec<_> = losses
                .iter()
                .map(|loss| scope.spawn(|| run_loss(loss, &prepared, &settings.config)))
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .map_err(|_| CliError::Internal("training thread panicked".into()))?
                })
                .collect::<Result<_, _>>()
        })?
    } else {
        losses
            .iter()
            .map(|loss| run_loss(loss, &prepared, &settings.config))
            .collect::<Result<_, _>>()?
    };
    check_controlled(&runs)?;

    if let Some(dir) = &args.model_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        for run in &runs {
            let path = dir.join(format!("{}-{}.json", prepared.name, run.loss.name()));
            write_file(&path, &run.model.to_json())?;
        }
    }

    let report = bench_report(&prepared, &settings, &runs, args.concurrent);
    let table = bench_table(&prepared, &runs, args.concurrent);
    Ok(BenchOutcome {
        prepared,
        runs,
        report,
        table,
    })
}

/// Every run must have seen the same split and the same hyperparameters.
pub fn check_controlled(runs: &[LossRun]) -> Result<(), CliError> {
    let Some(first) = runs.first() else {
        return Ok(());
    };
    for run in runs {
        if run.split_hash != first.split_hash || run.config_hash != first.config_hash {
            return Err(CliError::Internal(format!(
                "controlled comparison violated: {} used split {} config {}, {} used split {} config {}",
                first.loss.name(),
                first.split_hash,
                first.config_hash,
                run.loss.name(),
                run.split_hash,
                run.config_hash
            )));
        }
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn bench_report(
    prepared: &Prepared,
    settings: &Settings,
    runs: &[LossRun],
    concurrent: bool,
) -> KvReport {
    let mut r = KvReport::new();
    r.push("kind", "bench");
    r.push("dataset", &prepared.name);
    r.push("source", &prepared.source);
    r.push("rows_loaded", prepared.load.rows_kept);
    r.push("rows_rejected", prepared.load.rows_rejected);
    r.push("n_features", prepared.train.n_features());
    r.push("n_train", prepared.train.n_rows());
    r.push("n_test", prepared.test.n_rows());
    r.push("test_target_mean", mean(prepared.test.target()));
    if let Some(m) = prepared.spec.expected_test_target_mean {
        r.push("expected_test_target_mean", m);
    }
    settings.echo(&mut r);
    r.push("split_hash", &runs[0].split_hash);
    r.push("config_hash", &runs[0].config_hash);
    r.push("controlled_comparison", "ok");
    r.push("concurrent", concurrent);
    r.push(
        "losses",
        runs.iter()
            .map(|run| run.loss.name())
            .collect::<Vec<_>>()
            .join(","),
    );
    for run in runs {
        let p = format!("loss.{}", run.loss.name());
        r.push(format!("{p}.split_hash"), &run.split_hash);
        r.push(format!("{p}.config_hash"), &run.config_hash);
        r.push(format!("{p}.mse"), run.eval.mse);
        r.push(format!("{p}.mae"), run.eval.mae);
        r.push(format!("{p}.r2"), run.eval.r2);
        r.push(format!("{p}.recall"), run.eval.recall);
        r.push(format!("{p}.train_seconds"), run.eval.train_seconds);
    }
    r
}

fn display_name(loss: &LossFunction) -> &'static str {
    match loss {
        LossFunction::Asrl(_) => "ASRL",
        LossFunction::Squared => "Squared",
        LossFunction::Absolute => "Absolute",
        LossFunction::Huber { .. } => "Huber",
    }
}

/// Label, accessor and printed decimals.
type MetricRow = (&'static str, fn(&EvalReport) -> f64, usize);

fn bench_table(prepared: &Prepared, runs: &[LossRun], concurrent: bool) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{}: {} train / {} test rows, split {}",
        prepared.name,
        prepared.train.n_rows(),
        prepared.test.n_rows(),
        runs[0].split_hash
    );
    let _ = write!(t, "{:<10}", "metric");
    for run in runs {
        let _ = write!(t, "{:>12}", display_name(&run.loss));
    }
    t.push('\n');
    let rows: [MetricRow; 5] = [
        ("MSE", |e| e.mse, 4),
        ("MAE", |e| e.mae, 4),
        ("R2", |e| e.r2, 4),
        ("Recall", |e| e.recall, 4),
        ("Time (s)", |e| e.train_seconds, 3),
    ];
    for (label, get, digits) in rows {
        let _ = write!(t, "{label:<10}");
        for run in runs {
            let _ = write!(t, "{:>12.*}", digits, get(&run.eval));
        }
        t.push('\n');
    }
    if concurrent {
        t.push_str("(models trained concurrently; times are not directly comparable)\n");
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub r: f64,
    pub loss: f64,
    pub region: Region,
}

/// Loss values on `-range, -range + step, ...` up to `range`.
pub fn curve(state: &AsrlState, range: f64, step: f64) -> Result<Vec<CurvePoint>, CliError> {
    if !(range > 0.0 && range.is_finite() && step > 0.0 && step.is_finite()) {
        return Err(CliError::Usage(format!(
            "range and step must be finite and > 0, got {range} and {step}"
        )));
    }
    let intervals = (2.0 * range / step + 1e-9).floor();
    if intervals + 1.0 > MAX_CURVE_POINTS as f64 {
        return Err(CliError::Usage(format!(
            "grid would have more than {MAX_CURVE_POINTS} points"
        )));
    }
    let loss = LossFunction::Asrl(*state);
    Ok((0..=intervals as usize)
        .map(|i| {
            let r = -range + i as f64 * step;
            CurvePoint {
                r,
                loss: loss.value_at(r),
                region: state.region(r),
            }
        })
        .collect())
}

#[derive(Debug)]
pub struct CurveOutcome {
    pub state: AsrlState,
    pub points: Vec<CurvePoint>,
    pub text: String,
}

pub fn losscurve(args: &LossCurveArgs) -> Result<CurveOutcome, CliError> {
    let settings = Settings::from_args(&args.train)?;
    let (state, source) = match &args.from_dataset {
        Some(dataset) => {
            let prepared = prepare(dataset, &args.data, &settings)?;
            let run = run_loss(&settings.loss(LossArg::Asrl), &prepared, &settings.config)?;
            let LossFunction::Asrl(state) = run.model.loss() else {
                return Err(CliError::Internal("ASRL model lost its state".into()));
            };
            (
                *state,
                format!(
                    "dataset={} rounds={} seed={} split_hash={}",
                    prepared.name, settings.config.n_rounds, settings.split.seed, run.split_hash
                ),
            )
        }
        None => (
            AsrlState::from_parts(
                args.delta1,
                args.delta2,
                args.alpha,
                args.beta,
                args.gamma,
                settings.asrl,
            )?,
            "flags".to_string(),
        ),
    };
    let range = args.range.unwrap_or(if state.delta2 > 0.0 {
        2.0 * state.delta2
    } else {
        5.0
    });
    let step = args.step.unwrap_or(range / 50.0);
    let points = curve(&state, range, step)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "# asrl loss curve format_version={REPORT_FORMAT_VERSION}"
    );
    let _ = writeln!(text, "# source {source}");
    let _ = writeln!(
        text,
        "# state delta1={} delta2={} alpha={} beta={} gamma={}",
        state.delta1, state.delta2, state.alpha, state.beta, state.gamma
    );
    let _ = writeln!(
        text,
        "# boundary |r|={}: quadratic at and below, linear above",
        state.delta1
    );
    let _ = writeln!(
        text,
        "# boundary |r|={}: linear at and below, logarithmic above",
        state.delta2
    );
    text.push_str("r,loss,region\n");
    for p in &points {
        let _ = writeln!(text, "{},{},{}", p.r, p.loss, p.region.as_str());
    }
    Ok(CurveOutcome {
        state,
        points,
        text,
    })
}

#[derive(Debug)]
pub struct ScatterOutcome {
    pub run: LossRun,
    pub truth: Vec<f64>,
    pub text: String,
}

pub fn scatter(args: &ScatterArgs) -> Result<ScatterOutcome, CliError> {
    let settings = Settings::from_args(&args.train)?;
    let prepared = prepare(&args.dataset, &args.data, &settings)?;
    let run = run_loss(&settings.loss(args.loss), &prepared, &settings.config)?;
    if let Some(path) = &args.model_out {
        write_file(path, &run.model.to_json())?;
    }
    let truth = prepared.test.target().to_vec();
    let mut text = String::new();
    let _ = writeln!(text, "# scatter format_version={REPORT_FORMAT_VERSION}");
    let _ = writeln!(
        text,
        "# dataset={} loss={} n_test={} split_hash={} config_hash={} mse={}",
        prepared.name,
        run.loss.name(),
        truth.len(),
        run.split_hash,
        run.config_hash,
        run.eval.mse
    );
    text.push_str("y_true,y_pred\n");
    for (y, p) in truth.iter().zip(&run.predictions) {
        let _ = writeln!(text, "{y},{p}");
    }
    Ok(ScatterOutcome { run, truth, text })
}

/// Parses the `y_true,y_pred` rows of scatter output.
pub fn parse_scatter(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        if line == "y_true,y_pred" {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| format!("bad row '{line}'"))?;
        truth.push(a.parse().map_err(|_| format!("bad number '{a}'"))?);
        predicted.push(b.parse().map_err(|_| format!("bad number '{b}'"))?);
    }
    Ok((truth, predicted))
}

#[derive(Debug)]
pub struct SummaryOutcome {
    /// `(dataset, mse per loss in LOSS_ORDER)`, in first-seen order.
    pub rows: Vec<(String, [f64; 4])>,
    pub warnings: Vec<String>,
    pub text: String,
}

/// Later files win when two reports name the same dataset.
pub fn summary(args: &SummaryArgs) -> Result<SummaryOutcome, CliError> {
    let mut rows: Vec<(String, [f64; 4], String)> = Vec::new();
    let mut warnings = Vec::new();
    for path in &args.reports {
        let shown = path.display().to_string();
        let report = KvReport::read(path).map_err(CliError::Data)?;
        let parse = || -> Result<(String, [f64; 4]), String> {
            let dataset = report.require("dataset")?.to_string();
            let mut mse = [0.0; 4];
            for (slot, loss) in mse.iter_mut().zip(LOSS_ORDER) {
                *slot = report.require_f64(&format!("loss.{loss}.mse"))?;
            }
            Ok((dataset, mse))
        };
        let (dataset, mse) = parse().map_err(|e| CliError::Data(format!("{shown}: {e}")))?;
        match rows.iter_mut().find(|(d, _, _)| *d == dataset) {
            Some(existing) => {
                warnings.push(format!(
                    "warning[W_DUPLICATE]: dataset '{dataset}' from {shown} replaces the entry from {}",
                    existing.2
                ));
                existing.1 = mse;
                existing.2 = shown;
            }
            None => rows.push((dataset, mse, shown)),
        }
    }
    let mut text = format!("dataset,{}\n", LOSS_ORDER.join(","));
    for (dataset, mse, _) in &rows {
        let cells: Vec<String> = mse.iter().map(f64::to_string).collect();
        let _ = writeln!(text, "{dataset},{}", cells.join(","));
    }
    Ok(SummaryOutcome {
        rows: rows.into_iter().map(|(d, m, _)| (d, m)).collect(),
        warnings,
        text,
    })
}
