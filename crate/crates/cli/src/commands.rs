//! One function per subcommand. Each resolves its settings, does the work,
//! and writes artifacts that carry the resolved settings and tool version.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use regscore::eval::{cross_validate, evaluate, sweep_model_size, synth_generate, to_dataset, CvConfig, SynthSpec};
use regscore::personalize::{gate, plr_weights, prs_predict, EmbeddingMatrix, GateMode};
use regscore::pipeline;
use regscore::scorecard::ScoreCard;
use regscore::tabular::{load_dataset, load_rows, write_dataset, SchemaSpec};
use regscore::verify::{run_suite, VerifyConfig};

use crate::args::{
    load_config, overlay, Cli, Command, CvArgs, DataArgs, EvalArgs, FitArgs, FoldArgs, FormatArg, GateArgs, ModelArgs,
    PredictArgs, SweepArgs, SynthArgs, VerifyArgs,
};
use crate::CliError;

pub const TOOL: &str = concat!("regscore ", env!("CARGO_PKG_VERSION"));

struct Ctx {
    file: Map<String, Value>,
    seed: u64,
    threads: Option<usize>,
}

impl Ctx {
    /// The resolved arguments plus the global settings.
    fn run_config<T: Serialize>(&self, command: &str, args: &T) -> Value {
        let mut v = serde_json::to_value(args).expect("arguments serialize");
        if let Value::Object(m) = &mut v {
            m.insert("command".into(), json!(command));
            m.insert("seed".into(), json!(self.seed));
            m.insert("threads".into(), json!(self.threads));
        }
        v
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => Map::new(),
    };
    let from_file = |key: &str| file.get(key).and_then(Value::as_u64);
    let seed = cli.seed.or_else(|| from_file("seed")).unwrap_or(0);
    let threads = cli
        .threads
        .or_else(|| from_file("threads").map(|t| t as usize));
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    let ctx = Ctx { file, seed, threads };
    match &cli.command {
        Command::Fit(a) => fit(&ctx, overlay(a, &ctx.file)?),
        Command::Predict(a) => predict(&ctx, overlay(a, &ctx.file)?),
        Command::Eval(a) => eval(&ctx, overlay(a, &ctx.file)?),
        Command::Cv(a) => cv(&ctx, overlay(a, &ctx.file)?),
        Command::Sweep(a) => sweep(&ctx, overlay(a, &ctx.file)?),
        Command::Synth(a) => synth(&ctx, overlay(a, &ctx.file)?),
        Command::Gate(a) => gate_cmd(&ctx, overlay(a, &ctx.file)?),
        Command::Verify(a) => verify(&ctx, overlay(a, &ctx.file)?),
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required {flag}")))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serializes");
    text.push('\n');
    write_text(path, &text)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// `<path>.run.json`, describing how a CSV artifact was made.
fn write_sidecar(path: &Path, run_config: &Value) -> Result<(), CliError> {
    let mut name = path.as_os_str().to_owned();
    name.push(".run.json");
    write_json(Path::new(&name), &json!({ "tool": TOOL, "run_config": run_config }))
}

fn with_meta<T: Serialize>(body: &T, run_config: Value) -> Value {
    let mut v = serde_json::to_value(body).expect("report serializes");
    if let Value::Object(m) = &mut v {
        m.insert("tool".into(), json!(TOOL));
        m.insert("run_config".into(), run_config);
    }
    v
}

fn load_model(path: &Path) -> Result<ScoreCard, CliError> {
    Ok(ScoreCard::from_json(&read_text(path)?)?)
}

fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn load_input(input: &DataArgs) -> Result<regscore::tabular::Dataset, CliError> {
    let data = require(&input.data, "--data")?;
    let schema = require(&input.schema, "--schema")?;
    let spec: SchemaSpec = serde_json::from_str(&read_text(schema)?)
        .map_err(|e| CliError::Data(format!("schema {}: {e}", schema.display())))?;
    Ok(load_dataset(open(data)?, &spec)?)
}

fn fit(ctx: &Ctx, mut a: FitArgs) -> Result<(), CliError> {
    a.model.resolve();
    a.out.get_or_insert_with(|| PathBuf::from("model.json"));
    a.format.get_or_insert(FormatArg::Text);
    let config = a.model.fit_config()?;
    let ds = load_input(&a.input)?;
    let result = pipeline::fit(&ds, &config)?;

    let mut card = result.card;
    card.tool = Some(TOOL.to_string());
    card.run_config = Some(ctx.run_config("fit", &a));
    let mut model_text = card.to_json();
    model_text.push('\n');
    write_text(a.out.as_ref().expect("resolved"), &model_text)?;
    let rendered = card.render(a.format.expect("resolved").into());
    print!("{rendered}");
    if !rendered.ends_with('\n') {
        println!();
    }
    if let Some(p) = &a.card {
        write_text(p, &rendered)?;
    }
    if result.outcome.certified_optimal == Some(false) {
        return Err(CliError::Budget(format!(
            "branch-and-bound stopped at its node budget with gap {:.3e}; the model was written but is not certified optimal",
            result.outcome.gap.unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

fn predict(ctx: &Ctx, mut a: PredictArgs) -> Result<(), CliError> {
    a.out.get_or_insert_with(|| PathBuf::from("predictions.csv"));
    let card = load_model(require(&a.model, "--model")?)?;
    let data = require(&a.data, "--data")?;
    let file = open(data)?;
    let (rows, _) = load_rows(file, &card.xi_provenance.schema(), None)?;
    if a.threshold.is_none() {
        a.threshold = card.threshold;
    }
    let preds = card.predict_many(&rows)?;
    let mut out = String::from(if a.threshold.is_some() { "prediction,class\n" } else { "prediction\n" });
    for p in preds {
        match a.threshold {
            Some(t) => out.push_str(&format!("{p},{}\n", if p > t { "positive" } else { "negative" })),
            None => out.push_str(&format!("{p}\n")),
        }
    }
    let path = a.out.clone().expect("resolved");
    write_text(&path, &out)?;
    write_sidecar(&path, &ctx.run_config("predict", &a))
}

fn eval(ctx: &Ctx, mut a: EvalArgs) -> Result<(), CliError> {
    a.out.get_or_insert_with(|| PathBuf::from("metrics.json"));
    let card = load_model(require(&a.model, "--model")?)?;
    let data = require(&a.data, "--data")?;
    let file = open(data)?;
    let (rows, target) = load_rows(file, &card.xi_provenance.schema(), Some(&card.target_name))?;
    let target =
        target.ok_or_else(|| CliError::Data(format!("{} has no `{}` column", data.display(), card.target_name)))?;
    if a.threshold.is_none() {
        a.threshold = card.threshold;
    }
    let preds = card.predict_many(&rows)?;
    let metrics = evaluate(&target, &preds, a.threshold)?;
    println!("{}", serde_json::to_string(&metrics).expect("metrics serialize"));
    let body = json!({ "metrics": metrics });
    write_json(a.out.as_ref().expect("resolved"), &with_meta(&body, ctx.run_config("eval", &a)))
}

fn cv_config(ctx: &Ctx, model: &ModelArgs, folds: &FoldArgs) -> Result<CvConfig, CliError> {
    Ok(CvConfig {
        fit: model.fit_config()?,
        n_folds: folds.folds.expect("resolved"),
        strat_bins: folds.strat_bins.expect("resolved"),
        seed: ctx.seed,
    })
}

fn cv(ctx: &Ctx, mut a: CvArgs) -> Result<(), CliError> {
    a.model.resolve();
    a.folds.resolve();
    a.out.get_or_insert_with(|| PathBuf::from("cv_report.json"));
    let config = cv_config(ctx, &a.model, &a.folds)?;
    let ds = load_input(&a.input)?;
    let run = cross_validate(&ds, &config)?;
    println!("{}", serde_json::to_string(&run.report.aggregate).expect("aggregate serializes"));
    write_json(
        a.out.as_ref().expect("resolved"),
        &with_meta(&run.report, ctx.run_config("cv", &a)),
    )
}

fn sweep(ctx: &Ctx, mut a: SweepArgs) -> Result<(), CliError> {
    a.model.resolve();
    a.folds.resolve();
    a.k_list.get_or_insert_with(|| vec![5, 50]);
    a.out.get_or_insert_with(|| PathBuf::from("sweep.csv"));
    a.out_json.get_or_insert_with(|| PathBuf::from("sweep.json"));
    let config = cv_config(ctx, &a.model, &a.folds)?;
    let ds = load_input(&a.input)?;
    let report = sweep_model_size(&ds, a.k_list.as_ref().expect("resolved"), &config)?;
    let table = report.to_csv()?;
    print!("{table}");
    let run_config = ctx.run_config("sweep", &a);
    let csv_path = a.out.as_ref().expect("resolved");
    write_text(csv_path, &table)?;
    write_sidecar(csv_path, &run_config)?;
    write_json(a.out_json.as_ref().expect("resolved"), &with_meta(&report, run_config))
}

fn synth(ctx: &Ctx, mut a: SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        bernoulli_p: *a.bernoulli_p.get_or_insert(0.5),
        true_bias: *a.bias.get_or_insert(0.0),
        ..SynthSpec::new(
            *a.rows.get_or_insert(2000),
            *a.features.get_or_insert(50),
            *a.k_true.get_or_insert(5),
            *a.noise.get_or_insert(0.1),
            ctx.seed,
        )
    };
    let out = a.out.get_or_insert_with(|| PathBuf::from("synth.csv")).clone();
    let (data, truth) = synth_generate(&spec)?;
    let ds = to_dataset(&data)?;

    let mut csv = Vec::new();
    write_dataset(&ds, &mut csv)?;
    fs::write(&out, csv).map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    let run_config = ctx.run_config("synth", &a);
    write_sidecar(&out, &run_config)?;
    write_json(
        &out.with_extension("schema.json"),
        &with_meta(&SchemaSpec::describe(&ds), run_config.clone()),
    )?;
    write_json(
        &out.with_extension("truth.json"),
        &with_meta(&json!({ "spec": spec, "truth": truth }), run_config),
    )
}

#[derive(Deserialize)]
struct GateParams {
    w_g: Vec<f64>,
    #[serde(default)]
    head_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    head_bias: Option<Vec<f64>>,
    #[serde(default)]
    x_hat: Option<Vec<f64>>,
}

fn parse_embeddings(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| CliError::Data(format!("embeddings: {e}")));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            line.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Data(format!("embeddings line {}: bad number `{}`", i + 1, c.trim())))
                })
                .collect()
        })
        .collect()
}

fn gate_cmd(ctx: &Ctx, mut a: GateArgs) -> Result<(), CliError> {
    let tau = *a.tau.get_or_insert(0.1);
    a.out.get_or_insert_with(|| PathBuf::from("gate.json"));
    let k = *require(&a.gate_k, "--gate-k")?;
    let embeddings = EmbeddingMatrix::new(parse_embeddings(&read_text(require(&a.embeddings, "--embeddings")?)?)?)?;
    let params: GateParams = serde_json::from_str(&read_text(require(&a.params, "--params")?)?)
        .map_err(|e| CliError::Data(format!("gate params: {e}")))?;

    let g = gate(&embeddings, &params.w_g, k, tau)?;
    let weights = match (&params.head_matrix, &params.head_bias) {
        (Some(m), Some(b)) => Some(plr_weights(embeddings.cls(), m, b)?),
        (None, None) => None,
        _ => return Err(CliError::Data("head_matrix and head_bias must be given together".into())),
    };
    let prediction = match (&weights, &params.x_hat) {
        (Some(w), Some(x)) => Some(json!({
            "soft": prs_predict(x, w, &g, GateMode::Soft)?,
            "hard": prs_predict(x, w, &g, GateMode::Hard)?,
        })),
        _ => None,
    };
    let body = json!({ "gate": g, "weights": weights, "prediction": prediction });
    println!("{}", serde_json::to_string(&body).expect("gate output serializes"));
    write_json(a.out.as_ref().expect("resolved"), &with_meta(&body, ctx.run_config("gate", &a)))
}

fn verify(ctx: &Ctx, mut a: VerifyArgs) -> Result<(), CliError> {
    let config = VerifyConfig {
        instances: *a.instances.get_or_insert(30),
        seed: ctx.seed,
    };
    let report = run_suite(&config)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(p) = &a.out {
        write_json(p, &with_meta(&report, ctx.run_config("verify", &a)))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Data("verification failed".into()))
    }
}
