//! Command-line front end. Every subcommand takes `--config FILE` with
//! `key = value` lines using the flag names (dashes as underscores);
//! explicit flags win over the file.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use super::config::{parse_score, ConfigMap, ExperimentConfig};
use super::experiment::run_eval;
use super::synth::{cars_net, cars_table};
use crate::afd::mine_afds;
use crate::bayesnet::{fit_parameters, learn_structure, BayesNet, StructureSearchConfig};
use crate::error::{Error, Result};
use crate::imputation::{impute_table_with, Engine, ImputeOptions, Mode};
use crate::inference::GibbsConfig;
use crate::rewriting::{bn_all_mb, bn_beam, AllMbConfig, BeamConfig, RewriteResult, ScoringContext};
use crate::source::AutonomousSource;
use crate::tabular::{load_csv, write_csv, SelectionQuery, Table};

#[derive(Parser, Debug)]
#[command(
    name = "bnqp",
    version,
    about = "Bayes-network imputation and query rewriting over incomplete data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a model (structure and parameters) from a CSV file.
    Learn(LearnArgs),
    /// Fill null cells of a CSV file with a learned model.
    Impute(ImputeArgs),
    /// Rewrite a selection query and issue the rewrites against a CSV source.
    Rewrite(RewriteArgs),
    /// Run the experiments described by a config file.
    Eval(EvalArgs),
    /// Mine approximate functional dependencies.
    MineAfd(MineAfdArgs),
    /// Write a synthetic car dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Settings file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    null_token: Option<String>,
    #[arg(long)]
    max_in_degree: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// `bic` or `bdeu[:ess]`.
    #[arg(long)]
    score: Option<String>,
    #[arg(long)]
    pseudo_count: Option<f64>,
}

#[derive(Args, Debug)]
struct ImputeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Completed table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Complete table with the same ids, for accuracy.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// `exact` or `gibbs`.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// `joint` or `independent`.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated attributes to impute.
    #[arg(long)]
    only: Option<String>,
    #[arg(long)]
    null_token: Option<String>,
}

#[derive(Args, Debug)]
struct RewriteArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Sample used for selectivity estimates.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// The table standing in for the autonomous source.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Conjunction such as `Make=BMW,Mileage=40000`.
    #[arg(long)]
    query: Option<String>,
    /// `all-mb` or `beam`.
    #[arg(long)]
    method: Option<String>,
    /// Rewritten queries issued.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Queries the source answers, including the size probe.
    #[arg(long)]
    query_limit: Option<usize>,
    #[arg(long)]
    full_domain_fallback: Option<bool>,
    /// Retrieved possible answers as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    null_token: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MineAfdArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_lhs: Option<usize>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    null_token: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the generating model.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

/// Settings from the config file overridden by explicit flags.
struct Settings {
    map: ConfigMap,
}

impl Settings {
    fn new(common: &Common, flags: Vec<(&str, Option<String>)>, known: &[&str]) -> Result<Self> {
        let mut map = match &common.config {
            Some(path) => ConfigMap::load(path)?,
            None => ConfigMap::default(),
        };
        let mut all: Vec<&str> = known.to_vec();
        all.push("seed");
        map.reject_unknown(&all, &[])?;
        for (key, value) in flags {
            if let Some(v) = value {
                map.set(key, v);
            }
        }
        if let Some(seed) = common.seed {
            map.set("seed", seed.to_string());
        }
        Ok(Settings { map })
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        self.map
            .get(key)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("--{} is required", key.replace('_', "-"))))
    }

    fn opt_path(&self, key: &str) -> Option<PathBuf> {
        self.map.get(key).map(PathBuf::from)
    }

    fn text(&self, key: &str, default: &str) -> String {
        self.map.get(key).unwrap_or(default).to_string()
    }

    fn value<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.map.parsed_or(key, default)
    }
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn p(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn load_model(path: &Path) -> Result<BayesNet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BayesNet::load(&text)
}

fn learn(a: &LearnArgs) -> Result<()> {
    let set = Settings::new(
        &a.common,
        vec![
            ("train", p(&a.train)),
            ("out", p(&a.out)),
            ("null_token", a.null_token.clone()),
            ("max_in_degree", s(&a.max_in_degree)),
            ("restarts", s(&a.restarts)),
            ("max_iterations", s(&a.max_iterations)),
            ("score", a.score.clone()),
            ("pseudo_count", s(&a.pseudo_count)),
        ],
        &[
            "train",
            "out",
            "null_token",
            "max_in_degree",
            "restarts",
            "max_iterations",
            "score",
            "pseudo_count",
        ],
    )?;
    let train = load_csv(set.path("train")?, &set.text("null_token", ""))?;
    let d = StructureSearchConfig::default();
    let cfg = StructureSearchConfig {
        max_in_degree: set.value("max_in_degree", d.max_in_degree)?,
        restarts: set.value("restarts", d.restarts)?,
        max_iterations: set.value("max_iterations", d.max_iterations)?,
        score: set.map.get("score").map(parse_score).transpose()?.unwrap_or(d.score),
        seed: set.value("seed", 0)?,
        ..d
    };
    let structure = learn_structure(&train, &cfg)?;
    info!("edges: {:?}", structure.edges());
    let net = fit_parameters(&structure, &train, set.value("pseudo_count", 1.0)?)?;
    write_file(&set.path("out")?, &net.save()?)
}

fn impute(a: &ImputeArgs) -> Result<()> {
    let set = Settings::new(
        &a.common,
        vec![
            ("model", p(&a.model)),
            ("input", p(&a.input)),
            ("out", p(&a.out)),
            ("report", p(&a.report)),
            ("truth", p(&a.truth)),
            ("engine", a.engine.clone()),
            ("samples", s(&a.samples)),
            ("burn_in", s(&a.burn_in)),
            ("mode", a.mode.clone()),
            ("only", a.only.clone()),
            ("null_token", a.null_token.clone()),
        ],
        &[
            "model",
            "input",
            "out",
            "report",
            "truth",
            "engine",
            "samples",
            "burn_in",
            "mode",
            "only",
            "null_token",
        ],
    )?;
    let d = GibbsConfig::default();
    let engine = match set.text("engine", "exact").as_str() {
        "exact" => Engine::Exact,
        "gibbs" => Engine::Gibbs(GibbsConfig {
            samples: set.value("samples", d.samples)?,
            burn_in: set.value("burn_in", d.burn_in)?,
            seed: set.value("seed", 0)?,
        }),
        other => return Err(Error::Config(format!("unknown engine {other:?}"))),
    };
    let mode = match set.text("mode", "joint").as_str() {
        "joint" => Mode::Joint,
        "independent" => Mode::Independent,
        other => return Err(Error::Config(format!("unknown mode {other:?}"))),
    };
    let out = set.path("out")?;
    let net = load_model(&set.path("model")?)?;
    let null = set.text("null_token", "");
    let input = load_csv(set.path("input")?, &null)?.conform_to(net.schema())?;
    let truth = set
        .opt_path("truth")
        .map(|t| load_csv(t, &null).and_then(|t| t.conform_to(net.schema())))
        .transpose()?;
    let only = set
        .map
        .get("only")
        .map(|names| {
            names
                .split(',')
                .map(|n| net.schema().require_index(n.trim()))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let opts = ImputeOptions {
        engine,
        mode,
        only,
        parallel: true,
    };
    let (done, report) = impute_table_with(&net, &input, &opts, truth.as_ref())?;
    write_csv(create(&out)?, &done, &null, None)?;
    info!("imputation took {:.3}s", report.duration.as_secs_f64());
    let text = report.to_text(false);
    match set.opt_path("report") {
        Some(path) => write_file(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rewrite(a: &RewriteArgs) -> Result<()> {
    let set = Settings::new(
        &a.common,
        vec![
            ("model", p(&a.model)),
            ("sample", p(&a.sample)),
            ("source", p(&a.source)),
            ("query", a.query.clone()),
            ("method", a.method.clone()),
            ("k", s(&a.k)),
            ("alpha", s(&a.alpha)),
            ("beam_width", s(&a.beam_width)),
            ("depth", s(&a.depth)),
            ("query_limit", s(&a.query_limit)),
            ("full_domain_fallback", s(&a.full_domain_fallback)),
            ("out", p(&a.out)),
            ("null_token", a.null_token.clone()),
        ],
        &[
            "model",
            "sample",
            "source",
            "query",
            "method",
            "k",
            "alpha",
            "beam_width",
            "depth",
            "query_limit",
            "full_domain_fallback",
            "out",
            "null_token",
        ],
    )?;
    let net = load_model(&set.path("model")?)?;
    let null = set.text("null_token", "");
    let sample = load_csv(set.path("sample")?, &null)?;
    let source_table = load_csv(set.path("source")?, &null)?;
    let query = SelectionQuery::parse(
        set.map
            .get("query")
            .ok_or_else(|| Error::Config("--query is required".into()))?,
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    query.validate(net.schema())?;
    let k: usize = set.value("k", 10)?;
    let alpha: f64 = set.value("alpha", 0.0)?;
    let fallback: bool = set.value("full_domain_fallback", false)?;
    let limit: Option<usize> = set.map.parsed("query_limit")?;
    let mut source = AutonomousSource::new(source_table, limit);
    let ratio = source.estimate_ratio(&sample)?;
    let ctx = ScoringContext {
        net: &net,
        sample: &sample,
        ratio,
    };
    let result = match set.text("method", "all-mb").as_str() {
        "all-mb" => bn_all_mb(
            &ctx,
            &mut source,
            &query,
            &AllMbConfig {
                k,
                alpha,
                full_domain_fallback: fallback,
            },
        )?,
        "beam" => {
            let d = BeamConfig::default();
            let cfg = BeamConfig {
                beam_width: set.value("beam_width", d.beam_width)?,
                depth: set.value("depth", d.depth)?,
                alpha,
                top_k_issue: k,
                full_domain_fallback: fallback,
            };
            bn_beam(&ctx, &mut source, &query, &cfg)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown method {other:?}; expected all-mb or beam"
            )))
        }
    };
    print!("{}", rewrite_table(&result));
    if let Some(path) = set.opt_path("out") {
        let tuples = result.outcome.extended.iter().map(|r| r.tuple.clone()).collect();
        let relevance: Vec<String> = result
            .outcome
            .extended
            .iter()
            .map(|r| format!("{:.6}", r.relevance))
            .collect();
        let table = Table::new(source.schema().clone(), tuples)?;
        write_csv(create(&path)?, &table, &null, Some(("relevance", &relevance)))?;
    }
    Ok(())
}

/// Issued queries in issue order, then unissued candidates.
fn rewrite_table(r: &RewriteResult) -> String {
    let mut out = String::new();
    writeln!(out, "# certain answers: {}", r.base.len()).unwrap();
    writeln!(out, "# possible answers: {}", r.outcome.extended.len()).unwrap();
    if r.outcome.truncated {
        writeln!(out, "# query budget exhausted").unwrap();
    }
    writeln!(out, "rank\tquery\tprecision\tselectivity\tf_measure\tnew_tuples").unwrap();
    for (i, q) in r.outcome.issued.iter().enumerate() {
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.3}\t{:.6}\t{}",
            i + 1,
            q.query,
            q.score.expected_precision,
            q.score.expected_selectivity,
            q.score.f_measure,
            r.outcome.new_ids(i).len()
        )
        .unwrap();
    }
    for q in r.candidates.iter().filter(|c| !r.outcome.issued.contains(c)) {
        writeln!(
            out,
            "-\t{}\t{:.6}\t{:.3}\t{:.6}\t-",
            q.query, q.score.expected_precision, q.score.expected_selectivity, q.score.f_measure
        )
        .unwrap();
    }
    out
}

fn eval(a: &EvalArgs) -> Result<()> {
    let path = a
        .common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let map = ConfigMap::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = ExperimentConfig::from_map(&map, base)?;
    if let Some(seed) = a.common.seed {
        cfg.seeds = vec![seed];
    }
    run_eval(&cfg, a.out.as_deref().unwrap_or(Path::new(".")))
}

fn mine_afd(a: &MineAfdArgs) -> Result<()> {
    let set = Settings::new(
        &a.common,
        vec![
            ("train", p(&a.train)),
            ("out", p(&a.out)),
            ("max_lhs", s(&a.max_lhs)),
            ("min_confidence", s(&a.min_confidence)),
            ("null_token", a.null_token.clone()),
        ],
        &["train", "out", "max_lhs", "min_confidence", "null_token"],
    )?;
    let train = load_csv(set.path("train")?, &set.text("null_token", ""))?;
    let afds = mine_afds(&train, set.value("max_lhs", 2)?, set.value("min_confidence", 0.0)?)?;
    write_file(&set.path("out")?, &afds.to_text())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let set = Settings::new(
        &a.common,
        vec![("rows", s(&a.rows)), ("out", p(&a.out)), ("model_out", p(&a.model_out))],
        &["rows", "out", "model_out"],
    )?;
    let table = cars_table(set.value("rows", 5000)?, set.value("seed", 0)?);
    write_csv(create(&set.path("out")?)?, &table, "", None)?;
    if let Some(path) = set.opt_path("model_out") {
        write_file(&path, &cars_net().save()?)?;
    }
    Ok(())
}

/// Runs the command line; returns 0 on success, 1 on usage errors and 2 on
/// data errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Learn(a) => learn(a),
        Command::Impute(a) => impute(a),
        Command::Rewrite(a) => rewrite(a),
        Command::Eval(a) => eval(a),
        Command::MineAfd(a) => mine_afd(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                2
            } else {
                1
            }
        }
    }
}
