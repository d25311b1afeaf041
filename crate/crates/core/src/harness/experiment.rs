use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};

use super::config::{Dataset, ExperimentConfig, Method};
use super::synth::cars_table;
use crate::afd::{afd_impute_table, afd_issue, mine_afds, AfdContext, AfdSet, AfdStrategy, NaiveBayesModel};
use crate::bayesnet::{fit_parameters, learn_structure, BayesNet, StructureSearchConfig};
use crate::error::{Error, Result};
use crate::imputation::{impute_table_with, Engine, ImputationReport, ImputeOptions, Mode};
use crate::inference::GibbsConfig;
use crate::rewriting::{bn_all_mb, bn_beam, AllMbConfig, RewriteResult, ScoringContext};
use crate::source::AutonomousSource;
use crate::tabular::{load_csv, SelectionQuery, Table};

/// Independent seed for one use of an experiment seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Table> {
    match &cfg.dataset {
        Dataset::Synthetic { rows } => Ok(cars_table(*rows, seed)),
        Dataset::Csv {
            path,
            null_token,
            discretize,
        } => {
            let t = load_csv(path, null_token)?;
            if discretize.is_empty() {
                Ok(t)
            } else {
                t.discretize(discretize)
            }
        }
    }
}

/// Seeded train sample and the remaining test rows.
pub fn split(table: &Table, train_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    let train = table.sample(train_fraction, sub_seed(seed, 1))?;
    let test = table.difference(&train);
    if train.is_empty() || test.is_empty() {
        return Err(Error::InsufficientData(format!(
            "train/test split of {} rows left a side empty",
            table.len()
        )));
    }
    Ok((train, test))
}

pub struct TrainedModels {
    pub net: BayesNet,
    pub afds: AfdSet,
    pub nb: NaiveBayesModel,
}

pub fn train_models(train: &Table, cfg: &ExperimentConfig, seed: u64) -> Result<TrainedModels> {
    let search = StructureSearchConfig {
        seed: sub_seed(seed, 2),
        ..cfg.structure.clone()
    };
    let structure = learn_structure(train, &search)?;
    info!("learned structure {:?}", structure.edges());
    Ok(TrainedModels {
        net: fit_parameters(&structure, train, cfg.pseudo_count)?,
        afds: mine_afds(train, cfg.afd_max_lhs, cfg.afd_min_confidence)?,
        nb: NaiveBayesModel::fit(train, cfg.pseudo_count)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    /// Queries issued so far.
    pub issued: usize,
    /// Distinct uncertain tuples retrieved so far.
    pub retrieved: usize,
    pub relevant: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Cumulative precision and recall of the uncertain answers after each
/// issued rewritten query.
#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    pub seed: u64,
    pub query_index: usize,
    pub query: SelectionQuery,
    pub method: Method,
    /// Relevant uncertain tuples in the source.
    pub relevant_total: usize,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn last(&self) -> Option<&PrPoint> {
        self.points.last()
    }

    pub fn final_precision(&self) -> f64 {
        self.last().map_or(0.0, |p| p.precision)
    }

    pub fn final_recall(&self) -> f64 {
        self.last().map_or(0.0, |p| p.recall)
    }

    /// `method,query_index,precision,recall` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,query_index,precision,recall\n");
        for p in &self.points {
            writeln!(out, "{},{},{:.6},{:.6}", self.method, p.issued, p.precision, p.recall).unwrap();
        }
        out
    }
}

fn curve_points(result: &RewriteResult, relevant: &HashSet<u64>, relevant_total: usize) -> Vec<PrPoint> {
    let mut points = Vec::with_capacity(result.outcome.issued.len());
    let (mut retrieved, mut hits) = (0, 0);
    for i in 0..result.outcome.issued.len() {
        for id in result.outcome.new_ids(i) {
            retrieved += 1;
            hits += relevant.contains(&id) as usize;
        }
        points.push(PrPoint {
            issued: i + 1,
            retrieved,
            relevant: hits,
            precision: if retrieved == 0 {
                0.0
            } else {
                hits as f64 / retrieved as f64
            },
            recall: if relevant_total == 0 {
                0.0
            } else {
                hits as f64 / relevant_total as f64
            },
        });
    }
    points
}

fn run_method(
    method: Method,
    cfg: &ExperimentConfig,
    models: &TrainedModels,
    train: &Table,
    source: &mut AutonomousSource,
    query: &SelectionQuery,
    ratio: f64,
) -> Result<RewriteResult> {
    let alpha = cfg.beam.alpha;
    let bn = ScoringContext {
        net: &models.net,
        sample: train,
        ratio,
    };
    let afd = AfdContext {
        afds: &models.afds,
        nb: &models.nb,
        sample: train,
        ratio,
    };
    match method {
        Method::BnAllMb => bn_all_mb(
            &bn,
            source,
            query,
            &AllMbConfig {
                k: cfg.k,
                alpha,
                full_domain_fallback: cfg.beam.full_domain_fallback,
            },
        ),
        Method::BnBeam => bn_beam(&bn, source, query, &cfg.beam),
        Method::Afd => afd_issue(&afd, source, query, AfdStrategy::Single, cfg.k, alpha),
        Method::AfdAllAttributes => afd_issue(&afd, source, query, AfdStrategy::AllAttributes, cfg.k, alpha),
        Method::AfdHighestConfidence => afd_issue(&afd, source, query, AfdStrategy::HighestConfidence, cfg.k, alpha),
        Method::BnExact | Method::BnGibbs => unreachable!("not a rewriting method"),
    }
}

/// Rewriting evaluation of one seed: split, train, then for each query null
/// its constrained attributes on a random part of the test rows and run
/// every rewriting method against a fresh source over them.
pub fn rewriting_curves(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<PrCurve>> {
    let data = load_dataset(cfg, seed)?;
    let (train, test) = split(&data, cfg.train_fraction, seed)?;
    let models = train_models(&train, cfg, seed)?;
    let mut curves = Vec::new();
    for (j, query) in cfg.queries.iter().enumerate() {
        let Ok(resolved) = query.resolve(test.schema()) else {
            warn!("skipping {query}: unknown attribute or value");
            continue;
        };
        let attrs: Vec<usize> = resolved.iter().map(|&(a, _)| a).collect();
        let holed = test.inject_nulls(&attrs, cfg.test_null_fraction, sub_seed(seed, 100 + j as u64))?;
        if holed.count_matches(query) == 0 {
            warn!("skipping {query}: no certain answers remain after nulling");
            continue;
        }
        let relevant: HashSet<u64> = holed
            .tuples()
            .iter()
            .filter(|t| attrs.iter().any(|&a| t.cells[a].is_none()))
            .filter(|t| {
                let truth = test.get_by_id(t.id).expect("same ids");
                resolved.iter().all(|&(a, v)| truth.cells[a] == Some(v))
            })
            .map(|t| t.id)
            .collect();
        if relevant.is_empty() {
            warn!("{query}: no relevant uncertain tuples; recall is reported as 0");
        }
        let ratio = holed.len() as f64 / train.len() as f64;
        for &method in cfg.methods.iter().filter(|m| m.rewrites()) {
            let mut source = AutonomousSource::new(holed.clone(), cfg.query_limit);
            let points = match run_method(method, cfg, &models, &train, &mut source, query, ratio) {
                Ok(result) => curve_points(&result, &relevant, relevant.len()),
                Err(e @ (Error::NoRule(_) | Error::NotApplicable(_) | Error::InvalidArgument(_))) => {
                    warn!("{method} on {query}: {e}");
                    Vec::new()
                }
                Err(e) => return Err(e),
            };
            curves.push(PrCurve {
                seed,
                query_index: j,
                query: query.clone(),
                method,
                relevant_total: relevant.len(),
                points,
            });
        }
    }
    Ok(curves)
}

pub fn run_rewriting_experiment(cfg: &ExperimentConfig) -> Result<Vec<PrCurve>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        out.extend(rewriting_curves(cfg, seed)?);
    }
    Ok(out)
}

/// One method's imputation of one target set at one incompleteness level.
#[derive(Clone, Debug, PartialEq)]
pub struct ImputationRow {
    pub seed: u64,
    pub method: Method,
    pub incompleteness: f64,
    pub targets: Vec<String>,
    pub report: ImputationReport,
}

impl ImputationRow {
    pub fn seconds(&self) -> f64 {
        self.report.duration.as_secs_f64()
    }
}

/// Test rows with every target nulled and each other attribute nulled
/// independently on a `level` fraction of the rows.
pub fn holed_for_imputation(test: &Table, targets: &[usize], level: f64, seed: u64) -> Result<Table> {
    let mut holed = test.inject_nulls(targets, 1.0, 0)?;
    for a in (0..test.schema().arity()).filter(|a| !targets.contains(a)) {
        holed = holed.inject_nulls(&[a], level, sub_seed(seed, a as u64))?;
    }
    Ok(holed)
}

/// Imputation evaluation of one seed over every target set and level.
pub fn imputation_rows(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ImputationRow>> {
    let data = load_dataset(cfg, seed)?;
    let (train, test) = split(&data, cfg.train_fraction, seed)?;
    let models = train_models(&train, cfg, seed)?;
    let mut rows = Vec::new();
    for (ti, names) in cfg.impute_targets.iter().enumerate() {
        let targets = names
            .iter()
            .map(|n| test.schema().require_index(n))
            .collect::<Result<Vec<_>>>()?;
        for (li, &level) in cfg.incompleteness.iter().enumerate() {
            let stream = 1000 + (ti as u64) * 100 + li as u64;
            let holed = holed_for_imputation(&test, &targets, level, sub_seed(seed, stream))?;
            for &method in cfg.methods.iter().filter(|m| m.imputes()) {
                let report = match method {
                    Method::Afd => afd_impute_table(&models.afds, &models.nb, &holed, Some(&targets), Some(&test))?.1,
                    Method::BnExact | Method::BnGibbs => {
                        let engine = if method == Method::BnExact {
                            Engine::Exact
                        } else {
                            Engine::Gibbs(GibbsConfig {
                                seed: sub_seed(seed, 3),
                                ..cfg.gibbs
                            })
                        };
                        let opts = ImputeOptions {
                            engine,
                            mode: Mode::Joint,
                            only: Some(targets.clone()),
                            parallel: true,
                        };
                        impute_table_with(&models.net, &holed, &opts, Some(&test))?.1
                    }
                    _ => unreachable!("not an imputation method"),
                };
                rows.push(ImputationRow {
                    seed,
                    method,
                    incompleteness: level,
                    targets: names.clone(),
                    report,
                });
            }
        }
    }
    Ok(rows)
}

pub fn run_imputation_experiment(cfg: &ExperimentConfig) -> Result<Vec<ImputationRow>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        out.extend(imputation_rows(cfg, seed)?);
    }
    Ok(out)
}

fn slug(method: Method) -> String {
    method.name().to_ascii_lowercase()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// One `pr_s<seed>_q<query>_<method>.csv` per curve plus a `rewriting.txt`
/// summary.
pub fn write_rewriting_outputs(dir: &Path, curves: &[PrCurve]) -> Result<()> {
    let mut summary = String::new();
    for c in curves {
        write(
            dir,
            &format!("pr_s{}_q{}_{}.csv", c.seed, c.query_index, slug(c.method)),
            &c.to_csv(),
        )?;
        let key = format!("s{}.q{}", c.seed, c.query_index);
        if !summary.contains(&format!("{key}.query:")) {
            writeln!(summary, "{key}.query: {}", c.query).unwrap();
            writeln!(summary, "{key}.relevant: {}", c.relevant_total).unwrap();
        }
        let m = c.method;
        writeln!(summary, "{key}.{m}.issued: {}", c.points.len()).unwrap();
        writeln!(summary, "{key}.{m}.retrieved: {}", c.last().map_or(0, |p| p.retrieved)).unwrap();
        writeln!(summary, "{key}.{m}.precision: {:.6}", c.final_precision()).unwrap();
        writeln!(summary, "{key}.{m}.recall: {:.6}", c.final_recall()).unwrap();
    }
    write(dir, "rewriting.txt", &summary)
}

fn accuracy(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |a| format!("{a:.6}"))
}

/// `imputation.csv` with accuracies and, when asked for, `timing.csv` with
/// seconds per engine in the column order AFD, BN-Gibbs, BN-Exact.
pub fn write_imputation_outputs(dir: &Path, rows: &[ImputationRow], timing: bool) -> Result<()> {
    let mut csv = String::from("seed,method,incompleteness,targets,cell_accuracy,tuple_accuracy,unfilled_cells\n");
    for r in rows {
        writeln!(
            csv,
            "{},{},{:.2},{},{},{},{}",
            r.seed,
            r.method,
            r.incompleteness,
            r.targets.join("+"),
            accuracy(r.report.cell_accuracy()),
            accuracy(r.report.tuple_accuracy()),
            r.report.unfilled_cells
        )
        .unwrap();
    }
    write(dir, "imputation.csv", &csv)?;
    if timing {
        let mut t = String::from("seed,incompleteness,targets,AFD,BN-Gibbs,BN-Exact\n");
        let mut keys: Vec<(u64, String, String)> = Vec::new();
        for r in rows {
            let key = (r.seed, format!("{:.2}", r.incompleteness), r.targets.join("+"));
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        for (seed, level, targets) in keys {
            let cell = |m: Method| {
                rows.iter()
                    .find(|r| {
                        r.seed == seed
                            && r.method == m
                            && format!("{:.2}", r.incompleteness) == level
                            && r.targets.join("+") == targets
                    })
                    .map_or_else(|| "NA".into(), |r| format!("{:.3}", r.seconds()))
            };
            writeln!(
                t,
                "{seed},{level},{targets},{},{},{}",
                cell(Method::Afd),
                cell(Method::BnGibbs),
                cell(Method::BnExact)
            )
            .unwrap();
        }
        write(dir, "timing.csv", &t)?;
    }
    Ok(())
}

/// Runs whatever the config asks for and writes the outputs under `dir`.
pub fn run_eval(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    if cfg.queries.is_empty() && cfg.impute_targets.is_empty() {
        return Err(Error::Config("config has neither queries nor impute_targets".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if !cfg.queries.is_empty() {
        write_rewriting_outputs(dir, &run_rewriting_experiment(cfg)?)?;
    }
    if !cfg.impute_targets.is_empty() {
        write_imputation_outputs(dir, &run_imputation_experiment(cfg)?, cfg.timing)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            dataset: Dataset::Synthetic { rows: 1500 },
            structure: StructureSearchConfig {
                restarts: 2,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn split_partitions_rows() {
        let t = cars_table(200, 1);
        let (train, test) = split(&t, 0.15, 9).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(test.len(), 170);
        assert!(train.tuples().iter().all(|x| test.get_by_id(x.id).is_none()));
    }

    #[test]
    fn curves_are_cumulative() {
        let cfg = ExperimentConfig {
            queries: vec![
                SelectionQuery::parse("Body=Sedan").unwrap(),
                SelectionQuery::parse("Make=BMW,Year=2003").unwrap(),
            ],
            ..small()
        };
        let curves = rewriting_curves(&cfg, 5).unwrap();
        assert!(!curves.is_empty());
        for c in &curves {
            for w in c.points.windows(2) {
                assert!(w[1].recall >= w[0].recall);
                assert!(w[1].retrieved >= w[0].retrieved);
            }
            assert!(c.points.iter().all(|p| (0.0..=1.0).contains(&p.precision)));
            assert!(c.points.len() <= 10);
        }
        // single-attribute rewriting does not apply to the two-attribute query
        assert!(curves
            .iter()
            .any(|c| c.query_index == 1 && c.method == Method::Afd && c.points.is_empty()));
    }

    #[test]
    fn budget_limits_issued_queries() {
        let cfg = ExperimentConfig {
            queries: vec![SelectionQuery::parse("Body=Sedan").unwrap()],
            methods: vec![Method::BnAllMb],
            query_limit: Some(3),
            ..small()
        };
        let curves = rewriting_curves(&cfg, 5).unwrap();
        // one query goes to the certain answers
        assert_eq!(curves[0].points.len(), 2);
    }

    #[test]
    fn imputation_holes_and_rows() {
        let t = cars_table(100, 2);
        let holed = holed_for_imputation(&t, &[2], 0.4, 7).unwrap();
        assert_eq!(holed.null_count(2), 100);
        for a in [0, 1, 3, 4, 5] {
            assert_eq!(holed.null_count(a), 40);
        }
        let cfg = ExperimentConfig {
            impute_targets: vec![vec!["Body".into()]],
            incompleteness: vec![0.0, 0.5],
            gibbs: GibbsConfig {
                samples: 50,
                burn_in: 10,
                seed: 0,
            },
            ..small()
        };
        let rows = imputation_rows(&cfg, 3).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.report.cell_accuracy().is_some()));
    }

    #[test]
    fn seeds_separate_streams() {
        assert_ne!(sub_seed(1, 2), sub_seed(2, 1));
        assert_ne!(sub_seed(0, 0), sub_seed(0, 1));
    }
}
