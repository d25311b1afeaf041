//! Filling null cells with the most probable values under a Bayes net.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bayesnet::BayesNet;
use crate::error::{Error, Result};
use crate::inference::{map_assignment, posterior_exact, posterior_gibbs, Evidence, GibbsConfig, JointDistribution};
use crate::tabular::{Table, Tuple};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Engine {
    Exact,
    /// The seed in the config is a base seed; each tuple's chain is seeded
    /// from it and the tuple id.
    Gibbs(GibbsConfig),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// MAP of the joint posterior over all imputed attributes.
    #[default]
    Joint,
    /// Each attribute set to the argmax of its own marginal.
    Independent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputeOptions {
    pub engine: Engine,
    pub mode: Mode,
    /// Impute only these attributes; other nulls stay null and are
    /// marginalized. `None` imputes every null.
    pub only: Option<Vec<usize>>,
    pub parallel: bool,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        ImputeOptions {
            engine: Engine::Exact,
            mode: Mode::Joint,
            only: None,
            parallel: true,
        }
    }
}

fn tuple_seed(base: u64, id: u64) -> u64 {
    base ^ id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn posterior(net: &BayesNet, targets: &[usize], ev: &Evidence, engine: Engine, id: u64) -> Result<JointDistribution> {
    match engine {
        Engine::Exact => posterior_exact(net, targets, ev),
        Engine::Gibbs(cfg) => {
            let cfg = GibbsConfig {
                seed: tuple_seed(cfg.seed, id),
                ..cfg
            };
            posterior_gibbs(net, targets, ev, &cfg)
        }
    }
}

/// Joint-MAP imputation of every null cell.
pub fn impute_tuple(net: &BayesNet, tuple: &Tuple, engine: Engine) -> Result<Tuple> {
    impute_tuple_with(
        net,
        tuple,
        &ImputeOptions {
            engine,
            ..Default::default()
        },
    )
}

pub fn impute_tuple_with(net: &BayesNet, tuple: &Tuple, opts: &ImputeOptions) -> Result<Tuple> {
    if tuple.cells.len() != net.len() {
        return Err(Error::SchemaMismatch(format!(
            "tuple {} has {} cells, model has {} attributes",
            tuple.id,
            tuple.cells.len(),
            net.len()
        )));
    }
    let targets: Vec<usize> = tuple
        .null_attributes()
        .into_iter()
        .filter(|a| opts.only.as_ref().is_none_or(|o| o.contains(a)))
        .collect();
    if targets.is_empty() {
        return Ok(tuple.clone());
    }
    let ev = Evidence::from_tuple(tuple);
    let mut out = tuple.clone();
    match opts.mode {
        Mode::Joint => {
            let dist = posterior(net, &targets, &ev, opts.engine, tuple.id)?;
            for (&a, v) in targets.iter().zip(map_assignment(&dist)) {
                out.cells[a] = Some(v);
            }
        }
        Mode::Independent => {
            for &a in &targets {
                let dist = posterior(net, &[a], &ev, opts.engine, tuple.id)?;
                out.cells[a] = Some(map_assignment(&dist)[0]);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttributeCounts {
    pub imputed: usize,
    /// Imputed cells whose ground truth is known.
    pub scored: usize,
    pub correct: usize,
    /// Attempted cells left null.
    pub unfilled: usize,
}

/// Accuracy bookkeeping. Accuracy fields are filled only when a ground-truth
/// table is supplied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImputationReport {
    pub imputed_cells: usize,
    /// Cells the imputer was asked to fill but left null.
    pub unfilled_cells: usize,
    pub imputed_tuples: usize,
    pub per_attribute: BTreeMap<String, AttributeCounts>,
    /// Keyed by the sorted names of the attributes imputed together.
    pub per_combination: BTreeMap<Vec<String>, AttributeCounts>,
    pub scored: bool,
    pub duration: Duration,
}

impl ImputationReport {
    /// Fraction of scored cells imputed correctly.
    pub fn cell_accuracy(&self) -> Option<f64> {
        let (s, c) = self
            .per_attribute
            .values()
            .fold((0, 0), |(s, c), a| (s + a.scored, c + a.correct));
        (self.scored && s > 0).then(|| c as f64 / s as f64)
    }

    /// Fraction of scored tuples with every imputed cell correct.
    pub fn tuple_accuracy(&self) -> Option<f64> {
        let (s, c) = self
            .per_combination
            .values()
            .fold((0, 0), |(s, c), a| (s + a.scored, c + a.correct));
        (self.scored && s > 0).then(|| c as f64 / s as f64)
    }

    pub fn attribute_accuracy(&self, attribute: &str) -> Option<f64> {
        let a = self.per_attribute.get(attribute)?;
        (self.scored && a.scored > 0).then(|| a.correct as f64 / a.scored as f64)
    }

    /// `key: value` lines. Timing is left out unless asked for, so reports
    /// of identical runs compare equal byte for byte.
    pub fn to_text(&self, include_timing: bool) -> String {
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "imputed_cells: {}", self.imputed_cells).unwrap();
        if self.unfilled_cells > 0 {
            writeln!(w, "unfilled_cells: {}", self.unfilled_cells).unwrap();
        }
        writeln!(w, "imputed_tuples: {}", self.imputed_tuples).unwrap();
        if let Some(acc) = self.cell_accuracy() {
            writeln!(w, "cell_accuracy: {acc:.6}").unwrap();
        }
        if let Some(acc) = self.tuple_accuracy() {
            writeln!(w, "tuple_accuracy: {acc:.6}").unwrap();
        }
        for (name, c) in &self.per_attribute {
            writeln!(w, "attribute.{name}.imputed: {}", c.imputed).unwrap();
            if c.unfilled > 0 {
                writeln!(w, "attribute.{name}.unfilled: {}", c.unfilled).unwrap();
            }
            if let Some(acc) = self.attribute_accuracy(name) {
                writeln!(w, "attribute.{name}.accuracy: {acc:.6}").unwrap();
            }
        }
        for (names, c) in &self.per_combination {
            let key = names.join("+");
            writeln!(w, "combination.{key}.tuples: {}", c.imputed).unwrap();
            if self.scored && c.scored > 0 {
                writeln!(
                    w,
                    "combination.{key}.accuracy: {:.6}",
                    c.correct as f64 / c.scored as f64
                )
                .unwrap();
            }
        }
        if include_timing {
            writeln!(w, "seconds: {:.3}", self.duration.as_secs_f64()).unwrap();
        }
        out
    }
}

/// Imputes every tuple with joint MAP.
pub fn impute_table(net: &BayesNet, table: &Table, engine: Engine) -> Result<(Table, ImputationReport)> {
    impute_table_with(
        net,
        table,
        &ImputeOptions {
            engine,
            ..Default::default()
        },
        None,
    )
}

/// Imputes every tuple and, given a ground-truth table with the same ids,
/// scores the imputed cells against it.
pub fn impute_table_with(
    net: &BayesNet,
    table: &Table,
    opts: &ImputeOptions,
    truth: Option<&Table>,
) -> Result<(Table, ImputationReport)> {
    if table.schema() != net.schema() {
        return Err(Error::SchemaMismatch(
            "table schema differs from the model schema".into(),
        ));
    }
    if let Some(t) = truth {
        if t.schema().attributes() != table.schema().attributes() {
            return Err(Error::SchemaMismatch("ground truth has different attributes".into()));
        }
    }
    let start = Instant::now();
    let work = |t: &Tuple| impute_tuple_with(net, t, opts);
    let imputed: Vec<Tuple> = if opts.parallel {
        table.tuples().par_iter().map(work).collect::<Result<_>>()?
    } else {
        table.tuples().iter().map(work).collect::<Result<_>>()?
    };
    let duration = start.elapsed();
    let only = opts.only.as_deref();
    let attempted = |t: &Tuple| -> Vec<usize> {
        t.null_attributes()
            .into_iter()
            .filter(|a| only.is_none_or(|o| o.contains(a)))
            .collect()
    };
    let report = tally_imputation(table, &imputed, attempted, truth, duration);
    Ok((table.with_tuples(imputed)?, report))
}

/// Builds a report for `imputed`, the tuples of `before` after imputation.
/// `attempted` names the cells each tuple was meant to fill; a cell still
/// null afterwards counts as unfilled and, when scored, as wrong.
pub fn tally_imputation(
    before: &Table,
    imputed: &[Tuple],
    attempted: impl Fn(&Tuple) -> Vec<usize>,
    truth: Option<&Table>,
    duration: Duration,
) -> ImputationReport {
    let schema = before.schema();
    let mut report = ImputationReport {
        scored: truth.is_some(),
        duration,
        ..Default::default()
    };
    for (before_t, after) in before.tuples().iter().zip(imputed) {
        let cells = attempted(before_t);
        if cells.is_empty() {
            continue;
        }
        report.imputed_tuples += 1;
        let truth_tuple = truth.and_then(|t| t.get_by_id(before_t.id));
        let mut all_known = truth_tuple.is_some();
        let mut all_correct = true;
        for &a in &cells {
            let entry = report.per_attribute.entry(schema.name(a).to_string()).or_default();
            entry.imputed += 1;
            let filled = after.cells[a].is_some();
            if filled {
                report.imputed_cells += 1;
            } else {
                entry.unfilled += 1;
                report.unfilled_cells += 1;
            }
            let known = truth_tuple.and_then(|tt| truth.unwrap().label_of(tt, a));
            match known {
                Some(label) => {
                    entry.scored += 1;
                    let ok = filled && before.label_of(after, a) == Some(label);
                    entry.correct += ok as usize;
                    all_correct &= ok;
                }
                None => all_known = false,
            }
        }
        let mut names: Vec<String> = cells.iter().map(|&a| schema.name(a).to_string()).collect();
        names.sort();
        let combo = report.per_combination.entry(names).or_default();
        combo.imputed += 1;
        if all_known {
            combo.scored += 1;
            combo.correct += all_correct as usize;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::fixtures::*;
    use crate::bayesnet::random::random_net;
    use crate::bayesnet::Structure;
    use proptest::prelude::*;

    /// X copies Y exactly; Z is independent noise.
    fn copy_net() -> BayesNet {
        let s = schema(&[("X", &["0", "1"]), ("Y", &["0", "1"]), ("Z", &["0", "1"])]);
        let st = Structure::from_edges(s, &[("Y", "X")]).unwrap();
        BayesNet::from_tables(st, vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.45, 0.55], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn complete_tuple_is_unchanged() {
        let t = Tuple::new(1, vec![Some(0), Some(1), Some(0)]);
        assert_eq!(impute_tuple(&copy_net(), &t, Engine::Exact).unwrap(), t);
    }

    #[test]
    fn correlated_pair_is_imputed_consistently() {
        let t = Tuple::new(1, vec![None, None, Some(0)]);
        let out = impute_tuple(&copy_net(), &t, Engine::Exact).unwrap();
        assert_eq!(out.cells[0], out.cells[1]);
        assert_eq!(out.cells, [Some(1), Some(1), Some(0)]);
    }

    #[test]
    fn all_null_tuple_gets_prior_map() {
        let t = Tuple::new(1, vec![None, None, None]);
        let out = impute_tuple(&copy_net(), &t, Engine::Exact).unwrap();
        assert_eq!(out.cells, [Some(1), Some(1), Some(0)]);
    }

    #[test]
    fn report_counts_injected_cells() {
        let net = random_net(5, 3, 2, 7);
        let truth = net.sample_table(200, 1);
        let holed = truth.inject_nulls(&[1, 3], 0.1, 2).unwrap();
        let (done, report) = impute_table_with(&net, &holed, &ImputeOptions::default(), Some(&truth)).unwrap();
        assert_eq!(report.imputed_cells, 40);
        assert_eq!(report.imputed_tuples, 20);
        assert_eq!(report.per_combination.len(), 1);
        assert!(done.tuples().iter().all(Tuple::is_complete));
        let acc = report.cell_accuracy().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(report.to_text(false).contains("imputed_cells: 40\n"));

        let (same, empty) = impute_table(&net, &truth, Engine::Exact).unwrap();
        assert_eq!(same, truth);
        assert_eq!(empty.imputed_cells, 0);
        assert_eq!(empty.cell_accuracy(), None);
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let net = random_net(3, 2, 1, 0);
        let other = random_net(3, 3, 1, 0).sample_table(5, 0);
        assert!(matches!(
            impute_table(&net, &other, Engine::Exact),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn gibbs_imputation_is_deterministic() {
        let net = random_net(5, 3, 2, 3);
        let holed = net.sample_table(30, 1).inject_nulls(&[0, 2], 0.5, 2).unwrap();
        let engine = Engine::Gibbs(GibbsConfig::default());
        let a = impute_table(&net, &holed, engine).unwrap().0;
        let b = impute_table(&net, &holed, engine).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn only_listed_attributes_are_filled() {
        let t = Tuple::new(1, vec![None, None, Some(1)]);
        let opts = ImputeOptions {
            only: Some(vec![0]),
            ..Default::default()
        };
        let out = impute_tuple_with(&copy_net(), &t, &opts).unwrap();
        assert_eq!(out.cells, [Some(1), None, Some(1)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn observed_cells_survive_and_single_gaps_use_the_marginal(
            seed in 0u64..10_000, mask in 1u32..32,
        ) {
            let net = random_net(5, 3, 2, seed);
            let full = net.sample_table(1, seed).tuples()[0].clone();
            let mut t = full.clone();
            for a in 0..5 {
                if mask >> a & 1 == 1 {
                    t.cells[a] = None;
                }
            }
            let out = impute_tuple(&net, &t, Engine::Exact).unwrap();
            for a in 0..5 {
                if let Some(v) = t.cells[a] {
                    prop_assert_eq!(out.cells[a], Some(v));
                }
                prop_assert!(out.cells[a].is_some());
            }
            let nulls = t.null_attributes();
            if nulls.len() == 1 {
                let marg = posterior_exact(&net, &nulls, &Evidence::from_tuple(&t)).unwrap();
                prop_assert_eq!(out.cells[nulls[0]], Some(map_assignment(&marg)[0]));
            }
        }

        #[test]
        fn separated_gaps_make_joint_equal_independent(seed in 0u64..10_000, mask in 1u32..64) {
            let net = random_net(6, 3, 2, seed);
            let mut t = net.sample_table(1, seed ^ 5).tuples()[0].clone();
            for a in 0..6 {
                if mask >> a & 1 == 1 {
                    t.cells[a] = None;
                }
            }
            let missing = t.null_attributes();
            let observed: Vec<usize> = (0..6).filter(|a| !missing.contains(a)).collect();
            let separated = missing.iter().enumerate().all(|(i, &x)| {
                missing[i + 1..].iter().all(|&y| net.d_separated(x, y, &observed))
            });
            prop_assume!(separated);
            let joint = impute_tuple(&net, &t, Engine::Exact).unwrap();
            let indep = impute_tuple_with(&net, &t, &ImputeOptions { mode: Mode::Independent, ..Default::default() }).unwrap();
            prop_assert_eq!(joint, indep);
        }
    }
}
