use std::time::Instant;

use rayon::prelude::*;

use super::{AfdSet, NaiveBayesModel};
use crate::error::{Error, Result};
use crate::imputation::{tally_imputation, ImputationReport};
use crate::tabular::{Table, Tuple, ValueId};

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Pending,
    Known(ValueId),
    Unpredictable,
}

struct Chain<'a> {
    afds: &'a AfdSet,
    nb: &'a NaiveBayesModel,
    slots: Vec<Slot>,
    on_path: Vec<bool>,
}

impl Chain<'_> {
    /// Value of `a`, predicting missing determining attributes first. A
    /// chain that comes back to an attribute already on it fails, and so
    /// does everything depending on it.
    fn resolve(&mut self, a: usize) -> Option<ValueId> {
        match self.slots[a] {
            Slot::Known(v) => return Some(v),
            Slot::Unpredictable => return None,
            Slot::Pending => {}
        }
        if self.on_path[a] {
            return None;
        }
        let Some(rule) = self.afds.best(a) else {
            self.slots[a] = Slot::Unpredictable;
            return None;
        };
        self.on_path[a] = true;
        let mut features = Vec::with_capacity(rule.determining_set.len());
        for &x in &rule.determining_set {
            match self.resolve(x) {
                Some(v) => features.push((x, v)),
                None => break,
            }
        }
        self.on_path[a] = false;
        let result = (features.len() == rule.determining_set.len()).then(|| self.nb.predict(a, &features));
        // Failure does not depend on the path taken: an attribute fails
        // because its own rule chain reaches a cycle or a rule-less gap.
        self.slots[a] = result.map_or(Slot::Unpredictable, Slot::Known);
        result
    }
}

/// Fills each null cell with the Naive-Bayes prediction of its
/// highest-confidence rule. Returns the tuple and the attributes that could
/// not be predicted, which stay null.
pub fn afd_impute_tuple(afds: &AfdSet, nb: &NaiveBayesModel, t: &Tuple) -> Result<(Tuple, Vec<usize>)> {
    afd_impute_cells(afds, nb, t, None)
}

fn afd_impute_cells(
    afds: &AfdSet,
    nb: &NaiveBayesModel,
    t: &Tuple,
    only: Option<&[usize]>,
) -> Result<(Tuple, Vec<usize>)> {
    let n = afds.schema().arity();
    if t.cells.len() != n || nb.schema().arity() != n {
        return Err(Error::SchemaMismatch(format!(
            "tuple {} has {} cells, rules cover {n} attributes",
            t.id,
            t.cells.len()
        )));
    }
    let mut chain = Chain {
        afds,
        nb,
        slots: t.cells.iter().map(|c| c.map_or(Slot::Pending, Slot::Known)).collect(),
        on_path: vec![false; n],
    };
    let mut out = t.clone();
    let mut unpredictable = Vec::new();
    for a in t.null_attributes() {
        if only.is_some_and(|o| !o.contains(&a)) {
            continue;
        }
        match chain.resolve(a) {
            Some(v) => out.cells[a] = Some(v),
            None => unpredictable.push(a),
        }
    }
    Ok((out, unpredictable))
}

/// AFD imputation of a table, restricted to `only` when given. Cells left
/// unpredictable count as wrong in the report.
pub fn afd_impute_table(
    afds: &AfdSet,
    nb: &NaiveBayesModel,
    table: &Table,
    only: Option<&[usize]>,
    truth: Option<&Table>,
) -> Result<(Table, ImputationReport)> {
    if table.schema() != afds.schema() || nb.schema() != afds.schema() {
        return Err(Error::SchemaMismatch(
            "table, rules and classifier schemas differ".into(),
        ));
    }
    let start = Instant::now();
    let imputed: Vec<Tuple> = table
        .tuples()
        .par_iter()
        .map(|t| afd_impute_cells(afds, nb, t, only).map(|(t, _)| t))
        .collect::<Result<_>>()?;
    let attempted = |t: &Tuple| -> Vec<usize> {
        t.null_attributes()
            .into_iter()
            .filter(|a| only.is_none_or(|o| o.contains(a)))
            .collect()
    };
    let report = tally_imputation(table, &imputed, attempted, truth, start.elapsed());
    Ok((table.with_tuples(imputed)?, report))
}
