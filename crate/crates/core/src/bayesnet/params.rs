use super::{BayesNet, Cpt, Structure};
use crate::error::{Error, Result};
use crate::tabular::Table;

/// Smoothed frequency estimates for every CPT. A row is skipped for one CPT
/// when it has a null on that attribute or any of its parents. Parent
/// configurations with no usable rows get a uniform row.
pub fn fit_parameters(structure: &Structure, train: &Table, pseudo_count: f64) -> Result<BayesNet> {
    if !(pseudo_count >= 0.0 && pseudo_count.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pseudo count must be finite and non-negative, got {pseudo_count}"
        )));
    }
    let schema = structure.schema();
    if train.schema() != schema {
        return Err(Error::SchemaMismatch(
            "training table schema differs from the structure's".into(),
        ));
    }
    let mut cpts = Vec::with_capacity(structure.len());
    for v in 0..structure.len() {
        let parents = structure.parents(v);
        let card = schema.cardinality(v);
        let parent_cards: Vec<usize> = parents.iter().map(|&p| schema.cardinality(p)).collect();
        let rows: usize = parent_cards.iter().product();
        let mut counts = vec![0.0f64; rows * card];
        'tuples: for t in train.tuples() {
            let Some(x) = t.cells[v] else { continue };
            let mut row = 0;
            for (&p, &pc) in parents.iter().zip(&parent_cards) {
                let Some(pv) = t.cells[p] else { continue 'tuples };
                row = row * pc + pv as usize;
            }
            counts[row * card + x as usize] += 1.0;
        }
        for row in counts.chunks_mut(card) {
            let total: f64 = row.iter().sum::<f64>() + pseudo_count * card as f64;
            if total > 0.0 {
                for c in row.iter_mut() {
                    *c = (*c + pseudo_count) / total;
                }
            } else {
                row.fill(1.0 / card as f64);
            }
        }
        cpts.push(Cpt::new(card, parent_cards, counts)?);
    }
    BayesNet::new(structure.clone(), cpts, 1e-9)
}
