use crate::error::{Error, Result};
use crate::tabular::{Schema, Table, ValueId};

/// Laplace-smoothed class priors and pairwise conditional frequencies for
/// every attribute as a class, so any determining set can serve as the
/// feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveBayesModel {
    schema: Schema,
    pseudo_count: f64,
    /// `class_counts[c][y]`: rows with class `c = y`.
    class_counts: Vec<Vec<u64>>,
    /// `pair_counts[c][f][y * card(f) + x]`: rows with `c = y` and `f = x`.
    pair_counts: Vec<Vec<Vec<u64>>>,
}

impl NaiveBayesModel {
    /// Counts over `train`, skipping null cells pair by pair.
    pub fn fit(train: &Table, pseudo_count: f64) -> Result<Self> {
        if !(pseudo_count > 0.0) {
            return Err(Error::InvalidArgument("pseudo count must be positive".into()));
        }
        let schema = train.schema().clone();
        let n = schema.arity();
        let mut class_counts: Vec<Vec<u64>> = (0..n).map(|a| vec![0; schema.cardinality(a)]).collect();
        let mut pair_counts: Vec<Vec<Vec<u64>>> = (0..n)
            .map(|c| {
                (0..n)
                    .map(|f| vec![0; schema.cardinality(c) * schema.cardinality(f)])
                    .collect()
            })
            .collect();
        for t in train.tuples() {
            for c in 0..n {
                let Some(y) = t.cells[c] else { continue };
                class_counts[c][y as usize] += 1;
                for f in (0..n).filter(|&f| f != c) {
                    if let Some(x) = t.cells[f] {
                        pair_counts[c][f][y as usize * schema.cardinality(f) + x as usize] += 1;
                    }
                }
            }
        }
        Ok(NaiveBayesModel {
            schema,
            pseudo_count,
            class_counts,
            pair_counts,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// `P(class | features)`, normalized over the class domain.
    pub fn distribution(&self, class: usize, features: &[(usize, ValueId)]) -> Vec<f64> {
        let s = &self.schema;
        let card = s.cardinality(class);
        let c = self.pseudo_count;
        let total: u64 = self.class_counts[class].iter().sum();
        let mut logp: Vec<f64> = self.class_counts[class]
            .iter()
            .map(|&k| ((k as f64 + c) / (total as f64 + c * card as f64)).ln())
            .collect();
        for &(f, x) in features.iter().filter(|&&(f, _)| f != class) {
            let fc = s.cardinality(f);
            let counts = &self.pair_counts[class][f];
            for (y, lp) in logp.iter_mut().enumerate() {
                let row = &counts[y * fc..(y + 1) * fc];
                let denom: u64 = row.iter().sum();
                *lp += ((row[x as usize] as f64 + c) / (denom as f64 + c * fc as f64)).ln();
            }
        }
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        probs
    }

    /// Most probable class value; the first in domain order on ties.
    pub fn predict(&self, class: usize, features: &[(usize, ValueId)]) -> ValueId {
        let dist = self.distribution(class, features);
        let mut best = 0;
        for (i, &p) in dist.iter().enumerate() {
            if p > dist[best] {
                best = i;
            }
        }
        best as ValueId
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afd::fixtures::{schema, table};
    use crate::tabular::fixtures::cars_fragment;
    use proptest::prelude::*;

    #[test]
    fn laplace_estimates_by_hand() {
        let s = schema(2, 2);
        let rows = vec![
            vec![Some(0), Some(0)],
            vec![Some(0), Some(0)],
            vec![Some(1), Some(1)],
            vec![None, Some(1)],
        ];
        let nb = NaiveBayesModel::fit(&table(&s, &rows), 1.0).unwrap();
        // prior of A1 over 4 rows: (2+1)/6, (2+1)/6
        let prior = nb.distribution(1, &[]);
        assert!((prior[0] - 0.5).abs() < 1e-12);
        // P(A0=v0 | A1=v0) = 3/4, P(A0=v0 | A1=v1) = 1/3 (one complete v1 row)
        let post = nb.distribution(1, &[(0, 0)]);
        let (a, b) = (0.5 * 3.0 / 4.0, 0.5 * 1.0 / 3.0);
        assert!((post[0] - a / (a + b)).abs() < 1e-12);
        assert_eq!(nb.predict(1, &[(0, 0)]), 0);
        assert_eq!(nb.predict(1, &[(0, 1)]), 1);
    }

    #[test]
    fn predicts_body_from_model() {
        let t = cars_fragment();
        let nb = NaiveBayesModel::fit(&t, 1.0).unwrap();
        let s = t.schema();
        let (model, body) = (s.index_of("Model").unwrap(), s.index_of("Body").unwrap());
        let santa = s.value_of(model, "Santa").unwrap();
        assert_eq!(s.label(body, nb.predict(body, &[(model, santa)])), "SUV");
    }

    proptest! {
        #[test]
        fn distributions_are_normalized(
            rows in prop::collection::vec(prop::collection::vec(prop::option::of(0u32..3), 3), 0..30),
            x in 0u32..3,
            y in 0u32..3,
        ) {
            let s = schema(3, 3);
            let nb = NaiveBayesModel::fit(&table(&s, &rows), 0.5).unwrap();
            for class in 0..3 {
                let d = nb.distribution(class, &[((class + 1) % 3, x), ((class + 2) % 3, y)]);
                prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(d.iter().all(|&p| p > 0.0));
            }
        }
    }
}
