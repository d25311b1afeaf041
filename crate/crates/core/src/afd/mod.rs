//! Approximate functional dependencies: the rule-based baseline for
//! imputation and query rewriting.

mod impute;
mod naive_bayes;
mod rewrite;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tabular::{Schema, Table};

pub use impute::{afd_impute_table, afd_impute_tuple};
pub use naive_bayes::NaiveBayesModel;
pub use rewrite::{afd_all_attributes, afd_highest_confidence, afd_issue, afd_rewrite_single, AfdContext, AfdStrategy};

/// Largest determining set an AFD may have.
pub const MAX_DETERMINING_SET: usize = 2;

/// `determining_set ⇝ target`, holding on a `confidence` fraction of the
/// rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Afd {
    /// Attribute indices in increasing order.
    pub determining_set: Vec<usize>,
    pub target: usize,
    pub confidence: f64,
}

impl Afd {
    pub fn new(mut determining_set: Vec<usize>, target: usize, confidence: f64) -> Result<Self> {
        determining_set.sort_unstable();
        determining_set.dedup();
        if determining_set.is_empty() || determining_set.len() > MAX_DETERMINING_SET {
            return Err(Error::InvalidArgument(format!(
                "determining set must have 1 to {MAX_DETERMINING_SET} attributes"
            )));
        }
        if determining_set.contains(&target) {
            return Err(Error::InvalidArgument(
                "target cannot be in its own determining set".into(),
            ));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidArgument(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Afd {
            determining_set,
            target,
            confidence,
        })
    }

    fn names<'s>(&self, schema: &'s Schema) -> Vec<&'s str> {
        self.determining_set.iter().map(|&a| schema.name(a)).collect()
    }
}

/// Rule preference: higher confidence, then smaller determining set, then
/// determining-set names in lexicographic order.
fn preference(schema: &Schema, a: &Afd, b: &Afd) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.determining_set.len().cmp(&b.determining_set.len()))
        .then_with(|| a.names(schema).cmp(&b.names(schema)))
}

/// A rule set over one schema, with the preferred rule of each target.
#[derive(Clone, Debug, PartialEq)]
pub struct AfdSet {
    schema: Schema,
    /// Grouped by target in schema order, preferred rule first.
    afds: Vec<Afd>,
}

impl AfdSet {
    pub fn new(schema: Schema, mut afds: Vec<Afd>) -> Result<Self> {
        let n = schema.arity();
        if afds
            .iter()
            .any(|f| f.target >= n || f.determining_set.iter().any(|&a| a >= n))
        {
            return Err(Error::InvalidArgument(
                "rule refers to an attribute outside the schema".into(),
            ));
        }
        afds.sort_by(|a, b| a.target.cmp(&b.target).then_with(|| preference(&schema, a, b)));
        afds.dedup_by(|a, b| a.target == b.target && a.determining_set == b.determining_set);
        Ok(AfdSet { schema, afds })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn afds(&self) -> &[Afd] {
        &self.afds
    }

    pub fn len(&self) -> usize {
        self.afds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.afds.is_empty()
    }

    /// Rules for `target`, preferred first.
    pub fn for_target(&self, target: usize) -> impl Iterator<Item = &Afd> {
        self.afds.iter().filter(move |f| f.target == target)
    }

    /// The highest-confidence rule for `target`.
    pub fn best(&self, target: usize) -> Option<&Afd> {
        self.for_target(target).next()
    }

    /// The preferred rule for `target` whose determining set avoids
    /// `excluded`.
    pub fn best_excluding(&self, target: usize, excluded: &[usize]) -> Option<&Afd> {
        self.for_target(target)
            .find(|f| f.determining_set.iter().all(|a| !excluded.contains(a)))
    }

    /// One `X1,X2 -> A : confidence` line per rule.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.afds {
            writeln!(
                out,
                "{} -> {} : {:.6}",
                f.names(&self.schema).join(","),
                self.schema.name(f.target),
                f.confidence
            )
            .unwrap();
        }
        out
    }

    /// Parses the output of [`AfdSet::to_text`]. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_text(schema: Schema, text: &str) -> Result<Self> {
        let mut afds = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::ModelFormat { line: i + 1, message };
            let (lhs, rest) = line
                .split_once("->")
                .ok_or_else(|| err("expected `X -> A : confidence`".into()))?;
            let (target, conf) = rest
                .split_once(':')
                .ok_or_else(|| err("missing `: confidence`".into()))?;
            let index = |name: &str| {
                schema
                    .index_of(name.trim())
                    .ok_or_else(|| err(format!("unknown attribute `{}`", name.trim())))
            };
            let set = lhs.split(',').map(index).collect::<Result<Vec<_>>>()?;
            let confidence: f64 = conf
                .trim()
                .parse()
                .map_err(|_| err(format!("bad confidence `{}`", conf.trim())))?;
            afds.push(Afd::new(set, index(target)?, confidence).map_err(|e| err(e.to_string()))?);
        }
        AfdSet::new(schema, afds)
    }
}

fn determining_sets(n: usize, max_lhs: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0..n).map(|a| vec![a]).collect();
    if max_lhs >= 2 {
        for a in 0..n {
            for b in a + 1..n {
                out.push(vec![a, b]);
            }
        }
    }
    out
}

/// Confidence of `lhs ⇝ target`: over rows where all of them are non-null,
/// the summed majority-class count of each determining-value combination
/// divided by the row count. `None` without supporting rows.
pub fn confidence(train: &Table, lhs: &[usize], target: usize) -> Option<f64> {
    let schema = train.schema();
    let card = schema.cardinality(target);
    let mut groups: HashMap<Vec<u32>, Vec<u32>> = HashMap::new();
    let mut rows = 0u64;
    for t in train.tuples() {
        let Some(y) = t.cells[target] else { continue };
        let Some(key) = lhs.iter().map(|&a| t.cells[a]).collect::<Option<Vec<u32>>>() else {
            continue;
        };
        groups.entry(key).or_insert_with(|| vec![0; card])[y as usize] += 1;
        rows += 1;
    }
    if rows == 0 {
        return None;
    }
    let majority: u64 = groups.values().map(|c| u64::from(*c.iter().max().unwrap())).sum();
    Some(majority as f64 / rows as f64)
}

/// Every rule with a determining set of at most `max_lhs` attributes whose
/// confidence reaches `min_confidence`.
pub fn mine_afds(train: &Table, max_lhs: usize, min_confidence: f64) -> Result<AfdSet> {
    if max_lhs == 0 || max_lhs > MAX_DETERMINING_SET {
        return Err(Error::InvalidArgument(format!(
            "max_lhs must be between 1 and {MAX_DETERMINING_SET}"
        )));
    }
    if !(0.0..=1.0).contains(&min_confidence) {
        return Err(Error::InvalidArgument("min_confidence must be in [0, 1]".into()));
    }
    let n = train.schema().arity();
    let sets = determining_sets(n, max_lhs);
    let mut afds = Vec::new();
    for target in 0..n {
        for lhs in sets.iter().filter(|s| !s.contains(&target)) {
            if let Some(c) = confidence(train, lhs, target) {
                if c >= min_confidence {
                    afds.push(Afd::new(lhs.clone(), target, c)?);
                }
            }
        }
    }
    AfdSet::new(train.schema().clone(), afds)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::tabular::fixtures::cars_fragment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_dependency_has_full_confidence() {
        let s = schema(3, 3);
        let rows: Vec<Vec<Option<u32>>> = (0..30u32)
            .map(|i| vec![Some(i % 3), Some((i % 3 + 1) % 3), Some(i % 2)])
            .collect();
        let set = mine_afds(&table(&s, &rows), 2, 0.0).unwrap();
        let best = set.best(1).unwrap();
        assert_eq!(best.determining_set, [0]);
        assert_eq!(best.confidence, 1.0);
        // the noise column is not determined by anything
        assert!(set.best(2).unwrap().confidence < 1.0);
    }

    #[test]
    fn cars_fragment_yields_model_to_body() {
        let t = cars_fragment();
        let set = mine_afds(&t, 2, 0.9).unwrap();
        let (model, body) = (
            t.schema().index_of("Model").unwrap(),
            t.schema().index_of("Body").unwrap(),
        );
        let rule = set
            .for_target(body)
            .find(|f| f.determining_set == [model])
            .expect("Model -> Body mined");
        assert_eq!(rule.confidence, 1.0);
    }

    #[test]
    fn independent_balanced_columns_give_half() {
        let s = schema(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<Option<u32>>> = (0..2000)
            .map(|_| vec![Some(rng.gen_range(0..2)), Some(rng.gen_range(0..2))])
            .collect();
        let c = confidence(&table(&s, &rows), &[0], 1).unwrap();
        // oracle: expected majority fraction within each lhs group is 1/2
        // plus a fluctuation of order 1/sqrt(N)
        assert!((c - 0.5).abs() < 0.1, "{c}");
    }

    #[test]
    fn confidence_is_majority_fraction_over_complete_rows() {
        let s = schema(2, 2);
        let rows = vec![
            vec![Some(0), Some(0)],
            vec![Some(0), Some(0)],
            vec![Some(0), Some(1)],
            vec![Some(1), Some(1)],
            vec![None, Some(0)],
            vec![Some(1), None],
        ];
        assert_eq!(confidence(&table(&s, &rows), &[0], 1), Some(0.75));
        assert_eq!(confidence(&table(&s, &rows[4..]), &[0], 1), None);
    }

    #[test]
    fn preference_breaks_ties_by_size_then_name() {
        let s = schema(4, 2);
        let set = AfdSet::new(
            s,
            vec![
                Afd::new(vec![1, 2], 0, 0.9).unwrap(),
                Afd::new(vec![3], 0, 0.9).unwrap(),
                Afd::new(vec![2], 0, 0.9).unwrap(),
                Afd::new(vec![1], 3, 0.5).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(set.best(0).unwrap().determining_set, [2]);
        assert_eq!(set.best_excluding(0, &[2]).unwrap().determining_set, [3]);
        assert_eq!(set.best_excluding(0, &[3]).unwrap().determining_set, [2]);
        assert!(set.best_excluding(0, &[2, 3]).is_none());
        assert!(set.best(1).is_none());
    }

    #[test]
    fn text_round_trip() {
        let t = cars_fragment();
        let set = mine_afds(&t, 2, 0.8).unwrap();
        let text = set.to_text();
        assert!(text.lines().any(|l| l == "Model -> Body : 1.000000"));
        let back = AfdSet::from_text(t.schema().clone(), &text).unwrap();
        assert_eq!(back.to_text(), text);
        assert!(matches!(
            AfdSet::from_text(t.schema().clone(), "# c\nModel -> Color : 1"),
            Err(Error::ModelFormat { line: 2, .. })
        ));
        assert!(AfdSet::from_text(t.schema().clone(), "Body -> Body : 1").is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = cars_fragment();
        assert!(mine_afds(&t, 0, 0.5).is_err());
        assert!(mine_afds(&t, 3, 0.5).is_err());
        assert!(mine_afds(&t, 1, 1.5).is_err());
        assert!(Afd::new(vec![0, 1, 2], 3, 0.5).is_err());
        assert!(Afd::new(vec![0], 1, -0.1).is_err());
    }
}
