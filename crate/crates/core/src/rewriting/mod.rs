//! Rewriting a selection query into queries on other attributes that reach
//! tuples whose constrained cells are null.

mod all_mb;
mod beam;

use std::cmp::Ordering;
use std::collections::HashSet;

use log::warn;

use crate::bayesnet::BayesNet;
use crate::error::{Error, Result};
use crate::inference::{posterior_exact, Evidence};
use crate::source::AutonomousSource;
use crate::tabular::{SelectionQuery, Table, Tuple};

pub use all_mb::{all_mb_candidates, bn_all_mb, AllMbConfig};
pub use beam::{beam_search, bn_beam, BeamConfig, BeamSearch};

/// Expected quality of a rewritten query. Recall is the unnormalized
/// estimate of relevant tuples retrieved: precision times selectivity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryScore {
    pub expected_precision: f64,
    pub expected_selectivity: f64,
    pub expected_recall: f64,
    pub f_measure: f64,
}

impl QueryScore {
    pub fn new(precision: f64, selectivity: f64, alpha: f64) -> Self {
        let recall = precision * selectivity;
        QueryScore {
            expected_precision: precision,
            expected_selectivity: selectivity,
            expected_recall: recall,
            f_measure: f_measure(precision, recall, alpha),
        }
    }
}

/// Weighted harmonic mean `(1+α)·P·R / (α·P + R)`, zero when the
/// denominator is. Evaluated as `(1+α)·P / (α·P/R + 1)` so that `α = 0`
/// returns `P` exactly.
pub fn f_measure(p: f64, r: f64, alpha: f64) -> f64 {
    if p <= 0.0 || r <= 0.0 {
        return 0.0;
    }
    (1.0 + alpha) * p / (alpha * p / r + 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewrittenQuery {
    pub query: SelectionQuery,
    pub score: QueryScore,
}

/// Tie-break shared by both orders: fewer predicates, then predicate text.
fn structural_order(a: &RewrittenQuery, b: &RewrittenQuery) -> Ordering {
    a.query
        .len()
        .cmp(&b.query.len())
        .then_with(|| a.query.to_string().cmp(&b.query.to_string()))
}

/// Ranking order: F-measure descending, then precision descending, then
/// fewer predicates, then predicate text.
pub fn by_f_measure(a: &RewrittenQuery, b: &RewrittenQuery) -> Ordering {
    b.score
        .f_measure
        .total_cmp(&a.score.f_measure)
        .then_with(|| b.score.expected_precision.total_cmp(&a.score.expected_precision))
        .then_with(|| structural_order(a, b))
}

/// Issue order: precision descending, then F-measure descending, then
/// fewer predicates, then predicate text.
pub fn by_precision(a: &RewrittenQuery, b: &RewrittenQuery) -> Ordering {
    b.score
        .expected_precision
        .total_cmp(&a.score.expected_precision)
        .then_with(|| b.score.f_measure.total_cmp(&a.score.f_measure))
        .then_with(|| structural_order(a, b))
}

/// P(every constraint of `original` holds | `candidate`), by exact
/// inference. Labels must be known to the net.
pub fn expected_precision(net: &BayesNet, original: &SelectionQuery, candidate: &SelectionQuery) -> Result<f64> {
    let schema = net.schema();
    let target = original.resolve(schema)?;
    let given = candidate.resolve(schema)?;
    if let Some(p) = candidate.attributes().find(|a| original.constrains(a)) {
        return Err(Error::InvalidArgument(format!(
            "candidate constrains {p}, which the original query constrains"
        )));
    }
    let targets: Vec<usize> = target.iter().map(|p| p.0).collect();
    let values: Vec<u32> = target.iter().map(|p| p.1).collect();
    let dist = posterior_exact(net, &targets, &Evidence::new(schema, given)?)?;
    Ok(dist.prob(&values))
}

/// Matches in the sample scaled to the database: `matches · db_size /
/// sample_size`.
pub fn expected_selectivity(sample: &Table, candidate: &SelectionQuery, db_size: usize) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    sample_selectivity(sample, candidate, db_size as f64 / sample.len() as f64)
}

/// Matches in the sample times the database-to-sample size ratio.
pub fn sample_selectivity(sample: &Table, candidate: &SelectionQuery, ratio: f64) -> f64 {
    sample.count_matches(candidate) as f64 * ratio
}

/// What the scorer needs besides the query: the model, the sample and the
/// database-to-sample size ratio.
#[derive(Clone, Copy, Debug)]
pub struct ScoringContext<'a> {
    pub net: &'a BayesNet,
    pub sample: &'a Table,
    pub ratio: f64,
}

impl ScoringContext<'_> {
    /// Scores a candidate; `None` when it uses a label the net has never
    /// seen.
    pub fn score(
        &self,
        original: &SelectionQuery,
        candidate: &SelectionQuery,
        alpha: f64,
    ) -> Result<Option<QueryScore>> {
        if candidate.validate(self.net.schema()).is_err() {
            warn!("skipping candidate {candidate}: label unknown to the model");
            return Ok(None);
        }
        let p = expected_precision(self.net, original, candidate)?;
        let sel = sample_selectivity(self.sample, candidate, self.ratio);
        Ok(Some(QueryScore::new(p, sel, alpha)))
    }
}

/// A possible answer together with the expected precision of the first
/// query that retrieved it.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievedTuple {
    pub tuple: Tuple,
    pub relevance: f64,
    /// Position of the retrieving query in issue order.
    pub query_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IssueOutcome {
    /// Queries actually answered, in issue order.
    pub issued: Vec<RewrittenQuery>,
    /// Possible answers, deduplicated by id, in retrieval order.
    pub extended: Vec<RetrievedTuple>,
    /// Set when the source refused a query.
    pub truncated: bool,
}

impl IssueOutcome {
    /// Ids first retrieved by the `i`-th issued query.
    pub fn new_ids(&self, i: usize) -> Vec<u64> {
        self.extended
            .iter()
            .filter(|r| r.query_index == i)
            .map(|r| r.tuple.id)
            .collect()
    }
}

/// Whether `t` may satisfy `original`: some constrained cell is null and
/// every non-null constrained cell matches.
pub fn is_possible_answer(schema: &crate::tabular::Schema, original: &SelectionQuery, t: &Tuple) -> bool {
    let Some(resolved) = original.resolve_lenient(schema) else {
        return false;
    };
    let mut any_null = false;
    for (a, v) in resolved {
        match (t.cells[a], v) {
            (None, _) => any_null = true,
            (Some(c), Some(v)) if c == v => {}
            _ => return false,
        }
    }
    any_null
}

/// Sorts by expected precision and issues up to `limit` queries. Retrieved
/// tuples that are certain answers, already seen, or definitely not
/// answers of `original` are dropped. A budget refusal stops issuing and
/// marks the outcome truncated.
pub fn order_and_issue(
    mut queries: Vec<RewrittenQuery>,
    source: &mut AutonomousSource,
    original: &SelectionQuery,
    base: &[Tuple],
    limit: usize,
) -> Result<IssueOutcome> {
    queries.sort_by(by_precision);
    queries.truncate(limit);
    let mut seen: HashSet<u64> = base.iter().map(|t| t.id).collect();
    let mut out = IssueOutcome::default();
    for q in queries {
        let answers = match source.answer(&q.query) {
            Ok(a) => a,
            Err(Error::BudgetExhausted { limit }) => {
                warn!("source refused {} after {limit} queries", q.query);
                out.truncated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let index = out.issued.len();
        for t in answers {
            if is_possible_answer(source.schema(), original, &t) && seen.insert(t.id) {
                out.extended.push(RetrievedTuple {
                    tuple: t,
                    relevance: q.score.expected_precision,
                    query_index: index,
                });
            }
        }
        out.issued.push(q);
    }
    Ok(out)
}

/// Output of a rewriting method.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewriteResult {
    /// Certain answers of the original query.
    pub base: Vec<Tuple>,
    /// Selected rewritten queries, best first by F-measure.
    pub candidates: Vec<RewrittenQuery>,
    pub outcome: IssueOutcome,
}

/// Attributes in the union of the constrained attributes' Markov blankets,
/// minus the constrained ones, as names in model schema order.
pub fn candidate_attributes(net: &BayesNet, original: &SelectionQuery) -> Result<Vec<String>> {
    let schema = net.schema();
    let mut keep = vec![false; schema.arity()];
    for name in original.attributes() {
        let a = schema.require_index(name)?;
        for b in net.markov_blanket_of(a) {
            keep[b] = true;
        }
    }
    Ok((0..schema.arity())
        .filter(|&a| keep[a] && !original.constrains(schema.name(a)))
        .map(|a| schema.name(a).to_string())
        .collect())
}

/// Scores candidates in parallel, dropping those with unknown labels.
fn score_all(
    ctx: &ScoringContext<'_>,
    original: &SelectionQuery,
    candidates: Vec<SelectionQuery>,
    alpha: f64,
) -> Result<Vec<RewrittenQuery>> {
    use rayon::prelude::*;
    let scored: Vec<Option<RewrittenQuery>> = candidates
        .into_par_iter()
        .map(|q| {
            Ok(ctx
                .score(original, &q, alpha)?
                .map(|score| RewrittenQuery { query: q, score }))
        })
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().flatten().collect())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::bayesnet::{fit_parameters, Structure};
    use crate::tabular::fixtures::rewriting_fragment;

    /// The rewriting fragment with a net whose blanket of Body is
    /// {Model, Year}: Model -> Year, Model -> Body <- Year, Make <- Model,
    /// Mileage <- Year. Laplace-fitted on the fragment itself.
    pub fn fragment_net() -> (Table, BayesNet) {
        let t = rewriting_fragment();
        let st = Structure::from_edges(
            t.schema().clone(),
            &[
                ("Model", "Year"),
                ("Model", "Body"),
                ("Year", "Body"),
                ("Model", "Make"),
                ("Year", "Mileage"),
            ],
        )
        .unwrap();
        let net = fit_parameters(&st, &t, 1.0).unwrap();
        (t, net)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::fragment_net;
    use super::*;
    use crate::inference::enumerate_joint;
    use proptest::prelude::*;

    fn rq(text: &str, p: f64, sel: f64) -> RewrittenQuery {
        RewrittenQuery {
            query: SelectionQuery::parse(text).unwrap(),
            score: QueryScore::new(p, sel, 0.0),
        }
    }

    #[test]
    fn f_measure_examples() {
        assert_eq!(f_measure(0.7, 3.0, 0.0), 0.7);
        assert!((f_measure(0.4, 0.4, 2.5) - 0.4).abs() < 1e-12);
        assert!((f_measure(0.5, 0.25, 1.0) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(f_measure(0.0, 0.0, 1.0), 0.0);
        assert_eq!(f_measure(0.5, 0.0, 0.0), 0.0);
    }

    #[test]
    fn selectivity_examples() {
        let (t, _) = fragment_net();
        let q = SelectionQuery::parse("Model=A8").unwrap();
        assert_eq!(expected_selectivity(&t, &q, 100), 20.0);
        assert_eq!(expected_selectivity(&t, &q, 10), 2.0);
        let none = SelectionQuery::parse("Model=tt").unwrap();
        assert_eq!(expected_selectivity(&t, &none, 100), 0.0);
    }

    #[test]
    fn precision_matches_enumeration() {
        let (_, net) = fragment_net();
        let s = net.schema();
        let original = SelectionQuery::parse("Body=Sedan").unwrap();
        let cand = SelectionQuery::parse("Model=A8,Year=2005").unwrap();
        let p = expected_precision(&net, &original, &cand).unwrap();
        let joint = enumerate_joint(&net).unwrap();
        let ev = Evidence::from_labels(s, &[("Model", "A8"), ("Year", "2005")]).unwrap();
        let body = s.require_index("Body").unwrap();
        let oracle = joint.condition(&[body], &ev).unwrap();
        let sedan = s.require_value(body, "Sedan").unwrap();
        assert!((p - oracle.probs()[sedan as usize]).abs() < 1e-12);
        assert!(expected_precision(&net, &original, &SelectionQuery::parse("Body=SUV").unwrap()).is_err());
    }

    #[test]
    fn issue_order_and_annotation() {
        let (t, _) = fragment_net();
        let mut src = AutonomousSource::unlimited(t);
        let original = SelectionQuery::parse("Body=Sedan").unwrap();
        let base = src.answer(&original).unwrap();
        let qs = vec![rq("Year=2005", 0.4, 1.0), rq("Model=A8", 0.9, 1.0)];
        let out = order_and_issue(qs.clone(), &mut src, &original, &base, 10).unwrap();
        assert_eq!(out.issued[0].query.to_string(), "Model=A8");
        assert_eq!(out.extended.len(), 1);
        assert_eq!(out.extended[0].tuple.id, 2);
        assert_eq!(out.extended[0].relevance, 0.9);
        assert!(!out.truncated);
        let none = order_and_issue(qs.clone(), &mut src, &original, &base, 0).unwrap();
        assert!(none.issued.is_empty() && none.extended.is_empty());

        let mut capped = AutonomousSource::new(src_table(), Some(1));
        let out = order_and_issue(qs, &mut capped, &original, &base, 10).unwrap();
        assert_eq!(out.issued.len(), 1);
        assert!(out.truncated);
    }

    fn src_table() -> Table {
        fragment_net().0
    }

    #[test]
    fn candidate_attributes_for_a_two_attribute_query() {
        let (_, net) = fragment_net();
        let q = SelectionQuery::parse("Make=BMW,Mileage=40000").unwrap();
        assert_eq!(candidate_attributes(&net, &q).unwrap(), ["Model", "Year"]);
    }

    proptest! {
        #[test]
        fn zero_alpha_ranks_by_precision(
            ps in proptest::collection::vec((0.0f64..=1.0, 0.001f64..100.0), 1..30),
        ) {
            let qs: Vec<RewrittenQuery> = ps
                .iter()
                .enumerate()
                .map(|(i, &(p, s))| rq(&format!("A=v{i}"), p, s))
                .collect();
            let mut by_f = qs.clone();
            by_f.sort_by(by_f_measure);
            let mut by_p = qs;
            by_p.sort_by(by_precision);
            prop_assert_eq!(by_f, by_p);
        }

        #[test]
        fn equal_precision_and_recall_give_that_value(p in 0.0001f64..1.0, alpha in 0.0f64..100.0) {
            prop_assert!((f_measure(p, p, alpha) - p).abs() < 1e-12);
        }
    }
}
