use log::warn;

use super::{Afd, AfdSet, NaiveBayesModel};
use crate::error::{Error, Result};
use crate::rewriting::{
    by_f_measure, by_precision, order_and_issue, sample_selectivity, QueryScore, RewriteResult, RewrittenQuery,
};
use crate::source::AutonomousSource;
use crate::tabular::{project_distinct, Schema, SelectionQuery, Table, Tuple};

/// Rules, classifier, sample and database-to-sample size ratio.
#[derive(Clone, Copy, Debug)]
pub struct AfdContext<'a> {
    pub afds: &'a AfdSet,
    pub nb: &'a NaiveBayesModel,
    pub sample: &'a Table,
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AfdStrategy {
    /// One constrained attribute, rewritten through its best rule.
    Single,
    /// Conjunctions of the per-attribute rewrites of every constrained
    /// attribute.
    AllAttributes,
    /// Only the constrained attribute whose rule has the highest
    /// confidence.
    HighestConfidence,
}

/// A rewrite of one constraint `target = label` through `rule`, before
/// selectivity is attached.
struct Component {
    query: SelectionQuery,
    precision: f64,
}

/// One query per distinct determining-set projection of `base`, with the
/// classifier's probability of `label` given those values as precision.
fn rule_rewrites(
    ctx: &AfdContext<'_>,
    source_schema: &Schema,
    rule: &Afd,
    label: &str,
    base: &[Tuple],
) -> Result<Vec<Component>> {
    let schema = ctx.afds.schema();
    let target_value = schema.require_value(rule.target, label)?;
    let attrs = rule
        .determining_set
        .iter()
        .map(|&a| source_schema.require_index(schema.name(a)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Tuple> = base.iter().collect();
    let mut out = Vec::new();
    'combos: for combo in project_distinct(&refs, &attrs) {
        let mut features = Vec::with_capacity(combo.len());
        for ((&a, &src_attr), &v) in rule.determining_set.iter().zip(&attrs).zip(&combo) {
            let label = source_schema.label(src_attr, v);
            match schema.value_of(a, label) {
                Some(x) => features.push((a, x)),
                None => {
                    warn!("skipping {}={label}: value not seen in training", schema.name(a));
                    continue 'combos;
                }
            }
        }
        let pairs: Vec<(usize, u32)> = attrs.iter().copied().zip(combo).collect();
        out.push(Component {
            query: SelectionQuery::from_values(source_schema, &pairs)?,
            precision: ctx.nb.distribution(rule.target, &features)[target_value as usize],
        });
    }
    Ok(out)
}

fn scored(ctx: &AfdContext<'_>, query: SelectionQuery, precision: f64, alpha: f64) -> RewrittenQuery {
    let sel = sample_selectivity(ctx.sample, &query, ctx.ratio);
    RewrittenQuery {
        score: QueryScore::new(precision, sel, alpha),
        query,
    }
}

/// Constrained attributes as rule-schema indices with their labels.
fn constraints(ctx: &AfdContext<'_>, original: &SelectionQuery) -> Result<Vec<(usize, String)>> {
    original
        .predicates()
        .iter()
        .map(|p| Ok((ctx.afds.schema().require_index(&p.attribute)?, p.value.clone())))
        .collect()
}

/// Ranked rewrites of `target = label` through `rule`, best `k` by
/// F-measure.
fn rewrite_through(
    ctx: &AfdContext<'_>,
    source_schema: &Schema,
    rule: &Afd,
    label: &str,
    base: &[Tuple],
    k: usize,
    alpha: f64,
) -> Result<Vec<RewrittenQuery>> {
    let mut out: Vec<RewrittenQuery> = rule_rewrites(ctx, source_schema, rule, label, base)?
        .into_iter()
        .map(|c| scored(ctx, c.query, c.precision, alpha))
        .collect();
    out.sort_by(by_f_measure);
    out.truncate(k);
    Ok(out)
}

/// Rewrites a single-attribute query through the best rule of its
/// attribute: one query per determining-value combination among the certain
/// answers `base`, top `k` by F-measure.
pub fn afd_rewrite_single(
    ctx: &AfdContext<'_>,
    source_schema: &Schema,
    original: &SelectionQuery,
    base: &[Tuple],
    k: usize,
    alpha: f64,
) -> Result<Vec<RewrittenQuery>> {
    let cons = constraints(ctx, original)?;
    let [(target, label)] = cons.as_slice() else {
        return Err(Error::InvalidArgument(format!(
            "{original} constrains {} attributes; expected one",
            cons.len()
        )));
    };
    let rule = ctx
        .afds
        .best(*target)
        .ok_or_else(|| Error::NoRule(ctx.afds.schema().name(*target).to_string()))?;
    rewrite_through(ctx, source_schema, rule, label, base, k, alpha)
}

/// Rewrites through the constrained attribute whose usable rule has the
/// highest confidence, dropping the other constraints. A rule is usable
/// when its determining set avoids every constrained attribute.
pub fn afd_highest_confidence(
    ctx: &AfdContext<'_>,
    source_schema: &Schema,
    original: &SelectionQuery,
    base: &[Tuple],
    k: usize,
    alpha: f64,
) -> Result<Vec<RewrittenQuery>> {
    let cons = constraints(ctx, original)?;
    let constrained: Vec<usize> = cons.iter().map(|(a, _)| *a).collect();
    let mut chosen: Option<(&Afd, &str)> = None;
    for (a, label) in &cons {
        if let Some(rule) = ctx.afds.best_excluding(*a, &constrained) {
            if chosen.is_none_or(|(c, _)| rule.confidence > c.confidence) {
                chosen = Some((rule, label));
            }
        }
    }
    let (rule, label) = chosen.ok_or_else(|| Error::NoRule(original.to_string()))?;
    rewrite_through(ctx, source_schema, rule, label, base, k, alpha)
}

/// Cross product of the top `k` rewrites of each constrained attribute,
/// ranked by the product of the component precisions; top `k` kept.
/// Requires pairwise disjoint determining sets.
pub fn afd_all_attributes(
    ctx: &AfdContext<'_>,
    source_schema: &Schema,
    original: &SelectionQuery,
    base: &[Tuple],
    k: usize,
    alpha: f64,
) -> Result<Vec<RewrittenQuery>> {
    let cons = constraints(ctx, original)?;
    let constrained: Vec<usize> = cons.iter().map(|(a, _)| *a).collect();
    let schema = ctx.afds.schema();
    let mut rules: Vec<&Afd> = Vec::with_capacity(cons.len());
    for (a, _) in &cons {
        let rule = ctx
            .afds
            .best_excluding(*a, &constrained)
            .ok_or_else(|| Error::NoRule(schema.name(*a).to_string()))?;
        if let Some(other) = rules
            .iter()
            .find(|r| r.determining_set.iter().any(|x| rule.determining_set.contains(x)))
        {
            return Err(Error::NotApplicable(format!(
                "determining sets of {} and {} overlap",
                schema.name(other.target),
                schema.name(*a)
            )));
        }
        rules.push(rule);
    }
    let mut combos: Vec<(SelectionQuery, f64)> = vec![(SelectionQuery::empty(), 1.0)];
    for (rule, (_, label)) in rules.iter().zip(&cons) {
        let parts = rewrite_through(ctx, source_schema, rule, label, base, k, alpha)?;
        let mut next = Vec::with_capacity(combos.len() * parts.len());
        for (q, p) in &combos {
            for part in &parts {
                next.push((q.conjoin(&part.query)?, p * part.score.expected_precision));
            }
        }
        combos = next;
    }
    let mut out: Vec<RewrittenQuery> = combos
        .into_iter()
        .filter(|(q, _)| !q.is_empty())
        .map(|(q, p)| scored(ctx, q, p, alpha))
        .collect();
    out.sort_by(by_precision);
    out.truncate(k);
    Ok(out)
}

/// Runs `strategy` against `source`: fetches the certain answers, rewrites,
/// and issues the rewrites in order of expected precision.
pub fn afd_issue(
    ctx: &AfdContext<'_>,
    source: &mut AutonomousSource,
    original: &SelectionQuery,
    strategy: AfdStrategy,
    k: usize,
    alpha: f64,
) -> Result<RewriteResult> {
    let base = source.answer(original)?;
    let schema = source.schema().clone();
    let candidates = match strategy {
        AfdStrategy::Single => afd_rewrite_single(ctx, &schema, original, &base, k, alpha)?,
        AfdStrategy::AllAttributes => afd_all_attributes(ctx, &schema, original, &base, k, alpha)?,
        AfdStrategy::HighestConfidence => afd_highest_confidence(ctx, &schema, original, &base, k, alpha)?,
    };
    let outcome = order_and_issue(candidates.clone(), source, original, &base, k)?;
    Ok(RewriteResult {
        base,
        candidates,
        outcome,
    })
}
