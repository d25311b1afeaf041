use log::warn;

use super::{
    by_f_measure, candidate_attributes, order_and_issue, score_all, RewriteResult, RewrittenQuery, ScoringContext,
};
use crate::error::Result;
use crate::source::AutonomousSource;
use crate::tabular::{project_distinct, Predicate, Schema, SelectionQuery, Tuple};

#[derive(Clone, Debug, PartialEq)]
pub struct AllMbConfig {
    /// Queries selected by F-measure and issued.
    pub k: usize,
    pub alpha: f64,
    /// With an empty base set, search the full domains of the blanket
    /// attributes instead of returning nothing.
    pub full_domain_fallback: bool,
}

impl Default for AllMbConfig {
    fn default() -> Self {
        AllMbConfig {
            k: 10,
            alpha: 0.0,
            full_domain_fallback: false,
        }
    }
}

fn full_domain_queries(schema: &Schema, names: &[String]) -> Result<Vec<SelectionQuery>> {
    let mut out = vec![SelectionQuery::empty()];
    for name in names {
        let a = schema.require_index(name)?;
        let mut next = Vec::with_capacity(out.len() * schema.cardinality(a));
        for q in &out {
            for label in schema.domain(a) {
                next.push(q.with(Predicate::new(name, label))?);
            }
        }
        out = next;
    }
    Ok(out)
}

/// One query per distinct null-free projection of `base` on the blanket
/// attributes, scored and ranked by F-measure (all of them, not truncated).
pub fn all_mb_candidates(
    ctx: &ScoringContext<'_>,
    source_schema: &Schema,
    original: &SelectionQuery,
    base: &[Tuple],
    cfg: &AllMbConfig,
) -> Result<Vec<RewrittenQuery>> {
    let names = candidate_attributes(ctx.net, original)?;
    if names.is_empty() {
        warn!("no blanket attributes to rewrite {original}");
        return Ok(Vec::new());
    }
    let queries = if base.is_empty() {
        if !cfg.full_domain_fallback {
            warn!("{original} has no certain answers; nothing to rewrite");
            return Ok(Vec::new());
        }
        full_domain_queries(ctx.net.schema(), &names)?
    } else {
        let attrs = names
            .iter()
            .map(|n| source_schema.require_index(n))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tuple> = base.iter().collect();
        project_distinct(&refs, &attrs)
            .into_iter()
            .map(|combo| {
                let pairs: Vec<(usize, u32)> = attrs.iter().copied().zip(combo).collect();
                SelectionQuery::from_values(source_schema, &pairs)
            })
            .collect::<Result<Vec<_>>>()?
    };
    let mut scored = score_all(ctx, original, queries, cfg.alpha)?;
    scored.sort_by(by_f_measure);
    Ok(scored)
}

/// Rewrites `original` by constraining every attribute of the union of its
/// attributes' Markov blankets. Issues the top `k` by F-measure in order of
/// expected precision.
pub fn bn_all_mb(
    ctx: &ScoringContext<'_>,
    source: &mut AutonomousSource,
    original: &SelectionQuery,
    cfg: &AllMbConfig,
) -> Result<RewriteResult> {
    let base = source.answer(original)?;
    let mut candidates = all_mb_candidates(ctx, &source.schema().clone(), original, &base, cfg)?;
    candidates.truncate(cfg.k);
    let outcome = order_and_issue(candidates.clone(), source, original, &base, cfg.k)?;
    Ok(RewriteResult {
        base,
        candidates,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewriting::fixtures::fragment_net;

    fn texts(qs: &[RewrittenQuery]) -> Vec<String> {
        let mut v: Vec<String> = qs.iter().map(|q| q.query.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn walkthrough_candidates_and_retrieval() {
        let (t, net) = fragment_net();
        let ctx = ScoringContext {
            net: &net,
            sample: &t,
            ratio: 1.0,
        };
        let mut src = AutonomousSource::unlimited(t.clone());
        let q = SelectionQuery::parse("Body=Sedan").unwrap();
        let res = bn_all_mb(&ctx, &mut src, &q, &AllMbConfig::default()).unwrap();
        let base: Vec<u64> = res.base.iter().map(|t| t.id).collect();
        assert_eq!(base, [1, 3, 4, 5]);
        assert_eq!(
            texts(&res.candidates),
            ["Model=745,Year=2002", "Model=A8,Year=2005", "Model=tl,Year=2003"]
        );
        assert_eq!(res.outcome.issued.len(), 3);
        let ext: Vec<u64> = res.outcome.extended.iter().map(|r| r.tuple.id).collect();
        assert_eq!(ext, [2]);
    }

    #[test]
    fn k_limits_selection_and_empty_base_gives_nothing() {
        let (t, net) = fragment_net();
        let ctx = ScoringContext {
            net: &net,
            sample: &t,
            ratio: 1.0,
        };
        let mut src = AutonomousSource::unlimited(t.clone());
        let q = SelectionQuery::parse("Body=Sedan").unwrap();
        let cfg = AllMbConfig {
            k: 1,
            ..Default::default()
        };
        let res = bn_all_mb(&ctx, &mut src, &q, &cfg).unwrap();
        assert_eq!(res.candidates.len(), 1);
        assert_eq!(res.outcome.issued.len(), 1);

        // the model knows Coupe but the source holds no certain Coupe rows
        let no_coupe: Vec<Tuple> = t.tuples().iter().filter(|x| x.id != 7 && x.id != 9).cloned().collect();
        let mut src = AutonomousSource::unlimited(t.with_tuples(no_coupe).unwrap());
        let absent = SelectionQuery::parse("Body=Coupe").unwrap();
        let res = bn_all_mb(&ctx, &mut src, &absent, &AllMbConfig::default()).unwrap();
        assert!(res.candidates.is_empty());
        let cfg = AllMbConfig {
            full_domain_fallback: true,
            ..Default::default()
        };
        let res = bn_all_mb(&ctx, &mut src, &absent, &cfg).unwrap();
        assert_eq!(res.candidates.len(), 10);
    }
}
