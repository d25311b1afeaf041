use std::collections::HashSet;

use log::warn;

use super::{
    by_f_measure, candidate_attributes, order_and_issue, score_all, RewriteResult, RewrittenQuery, ScoringContext,
};
use crate::error::{Error, Result};
use crate::source::AutonomousSource;
use crate::tabular::{Predicate, Schema, SelectionQuery, Table, Tuple};

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub depth: usize,
    pub alpha: f64,
    /// Queries actually sent to the source.
    pub top_k_issue: usize,
    /// With an empty base set, expand over full attribute domains.
    pub full_domain_fallback: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_width: 5,
            depth: 2,
            alpha: 0.0,
            top_k_issue: 10,
            full_domain_fallback: false,
        }
    }
}

impl BeamConfig {
    fn validate(&self) -> Result<()> {
        if self.beam_width == 0 || self.depth == 0 || self.top_k_issue == 0 {
            return Err(Error::InvalidArgument(
                "beam width, depth and top_k_issue must be at least 1".into(),
            ));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidArgument("alpha must be non-negative".into()));
        }
        Ok(())
    }
}

/// Trace of a beam search.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BeamSearch {
    pub candidate_attributes: Vec<String>,
    /// Newly generated, scored queries of each level.
    pub expansions: Vec<Vec<RewrittenQuery>>,
    /// The beam after each level, best first by F-measure.
    pub beams: Vec<Vec<RewrittenQuery>>,
}

impl BeamSearch {
    pub fn final_beam(&self) -> &[RewrittenQuery] {
        self.beams.last().map_or(&[], Vec::as_slice)
    }
}

/// Beam search over (attribute, value) additions. Each level extends the
/// queries added at the previous level by one predicate on an unconstrained
/// candidate attribute, with values taken from the base tuples that match
/// the partial query. The new beam is the top `beam_width` of the old beam
/// and the extensions, so level `i` holds queries with at most `i`
/// predicates.
pub fn beam_search(
    ctx: &ScoringContext<'_>,
    source_schema: &Schema,
    original: &SelectionQuery,
    base: &[Tuple],
    cfg: &BeamConfig,
) -> Result<BeamSearch> {
    cfg.validate()?;
    let names = candidate_attributes(ctx.net, original)?;
    let mut trace = BeamSearch {
        candidate_attributes: names.clone(),
        ..Default::default()
    };
    let use_domain = base.is_empty();
    if names.is_empty() || (use_domain && !cfg.full_domain_fallback) {
        warn!("nothing to rewrite for {original}");
        return Ok(trace);
    }
    let base_table = Table::new(source_schema.clone(), base.to_vec())?;

    let mut seen: HashSet<SelectionQuery> = HashSet::new();
    let mut beam: Vec<RewrittenQuery> = Vec::new();
    for level in 1..=cfg.depth {
        let parents: Vec<SelectionQuery> = if level == 1 {
            vec![SelectionQuery::empty()]
        } else {
            beam.iter()
                .filter(|q| q.query.len() == level - 1)
                .map(|q| q.query.clone())
                .collect()
        };
        let mut fresh = Vec::new();
        for parent in &parents {
            let matching = if use_domain {
                Vec::new()
            } else {
                base_table.select(parent, false)
            };
            for name in names.iter().filter(|n| !parent.constrains(n)) {
                let labels: Vec<String> = if use_domain {
                    let a = ctx.net.schema().require_index(name)?;
                    ctx.net.schema().domain(a).to_vec()
                } else {
                    let a = source_schema.require_index(name)?;
                    let mut out: Vec<String> = Vec::new();
                    for t in &matching {
                        if let Some(label) = base_table.label_of(t, a) {
                            if !out.iter().any(|l| l == label) {
                                out.push(label.to_string());
                            }
                        }
                    }
                    out
                };
                for label in labels {
                    let q = parent.with(Predicate::new(name.as_str(), label))?;
                    if seen.insert(q.clone()) {
                        fresh.push(q);
                    }
                }
            }
        }
        let scored = score_all(ctx, original, fresh, cfg.alpha)?;
        let mut pool = beam.clone();
        pool.extend(scored.iter().cloned());
        pool.sort_by(by_f_measure);
        pool.truncate(cfg.beam_width);
        beam = pool;
        trace.expansions.push(scored);
        trace.beams.push(beam.clone());
    }
    Ok(trace)
}

/// Rewrites `original` by beam search; issues up to `top_k_issue` queries of
/// the final beam with non-zero F-measure, in order of expected precision.
pub fn bn_beam(
    ctx: &ScoringContext<'_>,
    source: &mut AutonomousSource,
    original: &SelectionQuery,
    cfg: &BeamConfig,
) -> Result<RewriteResult> {
    let base = source.answer(original)?;
    let trace = beam_search(ctx, &source.schema().clone(), original, &base, cfg)?;
    let candidates = trace.final_beam().to_vec();
    let issuable: Vec<RewrittenQuery> = candidates.iter().filter(|q| q.score.f_measure > 0.0).cloned().collect();
    let outcome = order_and_issue(issuable, source, original, &base, cfg.top_k_issue)?;
    Ok(RewriteResult {
        base,
        candidates,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewriting::all_mb::{all_mb_candidates, AllMbConfig};
    use crate::rewriting::by_f_measure;
    use crate::rewriting::fixtures::fragment_net;

    fn texts(qs: &[RewrittenQuery]) -> Vec<String> {
        let mut v: Vec<String> = qs.iter().map(|q| q.query.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn first_level_pool_and_pruning() {
        let (t, net) = fragment_net();
        let ctx = ScoringContext {
            net: &net,
            sample: &t,
            ratio: 1.0,
        };
        let q = SelectionQuery::parse("Body=Sedan").unwrap();
        let base: Vec<Tuple> = t.select(&q, false).into_iter().cloned().collect();
        let cfg = BeamConfig {
            depth: 1,
            ..Default::default()
        };
        let trace = beam_search(&ctx, t.schema(), &q, &base, &cfg).unwrap();
        assert_eq!(trace.candidate_attributes, ["Model", "Year"]);
        assert_eq!(
            texts(&trace.expansions[0]),
            [
                "Model=745",
                "Model=A8",
                "Model=tl",
                "Year=2002",
                "Year=2003",
                "Year=2005"
            ]
        );
        let mut ranked = trace.expansions[0].clone();
        ranked.sort_by(by_f_measure);
        ranked.truncate(5);
        assert_eq!(trace.final_beam(), ranked.as_slice());
    }

    #[test]
    fn second_level_values_come_from_matching_base_tuples() {
        let (t, net) = fragment_net();
        let ctx = ScoringContext {
            net: &net,
            sample: &t,
            ratio: 1.0,
        };
        let q = SelectionQuery::parse("Body=Sedan").unwrap();
        let base: Vec<Tuple> = t.select(&q, false).into_iter().cloned().collect();
        let cfg = BeamConfig {
            beam_width: 100,
            depth: 2,
            ..Default::default()
        };
        let trace = beam_search(&ctx, t.schema(), &q, &base, &cfg).unwrap();
        let level2: Vec<String> = texts(&trace.expansions[1]);
        assert_eq!(
            level2,
            ["Model=745,Year=2002", "Model=A8,Year=2005", "Model=tl,Year=2003"]
        );
        // a wide, deep beam holds every all-blanket candidate
        let all = all_mb_candidates(&ctx, t.schema(), &q, &base, &AllMbConfig::default()).unwrap();
        for c in &all {
            assert!(trace.final_beam().iter().any(|b| b.query == c.query));
        }
    }

    #[test]
    fn two_attribute_query_and_deduplicated_retrieval() {
        let (t, net) = fragment_net();
        let ctx = ScoringContext {
            net: &net,
            sample: &t,
            ratio: 1.0,
        };
        let mut src = AutonomousSource::unlimited(t.clone());
        let q = SelectionQuery::parse("Make=BMW,Mileage=40000").unwrap();
        let res = bn_beam(&ctx, &mut src, &q, &BeamConfig::default()).unwrap();
        let base: Vec<u64> = res.base.iter().map(|t| t.id).collect();
        assert_eq!(base, [4, 9, 10]);

        let single = SelectionQuery::parse("Body=Sedan").unwrap();
        let cfg = BeamConfig {
            beam_width: 10,
            depth: 1,
            ..Default::default()
        };
        let res = bn_beam(&ctx, &mut src, &single, &cfg).unwrap();
        let ids: Vec<u64> = res.outcome.extended.iter().map(|r| r.tuple.id).collect();
        let mut unique = ids.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(ids.len(), unique.len());
        assert!(ids.contains(&2));
        assert!(res.outcome.issued.iter().all(|q| q.score.f_measure > 0.0));
    }
}
