//! Posterior computation: exact variable elimination, Gibbs sampling, and
//! brute-force enumeration of the full joint.

mod factor;
mod gibbs;

use std::fmt::Write as _;

use crate::bayesnet::BayesNet;
use crate::error::{Error, Result};
use crate::tabular::{Schema, Tuple, ValueId};

use factor::Factor;

pub use gibbs::{posterior_gibbs, GibbsConfig};

/// Largest joint state space [`enumerate_joint`] will build.
pub const MAX_ENUMERATION_STATES: u128 = 10_000_000;

/// Observed `attribute = value` assignments, sorted by attribute.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    pairs: Vec<(usize, ValueId)>,
}

impl Evidence {
    pub fn none() -> Self {
        Evidence::default()
    }

    /// Checks attribute range, value range and that no attribute repeats.
    pub fn new(schema: &Schema, mut pairs: Vec<(usize, ValueId)>) -> Result<Self> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "evidence repeats attribute {}",
                    schema.name(w[0].0)
                )));
            }
        }
        for &(a, v) in &pairs {
            if a >= schema.arity() || v as usize >= schema.cardinality(a) {
                return Err(Error::InvalidArgument(format!(
                    "evidence ({a}, {v}) outside the schema"
                )));
            }
        }
        Ok(Evidence { pairs })
    }

    pub fn from_labels(schema: &Schema, pairs: &[(&str, &str)]) -> Result<Self> {
        let resolved = pairs
            .iter()
            .map(|(a, v)| {
                let a = schema.require_index(a)?;
                Ok((a, schema.require_value(a, v)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Evidence::new(schema, resolved)
    }

    /// The non-null cells of a tuple.
    pub fn from_tuple(tuple: &Tuple) -> Self {
        Evidence {
            pairs: tuple
                .cells
                .iter()
                .enumerate()
                .filter_map(|(a, c)| c.map(|v| (a, v)))
                .collect(),
        }
    }

    pub fn pairs(&self) -> &[(usize, ValueId)] {
        &self.pairs
    }

    pub fn get(&self, attr: usize) -> Option<ValueId> {
        self.pairs
            .binary_search_by_key(&attr, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    pub fn contains(&self, attr: usize) -> bool {
        self.get(attr).is_some()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Distribution over the cross product of the target domains, row-major
/// with the first target most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    targets: Vec<usize>,
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub(crate) fn from_parts(targets: Vec<usize>, cards: Vec<usize>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(cards.iter().product::<usize>(), probs.len());
        JointDistribution { targets, cards, probs }
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn index_of(&self, values: &[ValueId]) -> usize {
        values
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&v, &c)| acc * c + v as usize)
    }

    pub fn values_at(&self, mut index: usize) -> Vec<ValueId> {
        let mut out = vec![0; self.cards.len()];
        for i in (0..self.cards.len()).rev() {
            out[i] = (index % self.cards[i]) as ValueId;
            index /= self.cards[i];
        }
        out
    }

    pub fn prob(&self, values: &[ValueId]) -> f64 {
        self.probs[self.index_of(values)]
    }

    /// Marginal of the `i`-th target.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cards[i]];
        for (idx, p) in self.probs.iter().enumerate() {
            out[self.values_at(idx)[i] as usize] += p;
        }
        out
    }

    /// Conditions on `evidence` (attributes among the targets) and keeps
    /// `keep`, in that order. Used to read posteriors off a full joint.
    pub fn condition(&self, keep: &[usize], evidence: &Evidence) -> Result<JointDistribution> {
        let pos = |a: usize| {
            self.targets
                .iter()
                .position(|&t| t == a)
                .ok_or_else(|| Error::InvalidArgument(format!("attribute {a} not in distribution")))
        };
        let keep_pos = keep.iter().map(|&a| pos(a)).collect::<Result<Vec<_>>>()?;
        let ev_pos = evidence
            .pairs()
            .iter()
            .map(|&(a, v)| Ok((pos(a)?, v)))
            .collect::<Result<Vec<_>>>()?;
        let cards: Vec<usize> = keep_pos.iter().map(|&i| self.cards[i]).collect();
        let mut probs = vec![0.0; cards.iter().product()];
        for (idx, &p) in self.probs.iter().enumerate() {
            let vals = self.values_at(idx);
            if ev_pos.iter().all(|&(i, v)| vals[i] == v) {
                let k = keep_pos
                    .iter()
                    .zip(&cards)
                    .fold(0, |acc, (&i, &c)| acc * c + vals[i] as usize);
                probs[k] += p;
            }
        }
        normalize(&mut probs)?;
        Ok(JointDistribution::from_parts(keep.to_vec(), cards, probs))
    }

    /// Total variation distance to a distribution over the same targets.
    pub fn total_variation(&self, other: &JointDistribution) -> f64 {
        assert_eq!(self.cards, other.cards, "distributions over different spaces");
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// One `label,label<TAB>probability` line per combination, in
    /// combination order.
    pub fn to_text(&self, schema: &Schema) -> String {
        let mut out = String::new();
        for (idx, p) in self.probs.iter().enumerate() {
            let labels: Vec<&str> = self
                .values_at(idx)
                .iter()
                .zip(&self.targets)
                .map(|(&v, &a)| schema.label(a, v))
                .collect();
            writeln!(out, "{}\t{p:.12}", labels.join(",")).expect("string write");
        }
        out
    }
}

fn normalize(probs: &mut [f64]) -> Result<()> {
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ImpossibleEvidence);
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(())
}

fn check_query(net: &BayesNet, targets: &[usize], ev: &Evidence) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no target attributes".into()));
    }
    let n = net.len();
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::InvalidArgument(format!("target {t} outside the schema")));
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "target {} listed twice",
                net.schema().name(t)
            )));
        }
        if ev.contains(t) {
            return Err(Error::InvalidArgument(format!(
                "target {} is also observed",
                net.schema().name(t)
            )));
        }
    }
    if let Some(&(a, _)) = ev.pairs().iter().find(|(a, _)| *a >= n) {
        return Err(Error::InvalidArgument(format!(
            "evidence attribute {a} outside the schema"
        )));
    }
    let states: u128 = targets.iter().map(|&t| net.schema().cardinality(t) as u128).product();
    if states > MAX_ENUMERATION_STATES {
        return Err(Error::StateSpaceTooLarge(states));
    }
    Ok(())
}

/// Exact P(targets | evidence) by variable elimination. Variables that are
/// not ancestors of a target or an observed attribute are dropped first;
/// the rest are eliminated in min-degree order, ties by attribute name.
pub fn posterior_exact(net: &BayesNet, targets: &[usize], ev: &Evidence) -> Result<JointDistribution> {
    check_query(net, targets, ev)?;
    let schema = net.schema();
    let n = net.len();

    let mut relevant = vec![false; n];
    let mut stack: Vec<usize> = targets.iter().copied().chain(ev.pairs().iter().map(|p| p.0)).collect();
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut relevant[v], true) {
            stack.extend(net.parents(v).iter().copied());
        }
    }

    let mut factors: Vec<Factor> = (0..n)
        .filter(|&v| relevant[v])
        .map(|v| {
            let mut f = Factor::from_cpt(net, v);
            for &(a, val) in ev.pairs() {
                if f.contains(a) {
                    f = f.reduce(a, val);
                }
            }
            f
        })
        .collect();

    let mut hidden: Vec<usize> = schema
        .name_order()
        .into_iter()
        .filter(|&v| relevant[v] && !targets.contains(&v) && !ev.contains(v))
        .collect();
    while !hidden.is_empty() {
        let degree = |v: usize| {
            let mut nb: Vec<usize> = factors
                .iter()
                .filter(|f| f.contains(v))
                .flat_map(|f| f.vars.iter().copied())
                .filter(|&x| x != v)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb.len()
        };
        // hidden is in name order, so min_by_key keeps the first name on ties
        let (i, &v) = hidden
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| degree(v))
            .expect("non-empty");
        hidden.remove(i);
        let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(v));
        factors = without;
        let merged = with.iter().fold(Factor::unit(), |acc, f| acc.product(f));
        factors.push(merged.sum_out(v));
    }

    let joint = factors.iter().fold(Factor::unit(), |acc, f| acc.product(f));
    let mut sorted_targets = targets.to_vec();
    sorted_targets.sort_unstable();
    debug_assert_eq!(joint.vars, sorted_targets);
    let mut probs = joint.values;
    normalize(&mut probs)?;
    let sorted = JointDistribution::from_parts(sorted_targets, joint.cards, probs);
    if sorted.targets == targets {
        return Ok(sorted);
    }
    sorted.condition(targets, &Evidence::none())
}

/// Most probable combination; the first one in combination order wins ties,
/// which is the lexicographically smallest by label.
pub fn map_assignment(dist: &JointDistribution) -> Vec<ValueId> {
    let mut best = 0;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p > dist.probs[best] {
            best = i;
        }
    }
    dist.values_at(best)
}

/// The full joint over all attributes, in schema order, by multiplying CPT
/// entries for every complete assignment.
pub fn enumerate_joint(net: &BayesNet) -> Result<JointDistribution> {
    let schema = net.schema();
    let cards: Vec<usize> = (0..net.len()).map(|a| schema.cardinality(a)).collect();
    let states: u128 = cards.iter().map(|&c| c as u128).product();
    if states > MAX_ENUMERATION_STATES {
        return Err(Error::StateSpaceTooLarge(states));
    }
    let targets: Vec<usize> = (0..net.len()).collect();
    let mut dist = JointDistribution::from_parts(targets, cards, vec![0.0; states as usize]);
    for idx in 0..dist.probs.len() {
        let values = dist.values_at(idx);
        dist.probs[idx] = net.joint_prob(&values);
    }
    normalize(&mut dist.probs)?;
    Ok(dist)
}
