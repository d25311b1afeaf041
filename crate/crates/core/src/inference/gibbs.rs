use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_query, Evidence, JointDistribution};
use crate::bayesnet::{sample_categorical, BayesNet};
use crate::error::{Error, Result};
use crate::tabular::ValueId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GibbsConfig {
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            samples: 250,
            burn_in: 100,
            seed: 0,
        }
    }
}

/// Estimates P(targets | evidence) with a single seeded Gibbs chain over all
/// unobserved attributes. The chain starts from a forward sample with the
/// evidence clamped; each sweep resamples the unobserved attributes in
/// topological order and contributes one count after `burn_in` sweeps.
pub fn posterior_gibbs(
    net: &BayesNet,
    targets: &[usize],
    ev: &Evidence,
    cfg: &GibbsConfig,
) -> Result<JointDistribution> {
    check_query(net, targets, ev)?;
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("gibbs needs at least one sample".into()));
    }
    let schema = net.schema();
    let n = net.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let order = net.structure().topological_order();
    let children: Vec<Vec<usize>> = (0..n).map(|v| net.structure().children(v)).collect();

    let mut state = vec![0 as ValueId; n];
    for &v in &order {
        state[v] = match ev.get(v) {
            Some(x) => x,
            None => {
                let cpt = net.cpt(v);
                let row = cpt.row_index(net.parents(v).iter().map(|&p| state[p]));
                sample_categorical(cpt.row(row), &mut rng)
            }
        };
    }

    let free: Vec<usize> = order.iter().copied().filter(|&v| !ev.contains(v)).collect();
    let cards: Vec<usize> = targets.iter().map(|&t| schema.cardinality(t)).collect();
    let mut counts = vec![0.0; cards.iter().product()];
    let mut weights = Vec::new();
    for sweep in 0..cfg.burn_in + cfg.samples {
        for &v in &free {
            weights.clear();
            for x in 0..schema.cardinality(v) as ValueId {
                state[v] = x;
                let mut w = net.local_prob(v, x, &state);
                for &c in &children[v] {
                    w *= net.local_prob(c, state[c], &state);
                }
                weights.push(w);
            }
            if !(weights.iter().sum::<f64>() > 0.0) {
                return Err(Error::ImpossibleEvidence);
            }
            state[v] = sample_categorical(&weights, &mut rng);
        }
        if sweep >= cfg.burn_in {
            let idx = targets
                .iter()
                .zip(&cards)
                .fold(0, |acc, (&t, &c)| acc * c + state[t] as usize);
            counts[idx] += 1.0;
        }
    }
    for c in counts.iter_mut() {
        *c /= cfg.samples as f64;
    }
    Ok(JointDistribution::from_parts(targets.to_vec(), cards, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::fixtures::*;
    use crate::bayesnet::random::random_net;
    use crate::bayesnet::Structure;
    use crate::inference::posterior_exact;

    #[test]
    fn close_to_exact_on_two_nodes() {
        let net = two_node();
        let ev = Evidence::new(net.schema(), vec![(1, 0)]).unwrap();
        let cfg = GibbsConfig {
            samples: 10_000,
            burn_in: 1000,
            seed: 3,
        };
        let g = posterior_gibbs(&net, &[0], &ev, &cfg).unwrap();
        let e = posterior_exact(&net, &[0], &ev).unwrap();
        assert!(g.total_variation(&e) < 0.05);
        assert_eq!(g, posterior_gibbs(&net, &[0], &ev, &cfg).unwrap());
    }

    #[test]
    fn single_node_prior_frequency() {
        let s = schema(&[("A", &["a", "not_a"])]);
        let net = BayesNet::from_tables(Structure::empty(s), vec![vec![0.6, 0.4]]).unwrap();
        let cfg = GibbsConfig {
            samples: 10_000,
            burn_in: 0,
            seed: 1,
        };
        let g = posterior_gibbs(&net, &[0], &Evidence::none(), &cfg).unwrap();
        assert!((g.probs()[0] - 0.6).abs() < 0.05);
    }

    #[test]
    fn more_samples_help_on_median() {
        let net = random_net(5, 3, 2, 42);
        let ev = Evidence::new(net.schema(), vec![(0, 1)]).unwrap();
        let exact = posterior_exact(&net, &[3], &ev).unwrap();
        let median_tv = |samples: usize| {
            let mut tvs: Vec<f64> = (0..20)
                .map(|seed| {
                    let cfg = GibbsConfig {
                        samples,
                        burn_in: 100,
                        seed,
                    };
                    posterior_gibbs(&net, &[3], &ev, &cfg).unwrap().total_variation(&exact)
                })
                .collect();
            tvs.sort_by(f64::total_cmp);
            (tvs[9] + tvs[10]) / 2.0
        };
        assert!(median_tv(10_000) < median_tv(100));
    }

    #[test]
    fn zero_samples_is_rejected() {
        let cfg = GibbsConfig {
            samples: 0,
            ..Default::default()
        };
        assert!(posterior_gibbs(&two_node(), &[0], &Evidence::none(), &cfg).is_err());
    }
}
