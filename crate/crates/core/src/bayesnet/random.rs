//! Random DAGs and CPTs, for restarts and for tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BayesNet, Cpt, Structure};
use crate::tabular::Schema;

/// A random DAG: nodes are put in a random order and each node draws up to
/// `max_in_degree` parents among its predecessors, each candidate kept with
/// probability `edge_prob`.
pub fn random_structure<R: Rng + ?Sized>(
    schema: Schema,
    max_in_degree: usize,
    edge_prob: f64,
    rng: &mut R,
) -> Structure {
    let n = schema.arity();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut parents = vec![Vec::new(); n];
    for (i, &v) in order.iter().enumerate() {
        let mut earlier = order[..i].to_vec();
        earlier.shuffle(rng);
        parents[v] = earlier
            .into_iter()
            .filter(|_| rng.gen_bool(edge_prob))
            .take(max_in_degree)
            .collect();
    }
    Structure::new(schema, parents).expect("predecessor edges are acyclic")
}

/// Fills every CPT row with entries drawn uniformly from `[min_entry, 1]`
/// and normalized, so no probability is zero when `min_entry > 0`.
pub fn random_cpts<R: Rng + ?Sized>(structure: Structure, min_entry: f64, rng: &mut R) -> BayesNet {
    let schema = structure.schema();
    let cpts = (0..structure.len())
        .map(|v| {
            let card = schema.cardinality(v);
            let pc: Vec<usize> = structure.parents(v).iter().map(|&p| schema.cardinality(p)).collect();
            let rows: usize = pc.iter().product();
            let mut probs = Vec::with_capacity(rows * card);
            for _ in 0..rows {
                let raw: Vec<f64> = (0..card).map(|_| rng.gen_range(min_entry..=1.0)).collect();
                let total: f64 = raw.iter().sum();
                probs.extend(raw.iter().map(|x| x / total));
            }
            Cpt::new(card, pc, probs).expect("shape follows the structure")
        })
        .collect();
    BayesNet::new(structure, cpts, 1e-9).expect("rows are normalized")
}

/// Schema `X0..X{n-1}` with labels `v0..v{card-1}`.
pub fn uniform_schema(nodes: usize, cardinality: usize) -> Schema {
    Schema::new(
        (0..nodes).map(|i| format!("X{i}")).collect(),
        (0..nodes)
            .map(|_| (0..cardinality).map(|j| format!("v{j}")).collect())
            .collect(),
    )
    .expect("generated names are unique")
}

/// A random net over [`uniform_schema`] with strictly positive CPTs.
pub fn random_net(nodes: usize, cardinality: usize, max_in_degree: usize, seed: u64) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let st = random_structure(uniform_schema(nodes, cardinality), max_in_degree, 0.5, &mut rng);
    random_cpts(st, 0.05, &mut rng)
}
