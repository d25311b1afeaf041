//! Discrete Bayes networks: DAG structure plus one conditional probability
//! table per attribute.

mod graph;
mod io;
mod learn;
mod params;
pub mod random;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tabular::{Schema, Table, Tuple, ValueId};

pub use learn::{learn_structure, ScoreKind, SearchTrace, StructureSearchConfig};
pub use params::fit_parameters;

/// Parent lists over a schema's attributes. Always acyclic.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    schema: Schema,
    parents: Vec<Vec<usize>>,
}

impl Structure {
    pub fn empty(schema: Schema) -> Self {
        let n = schema.arity();
        Structure {
            schema,
            parents: vec![Vec::new(); n],
        }
    }

    /// Parent lists are sorted; duplicates, self loops and cycles are errors.
    pub fn new(schema: Schema, mut parents: Vec<Vec<usize>>) -> Result<Self> {
        let n = schema.arity();
        if parents.len() != n {
            return Err(Error::SchemaMismatch(format!(
                "{} parent lists for {n} attributes",
                parents.len()
            )));
        }
        for (v, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            ps.dedup();
            if ps.iter().any(|&p| p >= n || p == v) {
                return Err(Error::InvalidArgument(format!(
                    "invalid parent list for {}",
                    schema.name(v)
                )));
            }
        }
        let s = Structure { schema, parents };
        if let Some(v) = graph::find_cycle(&s.parents) {
            return Err(Error::Cyclic(s.schema.name(v).to_string()));
        }
        Ok(s)
    }

    /// Builds a structure from `(parent, child)` attribute-name pairs.
    pub fn from_edges(schema: Schema, edges: &[(&str, &str)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); schema.arity()];
        for (p, c) in edges {
            let p = schema.require_index(p)?;
            let c = schema.require_index(c)?;
            parents[c].push(p);
        }
        Structure::new(schema, parents)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parents[c].contains(&v)).collect()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges as `(parent, child)` names, sorted.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| {
                ps.iter()
                    .map(move |&p| (self.schema.name(p).to_string(), self.schema.name(c).to_string()))
            })
            .collect();
        out.sort();
        out
    }

    pub fn topological_order(&self) -> Vec<usize> {
        graph::topological_order(&self.parents)
    }

    /// Parents, children and the children's other parents of `v`, sorted.
    pub fn markov_blanket_of(&self, v: usize) -> Vec<usize> {
        graph::markov_blanket(&self.parents, v)
    }

    /// Whether `x` and `y` are d-separated given `given`, by Bayes-ball
    /// reachability.
    pub fn d_separated(&self, x: usize, y: usize, given: &[usize]) -> bool {
        !graph::reachable(&self.parents, x, given).contains(&y)
    }

    pub(crate) fn parent_lists(&self) -> &[Vec<usize>] {
        &self.parents
    }
}

/// Conditional probability table of one attribute. Rows are indexed by the
/// parent configuration in mixed radix, first parent most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    cardinality: usize,
    parent_cards: Vec<usize>,
    probs: Vec<f64>,
}

impl Cpt {
    pub fn new(cardinality: usize, parent_cards: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let rows: usize = parent_cards.iter().product();
        if cardinality == 0 || probs.len() != rows * cardinality {
            return Err(Error::InvalidArgument(format!(
                "cpt needs {} entries, got {}",
                rows * cardinality,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "cpt entries must be finite and non-negative".into(),
            ));
        }
        Ok(Cpt {
            cardinality,
            parent_cards,
            probs,
        })
    }

    pub fn uniform(cardinality: usize, parent_cards: Vec<usize>) -> Self {
        let rows: usize = parent_cards.iter().product();
        Cpt {
            cardinality,
            parent_cards,
            probs: vec![1.0 / cardinality as f64; rows * cardinality],
        }
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn row_count(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn row_index(&self, parent_values: impl IntoIterator<Item = ValueId>) -> usize {
        parent_values
            .into_iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (v, &card)| acc * card + v as usize)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.probs[row * self.cardinality..(row + 1) * self.cardinality]
    }

    pub fn prob(&self, row: usize, value: ValueId) -> f64 {
        self.probs[row * self.cardinality + value as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_error(&self) -> f64 {
        (0..self.row_count())
            .map(|r| (self.row(r).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesNet {
    structure: Structure,
    cpts: Vec<Cpt>,
}

impl BayesNet {
    /// Checks each CPT against the structure and that rows sum to one within
    /// `tolerance`.
    pub fn new(structure: Structure, cpts: Vec<Cpt>, tolerance: f64) -> Result<Self> {
        let schema = structure.schema();
        if cpts.len() != structure.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} cpts for {} attributes",
                cpts.len(),
                structure.len()
            )));
        }
        for (v, cpt) in cpts.iter().enumerate() {
            let expected: Vec<usize> = structure.parents(v).iter().map(|&p| schema.cardinality(p)).collect();
            if cpt.cardinality != schema.cardinality(v) || cpt.parent_cards != expected {
                return Err(Error::SchemaMismatch(format!(
                    "cpt shape of {} does not match the structure",
                    schema.name(v)
                )));
            }
            let err = cpt.max_row_error();
            if err > tolerance {
                return Err(Error::InvalidArgument(format!(
                    "cpt row of {} sums to 1 ± {err:e}",
                    schema.name(v)
                )));
            }
        }
        Ok(BayesNet { structure, cpts })
    }

    /// Builds a net from per-attribute probability vectors, each laid out row
    /// by row as in [`Cpt`].
    pub fn from_tables(structure: Structure, tables: Vec<Vec<f64>>) -> Result<Self> {
        let schema = structure.schema();
        let cpts = tables
            .into_iter()
            .enumerate()
            .map(|(v, probs)| {
                let cards = structure.parents(v).iter().map(|&p| schema.cardinality(p)).collect();
                Cpt::new(schema.cardinality(v), cards, probs)
            })
            .collect::<Result<Vec<_>>>()?;
        BayesNet::new(structure, cpts, 1e-9)
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn schema(&self) -> &Schema {
        self.structure.schema()
    }

    pub fn len(&self) -> usize {
        self.cpts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cpts.is_empty()
    }

    pub fn cpt(&self, v: usize) -> &Cpt {
        &self.cpts[v]
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        self.structure.parents(v)
    }

    /// P(v = value | parents as in `assignment`). All parents must be set.
    pub fn local_prob(&self, v: usize, value: ValueId, assignment: &[ValueId]) -> f64 {
        let cpt = &self.cpts[v];
        let row = cpt.row_index(self.parents(v).iter().map(|&p| assignment[p]));
        cpt.prob(row, value)
    }

    /// Probability of a complete assignment (chain rule).
    pub fn joint_prob(&self, assignment: &[ValueId]) -> f64 {
        (0..self.len())
            .map(|v| self.local_prob(v, assignment[v], assignment))
            .product()
    }

    /// Markov blanket of a named attribute, as names in schema order.
    pub fn markov_blanket(&self, attribute: &str) -> Result<Vec<String>> {
        let v = self.schema().require_index(attribute)?;
        Ok(self
            .structure
            .markov_blanket_of(v)
            .into_iter()
            .map(|b| self.schema().name(b).to_string())
            .collect())
    }

    pub fn markov_blanket_of(&self, v: usize) -> Vec<usize> {
        self.structure.markov_blanket_of(v)
    }

    pub fn d_separated(&self, x: usize, y: usize, given: &[usize]) -> bool {
        self.structure.d_separated(x, y, given)
    }

    /// Serializes to the versioned text model format.
    pub fn save(&self) -> Result<String> {
        io::save(self)
    }

    pub fn load(text: &str) -> Result<BayesNet> {
        io::load(text)
    }

    /// Draws `n` complete tuples by ancestral sampling; ids run from 1.
    pub fn sample_table(&self, n: usize, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = self.structure.topological_order();
        let mut tuples = Vec::with_capacity(n);
        let mut values = vec![0 as ValueId; self.len()];
        for i in 0..n {
            for &v in &order {
                let cpt = &self.cpts[v];
                let row = cpt.row_index(self.parents(v).iter().map(|&p| values[p]));
                values[v] = sample_categorical(cpt.row(row), &mut rng);
            }
            tuples.push(Tuple::new(i as u64 + 1, values.iter().map(|&v| Some(v)).collect()));
        }
        Table::new(self.schema().clone(), tuples).expect("sampled values are in domain")
    }
}

/// Draws an index from unnormalized non-negative weights.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> ValueId {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if draw < *w {
            return i as ValueId;
        }
        draw -= w;
    }
    // rounding can leave a sliver past the last bucket
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1) as ValueId
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn schema(attrs: &[(&str, &[&str])]) -> Schema {
        Schema::new(
            attrs.iter().map(|(n, _)| n.to_string()).collect(),
            attrs
                .iter()
                .map(|(_, d)| d.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
        .unwrap()
    }

    pub fn binary(names: &[&str]) -> Schema {
        schema(&names.iter().map(|n| (*n, &["0", "1"][..])).collect::<Vec<_>>())
    }

    /// A -> B with P(A=a)=0.6, P(B=b|a)=0.9, P(B=b|¬a)=0.2. Labels are
    /// chosen so index 0 is the "¬" value.
    pub fn two_node() -> BayesNet {
        let s = schema(&[("A", &["a", "not_a"]), ("B", &["b", "not_b"])]);
        let st = Structure::from_edges(s, &[("A", "B")]).unwrap();
        BayesNet::from_tables(st, vec![vec![0.6, 0.4], vec![0.9, 0.1, 0.2, 0.8]]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn structure_rejects_cycles() {
        let s = binary(&["A", "B", "C"]);
        let err = Structure::from_edges(s, &[("A", "B"), ("B", "C"), ("C", "A")]).unwrap_err();
        assert!(matches!(err, Error::Cyclic(_)));
    }

    #[test]
    fn cpt_row_layout() {
        let cpt = Cpt::uniform(2, vec![3, 2]);
        assert_eq!(cpt.row_count(), 6);
        assert_eq!(cpt.row_index([2, 1]), 5);
        assert_eq!(cpt.row_index([1, 0]), 2);
    }

    #[test]
    fn net_rejects_bad_rows() {
        let s = binary(&["A"]);
        let st = Structure::empty(s);
        assert!(BayesNet::from_tables(st, vec![vec![0.5, 0.4]]).is_err());
    }

    #[test]
    fn joint_prob_is_chain_rule() {
        let net = two_node();
        assert!((net.joint_prob(&[0, 0]) - 0.54).abs() < 1e-12);
        assert!((net.joint_prob(&[1, 0]) - 0.08).abs() < 1e-12);
    }

    #[test]
    fn sampling_matches_marginals() {
        let net = two_node();
        let t = net.sample_table(20000, 5);
        let a = t.tuples().iter().filter(|t| t.cells[0] == Some(0)).count() as f64 / 20000.0;
        let b = t.tuples().iter().filter(|t| t.cells[1] == Some(0)).count() as f64 / 20000.0;
        assert!((a - 0.6).abs() < 0.02, "{a}");
        assert!((b - 0.62).abs() < 0.02, "{b}");
        assert_eq!(net.sample_table(50, 9), net.sample_table(50, 9));
    }

    #[test]
    fn blanket_by_name() {
        let s = binary(&["A", "B", "C"]);
        let st = Structure::from_edges(s, &[("A", "C"), ("B", "C")]).unwrap();
        let net = BayesNet::from_tables(st, vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5; 8]]).unwrap();
        assert_eq!(net.markov_blanket("A").unwrap(), ["B", "C"]);
        assert!(net.markov_blanket("Z").is_err());
    }

    mod props {
        use super::*;
        use crate::bayesnet::random::{random_structure, uniform_schema};
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn blanket_is_minimal_separating_set(seed in 0u64..10_000, n in 2usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let st = random_structure(uniform_schema(n, 2), 2, 0.5, &mut rng);
                for x in 0..n {
                    let mb = st.markov_blanket_of(x);
                    for y in (0..n).filter(|y| *y != x && !mb.contains(y)) {
                        prop_assert!(st.d_separated(x, y, &mb));
                    }
                    for (i, &s) in mb.iter().enumerate() {
                        let mut smaller = mb.clone();
                        smaller.remove(i);
                        let leaks = (0..n)
                            .filter(|y| *y != x && !smaller.contains(y))
                            .any(|y| !st.d_separated(x, y, &smaller));
                        prop_assert!(leaks, "dropping {} from the blanket of {} keeps it separating", s, x);
                    }
                }
            }
        }
    }
}
