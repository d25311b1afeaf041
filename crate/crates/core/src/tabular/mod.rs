//! Categorical tables with explicit null cells.
//!
//! Every attribute has a finite domain of string labels, kept sorted and
//! deduplicated, so a value is stored as its index into that domain. Index
//! order is lexicographic label order, which the rest of the crate relies on
//! for deterministic tie-breaking.

mod csv_io;
mod query;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use csv_io::{load_csv, read_csv, write_csv};
pub use query::{Predicate, SelectionQuery};

/// Index of a label within an attribute's domain.
pub type ValueId = u32;

/// A cell is either a domain value or null.
pub type Cell = Option<ValueId>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    attributes: Vec<String>,
    domains: Vec<Vec<String>>,
    lookup: HashMap<String, usize>,
}

impl Schema {
    /// Builds a schema. Domains are sorted and deduplicated.
    pub fn new(attributes: Vec<String>, domains: Vec<Vec<String>>) -> Result<Self> {
        if attributes.len() != domains.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} attributes but {} domains",
                attributes.len(),
                domains.len()
            )));
        }
        let mut lookup = HashMap::with_capacity(attributes.len());
        for (i, name) in attributes.iter().enumerate() {
            if lookup.insert(name.clone(), i).is_some() {
                return Err(Error::SchemaMismatch(format!("duplicate attribute {name}")));
            }
        }
        let mut sorted = Vec::with_capacity(domains.len());
        for (name, domain) in attributes.iter().zip(domains) {
            let set: BTreeSet<String> = domain.into_iter().collect();
            if set.is_empty() {
                return Err(Error::EmptyDomain(name.clone()));
            }
            sorted.push(set.into_iter().collect());
        }
        Ok(Schema {
            attributes,
            domains: sorted,
            lookup,
        })
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn name(&self, attr: usize) -> &str {
        &self.attributes[attr]
    }

    pub fn domain(&self, attr: usize) -> &[String] {
        &self.domains[attr]
    }

    pub fn cardinality(&self, attr: usize) -> usize {
        self.domains[attr].len()
    }

    pub fn label(&self, attr: usize, value: ValueId) -> &str {
        &self.domains[attr][value as usize]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn value_of(&self, attr: usize, label: &str) -> Option<ValueId> {
        self.domains[attr]
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .ok()
            .map(|i| i as ValueId)
    }

    pub fn require_value(&self, attr: usize, label: &str) -> Result<ValueId> {
        self.value_of(attr, label).ok_or_else(|| Error::UnknownValue {
            attribute: self.attributes[attr].clone(),
            value: label.to_string(),
        })
    }

    /// Attribute indices ordered by name, used wherever ties are broken
    /// lexicographically.
    pub fn name_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.arity()).collect();
        order.sort_by(|&a, &b| self.attributes[a].cmp(&self.attributes[b]));
        order
    }

    /// Same attributes, each domain widened to the union of both.
    pub fn union(&self, other: &Schema) -> Result<Schema> {
        if self.attributes != other.attributes {
            return Err(Error::SchemaMismatch(
                "cannot union schemas with different attributes".into(),
            ));
        }
        let domains = self
            .domains
            .iter()
            .zip(&other.domains)
            .map(|(a, b)| a.iter().chain(b).cloned().collect())
            .collect();
        Schema::new(self.attributes.clone(), domains)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tuple {
    pub id: u64,
    pub cells: Vec<Cell>,
}

impl Tuple {
    pub fn new(id: u64, cells: Vec<Cell>) -> Self {
        Tuple { id, cells }
    }

    pub fn get(&self, attr: usize) -> Cell {
        self.cells[attr]
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    pub fn null_attributes(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&a| self.cells[a].is_none()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    schema: Schema,
    tuples: Vec<Tuple>,
}

impl Table {
    /// Validates tuple arity, domain membership and id uniqueness.
    pub fn new(schema: Schema, tuples: Vec<Tuple>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(tuples.len());
        for t in &tuples {
            if t.cells.len() != schema.arity() {
                return Err(Error::SchemaMismatch(format!(
                    "tuple {} has {} cells, schema has {} attributes",
                    t.id,
                    t.cells.len(),
                    schema.arity()
                )));
            }
            for (a, cell) in t.cells.iter().enumerate() {
                if let Some(v) = cell {
                    if *v as usize >= schema.cardinality(a) {
                        return Err(Error::SchemaMismatch(format!(
                            "tuple {} has out-of-domain value for {}",
                            t.id,
                            schema.name(a)
                        )));
                    }
                }
            }
            if !ids.insert(t.id) {
                return Err(Error::SchemaMismatch(format!("duplicate tuple id {}", t.id)));
            }
        }
        Ok(Table { schema, tuples })
    }

    /// Builds a table from label rows, inferring each domain from the
    /// observed non-null labels. Ids are assigned from 1 in row order.
    pub fn from_label_rows(attributes: Vec<String>, rows: Vec<Vec<Option<String>>>) -> Result<Self> {
        let arity = attributes.len();
        let mut domains: Vec<BTreeSet<String>> = vec![BTreeSet::new(); arity];
        for (line, row) in rows.iter().enumerate() {
            if row.len() != arity {
                return Err(Error::Parse {
                    line: line as u64 + 1,
                    message: format!("expected {arity} fields, found {}", row.len()),
                });
            }
            for (a, cell) in row.iter().enumerate() {
                if let Some(label) = cell {
                    domains[a].insert(label.clone());
                }
            }
        }
        for (a, d) in domains.iter().enumerate() {
            if d.is_empty() {
                return Err(Error::EmptyDomain(attributes[a].clone()));
            }
        }
        let schema = Schema::new(
            attributes,
            domains.into_iter().map(|d| d.into_iter().collect()).collect(),
        )?;
        let tuples = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let cells = row
                    .iter()
                    .enumerate()
                    .map(|(a, c)| c.as_deref().and_then(|l| schema.value_of(a, l)))
                    .collect();
                Tuple::new(i as u64 + 1, cells)
            })
            .collect();
        Ok(Table { schema, tuples })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn get_by_id(&self, id: u64) -> Option<&Tuple> {
        self.tuples.iter().find(|t| t.id == id)
    }

    pub fn label_of(&self, tuple: &Tuple, attr: usize) -> Option<&str> {
        tuple.cells[attr].map(|v| self.schema.label(attr, v))
    }

    /// Number of null cells on `attr`.
    pub fn null_count(&self, attr: usize) -> usize {
        self.tuples.iter().filter(|t| t.cells[attr].is_none()).count()
    }

    /// Re-encodes the table against another schema with the same attributes.
    /// Fails if a label is missing from the target domain.
    pub fn conform_to(&self, schema: &Schema) -> Result<Table> {
        if self.schema.attributes() != schema.attributes() {
            return Err(Error::SchemaMismatch(format!(
                "attributes [{}] do not match [{}]",
                self.schema.attributes().join(","),
                schema.attributes().join(",")
            )));
        }
        let mut tuples = Vec::with_capacity(self.tuples.len());
        for t in &self.tuples {
            let mut cells = Vec::with_capacity(t.cells.len());
            for (a, cell) in t.cells.iter().enumerate() {
                cells.push(match cell {
                    Some(v) => Some(schema.require_value(a, self.schema.label(a, *v))?),
                    None => None,
                });
            }
            tuples.push(Tuple::new(t.id, cells));
        }
        Ok(Table {
            schema: schema.clone(),
            tuples,
        })
    }

    /// Keeps the schema, replaces the tuples.
    pub fn with_tuples(&self, tuples: Vec<Tuple>) -> Result<Table> {
        Table::new(self.schema.clone(), tuples)
    }

    /// Rounds the listed numeric attributes to the nearest multiple of their
    /// granularity (exact midpoints round up) and recomputes domains.
    pub fn discretize(&self, rules: &BTreeMap<String, i64>) -> Result<Table> {
        let mut targeted = vec![None; self.schema.arity()];
        for (name, &granularity) in rules {
            let attr = self.schema.require_index(name)?;
            if granularity <= 0 {
                return Err(Error::InvalidArgument(format!(
                    "granularity for {name} must be positive"
                )));
            }
            targeted[attr] = Some(granularity);
        }
        let mut relabel: Vec<Vec<String>> = Vec::with_capacity(self.schema.arity());
        for (a, rule) in targeted.iter().enumerate() {
            let domain = self.schema.domain(a);
            match rule {
                None => relabel.push(domain.to_vec()),
                Some(g) => {
                    let mut mapped = Vec::with_capacity(domain.len());
                    for label in domain {
                        let v: i64 = label.trim().parse().map_err(|_| Error::NonNumeric {
                            attribute: self.schema.name(a).to_string(),
                            value: label.clone(),
                        })?;
                        mapped.push(round_to_multiple(v, *g).to_string());
                    }
                    relabel.push(mapped);
                }
            }
        }
        let rows = self
            .tuples
            .iter()
            .map(|t| {
                t.cells
                    .iter()
                    .enumerate()
                    .map(|(a, c)| c.map(|v| relabel[a][v as usize].clone()))
                    .collect()
            })
            .collect();
        let mut table = Table::from_label_rows(self.schema.attributes().to_vec(), rows)?;
        for (t, original) in table.tuples.iter_mut().zip(&self.tuples) {
            t.id = original.id;
        }
        Ok(table)
    }

    /// Tuples whose constrained cells equal the query values. With
    /// `include_null_matches`, a null cell matches any value.
    pub fn select(&self, query: &SelectionQuery, include_null_matches: bool) -> Vec<&Tuple> {
        let Some(resolved) = query.resolve_lenient(&self.schema) else {
            return Vec::new();
        };
        self.tuples
            .iter()
            .filter(|t| {
                resolved.iter().all(|&(attr, value)| match (t.cells[attr], value) {
                    (Some(cell), Some(v)) => cell == v,
                    (None, _) => include_null_matches,
                    (Some(_), None) => false,
                })
            })
            .collect()
    }

    /// Number of tuples certainly matching `query`.
    pub fn count_matches(&self, query: &SelectionQuery) -> usize {
        self.select(query, false).len()
    }

    /// Nulls every listed attribute on a seeded random subset of
    /// ⌈fraction·N⌉ tuples.
    pub fn inject_nulls(&self, attrs: &[usize], fraction: f64, seed: u64) -> Result<Table> {
        let chosen = self.choose_rows(fraction, seed)?;
        let mut tuples = self.tuples.clone();
        for i in chosen {
            for &a in attrs {
                tuples[i].cells[a] = None;
            }
        }
        Ok(Table {
            schema: self.schema.clone(),
            tuples,
        })
    }

    /// Seeded sample of ⌈fraction·N⌉ tuples without replacement, in original
    /// table order.
    pub fn sample(&self, fraction: f64, seed: u64) -> Result<Table> {
        let mut chosen = self.choose_rows(fraction, seed)?;
        chosen.sort_unstable();
        let tuples = chosen.into_iter().map(|i| self.tuples[i].clone()).collect();
        Ok(Table {
            schema: self.schema.clone(),
            tuples,
        })
    }

    /// Tuples not present (by id) in `other`, in table order.
    pub fn difference(&self, other: &Table) -> Table {
        let ids: HashSet<u64> = other.tuples.iter().map(|t| t.id).collect();
        Table {
            schema: self.schema.clone(),
            tuples: self.tuples.iter().filter(|t| !ids.contains(&t.id)).cloned().collect(),
        }
    }

    fn choose_rows(&self, fraction: f64, seed: u64) -> Result<Vec<usize>> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
        }
        let n = self.tuples.len();
        let count = ceil_count(fraction, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(sample_indices(&mut rng, n, count).into_vec())
    }
}

/// ⌈fraction·n⌉, robust to products like 0.07·100 landing a hair above an
/// integer.
pub(crate) fn ceil_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn round_to_multiple(value: i64, granularity: i64) -> i64 {
    (2 * value + granularity).div_euclid(2 * granularity) * granularity
}

/// Distinct value combinations of `attrs` among `tuples`, in order of first
/// occurrence. Combinations containing a null are dropped.
pub fn project_distinct(tuples: &[&Tuple], attrs: &[usize]) -> Vec<Vec<ValueId>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in tuples {
        let combo: Option<Vec<ValueId>> = attrs.iter().map(|&a| t.cells[a]).collect();
        if let Some(combo) = combo {
            if seen.insert(combo.clone()) {
                out.push(combo);
            }
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn ids(tuples: &[&Tuple]) -> Vec<u64> {
        tuples.iter().map(|t| t.id).collect()
    }

    #[test]
    fn select_certain_answers() {
        let t = cars_fragment();
        let q = SelectionQuery::parse("Body=SUV").unwrap();
        assert_eq!(ids(&t.select(&q, false)), vec![7, 9]);
        assert_eq!(ids(&t.select(&q, true)), vec![7, 8, 9, 10]);

        let r = rewriting_fragment();
        let q = SelectionQuery::parse("Body=Sedan").unwrap();
        assert_eq!(ids(&r.select(&q, false)), vec![1, 3, 4, 5]);

        assert_eq!(r.select(&SelectionQuery::empty(), false).len(), 10);
    }

    #[test]
    fn select_unknown_value_matches_nothing() {
        let t = cars_fragment();
        let q = SelectionQuery::parse("Body=Truck").unwrap();
        assert!(t.select(&q, false).is_empty());
    }

    #[test]
    fn project_distinct_base_set() {
        let r = rewriting_fragment();
        let q = SelectionQuery::parse("Body=Sedan").unwrap();
        let base = r.select(&q, false);
        let s = r.schema();
        let attrs = [s.index_of("Model").unwrap(), s.index_of("Year").unwrap()];
        let combos: Vec<Vec<&str>> = project_distinct(&base, &attrs)
            .into_iter()
            .map(|c| c.iter().zip(&attrs).map(|(&v, &a)| s.label(a, v)).collect())
            .collect();
        assert_eq!(
            combos,
            vec![vec!["A8", "2005"], vec!["tl", "2003"], vec!["745", "2002"]]
        );
        assert_eq!(project_distinct(&base[..1], &attrs).len(), 1);
    }

    #[test]
    fn project_distinct_drops_null_combinations() {
        let r = rewriting_fragment();
        let make = r.schema().index_of("Make").unwrap();
        let nulls: Vec<&Tuple> = r.tuples()[5..8].iter().collect();
        assert!(project_distinct(&nulls, &[make]).is_empty());
    }

    #[test]
    fn discretize_rounds_to_nearest_multiple() {
        assert_eq!(round_to_multiple(20000, 5000), 20000);
        assert_eq!(round_to_multiple(12345, 5000), 10000);
        assert_eq!(round_to_multiple(43, 5), 45);
        assert_eq!(round_to_multiple(2500, 5000), 5000);
        assert_eq!(round_to_multiple(-2500, 5000), 0);
        assert_eq!(round_to_multiple(-2501, 5000), -5000);
    }

    #[test]
    fn discretize_relabels_and_is_idempotent() {
        let t = cars_fragment();
        let rules = BTreeMap::from([("Mileage".to_string(), 5000)]);
        let d = t.discretize(&rules).unwrap();
        let m = d.schema().index_of("Mileage").unwrap();
        assert_eq!(
            d.schema().domain(m),
            ["10000", "15000", "20000", "30000", "40000", "45000"]
        );
        assert_eq!(d.label_of(&d.tuples()[9], m), Some("10000"));
        assert_eq!(d.label_of(&d.tuples()[5], m), None);
        assert_eq!(d.discretize(&rules).unwrap(), d);
    }

    #[test]
    fn discretize_rejects_non_numeric() {
        let t = cars_fragment();
        let rules = BTreeMap::from([("Model".to_string(), 5)]);
        assert!(matches!(t.discretize(&rules), Err(Error::NonNumeric { .. })));
    }

    #[test]
    fn inject_nulls_counts_and_determinism() {
        let t = cars_fragment();
        let body = t.schema().index_of("Body").unwrap();
        assert_eq!(t.inject_nulls(&[body], 0.0, 3).unwrap(), t);

        let all = t.inject_nulls(&[body], 1.0, 3).unwrap();
        assert_eq!(all.null_count(body), 10);

        let make = t.schema().index_of("Make").unwrap();
        let a = t.inject_nulls(&[make], 0.5, 7).unwrap();
        let b = t.inject_nulls(&[make], 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.null_count(make), 5);
    }

    #[test]
    fn sample_sizes() {
        let rows = (0..1000).map(|i| vec![Some((i % 7).to_string())]).collect();
        let t = Table::from_label_rows(vec!["X".into()], rows).unwrap();
        assert_eq!(t.sample(1.0, 1).unwrap().len(), 1000);
        assert_eq!(t.sample(0.15, 1).unwrap().len(), 150);
        assert_eq!(t.sample(0.15, 9).unwrap(), t.sample(0.15, 9).unwrap());
        assert_eq!(ceil_count(0.07, 100), 7);
        assert_eq!(ceil_count(0.071, 100), 8);
    }

    #[test]
    fn schema_rejects_duplicates_and_empty_domains() {
        assert!(Schema::new(vec!["A".into(), "A".into()], vec![vec!["x".into()], vec!["y".into()]]).is_err());
        assert!(matches!(
            Schema::new(vec!["A".into()], vec![vec![]]),
            Err(Error::EmptyDomain(_))
        ));
    }

    #[test]
    fn conform_and_union() {
        let t = cars_fragment();
        let body = t.schema().index_of("Body").unwrap();
        let mut domains: Vec<Vec<String>> = (0..t.schema().arity()).map(|a| t.schema().domain(a).to_vec()).collect();
        domains[body].push("Coupe".into());
        let wider = Schema::new(t.schema().attributes().to_vec(), domains).unwrap();
        let u = t.schema().union(&wider).unwrap();
        assert_eq!(u, wider);
        let c = t.conform_to(&wider).unwrap();
        assert_eq!(c.label_of(&c.tuples()[6], body), Some("SUV"));
        assert!(t.conform_to(&wider).unwrap().conform_to(t.schema()).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_table() -> impl Strategy<Value = Table> {
            prop::collection::vec(prop::collection::vec(prop::option::of(0u8..3), 3), 1..30).prop_filter_map(
                "needs a value per column",
                |rows| {
                    let rows = rows
                        .into_iter()
                        .map(|r| r.into_iter().map(|c| c.map(|v| v.to_string())).collect())
                        .collect();
                    Table::from_label_rows(vec!["A".into(), "B".into(), "C".into()], rows).ok()
                },
            )
        }

        proptest! {
            #[test]
            fn certain_answers_are_possible_answers(t in arb_table(), a in 0u8..3, b in 0u8..3) {
                let q = SelectionQuery::new(vec![
                    Predicate::new("A", a.to_string()),
                    Predicate::new("C", b.to_string()),
                ]).unwrap();
                let strict: Vec<u64> = t.select(&q, false).iter().map(|t| t.id).collect();
                let loose: HashSet<u64> = t.select(&q, true).iter().map(|t| t.id).collect();
                prop_assert!(strict.iter().all(|id| loose.contains(id)));
            }

            #[test]
            fn projection_is_bounded_and_observed(t in arb_table()) {
                let refs: Vec<&Tuple> = t.tuples().iter().collect();
                let combos = project_distinct(&refs, &[0, 2]);
                prop_assert!(combos.len() <= refs.len());
                for c in &combos {
                    prop_assert!(refs.iter().any(|r| r.cells[0] == Some(c[0]) && r.cells[2] == Some(c[1])));
                }
            }

            #[test]
            fn null_injection_count(t in arb_table(), f in 0.0f64..=1.0, seed in any::<u64>()) {
                let attrs = [0usize, 1];
                let injected = t.inject_nulls(&attrs, f, seed).unwrap();
                let chosen: HashSet<usize> = t.choose_rows(f, seed).unwrap().into_iter().collect();
                prop_assert_eq!(chosen.len(), ceil_count(f, t.len()));
                let untouched_nulls: usize = t
                    .tuples()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !chosen.contains(i))
                    .map(|(_, tup)| attrs.iter().filter(|&&a| tup.cells[a].is_none()).count())
                    .sum();
                let after = injected.null_count(0) + injected.null_count(1);
                prop_assert_eq!(after, chosen.len() * attrs.len() + untouched_nulls);
                prop_assert_eq!(t.inject_nulls(&attrs, 0.0, seed).unwrap(), t.clone());
            }
        }
    }
}
