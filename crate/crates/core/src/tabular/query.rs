use std::fmt;

use super::{Schema, ValueId};
use crate::error::{Error, Result};

/// An `attribute = value` equality constraint, held by label so that a query
/// can be posed to any table sharing the attribute names.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub attribute: String,
    pub value: String,
}

impl Predicate {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Predicate {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.attribute, self.value)
    }
}

/// Conjunction of equality predicates over distinct attributes, kept sorted
/// by attribute name so equal queries compare and print identically.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SelectionQuery {
    predicates: Vec<Predicate>,
}

impl SelectionQuery {
    pub fn new(mut predicates: Vec<Predicate>) -> Result<Self> {
        predicates.sort();
        for pair in predicates.windows(2) {
            if pair[0].attribute == pair[1].attribute {
                return Err(Error::InvalidArgument(format!(
                    "attribute {} constrained twice",
                    pair[0].attribute
                )));
            }
        }
        Ok(SelectionQuery { predicates })
    }

    pub fn empty() -> Self {
        SelectionQuery::default()
    }

    /// Parses `A=v` or `A=v,B=w`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(SelectionQuery::empty());
        }
        let predicates = text
            .split(',')
            .map(|part| {
                let (attr, value) = part
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("predicate {part:?} is not of the form A=v")))?;
                let attr = attr.trim();
                if attr.is_empty() {
                    return Err(Error::InvalidArgument(format!("predicate {part:?} has no attribute")));
                }
                Ok(Predicate::new(attr, value.trim()))
            })
            .collect::<Result<Vec<_>>>()?;
        SelectionQuery::new(predicates)
    }

    /// Builds a query from value indices of `schema`.
    pub fn from_values(schema: &Schema, assignments: &[(usize, ValueId)]) -> Result<Self> {
        SelectionQuery::new(
            assignments
                .iter()
                .map(|&(a, v)| Predicate::new(schema.name(a), schema.label(a, v)))
                .collect(),
        )
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.predicates.iter().map(|p| p.attribute.as_str())
    }

    pub fn constrains(&self, attribute: &str) -> bool {
        self.predicates.iter().any(|p| p.attribute == attribute)
    }

    pub fn value_for(&self, attribute: &str) -> Option<&str> {
        self.predicates
            .iter()
            .find(|p| p.attribute == attribute)
            .map(|p| p.value.as_str())
    }

    /// Adds one predicate. Fails if the attribute is already constrained.
    pub fn with(&self, predicate: Predicate) -> Result<Self> {
        let mut predicates = self.predicates.clone();
        predicates.push(predicate);
        SelectionQuery::new(predicates)
    }

    /// Conjunction of two queries over disjoint attributes.
    pub fn conjoin(&self, other: &SelectionQuery) -> Result<Self> {
        let mut predicates = self.predicates.clone();
        predicates.extend(other.predicates.iter().cloned());
        SelectionQuery::new(predicates)
    }

    /// Resolves to `(attribute, value)` indices; every label must exist.
    pub fn resolve(&self, schema: &Schema) -> Result<Vec<(usize, ValueId)>> {
        self.predicates
            .iter()
            .map(|p| {
                let a = schema.require_index(&p.attribute)?;
                Ok((a, schema.require_value(a, &p.value)?))
            })
            .collect()
    }

    /// Like [`resolve`](Self::resolve) but a value outside the domain resolves
    /// to `None` (it can match nothing). Returns `None` for an unknown
    /// attribute.
    pub(crate) fn resolve_lenient(&self, schema: &Schema) -> Option<Vec<(usize, Option<ValueId>)>> {
        self.predicates
            .iter()
            .map(|p| {
                let a = schema.index_of(&p.attribute)?;
                Some((a, schema.value_of(a, &p.value)))
            })
            .collect()
    }

    /// Checks attributes and values against `schema`.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        self.resolve(schema).map(|_| ())
    }
}

impl fmt::Display for SelectionQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}
