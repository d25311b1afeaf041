//! A simulated autonomous database: selection queries only, certain
//! answers only, and an optional cap on the number of queries it answers.

use log::warn;

use crate::error::{Error, Result};
use crate::tabular::{SelectionQuery, Table, Tuple};

#[derive(Clone, Debug)]
pub struct AutonomousSource {
    table: Table,
    query_limit: Option<usize>,
    queries_used: usize,
}

impl AutonomousSource {
    pub fn new(table: Table, query_limit: Option<usize>) -> Self {
        AutonomousSource {
            table,
            query_limit,
            queries_used: 0,
        }
    }

    pub fn unlimited(table: Table) -> Self {
        AutonomousSource::new(table, None)
    }

    pub fn queries_used(&self) -> usize {
        self.queries_used
    }

    pub fn query_limit(&self) -> Option<usize> {
        self.query_limit
    }

    pub fn remaining(&self) -> Option<usize> {
        self.query_limit.map(|l| l - self.queries_used)
    }

    /// Read access to the underlying table's schema; the rows themselves are
    /// reachable only through queries.
    pub fn schema(&self) -> &crate::tabular::Schema {
        self.table.schema()
    }

    fn charge(&mut self) -> Result<()> {
        if let Some(limit) = self.query_limit {
            if self.queries_used >= limit {
                return Err(Error::BudgetExhausted { limit });
            }
        }
        self.queries_used += 1;
        Ok(())
    }

    /// Certain answers to `query`. Each call costs one query.
    pub fn answer(&mut self, query: &SelectionQuery) -> Result<Vec<Tuple>> {
        self.charge()?;
        Ok(self.table.select(query, false).into_iter().cloned().collect())
    }

    /// Source size over sample size, from one unconstrained count probe.
    pub fn estimate_ratio(&mut self, sample: &Table) -> Result<f64> {
        if sample.is_empty() {
            return Err(Error::InvalidArgument("sample is empty".into()));
        }
        self.charge()?;
        let ratio = self.table.len() as f64 / sample.len() as f64;
        if ratio < 1.0 {
            warn!(
                "sample ({} rows) is larger than the source ({} rows)",
                sample.len(),
                self.table.len()
            );
        }
        Ok(ratio)
    }
}
