//! Text model format. Tab-separated (tabs shown as spaces below),
//! one record per line:
//!
//! ```text
//! bnqp-bayesnet  1
//! attribute  A  a  not_a
//! attribute  B  b  not_b
//! parents  A
//! parents  B  A
//! cpt  A
//! row  6.00000000000e-1  4.00000000000e-1
//! cpt  B
//! row  a  9.00000000000e-1  1.00000000000e-1
//! row  not_a  2.00000000000e-1  8.00000000000e-1
//! ```
//!
//! Attributes, parent lists and CPTs appear in schema order; a CPT row lists
//! its parent labels first, then one probability per value with 12
//! significant digits. Lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{BayesNet, Cpt, Structure};
use crate::error::{Error, Result};
use crate::tabular::Schema;

pub const MAGIC: &str = "bnqp-bayesnet";
pub const VERSION: u32 = 1;
const ROW_SUM_TOLERANCE: f64 = 1e-6;

fn check_label(s: &str) -> Result<()> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidArgument(format!(
            "label {s:?} contains a tab or line break and cannot be saved"
        )));
    }
    Ok(())
}

pub(crate) fn save(net: &BayesNet) -> Result<String> {
    let schema = net.schema();
    let mut out = format!("{MAGIC}\t{VERSION}\n");
    for a in 0..schema.arity() {
        check_label(schema.name(a))?;
        out.push_str("attribute\t");
        out.push_str(schema.name(a));
        for label in schema.domain(a) {
            check_label(label)?;
            out.push('\t');
            out.push_str(label);
        }
        out.push('\n');
    }
    for v in 0..net.len() {
        out.push_str("parents\t");
        out.push_str(schema.name(v));
        for &p in net.parents(v) {
            out.push('\t');
            out.push_str(schema.name(p));
        }
        out.push('\n');
    }
    for v in 0..net.len() {
        let cpt = net.cpt(v);
        writeln!(out, "cpt\t{}", schema.name(v)).expect("string write");
        let parents = net.parents(v);
        let mut config = vec![0usize; parents.len()];
        for r in 0..cpt.row_count() {
            out.push_str("row");
            for (&p, &val) in parents.iter().zip(&config) {
                out.push('\t');
                out.push_str(schema.label(p, val as u32));
            }
            for p in cpt.row(r) {
                write!(out, "\t{p:.11e}").expect("string write");
            }
            out.push('\n');
            // advance the mixed-radix counter, last parent fastest
            for i in (0..config.len()).rev() {
                config[i] += 1;
                if config[i] < cpt.parent_cards()[i] {
                    break;
                }
                config[i] = 0;
            }
        }
    }
    Ok(out)
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::ModelFormat {
        line,
        message: message.into(),
    }
}

pub(crate) fn load(text: &str) -> Result<BayesNet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    let (n, header) = lines.next().ok_or_else(|| format_err(1, "empty model file"))?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 2 || fields[0] != MAGIC {
        return Err(format_err(n, format!("expected header `{MAGIC}<TAB>version`")));
    }
    if fields[1].parse::<u32>().ok() != Some(VERSION) {
        return Err(Error::Version {
            found: fields[1].to_string(),
            expected: VERSION,
        });
    }

    let mut names = Vec::new();
    let mut domains = Vec::new();
    while let Some(&(n, line)) = lines.peek() {
        let f: Vec<&str> = line.split('\t').collect();
        if f[0] != "attribute" {
            break;
        }
        if f.len() < 3 {
            return Err(format_err(n, "attribute needs a name and at least one label"));
        }
        names.push(f[1].to_string());
        domains.push(f[2..].iter().map(|s| s.to_string()).collect::<Vec<_>>());
        lines.next();
    }
    let declared = domains.clone();
    let schema = Schema::new(names, domains)?;
    for (a, labels) in declared.iter().enumerate() {
        if schema.domain(a) != labels.as_slice() {
            return Err(format_err(
                0,
                format!("labels of {} must be sorted and distinct", schema.name(a)),
            ));
        }
    }

    let mut parents = Vec::with_capacity(schema.arity());
    for a in 0..schema.arity() {
        let (n, line) = lines.next().ok_or_else(|| format_err(0, "missing parents records"))?;
        let f: Vec<&str> = line.split('\t').collect();
        if f[0] != "parents" || f.len() < 2 || f[1] != schema.name(a) {
            return Err(format_err(n, format!("expected parents of {}", schema.name(a))));
        }
        parents.push(
            f[2..]
                .iter()
                .map(|p| {
                    schema
                        .index_of(p)
                        .ok_or_else(|| format_err(n, format!("unknown parent {p}")))
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    for (a, ps) in parents.iter().enumerate() {
        if ps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format_err(
                0,
                format!("parents of {} not in schema order", schema.name(a)),
            ));
        }
    }
    let structure = Structure::new(schema.clone(), parents)?;

    let mut cpts = Vec::with_capacity(schema.arity());
    for v in 0..schema.arity() {
        let (n, line) = lines.next().ok_or_else(|| format_err(0, "missing cpt records"))?;
        if line != format!("cpt\t{}", schema.name(v)) {
            return Err(format_err(n, format!("expected cpt of {}", schema.name(v))));
        }
        let ps = structure.parents(v);
        let card = schema.cardinality(v);
        let parent_cards: Vec<usize> = ps.iter().map(|&p| schema.cardinality(p)).collect();
        let rows: usize = parent_cards.iter().product();
        let mut config = vec![0usize; ps.len()];
        let mut probs = Vec::with_capacity(rows * card);
        for _ in 0..rows {
            let (n, line) = lines.next().ok_or_else(|| format_err(0, "truncated cpt"))?;
            let f: Vec<&str> = line.split('\t').collect();
            if f[0] != "row" || f.len() != 1 + ps.len() + card {
                return Err(format_err(
                    n,
                    format!("expected a row with {} labels and {card} probabilities", ps.len()),
                ));
            }
            for (i, (&p, &val)) in ps.iter().zip(&config).enumerate() {
                if f[1 + i] != schema.label(p, val as u32) {
                    return Err(format_err(n, format!("row out of order for {}", schema.name(v))));
                }
            }
            let row: Vec<f64> = f[1 + ps.len()..]
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|p| p.is_finite() && *p >= 0.0)
                        .ok_or_else(|| format_err(n, format!("bad probability {s:?}")))
                })
                .collect::<Result<_>>()?;
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(format_err(n, format!("row sums to {sum}")));
            }
            probs.extend(row);
            for i in (0..config.len()).rev() {
                config[i] += 1;
                if config[i] < parent_cards[i] {
                    break;
                }
                config[i] = 0;
            }
        }
        cpts.push(Cpt::new(card, parent_cards, probs)?);
    }
    if let Some((n, _)) = lines.next() {
        return Err(format_err(n, "unexpected trailing content"));
    }
    BayesNet::new(structure, cpts, ROW_SUM_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::fixtures::two_node;
    use crate::bayesnet::random::random_net;

    #[test]
    fn documented_example_loads() {
        let text = "bnqp-bayesnet\t1\nattribute\tA\ta\tnot_a\nattribute\tB\tb\tnot_b\n\
            parents\tA\nparents\tB\tA\ncpt\tA\nrow\t6.00000000000e-1\t4.00000000000e-1\n\
            cpt\tB\nrow\ta\t9.00000000000e-1\t1.00000000000e-1\n\
            row\tnot_a\t2.00000000000e-1\t8.00000000000e-1\n";
        assert_eq!(load(text).unwrap(), two_node());
        assert_eq!(save(&two_node()).unwrap(), text);
    }

    #[test]
    fn round_trip_is_stable() {
        for seed in 0..10 {
            let net = random_net(6, 3, 2, seed);
            let text = save(&net).unwrap();
            let back = load(&text).unwrap();
            assert_eq!(back.structure(), net.structure());
            for v in 0..net.len() {
                for (a, b) in net.cpt(v).probs().iter().zip(back.cpt(v).probs()) {
                    assert!((a - b).abs() <= 1e-11 * a.abs().max(1e-300), "{a} vs {b}");
                }
            }
            assert_eq!(save(&back).unwrap(), text);
        }
    }

    #[test]
    fn tampered_row_sum_is_rejected() {
        let text = save(&two_node()).unwrap().replace(
            "9.00000000000e-1\t1.00000000000e-1",
            "8.00000000000e-1\t1.00000000000e-1",
        );
        let err = load(&text).unwrap_err();
        assert!(matches!(err, Error::ModelFormat { line: 9, .. }), "{err}");
    }

    #[test]
    fn cyclic_file_is_rejected() {
        let text = "bnqp-bayesnet\t1\nattribute\tA\t0\t1\nattribute\tB\t0\t1\n\
            parents\tA\tB\nparents\tB\tA\n";
        assert!(matches!(load(text).unwrap_err(), Error::Cyclic(_)));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = save(&two_node()).unwrap().replacen("\t1\n", "\t2\n", 1);
        assert!(matches!(load(&text).unwrap_err(), Error::Version { .. }));
    }

    #[test]
    fn labels_with_tabs_cannot_be_saved() {
        let s = Schema::new(vec!["A".into()], vec![vec!["x\ty".into()]]).unwrap();
        let net = BayesNet::from_tables(Structure::empty(s), vec![vec![1.0]]).unwrap();
        assert!(save(&net).is_err());
    }
}
