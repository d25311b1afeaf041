//! A hand-built six-attribute car net used as a stand-in dataset.

use crate::bayesnet::{BayesNet, Structure};
use crate::tabular::{Schema, Table};

struct ModelInfo {
    name: &'static str,
    make: &'static str,
    share: f64,
    typical_year: f64,
    /// Weights over Convt, Coupe, Sedan, SUV.
    bodies: [f64; 4],
    /// Price bucket of a low-mileage car.
    price: f64,
    /// Relative yearly mileage.
    usage: f64,
}

const MODELS: [ModelInfo; 9] = [
    ModelInfo {
        name: "A4",
        make: "Audi",
        share: 0.12,
        typical_year: 2003.0,
        bodies: [0.2, 0.1, 0.7, 0.0],
        price: 2.0,
        usage: 1.0,
    },
    ModelInfo {
        name: "A8",
        make: "Audi",
        share: 0.06,
        typical_year: 2004.0,
        bodies: [0.0, 0.05, 0.95, 0.0],
        price: 4.0,
        usage: 0.8,
    },
    ModelInfo {
        name: "645",
        make: "BMW",
        share: 0.05,
        typical_year: 2004.0,
        bodies: [0.4, 0.6, 0.0, 0.0],
        price: 4.0,
        usage: 0.7,
    },
    ModelInfo {
        name: "745",
        make: "BMW",
        share: 0.06,
        typical_year: 2003.0,
        bodies: [0.0, 0.0, 1.0, 0.0],
        price: 4.0,
        usage: 0.8,
    },
    ModelInfo {
        name: "X5",
        make: "BMW",
        share: 0.08,
        typical_year: 2003.0,
        bodies: [0.0, 0.0, 0.0, 1.0],
        price: 3.0,
        usage: 1.0,
    },
    ModelInfo {
        name: "Accord",
        make: "Honda",
        share: 0.16,
        typical_year: 2002.0,
        bodies: [0.0, 0.2, 0.8, 0.0],
        price: 1.0,
        usage: 1.1,
    },
    ModelInfo {
        name: "Civic",
        make: "Honda",
        share: 0.20,
        typical_year: 2001.0,
        bodies: [0.0, 0.4, 0.6, 0.0],
        price: 0.0,
        usage: 1.2,
    },
    ModelInfo {
        name: "Camry",
        make: "Toyota",
        share: 0.17,
        typical_year: 2002.0,
        bodies: [0.0, 0.15, 0.85, 0.0],
        price: 1.0,
        usage: 1.1,
    },
    ModelInfo {
        name: "RAV4",
        make: "Toyota",
        share: 0.10,
        typical_year: 2003.0,
        bodies: [0.0, 0.0, 0.0, 1.0],
        price: 1.0,
        usage: 1.0,
    },
];

const YEARS: [&str; 6] = ["2000", "2001", "2002", "2003", "2004", "2005"];
const BODIES: [&str; 4] = ["Convt", "Coupe", "Sedan", "SUV"];
const MAKES: [&str; 4] = ["Audi", "BMW", "Honda", "Toyota"];
const MILEAGES: [&str; 5] = ["10000", "30000", "50000", "70000", "90000"];
const PRICES: [&str; 5] = ["10000", "20000", "30000", "40000", "50000"];

fn bump(i: usize, center: f64, width: f64) -> f64 {
    let d = i as f64 - center;
    (-d * d / (2.0 * width * width)).exp() + 0.01
}

fn info(model: &str) -> &'static ModelInfo {
    MODELS.iter().find(|m| m.name == model).expect("known model")
}

fn labels(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Fills the table of `v`, one row per parent configuration in schema-domain
/// order, from unnormalized weights keyed by labels.
fn table(schema: &Schema, structure: &Structure, v: usize, weight: impl Fn(&[&str], &str) -> f64) -> Vec<f64> {
    let parents = structure.parents(v);
    let rows: usize = parents.iter().map(|&p| schema.cardinality(p)).product();
    let mut out = Vec::with_capacity(rows * schema.cardinality(v));
    for row in 0..rows {
        let mut rest = row;
        let mut parent_labels = vec![""; parents.len()];
        for (slot, &p) in parents.iter().enumerate().rev() {
            let card = schema.cardinality(p);
            parent_labels[slot] = schema.label(p, (rest % card) as u32);
            rest /= card;
        }
        let w: Vec<f64> = schema.domain(v).iter().map(|l| weight(&parent_labels, l)).collect();
        let z: f64 = w.iter().sum();
        out.extend(w.iter().map(|x| x / z));
    }
    out
}

/// Model is the root; Make and Year depend on Model, Body on Model and Year,
/// Mileage on Model and Year, Price on Model and Mileage.
pub fn cars_net() -> BayesNet {
    let schema = Schema::new(
        labels(&["Model", "Year", "Body", "Make", "Price", "Mileage"]),
        vec![
            MODELS.iter().map(|m| m.name.to_string()).collect(),
            labels(&YEARS),
            labels(&BODIES),
            labels(&MAKES),
            labels(&PRICES),
            labels(&MILEAGES),
        ],
    )
    .expect("valid schema");
    let structure = Structure::from_edges(
        schema.clone(),
        &[
            ("Model", "Year"),
            ("Model", "Body"),
            ("Year", "Body"),
            ("Model", "Make"),
            ("Model", "Price"),
            ("Mileage", "Price"),
            ("Model", "Mileage"),
            ("Year", "Mileage"),
        ],
    )
    .expect("acyclic");
    let year_of = |l: &str| l.parse::<f64>().expect("numeric year");
    let idx = |list: &[&str], l: &str| list.iter().position(|x| *x == l).expect("known label");
    let tables = vec![
        table(&schema, &structure, 0, |_, m| info(m).share),
        table(&schema, &structure, 1, |p, y| {
            let d = (year_of(y) - info(p[0]).typical_year).abs();
            (-d / 1.2).exp()
        }),
        table(&schema, &structure, 2, |p, b| {
            let i = idx(&BODIES, b);
            let mut w = info(p[0]).bodies[i];
            let year = year_of(p[1]);
            if b == "Coupe" && year >= 2003.0 {
                w *= 1.5;
            }
            if b == "Convt" && year <= 2001.0 {
                w *= 0.5;
            }
            w + 0.02
        }),
        table(&schema, &structure, 3, |p, make| {
            if info(p[0]).make == make {
                0.96
            } else {
                0.04 / 3.0
            }
        }),
        table(&schema, &structure, 4, |p, price| {
            let mileage = idx(&MILEAGES, p[1]) as f64;
            bump(idx(&PRICES, price), info(p[0]).price - 0.5 * mileage, 0.6)
        }),
        table(&schema, &structure, 5, |p, mileage| {
            let age = 2006.0 - year_of(p[1]);
            let expected = age * 12_000.0 * info(p[0]).usage;
            bump(idx(&MILEAGES, mileage), (expected - 10_000.0) / 20_000.0, 0.7)
        }),
    ];
    BayesNet::from_tables(structure, tables).expect("normalized tables")
}

/// `rows` complete tuples drawn from [`cars_net`].
pub fn cars_table(rows: usize, seed: u64) -> Table {
    cars_net().sample_table(rows, seed)
}
