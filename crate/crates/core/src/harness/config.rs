use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bayesnet::{ScoreKind, StructureSearchConfig};
use crate::error::{Error, Result};
use crate::inference::GibbsConfig;
use crate::rewriting::BeamConfig;
use crate::tabular::SelectionQuery;

/// Flat `key = value` settings. `#` starts a comment line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key}", i + 1)));
            }
        }
        Ok(ConfigMap { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigMap::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Parses `key` if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
            })
            .transpose()
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Errors on keys outside `known` and outside the `prefixes`.
    pub fn reject_unknown(&self, known: &[&str], prefixes: &[&str]) -> Result<()> {
        for k in self.keys() {
            if !known.contains(&k) && !prefixes.iter().any(|p| k.starts_with(p)) {
                return Err(Error::Config(format!("unknown key {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    BnAllMb,
    BnBeam,
    Afd,
    AfdAllAttributes,
    AfdHighestConfidence,
    BnExact,
    BnGibbs,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::BnAllMb,
        Method::BnBeam,
        Method::Afd,
        Method::AfdAllAttributes,
        Method::AfdHighestConfidence,
        Method::BnExact,
        Method::BnGibbs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BnAllMb => "BN-All-MB",
            Method::BnBeam => "BN-Beam",
            Method::Afd => "AFD",
            Method::AfdAllAttributes => "AFD-All-Attributes",
            Method::AfdHighestConfidence => "AFD-Highest-Confidence",
            Method::BnExact => "BN-Exact",
            Method::BnGibbs => "BN-Gibbs",
        }
    }

    pub fn rewrites(self) -> bool {
        !matches!(self, Method::BnExact | Method::BnGibbs)
    }

    pub fn imputes(self) -> bool {
        matches!(self, Method::Afd | Method::BnExact | Method::BnGibbs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

pub fn parse_score(text: &str) -> Result<ScoreKind> {
    let t = text.trim().to_ascii_lowercase();
    if t == "bic" {
        return Ok(ScoreKind::Bic);
    }
    if let Some(ess) = t.strip_prefix("bdeu") {
        let ess = ess.trim_start_matches(':');
        let ess: f64 = if ess.is_empty() {
            1.0
        } else {
            ess.parse()
                .map_err(|_| Error::Config(format!("bad equivalent sample size in {text:?}")))?
        };
        if ess > 0.0 {
            return Ok(ScoreKind::BDeu(ess));
        }
    }
    Err(Error::Config(format!(
        "unknown score {text:?}; expected bic or bdeu[:ess]"
    )))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    /// Drawn from the built-in car net, reseeded per experiment seed.
    Synthetic { rows: usize },
    Csv {
        path: PathBuf,
        null_token: String,
        /// Numeric attributes rounded to the nearest multiple.
        discretize: BTreeMap<String, i64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub train_fraction: f64,
    pub test_null_fraction: f64,
    pub queries: Vec<SelectionQuery>,
    pub methods: Vec<Method>,
    pub beam: BeamConfig,
    /// Queries issued by the non-beam rewriters.
    pub k: usize,
    pub query_limit: Option<usize>,
    pub structure: StructureSearchConfig,
    pub pseudo_count: f64,
    pub afd_max_lhs: usize,
    pub afd_min_confidence: f64,
    pub gibbs: GibbsConfig,
    pub incompleteness: Vec<f64>,
    /// Attribute sets imputed together.
    pub impute_targets: Vec<Vec<String>>,
    pub seeds: Vec<u64>,
    /// Write wall-clock timings, which differ between runs.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: Dataset::Synthetic { rows: 5000 },
            train_fraction: 0.15,
            test_null_fraction: 0.5,
            queries: Vec::new(),
            methods: Method::ALL.to_vec(),
            // a width of 10 lets the final beam fill the top-10 issue list
            beam: BeamConfig {
                beam_width: 10,
                ..BeamConfig::default()
            },
            k: 10,
            query_limit: None,
            structure: StructureSearchConfig::default(),
            pseudo_count: 1.0,
            afd_max_lhs: 2,
            afd_min_confidence: 0.0,
            gibbs: GibbsConfig::default(),
            incompleteness: (0..10).map(|i| i as f64 / 10.0).collect(),
            impute_targets: Vec::new(),
            seeds: vec![0],
            timing: false,
        }
    }
}

const KEYS: &[&str] = &[
    "dataset",
    "rows",
    "null_token",
    "train_fraction",
    "test_null_fraction",
    "queries",
    "methods",
    "alpha",
    "beam_width",
    "depth",
    "top_k_issue",
    "full_domain_fallback",
    "k",
    "query_limit",
    "max_in_degree",
    "restarts",
    "max_iterations",
    "score",
    "pseudo_count",
    "afd_max_lhs",
    "afd_min_confidence",
    "gibbs_samples",
    "gibbs_burn_in",
    "incompleteness",
    "impute_targets",
    "seed",
    "seeds",
    "timing",
];

fn list(text: &str, sep: char) -> impl Iterator<Item = &str> {
    text.split(sep).map(str::trim).filter(|s| !s.is_empty())
}

fn fraction(key: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be in [0, 1], got {v}")))
    }
}

impl ExperimentConfig {
    /// Reads an experiment from flat settings. Relative dataset paths are
    /// resolved against `base_dir`. Lists use commas; `queries` and
    /// `impute_targets` separate entries with `;`.
    pub fn from_map(map: &ConfigMap, base_dir: &Path) -> Result<Self> {
        map.reject_unknown(KEYS, &["discretize."])?;
        let d = ExperimentConfig::default();
        let dataset = match map.get("dataset").unwrap_or("synthetic") {
            "synthetic" => Dataset::Synthetic {
                rows: map.parsed_or("rows", 5000)?,
            },
            path => {
                let mut discretize = BTreeMap::new();
                for k in map.keys().filter(|k| k.starts_with("discretize.")) {
                    discretize.insert(k["discretize.".len()..].to_string(), map.parsed::<i64>(k)?.unwrap());
                }
                Dataset::Csv {
                    path: base_dir.join(path),
                    null_token: map.get("null_token").unwrap_or("").to_string(),
                    discretize,
                }
            }
        };
        let queries = match map.get("queries") {
            Some(text) => list(text, ';').map(SelectionQuery::parse).collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let methods = match map.get("methods") {
            Some(text) => {
                let set: BTreeSet<Method> = list(text, ',').map(str::parse).collect::<Result<_>>()?;
                set.into_iter().collect()
            }
            None => d.methods.clone(),
        };
        let alpha: f64 = map.parsed_or("alpha", 0.0)?;
        let beam = BeamConfig {
            beam_width: map.parsed_or("beam_width", d.beam.beam_width)?,
            depth: map.parsed_or("depth", d.beam.depth)?,
            alpha,
            top_k_issue: map.parsed_or("top_k_issue", d.beam.top_k_issue)?,
            full_domain_fallback: map.parsed_or("full_domain_fallback", false)?,
        };
        let query_limit = match map.get("query_limit") {
            None | Some("none") => None,
            Some(_) => map.parsed("query_limit")?,
        };
        let structure = StructureSearchConfig {
            max_in_degree: map.parsed_or("max_in_degree", d.structure.max_in_degree)?,
            restarts: map.parsed_or("restarts", d.structure.restarts)?,
            max_iterations: map.parsed_or("max_iterations", d.structure.max_iterations)?,
            score: map
                .get("score")
                .map(parse_score)
                .transpose()?
                .unwrap_or(d.structure.score),
            ..d.structure.clone()
        };
        let gibbs = GibbsConfig {
            samples: map.parsed_or("gibbs_samples", d.gibbs.samples)?,
            burn_in: map.parsed_or("gibbs_burn_in", d.gibbs.burn_in)?,
            ..d.gibbs
        };
        let incompleteness = match map.get("incompleteness") {
            Some(text) => list(text, ',')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad incompleteness level {v:?}")))
                        .and_then(|v| fraction("incompleteness", v))
                })
                .collect::<Result<Vec<_>>>()?,
            None => d.incompleteness.clone(),
        };
        let impute_targets = match map.get("impute_targets") {
            Some(text) => list(text, ';')
                .map(|set| list(set, ',').map(String::from).collect())
                .collect(),
            None => Vec::new(),
        };
        let seeds = match (map.get("seeds"), map.get("seed")) {
            (Some(_), Some(_)) => return Err(Error::Config("give either seed or seeds".into())),
            (Some(text), None) => list(text, ',')
                .map(|s| s.parse().map_err(|_| Error::Config(format!("bad seed {s:?}"))))
                .collect::<Result<Vec<_>>>()?,
            (None, Some(_)) => vec![map.parsed::<u64>("seed")?.unwrap()],
            (None, None) => d.seeds.clone(),
        };
        let cfg = ExperimentConfig {
            dataset,
            train_fraction: fraction("train_fraction", map.parsed_or("train_fraction", d.train_fraction)?)?,
            test_null_fraction: fraction(
                "test_null_fraction",
                map.parsed_or("test_null_fraction", d.test_null_fraction)?,
            )?,
            queries,
            methods,
            beam,
            k: map.parsed_or("k", d.k)?,
            query_limit,
            structure,
            pseudo_count: map.parsed_or("pseudo_count", d.pseudo_count)?,
            afd_max_lhs: map.parsed_or("afd_max_lhs", d.afd_max_lhs)?,
            afd_min_confidence: fraction(
                "afd_min_confidence",
                map.parsed_or("afd_min_confidence", d.afd_min_confidence)?,
            )?,
            gibbs,
            incompleteness,
            impute_targets,
            seeds,
            timing: map.parsed_or("timing", false)?,
        };
        if cfg.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        if cfg.impute_targets.iter().any(Vec::is_empty) {
            return Err(Error::Config("empty imputation target set".into()));
        }
        Ok(cfg)
    }
}
