//! Flat `key = value` files for parameters and experiment configurations,
//! and the CSV layout of risk reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::{HedgeConfig, Portfolio, RiskReport};
use crate::model::{MarketParams, ModelParams};

/// Parsed `key = value` lines in file order. `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("empty key or value in `{content}`"),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            entries.push((key.to_string(), value.to_string(), line));
        }
        Ok(KeyValues { entries })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, usize)> {
        self.entries
            .iter()
            .map(|(k, v, l)| (k.as_str(), v.as_str(), *l))
    }

    fn find(&self, key: &str) -> Option<(&str, usize)> {
        self.iter()
            .find(|(k, _, _)| *k == key)
            .map(|(_, v, l)| (v, l))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.find(key) {
            None => Ok(None),
            Some((v, line)) => parse_value(v, key, line).map(Some),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing required key `{key}`"),
        })
    }

    /// Comma-separated list; a single value is a one-element list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.find(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|item| parse_value(item.trim(), key, line))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

fn parse_value<T: FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{value}` for `{key}`"),
    })
}

const MODEL_KEYS: [&str; 8] = [
    "sigma1", "sigma", "gamma", "rho", "alpha1", "alpha", "beta", "y1",
];
const MARKET_KEYS: [&str; 4] = ["r", "lambda", "delta", "omega"];

/// Model and market parameters. Market keys are optional and default to
/// [`MarketParams::default`]; `sse_*` diagnostic keys are ignored.
pub fn parse_params(text: &str) -> Result<(ModelParams, MarketParams)> {
    let kv = KeyValues::parse(text)?;
    let mut y2_by_age = BTreeMap::new();
    for (key, value, line) in kv.iter() {
        if let Some(age) = key.strip_prefix("y2_") {
            let age: u32 = parse_value(age, key, line)?;
            y2_by_age.insert(age, parse_value(value, key, line)?);
        } else if !(MODEL_KEYS.contains(&key)
            || MARKET_KEYS.contains(&key)
            || key.starts_with("sse_"))
        {
            return Err(Error::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
    }
    if y2_by_age.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no `y2_<age>` entry".into(),
        });
    }
    let params = ModelParams {
        sigma1: kv.require("sigma1")?,
        sigma: kv.require("sigma")?,
        gamma: kv.require("gamma")?,
        rho: kv.require("rho")?,
        alpha1: kv.require("alpha1")?,
        alpha: kv.require("alpha")?,
        beta: kv.require("beta")?,
        y1: kv.require("y1")?,
        y2_by_age,
    };
    let d = MarketParams::default();
    let market = MarketParams {
        r: kv.get("r")?.unwrap_or(d.r),
        lambda: kv.get("lambda")?.unwrap_or(d.lambda),
        delta: kv.get("delta")?.unwrap_or(d.delta),
        omega: kv.get("omega")?.unwrap_or(d.omega),
    };
    market.validate()?;
    params.validate(market.omega)?;
    Ok((params, market))
}

/// Inverse of [`parse_params`]; `diagnostics` are written as `sse_<name>`.
pub fn format_params(
    params: &ModelParams,
    market: &MarketParams,
    diagnostics: &[(&str, f64)],
) -> String {
    let mut out = String::new();
    let model = [
        ("sigma1", params.sigma1),
        ("sigma", params.sigma),
        ("gamma", params.gamma),
        ("rho", params.rho),
        ("alpha1", params.alpha1),
        ("alpha", params.alpha),
        ("beta", params.beta),
        ("y1", params.y1),
    ];
    for (k, v) in model {
        writeln!(out, "{k} = {v:e}").unwrap();
    }
    for (age, v) in &params.y2_by_age {
        writeln!(out, "y2_{age} = {v:e}").unwrap();
    }
    for (k, v) in [
        ("r", market.r),
        ("lambda", market.lambda),
        ("delta", market.delta),
        ("omega", market.omega),
    ] {
        writeln!(out, "{k} = {v}").unwrap();
    }
    for (k, v) in diagnostics {
        writeln!(out, "sse_{k} = {v:e}").unwrap();
    }
    out
}

/// A hedge experiment file: one base configuration and the grid of
/// `lambda`, `T_hat` and `n` values to run it over.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeFile {
    pub base: HedgeConfig,
    pub lambdas: Vec<f64>,
    pub t_hats: Vec<u32>,
    pub ns: Vec<u32>,
    /// Parameters file, relative to the configuration file.
    pub params: Option<PathBuf>,
}

const HEDGE_KEYS: [&str; 9] = [
    "x", "n", "lambda", "T_hat", "num_sims", "q", "seed", "dt", "params",
];

impl HedgeFile {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        if let Some((key, _, line)) = kv.iter().find(|(k, _, _)| !HEDGE_KEYS.contains(k)) {
            return Err(Error::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        let d = HedgeConfig::base_case();
        let lambdas = kv.get_list("lambda")?.unwrap_or(vec![d.lambda]);
        let t_hats = kv.get_list("T_hat")?.unwrap_or(vec![d.t_hat]);
        let ns = kv.get_list("n")?.unwrap_or(vec![d.n]);
        let base = HedgeConfig {
            x: kv.get("x")?.unwrap_or(d.x),
            n: ns[0],
            lambda: lambdas[0],
            t_hat: t_hats[0],
            num_sims: kv.get("num_sims")?.unwrap_or(d.num_sims),
            q: kv.get("q")?.unwrap_or(d.q),
            seed: kv.get("seed")?.unwrap_or(d.seed),
            dt: kv.get("dt")?.unwrap_or(d.dt),
        };
        Ok(HedgeFile {
            base,
            lambdas,
            t_hats,
            ns,
            params: kv.get::<String>("params")?.map(PathBuf::from),
        })
    }

    /// Every combination, `lambda` slowest and `n` fastest.
    pub fn scenarios(&self) -> Vec<HedgeConfig> {
        let mut out = Vec::new();
        for &lambda in &self.lambdas {
            for &t_hat in &self.t_hats {
                for &n in &self.ns {
                    out.push(HedgeConfig {
                        lambda,
                        t_hat,
                        n,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

/// One line of a risk report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub portfolio: Portfolio,
    pub lambda: f64,
    pub t_hat: u32,
    pub n: u32,
    pub report: RiskReport,
}

pub const REPORT_HEADER: &str = "portfolio,lambda,T_hat,n,mean,std,skew,var99,es99";

pub fn format_report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.portfolio.name(),
            row.lambda,
            row.t_hat,
            row.n,
            r.mean,
            r.std_dev,
            r.skewness,
            r.var_q,
            r.es_q
        )
        .unwrap();
    }
    out
}
