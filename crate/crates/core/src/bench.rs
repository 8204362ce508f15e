//! Runtime comparison of the engines on a template model whose domain size
//! is a parameter.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ground::ground;
use crate::intervention::lci_query;
use crate::io::{parse_model_with, parse_query, ParseOptions};
use crate::query::Distribution;
use crate::ve::{to_bayes_net, ve_query_with, VeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Engine {
    /// Variable elimination on the grounded factor graph.
    VeFg,
    /// Variable elimination on the Bayesian network converted from the
    /// grounding, with barren variables pruned.
    VeBn,
    /// Lifted causal inference on the parametric model.
    LvePcfg,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::VeFg, Engine::VeBn, Engine::LvePcfg];

    pub fn name(self) -> &'static str {
        match self {
            Engine::VeFg => "ve_fg",
            Engine::VeBn => "ve_bn",
            Engine::LvePcfg => "lve_pcfg",
        }
    }

    pub fn is_ground(self) -> bool {
        self != Engine::LvePcfg
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown engine `{s}` (expected ve_fg, ve_bn or lve_pcfg)"))
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub queries: Vec<String>,
    pub engines: Vec<Engine>,
    pub repeats: usize,
    /// Ground engines are skipped for sizes above this.
    pub ground_cutoff: usize,
    /// Name of the template parameter that receives the size.
    pub param: String,
    /// Results of different engines must agree within this tolerance.
    pub tolerance: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: (3..=12).map(|k| 1usize << k).collect(),
            queries: vec![crate::fixtures::SCALING_QUERY.to_string()],
            engines: Engine::ALL.to_vec(),
            repeats: 3,
            ground_cutoff: 256,
            param: "d".into(),
            tolerance: 1e-9,
        }
    }
}

/// One CSV row. `seconds` and `checksum` are `None` for skipped runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub engine: Engine,
    pub d: usize,
    pub query: String,
    pub seconds: Option<f64>,
    pub checksum: Option<String>,
}

#[derive(Serialize)]
struct Row<'a> {
    engine: &'a str,
    d: usize,
    query: &'a str,
    seconds: String,
    checksum: &'a str,
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    /// Human-readable descriptions of cross-engine disagreements.
    pub mismatches: Vec<String>,
}

impl BenchOutcome {
    pub fn seconds(&self, engine: Engine, d: usize) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.engine == engine && r.d == d)
            .and_then(|r| r.seconds)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            let seconds = r.seconds.map_or_else(|| "skipped".to_string(), |s| format!("{s:.9}"));
            out.serialize(Row {
                engine: r.engine.name(),
                d: r.d,
                query: &r.query,
                seconds,
                checksum: r.checksum.as_deref().unwrap_or("skipped"),
            })
            .map_err(|e| Error::Bench(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Bench(e.to_string()))
    }
}

/// Digest of the probabilities rounded to 8 decimals, in table order.
pub fn checksum(d: &Distribution) -> String {
    let text: Vec<String> = d.probs.iter().map(|p| format!("{p:.8}")).collect();
    hex::encode(Sha256::digest(text.join(",").as_bytes()))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn run_once(engine: Engine, model: &crate::model::Model, query: &crate::query::Query) -> Result<(f64, Distribution)> {
    let start = Instant::now();
    let dist = match engine {
        Engine::LvePcfg => lci_query(model, query)?,
        Engine::VeFg => {
            let fg = ground(model)?;
            let gq = query.to_ground(model, &fg)?;
            ve_query_with(&fg, &gq, VeOptions::default())?
        }
        Engine::VeBn => {
            let fg = ground(model)?;
            let gq = query.to_ground(model, &fg)?;
            let bn = to_bayes_net(&fg)?;
            let opts = VeOptions {
                prune_barren: true,
                ..Default::default()
            };
            ve_query_with(&bn, &gq, opts)?
        }
    };
    Ok((start.elapsed().as_secs_f64(), dist))
}

/// Instantiates `template` for every size and runs every engine on every
/// query. Parsing is not timed; grounding is part of the ground engines'
/// time. Engines run sequentially.
pub fn run_bench(template: &str, cfg: &BenchConfig) -> Result<BenchOutcome> {
    let mut out = BenchOutcome::default();
    let repeats = cfg.repeats.max(1);
    for &d in &cfg.sizes {
        let opts = ParseOptions::default().with_param(&cfg.param, d as i64);
        let model = parse_model_with(template, &opts)?;
        for qtext in &cfg.queries {
            let query = parse_query(&model, qtext)?;
            let mut reference: Option<(Engine, Distribution)> = None;
            for &engine in &cfg.engines {
                if engine.is_ground() && d > cfg.ground_cutoff {
                    out.records.push(BenchRecord {
                        engine,
                        d,
                        query: qtext.clone(),
                        seconds: None,
                        checksum: None,
                    });
                    continue;
                }
                let mut times = Vec::with_capacity(repeats);
                let mut dist = None;
                for _ in 0..repeats {
                    let (t, r) = run_once(engine, &model, &query)?;
                    times.push(t);
                    dist = Some(r);
                }
                let dist = dist.expect("at least one repeat");
                match &reference {
                    None => reference = Some((engine, dist.clone())),
                    Some((e0, d0)) => {
                        let diff = dist.max_abs_diff(d0);
                        if !(diff <= cfg.tolerance) || checksum(&dist) != checksum(d0) {
                            out.mismatches.push(format!(
                                "d={d}, {qtext}: {engine} differs from {e0} by {diff:e}"
                            ));
                        }
                    }
                }
                out.records.push(BenchRecord {
                    engine,
                    d,
                    query: qtext.clone(),
                    seconds: Some(median(times)),
                    checksum: Some(checksum(&dist)),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::SCALING_TEMPLATE;

    fn small() -> BenchConfig {
        BenchConfig {
            sizes: vec![8, 16],
            repeats: 1,
            ground_cutoff: 8,
            ..Default::default()
        }
    }

    #[test]
    fn engines_agree_and_skip_above_cutoff() {
        let out = run_bench(SCALING_TEMPLATE, &small()).unwrap();
        assert!(out.mismatches.is_empty(), "{:?}", out.mismatches);
        assert_eq!(out.records.len(), 6);
        let d8: Vec<_> = out.records.iter().filter(|r| r.d == 8).collect();
        assert!(d8.iter().all(|r| r.checksum == d8[0].checksum && r.seconds.is_some()));
        let skipped = out.records.iter().filter(|r| r.seconds.is_none()).count();
        assert_eq!(skipped, 2);
        assert!(out.seconds(Engine::LvePcfg, 16).is_some());
    }

    #[test]
    fn csv_layout() {
        let out = run_bench(SCALING_TEMPLATE, &small()).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("engine,d,query,seconds,checksum"));
        assert!(text.contains("ve_fg,16,\"P(Comp(e1) | do(Train(e1,t1)=true))\",skipped,skipped"));
    }

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL {
            assert_eq!(e.name().parse::<Engine>().unwrap(), e);
        }
        assert!("lve".parse::<Engine>().is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
