//! Greedy coordinate search over the salience parameters, maximizing
//! recall + precision of the resolved document against its key.
//!
//! The objective is piecewise constant (scores only change when a resolution
//! decision flips), so each parameter moves by a fixed step and a move is
//! accepted only on strict improvement.

use crate::corpus::{Document, KeyPartition};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::resolver::{resolve_document, ResolverConfig, SalienceParams};
use crate::scorer::{muc_score, to_partition};

/// One tunable parameter with its search range and step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRange {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

/// The tuning request: parameters in search order plus a sweep budget.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningSpec {
    pub parameters: Vec<ParamRange>,
    pub max_sweeps: usize,
}

impl TuningSpec {
    /// Parses a key=value spec:
    ///
    /// ```text
    /// max_sweeps=10
    /// function_boost.obj=0,160,20     # lower,upper,step
    /// ```
    pub fn parse(input: &str) -> Result<TuningSpec> {
        let mut parameters = Vec::new();
        let mut max_sweeps = None;
        for (lineno, raw) in input.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, "expected `key=value`"))?;
            let key = key.trim();
            if key == "max_sweeps" {
                let n: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(lineno, "invalid max_sweeps"))?;
                max_sweeps = Some(n);
                continue;
            }
            let parts: Vec<&str> = value.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::parse(
                    lineno,
                    format!("parameter {key} expects `lower,upper,step`"),
                ));
            }
            let nums: Result<Vec<f64>> = parts
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(lineno, format!("invalid number `{s}`")))
                })
                .collect();
            let nums = nums?;
            parameters.push(ParamRange {
                name: key.to_string(),
                lower: nums[0],
                upper: nums[1],
                step: nums[2],
            });
        }
        let spec = TuningSpec {
            parameters,
            max_sweeps: max_sweeps
                .ok_or_else(|| Error::Config("tuning spec missing max_sweeps".to_string()))?,
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.parameters {
            let (lo, hi) = SalienceParams::domain(&p.name)?;
            if !(p.lower.is_finite() && p.upper.is_finite() && p.step.is_finite()) {
                return Err(Error::Config(format!("parameter {} has non-finite range", p.name)));
            }
            if p.lower > p.upper {
                return Err(Error::Config(format!(
                    "parameter {}: lower {} exceeds upper {}",
                    p.name, p.lower, p.upper
                )));
            }
            if p.step <= 0.0 {
                return Err(Error::Config(format!(
                    "parameter {}: step must be positive",
                    p.name
                )));
            }
            if p.lower < lo || p.upper > hi {
                return Err(Error::Config(format!(
                    "parameter {}: bounds [{}, {}] leave the valid domain",
                    p.name, p.lower, p.upper
                )));
            }
        }
        Ok(())
    }
}

/// One accepted move of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneStep {
    pub sweep: usize,
    pub param: String,
    pub value: f64,
    pub objective: f64,
}

/// Record of a tuning run; the accepted objectives are non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningTrace {
    pub initial_objective: f64,
    pub final_objective: f64,
    pub steps: Vec<TuneStep>,
}

impl TuningTrace {
    pub fn improvement(&self) -> f64 {
        self.final_objective - self.initial_objective
    }

    /// CSV with one row per accepted move.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,param,value,objective\n");
        for step in &self.steps {
            out.push_str(&format!(
                "{},{},{},{}\n",
                step.sweep, step.param, step.value, step.objective
            ));
        }
        out
    }
}

/// Resolves the document under `cfg` and scores it against the key;
/// returns recall + precision in [0, 2].
pub fn objective(
    doc: &Document,
    key: &KeyPartition,
    cfg: &ResolverConfig,
    lex: &Lexicon,
) -> Result<f64> {
    let resolution = resolve_document(doc, cfg, lex)?;
    let key_partition = to_partition(&key.cells(doc))?;
    let report = muc_score(&key_partition, &resolution.response);
    Ok(report.recall + report.precision)
}

/// Coordinate search: per sweep, each parameter tries current ± step (clamped
/// to its bounds) and keeps the best strict improvement; ties keep the
/// current value. Stops after `max_sweeps` or a sweep without improvement.
pub fn tune_params(
    doc: &Document,
    key: &KeyPartition,
    cfg: &ResolverConfig,
    lex: &Lexicon,
    spec: &TuningSpec,
) -> Result<(SalienceParams, TuningTrace)> {
    spec.validate()?;
    for p in &spec.parameters {
        // Fails fast on names the salience table does not know.
        cfg.salience.get(&p.name)?;
    }

    let mut params = cfg.salience.clone();
    let evaluate = |params: &SalienceParams| -> Result<f64> {
        let run_cfg = ResolverConfig {
            salience: params.clone(),
            ..cfg.clone()
        };
        objective(doc, key, &run_cfg, lex)
    };

    let initial_objective = evaluate(&params)?;
    let mut best = initial_objective;
    let mut steps = Vec::new();

    for sweep in 1..=spec.max_sweeps {
        let mut improved = false;
        for range in &spec.parameters {
            let current = params.get(&range.name)?;
            let mut accepted: Option<(f64, f64)> = None;
            for candidate in [current - range.step, current + range.step] {
                let value = candidate.clamp(range.lower, range.upper);
                if value == current {
                    continue;
                }
                let mut trial = params.clone();
                trial.set(&range.name, value)?;
                let score = evaluate(&trial)?;
                let beats_accepted = accepted.map_or(true, |(_, s)| score > s);
                if score > best && beats_accepted {
                    accepted = Some((value, score));
                }
            }
            if let Some((value, score)) = accepted {
                params.set(&range.name, value)?;
                best = score;
                improved = true;
                steps.push(TuneStep {
                    sweep,
                    param: range.name.clone(),
                    value,
                    objective: score,
                });
            }
        }
        if !improved {
            break;
        }
    }

    let trace = TuningTrace {
        initial_objective,
        final_objective: best,
        steps,
    };
    Ok((params, trace))
}
