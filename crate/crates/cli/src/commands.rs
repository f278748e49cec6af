//! The experiment commands. Every command is deterministic: identical inputs
//! produce byte-identical files and stdout, and each run drops a manifest
//! recording inputs, configuration snapshot and outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::json;

use referent_core::corpus::{corpus_stats, parse_document, Document, KeyPartition};
use referent_core::lexicon::{load_lexicon, Lexicon};
use referent_core::resolver::{
    resolve_document, write_trace, Heuristic, ResolverConfig, SalienceParams,
};
use referent_core::scorer::{muc_score, parse_partition, report_csv, to_partition, write_partition};
use referent_core::tuner::{objective, tune_params, TuningSpec};

use crate::config::{layered_config, render_config, Overrides};

/// Failures split by exit code: input problems exit 2, run failures exit 1.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Input(e) | Failure::Run(e) => format!("{e:#}"),
        }
    }
}

type CmdResult<T> = Result<T, Failure>;

fn input_err<T>(e: anyhow::Error) -> CmdResult<T> {
    Err(Failure::Input(e))
}

fn read_file(path: &Path) -> CmdResult<String> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) => input_err(anyhow!("cannot read {}: {e}", path.display())),
    }
}

fn load_corpus(path: &Path) -> CmdResult<(Document, KeyPartition)> {
    let text = read_file(path)?;
    parse_document(&text)
        .map_err(|e| Failure::Input(anyhow!("{}: {e}", path.display())))
}

fn load_lexicon_file(path: &Path) -> CmdResult<Lexicon> {
    let text = read_file(path)?;
    load_lexicon(&text).map_err(|e| Failure::Input(anyhow!("{}: {e}", path.display())))
}

fn load_config(
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> CmdResult<(ResolverConfig, Option<String>)> {
    let text = match config_path {
        Some(path) => Some(read_file(path)?),
        None => None,
    };
    let cfg = layered_config(text.as_deref(), overrides).map_err(Failure::Input)?;
    Ok((cfg, text))
}

/// Collects output files and writes them plus the manifest under `--out`.
struct RunOutputs<'a> {
    command: &'a str,
    inputs: Vec<(&'a str, String)>,
    config: Option<&'a ResolverConfig>,
    files: Vec<(String, String)>,
}

impl<'a> RunOutputs<'a> {
    fn new(command: &'a str) -> Self {
        RunOutputs {
            command,
            inputs: Vec::new(),
            config: None,
            files: Vec::new(),
        }
    }

    fn input(&mut self, name: &'a str, path: &Path) {
        self.inputs.push((name, path.display().to_string()));
    }

    fn config(&mut self, cfg: &'a ResolverConfig) {
        self.config = Some(cfg);
    }

    fn file(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    fn manifest(&self) -> String {
        let inputs: serde_json::Map<String, serde_json::Value> = self
            .inputs
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        let config = self.config.map(|cfg| {
            let salience: serde_json::Map<String, serde_json::Value> =
                SalienceParams::parameter_names()
                    .into_iter()
                    .map(|name| {
                        let value = cfg.salience.get(&name).expect("canonical names");
                        (name, json!(value))
                    })
                    .collect();
            json!({
                "heuristic": cfg.heuristic.to_string(),
                "quota": cfg.quota,
                "indefinite_creates_new": cfg.indefinite_creates_new,
                "salience": salience,
            })
        });
        let outputs: Vec<&str> = self.files.iter().map(|(name, _)| name.as_str()).collect();
        let manifest = json!({
            "command": self.command,
            "inputs": inputs,
            "config": config,
            "outputs": outputs,
            "version": env!("CARGO_PKG_VERSION"),
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        text
    }

    /// Writes every file plus `manifest.json`; no-op without an out dir.
    fn write(mut self, out: Option<&Path>) -> CmdResult<()> {
        let Some(dir) = out else { return Ok(()) };
        if let Err(e) = fs::create_dir_all(dir) {
            return input_err(anyhow!("cannot create {}: {e}", dir.display()));
        }
        let manifest = self.manifest();
        self.files.push(("manifest.json".to_string(), manifest));
        for (name, content) in &self.files {
            let path: PathBuf = dir.join(name);
            fs::write(&path, content)
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(Failure::Run)?;
        }
        Ok(())
    }
}

pub fn cmd_resolve(
    corpus: &Path,
    lexicon: &Path,
    config: Option<&Path>,
    overrides: &Overrides,
    out: &Path,
) -> CmdResult<()> {
    let (doc, _) = load_corpus(corpus)?;
    let lex = load_lexicon_file(lexicon)?;
    let (cfg, _) = load_config(config, overrides)?;
    let resolution = resolve_document(&doc, &cfg, &lex)
        .map_err(|e| Failure::Run(anyhow!(e)))?;

    let mut run = RunOutputs::new("resolve");
    run.input("corpus", corpus);
    run.input("lexicon", lexicon);
    if let Some(path) = config {
        run.input("config", path);
    }
    run.config(&cfg);
    run.file("response.key", write_partition(&resolution.labeled_cells()));
    run.file("trace.log", write_trace(&resolution.trace));
    run.write(Some(out))?;

    println!(
        "resolved {} REs into {} MRs ({} active, {} archived)",
        doc.res.len(),
        resolution.store.len(),
        resolution.store.memory().active().len(),
        resolution.store.memory().archive().len(),
    );
    Ok(())
}

pub fn cmd_score(corpus: &Path, response: &Path, out: Option<&Path>) -> CmdResult<()> {
    let (doc, key) = load_corpus(corpus)?;
    let response_text = read_file(response)?;
    let cells = parse_partition(&response_text)
        .map_err(|e| Failure::Input(anyhow!("{}: {e}", response.display())))?;
    let response_partition =
        to_partition(&cells).map_err(|e| Failure::Input(anyhow!("{}: {e}", response.display())))?;
    let key_partition = to_partition(&key.cells(&doc)).map_err(|e| Failure::Run(anyhow!(e)))?;
    let report = muc_score(&key_partition, &response_partition);

    let label = response
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "response".to_string());
    let csv = report_csv(&[(label, report)]).map_err(|e| Failure::Run(anyhow!(e)))?;

    let mut run = RunOutputs::new("score");
    run.input("corpus", corpus);
    run.input("response", response);
    run.file("score.csv", csv.clone());
    run.write(out)?;
    print!("{csv}");
    Ok(())
}

pub fn cmd_compare_heuristics(
    corpus: &Path,
    lexicon: &Path,
    config: Option<&Path>,
    overrides: &Overrides,
    h4: &[f64],
    out: Option<&Path>,
) -> CmdResult<()> {
    let (doc, key) = load_corpus(corpus)?;
    let lex = load_lexicon_file(lexicon)?;
    let (base_cfg, _) = load_config(config, overrides)?;
    let key_partition = to_partition(&key.cells(&doc)).map_err(|e| Failure::Run(anyhow!(e)))?;

    let mut heuristics = vec![
        Heuristic::FirstCompatible,
        Heuristic::AllCompatible,
        Heuristic::AnyCompatible,
    ];
    for &percent in h4 {
        let h = Heuristic::RatioCompatible { percent };
        h.validate().map_err(|e| Failure::Input(anyhow!(e)))?;
        heuristics.push(h);
    }

    let mut rows = Vec::new();
    for heuristic in heuristics {
        let cfg = ResolverConfig {
            heuristic,
            ..base_cfg.clone()
        };
        let resolution = resolve_document(&doc, &cfg, &lex)
            .map_err(|e| Failure::Run(anyhow!(e)))?;
        let report = muc_score(&key_partition, &resolution.response);
        rows.push((heuristic.to_string(), report));
    }
    let csv = report_csv(&rows).map_err(|e| Failure::Run(anyhow!(e)))?;

    let mut run = RunOutputs::new("compare-heuristics");
    run.input("corpus", corpus);
    run.input("lexicon", lexicon);
    if let Some(path) = config {
        run.input("config", path);
    }
    run.config(&base_cfg);
    run.file("heuristics.csv", csv.clone());
    run.write(out)?;
    print!("{csv}");
    Ok(())
}

pub fn cmd_sweep_memory(
    corpus: &Path,
    lexicon: &Path,
    config: Option<&Path>,
    overrides: &Overrides,
    quotas: &[usize],
    out: Option<&Path>,
) -> CmdResult<()> {
    if quotas.iter().any(|&q| q < 1) {
        return input_err(anyhow!("quotas must be at least 1"));
    }
    let (doc, key) = load_corpus(corpus)?;
    let lex = load_lexicon_file(lexicon)?;
    let (base_cfg, _) = load_config(config, overrides)?;
    let key_partition = to_partition(&key.cells(&doc)).map_err(|e| Failure::Run(anyhow!(e)))?;

    let mut rows = Vec::new();
    for &quota in quotas {
        let cfg = ResolverConfig {
            quota,
            ..base_cfg.clone()
        };
        let resolution = resolve_document(&doc, &cfg, &lex)
            .map_err(|e| Failure::Run(anyhow!(e)))?;
        let report = muc_score(&key_partition, &resolution.response);
        rows.push((quota.to_string(), report));
    }
    let csv = report_csv(&rows).map_err(|e| Failure::Run(anyhow!(e)))?;

    let mut run = RunOutputs::new("sweep-memory");
    run.input("corpus", corpus);
    run.input("lexicon", lexicon);
    if let Some(path) = config {
        run.input("config", path);
    }
    run.config(&base_cfg);
    run.file("sweep.csv", csv.clone());
    run.write(out)?;
    print!("{csv}");
    Ok(())
}

pub fn cmd_stats(corpus: &Path, out: Option<&Path>) -> CmdResult<()> {
    let (doc, key) = load_corpus(corpus)?;
    let stats = corpus_stats(&doc, &key).map_err(|e| Failure::Run(anyhow!(e)))?;

    let ratio = match stats.re_per_mr {
        Some(r) => format!("{r:.2}"),
        None => "-".to_string(),
    };
    let mut csv = String::from("metric,value\n");
    csv.push_str(&format!("words,{}\n", stats.words));
    csv.push_str(&format!("res,{}\n", stats.res));
    csv.push_str(&format!("mrs_key,{}\n", stats.mrs_key));
    csv.push_str(&format!("re_per_mr,{ratio}\n"));
    csv.push_str(&format!("nominal_res,{}\n", stats.nominal_res));
    csv.push_str(&format!("pronoun_res,{}\n", stats.pronoun_res));
    csv.push_str(&format!("unparsed_res,{}\n", stats.unparsed_res));

    let mut run = RunOutputs::new("stats");
    run.input("corpus", corpus);
    run.file("stats.csv", csv.clone());
    run.write(out)?;
    print!("{csv}");
    Ok(())
}

pub fn cmd_tune(
    corpus: &Path,
    lexicon: &Path,
    config: Option<&Path>,
    overrides: &Overrides,
    spec: &Path,
    out: &Path,
) -> CmdResult<()> {
    let (doc, key) = load_corpus(corpus)?;
    let lex = load_lexicon_file(lexicon)?;
    let (cfg, _) = load_config(config, overrides)?;
    let spec_text = read_file(spec)?;
    let tuning_spec = TuningSpec::parse(&spec_text)
        .and_then(|s| s.validate().map(|_| s))
        .map_err(|e| Failure::Input(anyhow!("{}: {e}", spec.display())))?;

    let (tuned, trace) = tune_params(&doc, &key, &cfg, &lex, &tuning_spec)
        .map_err(|e| Failure::Run(anyhow!(e)))?;
    let tuned_cfg = ResolverConfig {
        salience: tuned,
        ..cfg.clone()
    };
    // Consistency: the tuned configuration must reproduce the final objective.
    let check = objective(&doc, &key, &tuned_cfg, &lex).map_err(|e| Failure::Run(anyhow!(e)))?;
    if check != trace.final_objective {
        return Err(Failure::Run(anyhow!(
            "tuned configuration re-evaluates to {check}, trace says {}",
            trace.final_objective
        )));
    }

    let mut run = RunOutputs::new("tune");
    run.input("corpus", corpus);
    run.input("lexicon", lexicon);
    if let Some(path) = config {
        run.input("config", path);
    }
    run.input("spec", spec);
    run.config(&tuned_cfg);
    run.file("tuned.config", render_config(&tuned_cfg));
    run.file("tune_trace.csv", trace.to_csv());
    run.write(Some(out))?;

    println!("initial objective: {}", trace.initial_objective);
    println!("final objective:   {}", trace.final_objective);
    println!("improvement:       {}", trace.improvement());
    Ok(())
}

/// Parses a quota list: comma-separated items, each a number or `a-b` range.
pub fn parse_quotas(text: &str) -> Result<Vec<usize>, Failure> {
    let mut quotas = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        if let Some((a, b)) = item.split_once('-') {
            let start: usize = a
                .trim()
                .parse()
                .map_err(|_| Failure::Input(anyhow!("invalid quota `{item}`")))?;
            let end: usize = b
                .trim()
                .parse()
                .map_err(|_| Failure::Input(anyhow!("invalid quota `{item}`")))?;
            if start > end {
                return input_err(anyhow!("quota range `{item}` is reversed"));
            }
            quotas.extend(start..=end);
        } else {
            quotas.push(
                item.parse()
                    .map_err(|_| Failure::Input(anyhow!("invalid quota `{item}`")))?,
            );
        }
    }
    if quotas.is_empty() {
        return input_err(anyhow!("no quotas given"));
    }
    Ok(quotas)
}
