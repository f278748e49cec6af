//! Layered run configuration: built-in defaults, overridden by a key=value
//! file, overridden by command-line flags.

use anyhow::{anyhow, Context, Result};
use referent_core::resolver::{Heuristic, ResolverConfig, SalienceParams};

/// Applies a config file on top of the defaults.
pub fn parse_config(text: &str) -> Result<ResolverConfig> {
    let mut cfg = ResolverConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {lineno}: expected `key=value`"))?;
        apply_key(&mut cfg, key.trim(), value.trim())
            .with_context(|| format!("config line {lineno}"))?;
    }
    cfg.validate().map_err(|e| anyhow!(e))?;
    Ok(cfg)
}

fn apply_key(cfg: &mut ResolverConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "heuristic" => cfg.heuristic = value.parse().map_err(|e| anyhow!("{e}"))?,
        "quota" => cfg.quota = value.parse().context("invalid quota")?,
        "indefinite_creates_new" => {
            cfg.indefinite_creates_new = value.parse().context("invalid boolean")?
        }
        _ => {
            let number: f64 = value.parse().with_context(|| format!("invalid value for {key}"))?;
            cfg.salience.set(key, number).map_err(|e| anyhow!(e))?;
        }
    }
    Ok(())
}

/// Renders a full configuration snapshot; the output parses back with
/// [`parse_config`].
pub fn render_config(cfg: &ResolverConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("heuristic={}\n", cfg.heuristic));
    out.push_str(&format!("quota={}\n", cfg.quota));
    out.push_str(&format!(
        "indefinite_creates_new={}\n",
        cfg.indefinite_creates_new
    ));
    for name in SalienceParams::parameter_names() {
        let value = cfg.salience.get(&name).expect("canonical names are valid");
        out.push_str(&format!("{name}={value}\n"));
    }
    out
}

/// Flag-level overrides applied after the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub heuristic: Option<Heuristic>,
    pub quota: Option<usize>,
}

pub fn layered_config(
    file_text: Option<&str>,
    overrides: &Overrides,
) -> Result<ResolverConfig> {
    let mut cfg = match file_text {
        Some(text) => parse_config(text)?,
        None => ResolverConfig::default(),
    };
    if let Some(h) = overrides.heuristic {
        cfg.heuristic = h;
    }
    if let Some(q) = overrides.quota {
        cfg.quota = q;
    }
    cfg.validate().map_err(|e| anyhow!(e))?;
    Ok(cfg)
}
