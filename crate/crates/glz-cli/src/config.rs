//! Flat key-value configuration: `key = value` lines, `#` comments,
//! repeated keys forming grid axes. Precedence is CLI flag over config file
//! over scenario default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use glz::models::PulseKind;

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, Vec<String>>,
}

impl Config {
    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.values
            .entry(key.to_string())
            .or_default()
            .push(value.into());
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), vec![value.into()]);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Overlay `self` on top of `base`: keys present here win wholesale.
    pub fn over(mut self, base: Config) -> Config {
        for (k, v) in base.values {
            self.values.entry(k).or_insert(v);
        }
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }

    /// Sorted key/values view, for echo headers.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    fn raw(&self, key: &str) -> Result<&[String]> {
        self.values
            .get(key)
            .map(|v| v.as_slice())
            .ok_or_else(|| anyhow!("missing key `{key}`"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)?
            .iter()
            .map(|s| parse_number(s).with_context(|| format!("key `{key}`")))
            .collect()
    }

    pub fn f64_scalar(&self, key: &str) -> Result<f64> {
        let v = self.f64_list(key)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => bail!("key `{key}` must have exactly one value, got {}", v.len()),
        }
    }

    pub fn usize_scalar(&self, key: &str) -> Result<usize> {
        let raw = self.raw(key)?;
        match raw {
            [s] => s.parse().with_context(|| format!("key `{key}`: `{s}`")),
            _ => bail!("key `{key}` must have exactly one value"),
        }
    }

    pub fn u64_scalar(&self, key: &str) -> Result<u64> {
        let raw = self.raw(key)?;
        match raw {
            [s] => s.parse().with_context(|| format!("key `{key}`: `{s}`")),
            _ => bail!("key `{key}` must have exactly one value"),
        }
    }

    pub fn string_scalar(&self, key: &str) -> Result<String> {
        let raw = self.raw(key)?;
        match raw {
            [s] => Ok(s.clone()),
            _ => bail!("key `{key}` must have exactly one value"),
        }
    }

    pub fn string_list(&self, key: &str) -> Result<Vec<String>> {
        Ok(self.raw(key)?.to_vec())
    }

    pub fn pulse_list(&self, key: &str) -> Result<Vec<PulseKind>> {
        self.raw(key)?
            .iter()
            .map(|s| {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => PulseKind::from_code(c)
                        .ok_or_else(|| anyhow!("key `{key}`: unknown pulse code `{c}`")),
                    _ => bail!("key `{key}`: pulse codes are single letters, got `{s}`"),
                }
            })
            .collect()
    }

    /// Uniform grid from `<key>_min`, `<key>_max`, `<key>_count`.
    pub fn axis(&self, key: &str) -> Result<Vec<f64>> {
        let lo = self.f64_scalar(&format!("{key}_min"))?;
        let hi = self.f64_scalar(&format!("{key}_max"))?;
        let n = self.usize_scalar(&format!("{key}_count"))?;
        if n == 0 {
            bail!("axis `{key}` must have at least one point");
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        Ok((0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect())
    }
}

/// Numbers may use the `pi` shorthand: `pi`, `pi/2`, `pi/4`, `-pi/3`, or a
/// plain float.
pub fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim();
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t),
    };
    if let Some(rest) = t.strip_prefix("pi") {
        let rest = rest.trim();
        if rest.is_empty() {
            return Ok(sign * std::f64::consts::PI);
        }
        if let Some(den) = rest.strip_prefix('/') {
            let d: f64 = den.trim().parse().with_context(|| format!("`{s}`"))?;
            return Ok(sign * std::f64::consts::PI / d);
        }
    }
    bail!("cannot parse number `{s}`")
}

pub fn parse_file(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_str(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_str(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            bail!("line {}: empty key or value", lineno + 1);
        }
        cfg.push(key, value);
    }
    Ok(cfg)
}

/// Execution-wide settings resolved from global flags.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub seed: u64,
    pub samples: usize,
    pub out_root: PathBuf,
    pub rtol: Option<f64>,
    pub serial: bool,
}

impl RunContext {
    pub fn template(&self) -> glz::ensemble::ModelTemplate {
        let mut tpl = glz::ensemble::ModelTemplate {
            serial: self.serial,
            ..Default::default()
        };
        if let Some(rtol) = self.rtol {
            tpl.integrator.rtol = rtol;
        }
        tpl
    }

    pub fn integrator(&self) -> glz::propagate::IntegratorConfig {
        self.template().integrator
    }

    /// Global flags overlayed as config keys (highest precedence).
    pub fn as_config(&self) -> Config {
        let mut c = Config::default();
        c.set("seed", self.seed.to_string());
        c.set("samples", self.samples.to_string());
        c
    }

    /// The out directory must exist and be writable before any scenario
    /// starts; failing early leaves no partial state behind.
    pub fn ensure_writable(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_root)
            .with_context(|| format!("out: cannot create {}", self.out_root.display()))?;
        let probe = self.out_root.join(".write-probe");
        std::fs::write(&probe, b"probe")
            .with_context(|| format!("out: {} is not writable", self.out_root.display()))?;
        std::fs::remove_file(&probe).ok();
        Ok(())
    }
}

/// Validate a config against the keys a scenario consumes, reporting every
/// violated field at once.
pub fn validate(cfg: &Config, required: &[&str], known: &[&str]) -> Result<()> {
    let mut problems = Vec::new();
    for key in required {
        if !cfg.contains(key) {
            problems.push(format!("missing required key `{key}`"));
        }
    }
    for key in cfg.keys() {
        if !known.contains(&key) && !GLOBAL_KEYS.contains(&key) {
            problems.push(format!("unknown key `{key}`"));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        bail!("config validation failed:\n  - {}", problems.join("\n  - "))
    }
}

pub const GLOBAL_KEYS: [&str; 3] = ["seed", "samples", "scenario"];
