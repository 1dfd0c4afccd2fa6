//! `key = value` configuration shared by every stage.

use std::path::Path;

use anyhow::{bail, Context};
use ppg_posture::classify::{GridSettings, Hyperparams, PRESET_NAMES};
use ppg_posture::features::DEFAULT_DROP;
use ppg_posture::pipeline::PipelineConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub hyper: Hyperparams,
    pub grid: GridSettings,
    pub drop: Vec<String>,
    pub models: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            pipeline: PipelineConfig::default(),
            hyper: Hyperparams::default(),
            grid: GridSettings::default(),
            drop: DEFAULT_DROP.iter().map(|s| s.to_string()).collect(),
            models: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("bad value `{value}` for `{key}`"))
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        let p = &mut self.pipeline;
        match key {
            "filter.f_lo" => p.preprocess.f_lo = num(key, value)?,
            "filter.f_hi" => p.preprocess.f_hi = num(key, value)?,
            "filter.order" => p.prototype_order = num(key, value)?,
            "outlier.lo" => p.preprocess.outlier_lo = num(key, value)?,
            "outlier.hi" => p.preprocess.outlier_hi = num(key, value)?,
            "window.stationary" => p.stationary_window = num(key, value)?,
            "window.label" => p.label_window = num(key, value)?,
            "grid.test_fraction" => self.grid.test_fraction = num(key, value)?,
            "grid.folds" => self.grid.folds = num(key, value)?,
            "grid.models" => self.models = list(value),
            "features.drop" => self.drop = list(value),
            _ => {
                if !self.hyper.set(key, value)? {
                    bail!("unknown setting `{key}`");
                }
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> anyhow::Result<Settings> {
        let mut s = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", n + 1);
            };
            s.set(k.trim(), v.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> anyhow::Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Settings::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}
