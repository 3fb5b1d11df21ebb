//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the
//! training configuration field names (`lr_g` and `lr-g` are equivalent)
//! plus `classifier`. Settings are layered: defaults, then the file, then
//! command-line flags.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use catgan_core::classifier::ClassifierKind;
use catgan_core::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub train: TrainConfig,
    pub classifier: ClassifierKind,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            train: TrainConfig::default(),
            classifier: ClassifierKind::Lsq,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("bad value `{value}` for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("bad value `{value}` for `{key}`: expected true or false"),
    }
}

fn parse_pair(key: &str, value: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((parse(key, a)?, parse(key, b)?)),
        _ => bail!("bad value `{value}` for `{key}`: expected two comma-separated widths"),
    }
}

impl Settings {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let t = &mut self.train;
        match key.as_str() {
            "variant" => t.variant = parse(&key, value)?,
            "epochs" => t.epochs = parse(&key, value)?,
            "batch_size" => t.batch_size = parse(&key, value)?,
            "lr_g" => t.lr_g = parse(&key, value)?,
            "lr_d" => t.lr_d = parse(&key, value)?,
            "momentum" => t.momentum = parse(&key, value)?,
            "d_steps_per_g_step" => t.d_steps_per_g_step = parse(&key, value)?,
            "generator_hidden" => t.generator_hidden = Some(parse(&key, value)?),
            "discriminator_hidden" => t.discriminator_hidden = Some(parse_pair(&key, value)?),
            "seed" => t.seed = parse(&key, value)?,
            "labeled_target_per_class" => t.labeled_target_per_class = parse(&key, value)?,
            "raw_norm" => t.raw_norm = parse_bool(&key, value)?,
            "unwrapped" => t.unwrapped = parse_bool(&key, value)?,
            "sigmoid_generator_output" => t.sigmoid_generator_output = parse_bool(&key, value)?,
            "generator_init" => t.generator_init = parse(&key, value)?,
            "optimizer" => t.optimizer = parse(&key, value)?,
            "classifier" => self.classifier = parse(&key, value)?,
            _ => bail!("unknown setting `{key}`"),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            self.set(key, value)
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))
    }
}
