//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | value |
//! |---|---|
//! | `task` | `regression` or `classification` |
//! | `seed` | unsigned integer |
//! | `split_frac` | three comma-separated fractions (train,val,test) |
//! | `split_file` | path to an `id,part` CSV |
//! | `keep_models` | unsigned integer |
//! | `feature_keep_ratio` | number in (0,1) |
//! | `minority_threshold` | number in (0,0.5) |
//! | `importance_repeats` | unsigned integer |
//! | `max_class_fraction` | number in (0,1], or `none` |
//! | `roster` | comma-separated learner kinds; repeats get increasing seeds |
//! | `param.<kind>.<name>` | hyperparameter override for every roster entry of that kind |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use metamodel_core::learners::LearnerSpec;
use metamodel_core::{MetaModelConfig, Task};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub task: Option<Task>,
    pub seed: Option<u64>,
    pub split_frac: Option<[f64; 3]>,
    pub split_file: Option<PathBuf>,
    pub keep_models: Option<usize>,
    pub feature_keep_ratio: Option<f64>,
    pub minority_threshold: Option<f64>,
    pub importance_repeats: Option<usize>,
    pub max_class_fraction: Option<Option<f64>>,
    pub roster: Option<Vec<String>>,
    /// kind -> parameter -> value
    pub params: BTreeMap<String, BTreeMap<String, f64>>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::usage(format!("config line {line}: bad value `{value}` for `{key}`")))
}

pub fn parse_fractions(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::usage(format!("split fractions `{s}` must be three comma-separated numbers"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = FileConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {line}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::usage(format!("config line {line}: duplicate key `{key}`")));
            }
            match key {
                "task" => cfg.task = Some(parse_value(key, value, line)?),
                "seed" => cfg.seed = Some(parse_value(key, value, line)?),
                "split_frac" => {
                    cfg.split_frac = Some(
                        parse_fractions(value).map_err(|e| CliError::usage(format!("config line {line}: {e}")))?,
                    )
                }
                "split_file" => cfg.split_file = Some(PathBuf::from(value)),
                "keep_models" => cfg.keep_models = Some(parse_value(key, value, line)?),
                "feature_keep_ratio" => cfg.feature_keep_ratio = Some(parse_value(key, value, line)?),
                "minority_threshold" => cfg.minority_threshold = Some(parse_value(key, value, line)?),
                "importance_repeats" => cfg.importance_repeats = Some(parse_value(key, value, line)?),
                "max_class_fraction" => {
                    cfg.max_class_fraction = Some(if value.eq_ignore_ascii_case("none") {
                        None
                    } else {
                        Some(parse_value(key, value, line)?)
                    })
                }
                "roster" => {
                    let kinds: Vec<String> = value.split(',').map(|k| k.trim().to_string()).collect();
                    if kinds.iter().any(String::is_empty) {
                        return Err(CliError::usage(format!("config line {line}: empty roster entry")));
                    }
                    cfg.roster = Some(kinds);
                }
                _ => match key.strip_prefix("param.").and_then(|rest| rest.split_once('.')) {
                    Some((kind, name)) if !kind.is_empty() && !name.is_empty() => {
                        let v = parse_value(key, value, line)?;
                        cfg.params.entry(kind.to_string()).or_default().insert(name.to_string(), v);
                    }
                    _ => return Err(CliError::usage(format!("config line {line}: unknown key `{key}`"))),
                },
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies the ensemble overrides on top of the defaults for `task`.
    pub fn metamodel_config(&self, task: Task, seed: u64) -> Result<MetaModelConfig, CliError> {
        let mut cfg = MetaModelConfig::new(task).with_seed(seed);
        if let Some(kinds) = &self.roster {
            let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
            cfg.roster = kinds
                .iter()
                .map(|k| {
                    let n = counts.entry(k.as_str()).or_insert(0);
                    let spec = LearnerSpec::from_kind_name(task, k, *n);
                    *n += 1;
                    spec
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::usage(format!("roster: {e}")))?;
        }
        for (kind, params) in &self.params {
            if !cfg.roster.iter().any(|s| s.kind_name() == kind) {
                return Err(CliError::usage(format!("param override for `{kind}`, which is not in the roster")));
            }
            for spec in cfg.roster.iter_mut().filter(|s| s.kind_name() == kind) {
                for (name, value) in params {
                    *spec = spec
                        .with_param(name, *value)
                        .map_err(|e| CliError::usage(format!("param.{kind}.{name}: {e}")))?;
                }
            }
        }
        if let Some(v) = self.keep_models {
            cfg.keep_models = v;
        }
        if let Some(v) = self.feature_keep_ratio {
            cfg.feature_keep_ratio = v;
        }
        if let Some(v) = self.minority_threshold {
            cfg.minority_threshold = v;
        }
        if let Some(v) = self.importance_repeats {
            cfg.importance_repeats = v;
        }
        if let Some(v) = self.max_class_fraction {
            cfg.max_class_fraction = v;
        }
        Ok(cfg)
    }
}
