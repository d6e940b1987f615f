use serde::{Deserialize, Serialize};

use crate::benchmarks::KkConfig;
use crate::channel::{FiberParams, LinkConfig};
use crate::error::{Error, Result};
use crate::node::{LaserParams, NodeConfig};
use crate::readout::SplitSpec;
use crate::task::{Mode, ReadoutConfig};
use crate::transmitter::TxConfig;

/// Memory-capacity measurement attached to every node run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub m_max: usize,
    pub record: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { m_max: 10, record: 6000 }
    }
}

/// One swept parameter: a dotted path into the config and either an
/// explicit value list or an inclusive `[start, stop, step]` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub path: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<toml::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 3]>,
}

impl SweepSpec {
    pub fn expand(&self) -> std::result::Result<Vec<toml::Value>, String> {
        match (&self.range, self.values.is_empty()) {
            (Some(_), false) => Err(format!("sweep `{}`: give either `values` or `range`, not both", self.path)),
            (None, true) => Err(format!("sweep `{}`: empty value list", self.path)),
            (None, false) => Ok(self.values.clone()),
            (Some([start, stop, step]), true) => {
                if !(*step > 0.0) || !(stop >= start) {
                    return Err(format!("sweep `{}`: range needs step > 0 and stop >= start", self.path));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..n).map(|i| toml::Value::Float(start + i as f64 * step)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tx: TxConfig,
    #[serde(default)]
    pub fiber: FiberParams,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub node: NodeConfig,
    #[serde(default)]
    pub laser: LaserParams,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub kk: KkConfig,
    #[serde(default)]
    pub readout: ReadoutConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSettings>,
    /// Write the detected record of every point as a binary dump.
    #[serde(default)]
    pub dump: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepSpec>,
}

/// One grid point with every swept value applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, toml::Value)>,
    pub config: ExperimentConfig,
}

/// Parse and validate a config. Errors carry the 1-based line they refer
/// to (0 when no line applies).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate_with(text)?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the sweep entry for `needle`, else the first line assigning its
/// last key, for anchoring semantic errors.
fn locate(text: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    let quoted = format!("\"{needle}\"");
    let key = needle.rsplit('.').next().unwrap_or(needle);
    let code = |l: &str| l.split('#').next().unwrap_or("").to_string();
    let assigns = |l: &str| {
        let c = code(l);
        c.split_once('=').is_some_and(|(k, _)| k.trim() == key)
    };
    text.lines()
        .position(|l| code(l).contains(&quoted))
        .or_else(|| text.lines().position(assigns))
        .map_or(0, |i| i + 1)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_with("")
    }

    fn validate_with(&self, text: &str) -> Result<()> {
        let err = |needle: &str, message: String| Error::Config {
            line: locate(text, needle),
            message,
        };
        if self.seeds.is_empty() {
            return Err(err("seeds", "`seeds` must not be empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.sweep {
            if !seen.insert(s.path.as_str()) {
                return Err(err(&s.path, format!("sweep path `{}` appears twice", s.path)));
            }
        }
        for point in self.points_with(text)? {
            point.config.validate_single().map_err(|e| {
                let needle = match &e {
                    Error::InvalidParameter { name, .. } => point
                        .assignments
                        .iter()
                        .map(|(p, _)| p.as_str())
                        .find(|p| p.ends_with(name))
                        .unwrap_or(name),
                    _ => point.assignments.first().map_or("", |(p, _)| p.as_str()),
                };
                let at = if point.assignments.is_empty() {
                    String::new()
                } else {
                    format!("grid point {}: ", point.index)
                };
                err(needle, format!("{at}{e}"))
            })?;
        }
        Ok(())
    }

    /// Checks of one resolved configuration.
    fn validate_single(&self) -> Result<()> {
        self.tx.validate()?;
        self.fiber.validate()?;
        self.link.validate()?;
        self.node.validate()?;
        self.laser.validate()?;
        self.kk.validate()?;
        self.split.validate(self.split.total())?;
        if self.readout.max_taps == 0 || self.readout.max_taps % 2 == 0 {
            return Err(crate::error::invalid("readout.max_taps", "must be odd and >= 1"));
        }
        if !(self.readout.ridge >= 0.0) {
            return Err(crate::error::invalid("readout.ridge", "must be >= 0"));
        }
        if let Some(mc) = self.mc {
            if mc.m_max == 0 || mc.record < crate::benchmarks::MIN_MC_RECORD {
                return Err(crate::error::invalid(
                    "mc",
                    format!("need m_max >= 1 and record >= {}", crate::benchmarks::MIN_MC_RECORD),
                ));
            }
        }
        Ok(())
    }

    /// Grid size times seed count.
    pub fn run_count(&self) -> Result<usize> {
        Ok(self.points()?.len() * self.seeds.len())
    }

    /// Cartesian product of the sweeps, first sweep outermost.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        self.points_with("")
    }

    fn points_with(&self, text: &str) -> Result<Vec<SweepPoint>> {
        let err = |needle: &str, message: String| Error::Config {
            line: locate(text, needle),
            message,
        };
        let mut base = self.clone();
        base.sweep.clear();
        let base_value = toml::Value::try_from(&base).map_err(|e| err("", e.to_string()))?;
        let mut axes = Vec::with_capacity(self.sweep.len());
        for s in &self.sweep {
            if get_path(&base_value, &s.path).is_none() {
                return Err(err(&s.path, format!("sweep path `{}` does not name a config field", s.path)));
            }
            let values = s.expand().map_err(|m| err(&s.path, m))?;
            let mut coerced = Vec::with_capacity(values.len());
            for value in values {
                let value = coerce(get_path(&base_value, &s.path).expect("checked above"), value);
                let mut probe = base_value.clone();
                set_path(&mut probe, &s.path, value.clone());
                if let Err(e) = probe.try_into::<ExperimentConfig>() {
                    return Err(err(&s.path, format!("sweep `{}`: {}", s.path, e.message())));
                }
                coerced.push(value);
            }
            axes.push(coerced);
        }
        let total: usize = axes.iter().map(Vec::len).product();
        let mut points = Vec::with_capacity(total);
        for index in 0..total {
            let mut rem = index;
            let mut picks = vec![0usize; axes.len()];
            for (k, axis) in axes.iter().enumerate().rev() {
                picks[k] = rem % axis.len();
                rem /= axis.len();
            }
            let mut v = base_value.clone();
            let mut assignments = Vec::with_capacity(axes.len());
            for (k, s) in self.sweep.iter().enumerate() {
                let value = axes[k][picks[k]].clone();
                set_path(&mut v, &s.path, value.clone());
                assignments.push((s.path.clone(), value));
            }
            let config: ExperimentConfig = v
                .try_into()
                .map_err(|e: toml::de::Error| err(&self.sweep[0].path, format!("grid point {index}: {}", e.message())))?;
            points.push(SweepPoint {
                index,
                assignments,
                config,
            });
        }
        Ok(points)
    }
}

/// Integers swept into float fields become floats, and whole floats swept
/// into integer fields become integers.
fn coerce(current: &toml::Value, value: toml::Value) -> toml::Value {
    match (current, &value) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        (toml::Value::Integer(_), toml::Value::Float(f)) if f.fract() == 0.0 && f.abs() < 9e15 => {
            toml::Value::Integer(*f as i64)
        }
        _ => value,
    }
}

fn get_path<'a>(v: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(v, |node, key| node.as_table()?.get(key))
}

fn set_path(v: &mut toml::Value, path: &str, value: toml::Value) {
    let mut node = v;
    let keys: Vec<&str> = path.split('.').collect();
    for key in &keys[..keys.len() - 1] {
        node = node.as_table_mut().and_then(|t| t.get_mut(*key)).expect("path exists");
    }
    if let Some(t) = node.as_table_mut() {
        t.insert(keys[keys.len() - 1].to_string(), value);
    }
}
