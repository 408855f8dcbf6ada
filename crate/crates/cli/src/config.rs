use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use szcodec::{CodecConfig, ExperimentSpec, SynthParams};

/// Contents of a `--config` TOML file. Every table is optional and missing
/// keys keep their defaults.
///
/// ```toml
/// [codec]
/// eps_grid = [0.2, 0.25, 0.3]
/// kernel = 5
///
/// [synth]
/// n = 2000
/// internoise = 0.4
///
/// [experiment]
/// sizes = [1000]
/// repetitions = 20
/// ```
///
/// The experiment's own `codec` table is replaced by `[codec]` when that is
/// present.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub codec: Option<CodecConfig>,
    pub synth: SynthParams,
    pub experiment: ExperimentSpec,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: FileConfig = toml::from_str(text)?;
        if let Some(codec) = &cfg.codec {
            cfg.experiment.codec = codec.clone();
        }
        Ok(cfg)
    }
}

/// Command line overrides shared by every subcommand.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub eps_grid: Option<Vec<f64>>,
    pub kernel: Option<usize>,
}

impl Overrides {
    pub fn apply_codec(&self, cfg: &mut CodecConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(g) = &self.eps_grid {
            cfg.eps_grid = g.clone();
        }
        if let Some(k) = self.kernel {
            cfg.kernel = k;
        }
    }
}

/// Parses `0.1,0.2,0.3` or a range `start:stop:step` (inclusive stop).
pub fn parse_eps_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad range `{s}`"))?;
        let [start, stop, step] = parts[..] else {
            bail!("range `{s}` must be start:stop:step");
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("range `{s}` is empty");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad epsilon `{p}`"))
        })
        .collect()
}
