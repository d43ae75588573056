//! Run configuration.
//!
//! A TOML file with one table per section. Every key is optional and every
//! unknown key is rejected. The resolved configuration, with command line
//! overrides applied, is serialised back next to each output so a run can be
//! repeated from its own echo.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::DEFAULT_F;
use crate::link::{ApparatusParams, LinkParams, SourceModel, TemporalProfile};
use crate::qudit::Imperfection;
use crate::spectrum::FrequencyComb;
use crate::sweep::{ChannelModel, SweepGrid};
use crate::timetag::{GeneratorConfig, PairingPolicy, TimetagFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Phase and post-processing parameters that sit on top of the hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// rad per mode.
    pub phase_slope: f64,
    pub post_processing_f: f64,
    pub accidental_scale: f64,
    pub alice_x: Imperfection,
    pub bob_x: Imperfection,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            phase_slope: FrequencyComb::default().phase_slope,
            post_processing_f: DEFAULT_F,
            accidental_scale: 1.0,
            alice_x: Imperfection::ideal(),
            bob_x: Imperfection::ideal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    /// mW.
    pub power_on_chip: f64,
    /// Half width, ps.
    pub coincidence_window: f64,
    /// dB, both users together.
    pub applied_attenuation: f64,
    pub dimension: u32,
    /// s.
    pub integration_time: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            power_on_chip: 3.5,
            coincidence_window: 285.0,
            applied_attenuation: 0.0,
            dimension: 3,
            integration_time: 1.0,
        }
    }
}

impl From<LinkSection> for LinkParams {
    fn from(l: LinkSection) -> Self {
        LinkParams::new(l.power_on_chip, l.coincidence_window, l.dimension)
            .with_attenuation(l.applied_attenuation)
            .with_integration_time(l.integration_time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub power_min: f64,
    pub power_max: f64,
    pub power_step: f64,
    pub window_min: f64,
    pub window_max: f64,
    pub window_step: f64,
    pub dimensions: Vec<u32>,
    /// dB.
    pub attenuation: f64,
    /// Thread count; absent means all cores. Results do not depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let g = SweepGrid::default();
        Self {
            power_min: g.power_min,
            power_max: g.power_max,
            power_step: g.power_step,
            window_min: g.window_min,
            window_max: g.window_max,
            window_step: g.window_step,
            dimensions: vec![2, 3],
            attenuation: 0.0,
            workers: None,
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            power_min: self.power_min,
            power_max: self.power_max,
            power_step: self.power_step,
            window_min: self.window_min,
            window_max: self.window_max,
            window_step: self.window_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeSection {
    pub attenuation_min: f64,
    pub attenuation_max: f64,
    pub attenuation_step: f64,
    pub dimensions: Vec<u32>,
    /// Also report the recommended dimension at this attenuation, dB.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recommend_at: Option<f64>,
}

impl Default for RangeSection {
    fn default() -> Self {
        Self {
            attenuation_min: 0.0,
            attenuation_max: 70.0,
            attenuation_step: 1.0,
            dimensions: vec![2, 3],
            recommend_at: None,
        }
    }
}

impl RangeSection {
    pub fn attenuations(&self) -> Result<Vec<f64>> {
        let (lo, hi, step) = (self.attenuation_min, self.attenuation_max, self.attenuation_step);
        if !(step > 0.0 && lo >= 0.0 && hi >= lo) {
            return Err(Error::Config(format!(
                "range: invalid attenuation grid [{lo}, {hi}] step {step}"
            )));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| lo + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jsi: Option<PathBuf>,
    pub width: u32,
    /// Hz.
    pub rate_floor: f64,
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            jsi: None,
            width: 3,
            rate_floor: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSection {
    /// s.
    pub duration: f64,
    /// s.
    pub dwell: f64,
    pub x_probability: f64,
    /// s.
    pub chunk: f64,
    pub file_format: TimetagFormat,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            duration: 1.0,
            dwell: 1.0,
            x_probability: 0.5,
            chunk: 1e-3,
            file_format: TimetagFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Half width, ps; absent means `link.coincidence_window`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    pub pairing: PairingPolicy,
    /// Also build the delay histogram and fit it.
    pub histogram: bool,
    /// ps.
    pub histogram_bin: f64,
    /// Half span, ps.
    pub histogram_span: f64,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            input: None,
            window: None,
            pairing: PairingPolicy::Exclusive,
            histogram: false,
            histogram_bin: 10.0,
            histogram_span: 3000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for result files; absent means standard output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub source: SourceModel,
    pub apparatus: ApparatusParams,
    pub temporal: TemporalProfile,
    pub model: ModelSection,
    pub link: LinkSection,
    pub sweep: SweepSection,
    pub range: RangeSection,
    pub plan: PlanSection,
    pub generator: GeneratorSection,
    pub ingest: IngestSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            source: self.source.clone(),
            apparatus: self.apparatus.clone(),
            temporal: self.temporal,
            phase_slope: self.model.phase_slope,
            alice_x: self.model.alice_x.clone(),
            bob_x: self.model.bob_x.clone(),
            post_processing_f: self.model.post_processing_f,
            accidental_scale: self.model.accidental_scale,
        }
    }

    pub fn link_params(&self) -> LinkParams {
        self.link.into()
    }

    pub fn generator(&self) -> GeneratorConfig {
        let g = &self.generator;
        GeneratorConfig {
            model: self.channel_model(),
            params: self.link_params(),
            duration: g.duration,
            dwell: g.dwell,
            x_probability: g.x_probability,
            chunk: g.chunk,
        }
    }

    /// Checks every section that does not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Argument(m) => Error::Config(m),
            other => other,
        };
        self.channel_model().validate().map_err(cfg)?;
        self.link_params().validate().map_err(cfg)?;
        self.sweep.grid().validate().map_err(cfg)?;
        for &d in self.sweep.dimensions.iter().chain(&self.range.dimensions) {
            if !(2..=5).contains(&d) {
                return Err(Error::Config(format!("dimension {d} not in 2..=5")));
            }
        }
        if self.sweep.dimensions.is_empty() || self.range.dimensions.is_empty() {
            return Err(Error::Config("dimension lists must not be empty".into()));
        }
        if self.sweep.workers == Some(0) {
            return Err(Error::Config("sweep.workers must be >= 1".into()));
        }
        self.range.attenuations()?;
        self.generator().validate().map_err(cfg)?;
        if let Some(w) = self.ingest.window {
            if !(w > 0.0) {
                return Err(Error::Config(format!("ingest.window must be > 0 ps, got {w}")));
            }
        }
        if !(self.ingest.histogram_bin > 0.0 && self.ingest.histogram_span > self.ingest.histogram_bin) {
            return Err(Error::Config("ingest histogram needs 0 < bin < span".into()));
        }
        if !(self.plan.width == 2 || self.plan.width == 3) || !(self.plan.rate_floor >= 0.0) {
            return Err(Error::Config("plan needs width 2 or 3 and rate_floor >= 0".into()));
        }
        Ok(())
    }
}
