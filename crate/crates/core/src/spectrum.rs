//! Biphoton frequency comb, joint spectral intensity records and channel
//! allocation.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// Symmetric signal/idler comb generated around the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyComb {
    /// Pump frequency in THz.
    pub pump_frequency: f64,
    /// Free spectral range in GHz.
    pub fsr: f64,
    /// Number of signal/idler mode pairs.
    pub mode_count: u32,
    /// Residual spectral phase step between adjacent modes, rad.
    pub phase_slope: f64,
}

impl Default for FrequencyComb {
    fn default() -> Self {
        Self {
            pump_frequency: 194.67,
            fsr: 21.23,
            mode_count: 80,
            phase_slope: 0.065,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Signal,
    Idler,
}

/// One resonance of the comb, indexed in FSR units from the pump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyMode {
    pub index: u32,
    pub side: Side,
}

impl FrequencyComb {
    pub fn new(pump_frequency: f64, fsr: f64, mode_count: u32, phase_slope: f64) -> Result<Self> {
        let comb = Self {
            pump_frequency,
            fsr,
            mode_count,
            phase_slope,
        };
        comb.validate()?;
        Ok(comb)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fsr > 0.0 && self.fsr.is_finite()) {
            return Err(argument(format!("fsr must be > 0, got {}", self.fsr)));
        }
        if self.mode_count < 1 {
            return Err(argument("mode_count must be >= 1"));
        }
        Ok(())
    }

    pub fn mode(&self, index: u32, side: Side) -> Result<FrequencyMode> {
        if index < 1 || index > self.mode_count {
            return Err(argument(format!(
                "mode index {index} outside [1, {}]",
                self.mode_count
            )));
        }
        Ok(FrequencyMode { index, side })
    }

    /// Optical frequency of a mode in THz.
    pub fn frequency(&self, mode: FrequencyMode) -> f64 {
        let offset = f64::from(mode.index) * self.fsr * 1e-3;
        match mode.side {
            Side::Signal => self.pump_frequency + offset,
            Side::Idler => self.pump_frequency - offset,
        }
    }

    /// Residual spectral phase of the pair in mode `index`, relative to mode 0.
    pub fn residual_phase(&self, index: u32) -> f64 {
        self.phase_slope * f64::from(index)
    }
}

/// Per-mode coincidence and background rates of the pair source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsiRecord {
    pub mode_index: u32,
    /// Hz.
    pub coincidence_rate: f64,
    /// Hz.
    pub background_rate: f64,
}

/// Reads the tab-separated JSI format
/// `mode_index<TAB>coincidence_rate_hz<TAB>background_rate_hz`.
///
/// Lines starting with `#` are comments. The result is sorted by mode index.
pub fn load_jsi<R: Read>(source: R) -> Result<Vec<JsiRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 tab-separated fields, found {}", row.len()),
            });
        }
        let parse_f = |field: &str, name: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("{name}: {e}"),
            })
        };
        let mode_index = row[0].parse::<u32>().map_err(|e| Error::Parse {
            line,
            message: format!("mode_index: {e}"),
        })?;
        let coincidence_rate = parse_f(&row[1], "coincidence_rate")?;
        let background_rate = parse_f(&row[2], "background_rate")?;
        for (name, v) in [
            ("coincidence_rate", coincidence_rate),
            ("background_rate", background_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!(
                    "line {line}: {name} must be a non-negative number, got {v}"
                )));
            }
        }
        if !seen.insert(mode_index) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate mode_index {mode_index}"
            )));
        }
        records.push(JsiRecord {
            mode_index,
            coincidence_rate,
            background_rate,
        });
    }
    records.sort_by_key(|r| r.mode_index);
    Ok(records)
}

pub fn load_jsi_path(path: impl AsRef<Path>) -> Result<Vec<JsiRecord>> {
    load_jsi(std::fs::File::open(path)?)
}

pub fn write_jsi<W: Write>(mut out: W, records: &[JsiRecord], comment: &str) -> Result<()> {
    for line in comment.lines() {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "# mode_index\tcoincidence_rate_hz\tbackground_rate_hz")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}",
            r.mode_index, r.coincidence_rate, r.background_rate
        )?;
    }
    Ok(())
}

/// A quantum channel made of adjacent comb resonances.
///
/// A width-3 channel spans `center - 1 ..= center + 1` and carries either a
/// qutrit on all three modes or a qubit on the two outer modes. A width-2
/// channel spans `center ..= center + 1` and carries a qubit on both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub center_mode: u32,
    pub width_resonances: u32,
    pub max_dimension: u32,
}

impl ChannelSpec {
    pub fn new(center_mode: u32, width_resonances: u32) -> Result<Self> {
        let max_dimension = match width_resonances {
            3 => 3,
            2 => 2,
            w => return Err(argument(format!("channel width must be 2 or 3, got {w}"))),
        };
        if width_resonances == 3 && center_mode < 1 {
            return Err(argument("width-3 channel needs center_mode >= 1"));
        }
        Ok(Self {
            center_mode,
            width_resonances,
            max_dimension,
        })
    }

    pub fn first_mode(&self) -> u32 {
        match self.width_resonances {
            3 => self.center_mode - 1,
            _ => self.center_mode,
        }
    }

    /// All modes reserved by the channel.
    pub fn modes(&self) -> Vec<u32> {
        let first = self.first_mode();
        (first..first + self.width_resonances).collect()
    }

    /// Modes carrying the Schmidt terms of a `dimension`-level Bell state.
    pub fn bell_modes(&self, dimension: u32) -> Result<Vec<u32>> {
        if dimension < 2 || dimension > self.max_dimension {
            return Err(argument(format!(
                "width-{} channel supports d in [2, {}], got {dimension}",
                self.width_resonances, self.max_dimension
            )));
        }
        let c = self.center_mode;
        Ok(match (self.width_resonances, dimension) {
            (3, 3) => vec![c - 1, c, c + 1],
            (3, 2) => vec![c - 1, c + 1],
            _ => vec![c, c + 1],
        })
    }
}

/// Greedy left-to-right channel packing.
///
/// Modes below `rate_floor` are dropped, the rest are split into maximal runs
/// of consecutive indices and each run is cut into as many non-overlapping
/// `width`-mode channels as fit, starting from its lowest mode.
pub fn allocate_channels(jsi: &[JsiRecord], width: u32, rate_floor: f64) -> Result<Vec<ChannelSpec>> {
    if width != 2 && width != 3 {
        return Err(argument(format!("width must be 2 or 3, got {width}")));
    }
    if !(rate_floor >= 0.0) {
        return Err(argument(format!("rate_floor must be >= 0, got {rate_floor}")));
    }
    let mut usable: Vec<u32> = jsi
        .iter()
        .filter(|r| r.coincidence_rate >= rate_floor)
        .map(|r| r.mode_index)
        .collect();
    usable.sort_unstable();
    usable.dedup();

    let mut channels = Vec::new();
    for run in contiguous_runs(&usable) {
        let (start, len) = run;
        for k in 0..len / width {
            let first = start + k * width;
            let center = if width == 3 { first + 1 } else { first };
            channels.push(ChannelSpec::new(center, width)?);
        }
    }
    channels.sort_by_key(|c| c.center_mode);
    Ok(channels)
}

/// `(first_index, length)` of each maximal run in a sorted, deduplicated list.
pub fn contiguous_runs(sorted: &[u32]) -> Vec<(u32, u32)> {
    let mut runs = Vec::new();
    let mut iter = sorted.iter().copied();
    let Some(mut start) = iter.next() else {
        return runs;
    };
    let mut prev = start;
    for m in iter {
        if m != prev + 1 {
            runs.push((start, prev - start + 1));
            start = m;
        }
        prev = m;
    }
    runs.push((start, prev - start + 1));
    runs
}
