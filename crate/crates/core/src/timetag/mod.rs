//! Time-tag streams: Monte Carlo generation, coincidence counting, delay
//! histograms and Voigt fitting.
//!
//! A stream is a time-ordered sequence of `(detector, timestamp)` records
//! plus [`StreamMetadata`] that maps each detector to a user, basis and
//! outcome, and records the basis schedule the stream was taken under.
//! Every X-basis projection setting gets its own virtual detector id, so a
//! record alone identifies the measurement that produced it.

mod count;
mod fit;
mod generate;
mod io;

pub use count::{count_coincidences, CoincidenceCounter, CoincidenceCounts, PairingPolicy};
pub use fit::{delay_histogram, fit_voigt, DelayHistogram, HistogramBuilder, VoigtFit};
pub use generate::{generate_stream, generate_to_sink, GeneratorConfig, GeneratorTally, JITTER_CLIP_PS};
pub use io::{read_stream, write_binary, write_text, TimetagReader, TimetagWriter, TimetagFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{CoincidenceMatrix, LinkParams};
use crate::qudit::{Basis, OutcomeCorrelation};
use crate::sweep::ChannelModel;

/// Schema version written into stream headers.
pub const STREAM_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum User {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorInfo {
    pub id: u8,
    pub user: User,
    pub basis: Basis,
    pub outcome: u32,
}

/// One detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    /// Picoseconds.
    pub timestamp: u64,
    pub detector: u8,
}

/// Basis selected by one user during a dwell; `setting` is the active X
/// projection and is absent for Z, where all outcome detectors are live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSetting {
    pub basis: Basis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwellSetting {
    pub alice: UserSetting,
    pub bob: UserSetting,
}

/// Seconds each basis was jointly selected, and for X the seconds each
/// `(alice setting, bob setting)` projection pair was live.
#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    pub z: f64,
    pub x: f64,
    /// Row-major `d × d`, indexed by raw (unmapped) settings.
    pub x_settings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamMetadata {
    pub version: u32,
    pub dimension: u32,
    pub detectors: Vec<DetectorInfo>,
    /// Offset added to every timestamp so jittered times stay positive, ps.
    pub time_offset_ps: u64,
    /// Stream length, s.
    pub duration: f64,
    /// Dwell length, s. The last dwell may be shorter.
    pub dwell: f64,
    pub schedule: Vec<DwellSetting>,
}

/// Virtual detector id of a (user, basis, outcome) triple.
pub fn detector_id(d: u32, user: User, basis: Basis, outcome: u32) -> u8 {
    let user_block = match user {
        User::Alice => 0,
        User::Bob => 2,
    };
    let basis_block = match basis {
        Basis::Z => 0,
        Basis::X => 1,
    };
    ((user_block + basis_block) * d + outcome) as u8
}

/// The detector table for dimension `d`: Alice Z, Alice X, Bob Z, Bob X.
pub fn detector_map(d: u32) -> Vec<DetectorInfo> {
    let mut out = Vec::with_capacity(4 * d as usize);
    for user in [User::Alice, User::Bob] {
        for basis in Basis::BOTH {
            for outcome in 0..d {
                out.push(DetectorInfo {
                    id: detector_id(d, user, basis, outcome),
                    user,
                    basis,
                    outcome,
                });
            }
        }
    }
    out
}

impl StreamMetadata {
    /// Metadata for a stream with no schedule, all detectors nominally live.
    pub fn new(dimension: u32, duration: f64) -> Self {
        Self {
            version: STREAM_VERSION,
            dimension,
            detectors: detector_map(dimension),
            time_offset_ps: 0,
            duration,
            dwell: duration,
            schedule: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.dimension) {
            return Err(Error::Data(format!("stream dimension {} not in 2..=5", self.dimension)));
        }
        let mut seen = [false; 256];
        for det in &self.detectors {
            if seen[det.id as usize] {
                return Err(Error::Data(format!("detector {} listed twice", det.id)));
            }
            seen[det.id as usize] = true;
            if det.outcome >= self.dimension {
                return Err(Error::Data(format!(
                    "detector {} has outcome {} for d = {}",
                    det.id, det.outcome, self.dimension
                )));
            }
        }
        if !(self.duration >= 0.0 && self.dwell > 0.0 || self.duration == 0.0) {
            return Err(Error::Data("invalid duration or dwell".into()));
        }
        Ok(())
    }

    /// Lookup table from detector id.
    pub fn lookup(&self) -> Vec<Option<DetectorInfo>> {
        let mut table = vec![None; 256];
        for d in &self.detectors {
            table[d.id as usize] = Some(*d);
        }
        table
    }

    fn dwell_length(&self, index: usize) -> f64 {
        let start = self.dwell * index as f64;
        (self.duration - start).clamp(0.0, self.dwell)
    }

    /// Basis exposure implied by the schedule. Without a schedule both
    /// bases and every X setting pair are taken as live for the whole
    /// duration.
    pub fn exposure(&self) -> Exposure {
        let d = self.dimension as usize;
        if self.schedule.is_empty() {
            return Exposure {
                z: self.duration,
                x: self.duration,
                x_settings: vec![self.duration; d * d],
            };
        }
        let mut e = Exposure {
            z: 0.0,
            x: 0.0,
            x_settings: vec![0.0; d * d],
        };
        for (i, s) in self.schedule.iter().enumerate() {
            let len = self.dwell_length(i);
            match (s.alice.basis, s.bob.basis) {
                (Basis::Z, Basis::Z) => e.z += len,
                (Basis::X, Basis::X) => {
                    e.x += len;
                    let j = s.alice.setting.unwrap_or(0) as usize;
                    let k = s.bob.setting.unwrap_or(0) as usize;
                    e.x_settings[j * d + k] += len;
                }
                _ => {}
            }
        }
        e
    }
}

/// Analytic expected counts for a stream taken under `meta`'s schedule,
/// counted with window `lp.coincidence_window`.
///
/// Z cells accumulate over the joint Z exposure. Each X cell accumulates
/// only while its own projection pair is live, so the result follows the
/// drawn settings rather than their average.
pub fn expected_counts(
    model: &ChannelModel,
    lp: &LinkParams,
    meta: &StreamMetadata,
) -> Result<(CoincidenceMatrix, CoincidenceMatrix)> {
    let ev = model.evaluate(&lp.with_integration_time(1.0))?;
    let d = lp.dimension;
    let exposure = meta.exposure();
    let tau = |t: f64| if t > 0.0 { t } else { meta.duration.max(1.0) };
    let mut z = ev.matrix_z.clone();
    z.counts.iter_mut().for_each(|c| *c *= exposure.z);
    z.integration_time = tau(exposure.z);
    // undo the averaged X duty factor, then apply the actual exposure
    let always_on = f64::from(d * d);
    let map = OutcomeCorrelation::for_basis(d, Basis::X);
    let mut x = CoincidenceMatrix::zeros(Basis::X, d, tau(exposure.x));
    for j in 0..d {
        for k in 0..d {
            let cell = map.apply(k);
            let live = exposure.x_settings[(j * d + k) as usize];
            x.add(j, cell, ev.matrix_x.get(j, cell) * always_on * live);
        }
    }
    Ok((z, x))
}

/// An in-memory stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TimetagStream {
    pub metadata: StreamMetadata,
    pub events: Vec<Event>,
}

impl TimetagStream {
    pub fn new(metadata: StreamMetadata, mut events: Vec<Event>) -> Result<Self> {
        metadata.validate()?;
        let table = metadata.lookup();
        if let Some(e) = events.iter().find(|e| table[e.detector as usize].is_none()) {
            return Err(Error::Data(format!("unknown detector id {}", e.detector)));
        }
        events.sort_unstable();
        Ok(Self { metadata, events })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Anything that consumes a time-ordered event stream.
pub trait EventSink {
    fn push(&mut self, event: Event) -> Result<()>;
}

impl EventSink for Vec<Event> {
    fn push(&mut self, event: Event) -> Result<()> {
        Vec::push(self, event);
        Ok(())
    }
}

/// Feeds every event to two sinks.
pub struct Tee<'a, A: EventSink, B: EventSink>(pub &'a mut A, pub &'a mut B);

impl<A: EventSink, B: EventSink> EventSink for Tee<'_, A, B> {
    fn push(&mut self, event: Event) -> Result<()> {
        self.0.push(event)?;
        self.1.push(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_ids_are_unique_and_dense() {
        for d in 2..=5 {
            let map = detector_map(d);
            let mut ids: Vec<u8> = map.iter().map(|m| m.id).collect();
            ids.sort_unstable();
            assert_eq!(ids, (0..4 * d as u8).collect::<Vec<_>>());
        }
        assert_eq!(detector_id(3, User::Bob, Basis::X, 2), 11);
    }

    #[test]
    fn exposure_from_schedule() {
        let z = UserSetting {
            basis: Basis::Z,
            setting: None,
        };
        let x = |s| UserSetting {
            basis: Basis::X,
            setting: Some(s),
        };
        let mut m = StreamMetadata::new(2, 2.5);
        m.dwell = 1.0;
        m.schedule = vec![
            DwellSetting { alice: z, bob: z },
            DwellSetting { alice: x(1), bob: x(0) },
            DwellSetting { alice: x(1), bob: z },
        ];
        let e = m.exposure();
        assert_eq!((e.z, e.x), (1.0, 1.0));
        assert_eq!(e.x_settings, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn unknown_detector_rejected() {
        let m = StreamMetadata::new(2, 1.0);
        let e = Event {
            timestamp: 0,
            detector: 200,
        };
        assert!(matches!(TimetagStream::new(m, vec![e]), Err(Error::Data(_))));
    }
}
