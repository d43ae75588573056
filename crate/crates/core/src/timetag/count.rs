//! Streaming coincidence counter.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{DetectorInfo, Event, EventSink, Exposure, StreamMetadata, TimetagStream, User};
use crate::error::{argument, Error, Result};
use crate::keyrate::{self, KeyRateReport};
use crate::link::CoincidenceMatrix;
use crate::qudit::{Basis, OutcomeCorrelation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingPolicy {
    /// Each event joins at most one coincidence, with the earliest
    /// unmatched partner inside the window.
    #[default]
    Exclusive,
    /// Every Alice/Bob pair inside the window counts.
    AllPairs,
}

/// Counts accumulated over a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceCounts {
    pub z: CoincidenceMatrix,
    pub x: CoincidenceMatrix,
    pub exposure: Exposure,
    /// Coincidences between detectors of different bases.
    pub sifted_out: u64,
    pub alice_events: u64,
    pub bob_events: u64,
    /// Largest number of events held at once.
    pub peak_pending: usize,
}

impl CoincidenceCounts {
    /// Both matrices as counts per second of their own basis exposure.
    pub fn per_second(&self) -> Result<(CoincidenceMatrix, CoincidenceMatrix)> {
        let scale = |m: &CoincidenceMatrix, t: f64| -> Result<CoincidenceMatrix> {
            if !(t > 0.0) {
                return Err(Error::Undefined(format!("no exposure in the {} basis", m.basis)));
            }
            let mut out = m.clone();
            out.counts.iter_mut().for_each(|c| *c /= t);
            out.integration_time = 1.0;
            Ok(out)
        };
        Ok((scale(&self.z, self.exposure.z)?, scale(&self.x, self.exposure.x)?))
    }

    /// Key rate with each basis normalised to its own exposure.
    pub fn report(&self, f: f64) -> Result<KeyRateReport> {
        let (z, x) = self.per_second()?;
        keyrate::report(&z, &x, f)
    }

    pub fn total(&self) -> f64 {
        self.z.total() + self.x.total()
    }
}

/// Single-pass two-pointer counter. Feed events in time order.
pub struct CoincidenceCounter {
    window: u64,
    policy: PairingPolicy,
    table: Vec<Option<DetectorInfo>>,
    maps: [OutcomeCorrelation; 2],
    alice: VecDeque<(u64, DetectorInfo)>,
    bob: VecDeque<(u64, DetectorInfo)>,
    z: CoincidenceMatrix,
    x: CoincidenceMatrix,
    exposure: Exposure,
    sifted_out: u64,
    alice_events: u64,
    bob_events: u64,
    last: u64,
    peak: usize,
}

impl CoincidenceCounter {
    /// `window` is the half width in ps: `|t_A - t_B| <= window`.
    pub fn new(meta: &StreamMetadata, window: f64, policy: PairingPolicy) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(argument(format!("coincidence window must be > 0 ps, got {window}")));
        }
        meta.validate()?;
        let d = meta.dimension;
        let exposure = meta.exposure();
        let tau = |t: f64| if t > 0.0 { t } else { meta.duration.max(1.0) };
        Ok(Self {
            window: window.floor() as u64,
            policy,
            table: meta.lookup(),
            maps: [
                OutcomeCorrelation::for_basis(d, Basis::Z),
                OutcomeCorrelation::for_basis(d, Basis::X),
            ],
            alice: VecDeque::new(),
            bob: VecDeque::new(),
            z: CoincidenceMatrix::zeros(Basis::Z, d, tau(exposure.z)),
            x: CoincidenceMatrix::zeros(Basis::X, d, tau(exposure.x)),
            exposure,
            sifted_out: 0,
            alice_events: 0,
            bob_events: 0,
            last: 0,
            peak: 0,
        })
    }

    fn record(&mut self, a: &DetectorInfo, b: &DetectorInfo) {
        if a.basis != b.basis {
            self.sifted_out += 1;
            return;
        }
        let (m, map) = match a.basis {
            Basis::Z => (&mut self.z, &self.maps[0]),
            Basis::X => (&mut self.x, &self.maps[1]),
        };
        m.add(a.outcome, map.apply(b.outcome), 1.0);
    }

    pub fn finish(self) -> CoincidenceCounts {
        CoincidenceCounts {
            z: self.z,
            x: self.x,
            exposure: self.exposure,
            sifted_out: self.sifted_out,
            alice_events: self.alice_events,
            bob_events: self.bob_events,
            peak_pending: self.peak,
        }
    }
}

impl EventSink for CoincidenceCounter {
    fn push(&mut self, e: Event) -> Result<()> {
        let info = self.table[e.detector as usize]
            .ok_or_else(|| Error::Data(format!("unknown detector id {}", e.detector)))?;
        if e.timestamp < self.last {
            return Err(Error::Data(format!(
                "stream not time ordered at {} ps (after {} ps)",
                e.timestamp, self.last
            )));
        }
        self.last = e.timestamp;
        let horizon = e.timestamp.saturating_sub(self.window);
        while self.alice.front().is_some_and(|x| x.0 < horizon) {
            self.alice.pop_front();
        }
        while self.bob.front().is_some_and(|x| x.0 < horizon) {
            self.bob.pop_front();
        }
        let own_alice = info.user == User::Alice;
        if own_alice {
            self.alice_events += 1;
        } else {
            self.bob_events += 1;
        }
        match self.policy {
            PairingPolicy::Exclusive => {
                let other = if own_alice { &mut self.bob } else { &mut self.alice };
                if let Some((_, partner)) = other.pop_front() {
                    let (a, b) = if own_alice { (info, partner) } else { (partner, info) };
                    self.record(&a, &b);
                } else if own_alice {
                    self.alice.push_back((e.timestamp, info));
                } else {
                    self.bob.push_back((e.timestamp, info));
                }
            }
            PairingPolicy::AllPairs => {
                let partners: Vec<DetectorInfo> = if own_alice { &self.bob } else { &self.alice }
                    .iter()
                    .map(|p| p.1)
                    .collect();
                for partner in partners {
                    let (a, b) = if own_alice { (info, partner) } else { (partner, info) };
                    self.record(&a, &b);
                }
                if own_alice {
                    self.alice.push_back((e.timestamp, info));
                } else {
                    self.bob.push_back((e.timestamp, info));
                }
            }
        }
        self.peak = self.peak.max(self.alice.len() + self.bob.len());
        Ok(())
    }
}

/// Counts an in-memory stream.
pub fn count_coincidences(stream: &TimetagStream, window: f64, policy: PairingPolicy) -> Result<CoincidenceCounts> {
    let mut c = CoincidenceCounter::new(&stream.metadata, window, policy)?;
    for &e in &stream.events {
        c.push(e)?;
    }
    Ok(c.finish())
}

#[cfg(test)]
mod tests {
    use super::super::detector_id;
    use super::*;

    fn ev(ts: u64, user: User, basis: Basis, outcome: u32) -> Event {
        Event {
            timestamp: ts,
            detector: detector_id(2, user, basis, outcome),
        }
    }

    fn stream(events: Vec<Event>) -> TimetagStream {
        TimetagStream::new(StreamMetadata::new(2, 1.0), events).unwrap()
    }

    #[test]
    fn identical_timestamps_pair() {
        let s = stream(vec![ev(100, User::Alice, Basis::Z, 1), ev(100, User::Bob, Basis::Z, 1)]);
        let c = count_coincidences(&s, 10.0, PairingPolicy::Exclusive).unwrap();
        assert_eq!(c.z.get(1, 1), 1.0);
        assert_eq!(c.total(), 1.0);
    }

    #[test]
    fn spaced_events_do_not_pair() {
        let s = stream(vec![ev(100, User::Alice, Basis::Z, 0), ev(200, User::Bob, Basis::Z, 0)]);
        let c = count_coincidences(&s, 99.0, PairingPolicy::Exclusive).unwrap();
        assert_eq!(c.total(), 0.0);
        let c = count_coincidences(&s, 100.0, PairingPolicy::Exclusive).unwrap();
        assert_eq!(c.total(), 1.0);
    }

    #[test]
    fn x_outcomes_pass_through_key_map() {
        // qubit map is the identity; check with d = 3 where Bob k -> -k
        let meta = StreamMetadata::new(3, 1.0);
        let e = |ts, user, outcome| Event {
            timestamp: ts,
            detector: detector_id(3, user, Basis::X, outcome),
        };
        let s = TimetagStream::new(meta, vec![e(0, User::Alice, 1), e(5, User::Bob, 2)]).unwrap();
        let c = count_coincidences(&s, 10.0, PairingPolicy::Exclusive).unwrap();
        assert_eq!(c.x.get(1, 1), 1.0);
    }

    #[test]
    fn mismatched_bases_are_sifted() {
        let s = stream(vec![ev(0, User::Alice, Basis::Z, 0), ev(1, User::Bob, Basis::X, 0)]);
        let c = count_coincidences(&s, 10.0, PairingPolicy::Exclusive).unwrap();
        assert_eq!((c.total(), c.sifted_out), (0.0, 1));
    }

    #[test]
    fn exclusive_versus_all_pairs() {
        let s = stream(vec![
            ev(0, User::Alice, Basis::Z, 0),
            ev(2, User::Alice, Basis::Z, 1),
            ev(4, User::Bob, Basis::Z, 0),
            ev(6, User::Bob, Basis::Z, 1),
        ]);
        let ex = count_coincidences(&s, 10.0, PairingPolicy::Exclusive).unwrap();
        assert_eq!(ex.z.get(0, 0) + ex.z.get(1, 1), 2.0);
        let all = count_coincidences(&s, 10.0, PairingPolicy::AllPairs).unwrap();
        assert_eq!(all.total(), 4.0);
    }

    #[test]
    fn unordered_or_unknown_input_fails() {
        let meta = StreamMetadata::new(2, 1.0);
        let mut c = CoincidenceCounter::new(&meta, 5.0, PairingPolicy::Exclusive).unwrap();
        c.push(ev(10, User::Alice, Basis::Z, 0)).unwrap();
        assert!(matches!(c.push(ev(5, User::Bob, Basis::Z, 0)), Err(Error::Data(_))));
        let bad = Event {
            timestamp: 20,
            detector: 99,
        };
        assert!(matches!(c.push(bad), Err(Error::Data(_))));
        assert!(CoincidenceCounter::new(&meta, 0.0, PairingPolicy::Exclusive).is_err());
    }
}
