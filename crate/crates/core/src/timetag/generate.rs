//! Monte Carlo time-tag generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{detector_id, DwellSetting, Event, EventSink, StreamMetadata, TimetagStream, User, UserSetting};
use crate::error::{argument, Result};
use crate::link::{CoincidenceMatrix, LinkParams};
use crate::qudit::{projection_probability, Basis, Imperfection, MeasurementSetting, OutcomeCorrelation};
use crate::sweep::ChannelModel;

/// Jitter beyond this is clipped, ps. Also the timestamp origin.
pub const JITTER_CLIP_PS: f64 = 1.0e6;

const PS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub model: ChannelModel,
    /// Power, attenuation and dimension are used; the window is not.
    pub params: LinkParams,
    /// Stream length, s.
    pub duration: f64,
    /// Basis re-draw interval, s.
    pub dwell: f64,
    /// Probability that a user picks X at each dwell.
    pub x_probability: f64,
    /// Generation chunk, s; bounds the in-flight buffer.
    pub chunk: f64,
}

impl GeneratorConfig {
    pub fn new(model: ChannelModel, params: LinkParams, duration: f64) -> Self {
        Self {
            model,
            params,
            duration,
            dwell: 1.0,
            x_probability: 0.5,
            chunk: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.params.validate()?;
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(argument(format!("duration must be >= 0 s, got {}", self.duration)));
        }
        if !(self.dwell > 0.0 && self.chunk > 0.0) {
            return Err(argument("dwell and chunk must be > 0 s"));
        }
        if !(0.0..=1.0).contains(&self.x_probability) {
            return Err(argument(format!(
                "x_probability must be in [0, 1], got {}",
                self.x_probability
            )));
        }
        Ok(())
    }

    /// Stream metadata, including the basis schedule drawn from `seed`.
    pub fn metadata(&self, seed: u64) -> Result<StreamMetadata> {
        self.validate()?;
        let d = self.params.dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let n = (self.duration / self.dwell - 1e-9).ceil().max(0.0) as usize;
        let draw = |rng: &mut ChaCha8Rng| -> UserSetting {
            if rng.random::<f64>() < self.x_probability {
                UserSetting {
                    basis: Basis::X,
                    setting: Some(rng.random_range(0..d)),
                }
            } else {
                UserSetting {
                    basis: Basis::Z,
                    setting: None,
                }
            }
        };
        let schedule = (0..n)
            .map(|_| {
                let alice = draw(&mut rng);
                let bob = draw(&mut rng);
                DwellSetting { alice, bob }
            })
            .collect();
        let mut meta = StreamMetadata::new(d, self.duration);
        meta.dwell = self.dwell;
        meta.time_offset_ps = JITTER_CLIP_PS as u64;
        meta.schedule = schedule;
        Ok(meta)
    }
}

/// Generator bookkeeping, independent of any downstream analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTally {
    /// Pairs with both photons detected in matching bases, by cell after
    /// the key map, regardless of delay.
    pub true_pairs_z: CoincidenceMatrix,
    pub true_pairs_x: CoincidenceMatrix,
    /// Pairs with both photons detected in mismatched bases.
    pub true_pairs_mismatched: u64,
    pub events_per_detector: Vec<u64>,
    pub dark_counts: u64,
    pub noise_counts: u64,
    pub total_events: u64,
}

/// Raw-outcome joint tables for every basis combination, normalised to one.
struct JointTables {
    d: usize,
    // indexed [alice basis][bob basis], row-major d × d
    p: [[Vec<f64>; 2]; 2],
}

fn basis_index(b: Basis) -> usize {
    match b {
        Basis::Z => 0,
        Basis::X => 1,
    }
}

impl JointTables {
    fn new(model: &ChannelModel, d: u32) -> Result<Self> {
        let state = model.state(d)?;
        let mix = model.apparatus.x_mixing_error(d);
        let ideal = Imperfection::ideal();
        let mut p: [[Vec<f64>; 2]; 2] = Default::default();
        for ba in Basis::BOTH {
            for bb in Basis::BOTH {
                let ia = if ba == Basis::X { &model.alice_x } else { &ideal };
                let ib = if bb == Basis::X { &model.bob_x } else { &ideal };
                let mut t = Vec::with_capacity((d * d) as usize);
                for a in 0..d {
                    let ma = MeasurementSetting::with_imperfection(ba, a, ia);
                    for b in 0..d {
                        let mb = MeasurementSetting::with_imperfection(bb, b, ib);
                        t.push(projection_probability(&state, &ma, &mb)?);
                    }
                }
                let sum: f64 = t.iter().sum();
                if sum > 0.0 {
                    t.iter_mut().for_each(|v| *v /= sum);
                }
                if ba == Basis::X && bb == Basis::X && mix > 0.0 {
                    let flat = 1.0 / f64::from(d * d);
                    t.iter_mut().for_each(|v| *v = (1.0 - mix) * *v + mix * flat);
                }
                p[basis_index(ba)][basis_index(bb)] = t;
            }
        }
        Ok(Self { d: d as usize, p })
    }

    fn get(&self, ba: Basis, bb: Basis, a: u32, b: u32) -> f64 {
        self.p[basis_index(ba)][basis_index(bb)][a as usize * self.d + b as usize]
    }
}

fn active(s: &UserSetting, d: u32) -> Vec<u32> {
    match s.setting {
        Some(k) if s.basis == Basis::X => vec![k],
        _ => (0..d).collect(),
    }
}

struct Jitter {
    half_gauss: Option<Normal<f64>>,
    lorentz: Option<Cauchy<f64>>,
}

impl Jitter {
    fn new(sigma: f64, gamma: f64) -> Self {
        let s = sigma / std::f64::consts::SQRT_2;
        Self {
            half_gauss: (s > 0.0).then(|| Normal::new(0.0, s).expect("finite sigma")),
            lorentz: (gamma > 0.0).then(|| Cauchy::new(0.0, gamma).expect("finite gamma")),
        }
    }

    fn gauss<R: Rng>(&self, rng: &mut R) -> f64 {
        self.half_gauss.as_ref().map_or(0.0, |n| n.sample(rng))
    }

    fn alice<R: Rng>(&self, rng: &mut R) -> f64 {
        self.gauss(rng).clamp(-JITTER_CLIP_PS, JITTER_CLIP_PS)
    }

    /// Bob also carries the cavity-lifetime (Lorentzian) part, so the
    /// Bob − Alice delay is Voigt distributed.
    fn bob<R: Rng>(&self, rng: &mut R) -> f64 {
        let l = self.lorentz.as_ref().map_or(0.0, |c| c.sample(rng));
        (self.gauss(rng) + l).clamp(-JITTER_CLIP_PS, JITTER_CLIP_PS)
    }
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    if lambda > 0.0 {
        Poisson::new(lambda).map_or(0, |p| p.sample(rng) as u64)
    } else {
        0
    }
}

struct Emitter<'a, S: EventSink> {
    sink: &'a mut S,
    pending: Vec<Event>,
    tally: GeneratorTally,
}

impl<S: EventSink> Emitter<'_, S> {
    fn emit(&mut self, detector: u8, t_ps: f64) {
        let ts = (t_ps + JITTER_CLIP_PS).round().max(0.0) as u64;
        self.pending.push(Event { timestamp: ts, detector });
        self.tally.events_per_detector[detector as usize] += 1;
        self.tally.total_events += 1;
    }

    /// Forwards every event that no later emission can precede.
    fn flush_before(&mut self, limit: u64) -> Result<()> {
        self.pending.sort_unstable();
        let n = self.pending.partition_point(|e| e.timestamp < limit);
        for e in self.pending.drain(..n) {
            self.sink.push(e)?;
        }
        Ok(())
    }
}

/// Runs the generator for `meta` (from [`GeneratorConfig::metadata`] with
/// the same seed) and streams time-ordered events into `sink`.
pub fn generate_to_sink<S: EventSink>(
    cfg: &GeneratorConfig,
    meta: &StreamMetadata,
    seed: u64,
    sink: &mut S,
) -> Result<GeneratorTally> {
    cfg.validate()?;
    let lp = &cfg.params;
    let d = lp.dimension;
    let model = &cfg.model;
    let tables = JointTables::new(model, d)?;
    let src = &model.source;
    let app = &model.apparatus;
    let pair_rate = f64::from(d) * src.pair_rate(lp.power_on_chip)?;
    let noise = src.noise_photon_rate(lp.power_on_chip);
    let dark = app.dark_count_rate;
    let jitter = Jitter::new(model.temporal.gaussian_sigma, model.temporal.lorentzian_gamma);
    let exposure = meta.exposure();
    let positive = |t: f64| if t > 0.0 { t } else { meta.duration.max(1.0) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut em = Emitter {
        sink,
        pending: Vec::new(),
        tally: GeneratorTally {
            true_pairs_z: CoincidenceMatrix::zeros(Basis::Z, d, positive(exposure.z)),
            true_pairs_x: CoincidenceMatrix::zeros(Basis::X, d, positive(exposure.x)),
            true_pairs_mismatched: 0,
            events_per_detector: vec![0; 4 * d as usize],
            dark_counts: 0,
            noise_counts: 0,
            total_events: 0,
        },
    };

    for (di, setting) in meta.schedule.iter().enumerate() {
        let dwell_start = di as f64 * meta.dwell;
        let dwell_end = (dwell_start + meta.dwell).min(meta.duration);
        let (ba, bb) = (setting.alice.basis, setting.bob.basis);
        let (sa, sb) = (active(&setting.alice, d), active(&setting.bob, d));
        let ta = app.arm_transmission(ba, lp.applied_attenuation, d);
        let tb = app.arm_transmission(bb, lp.applied_attenuation, d);
        let key_map = OutcomeCorrelation::for_basis(d, bb);

        let mut c0 = dwell_start;
        while c0 < dwell_end {
            let c1 = (c0 + cfg.chunk).min(dwell_end);
            let len = c1 - c0;
            let (p0, plen) = (c0 * PS, len * PS);
            let at = |rng: &mut ChaCha8Rng| p0 + rng.random::<f64>() * plen;

            for &a in &sa {
                for &b in &sb {
                    let n = poisson(&mut rng, pair_rate * len * ta * tb * tables.get(ba, bb, a, b));
                    for _ in 0..n {
                        let t0 = at(&mut rng);
                        let ja = jitter.alice(&mut rng);
                        let jb = jitter.bob(&mut rng);
                        em.emit(detector_id(d, User::Alice, ba, a), t0 + ja);
                        em.emit(detector_id(d, User::Bob, bb, b), t0 + jb);
                    }
                    if ba == bb {
                        let m = if ba == Basis::Z { &mut em.tally.true_pairs_z } else { &mut em.tally.true_pairs_x };
                        m.add(a, key_map.apply(b), n as f64);
                    } else {
                        em.tally.true_pairs_mismatched += n;
                    }
                }
            }
            for &a in &sa {
                let marginal: f64 = (0..d).map(|b| tables.get(ba, bb, a, b)).sum();
                let seen: f64 = sb.iter().map(|&b| tables.get(ba, bb, a, b)).sum();
                let n = poisson(&mut rng, pair_rate * len * ta * (marginal - tb * seen).max(0.0));
                let id = detector_id(d, User::Alice, ba, a);
                for _ in 0..n {
                    let t = at(&mut rng) + jitter.alice(&mut rng);
                    em.emit(id, t);
                }
            }
            for &b in &sb {
                let marginal: f64 = (0..d).map(|a| tables.get(ba, bb, a, b)).sum();
                let seen: f64 = sa.iter().map(|&a| tables.get(ba, bb, a, b)).sum();
                let n = poisson(&mut rng, pair_rate * len * tb * (marginal - ta * seen).max(0.0));
                let id = detector_id(d, User::Bob, bb, b);
                for _ in 0..n {
                    let t = at(&mut rng) + jitter.bob(&mut rng);
                    em.emit(id, t);
                }
            }
            for (user, basis, set, t) in [(User::Alice, ba, &sa, ta), (User::Bob, bb, &sb, tb)] {
                for &k in set.iter() {
                    let id = detector_id(d, user, basis, k);
                    let nn = poisson(&mut rng, noise * t * len);
                    let nd = poisson(&mut rng, dark * len);
                    em.tally.noise_counts += nn;
                    em.tally.dark_counts += nd;
                    for _ in 0..nn + nd {
                        let t = at(&mut rng);
                        em.emit(id, t);
                    }
                }
            }
            // anything emitted later lands at or after c1 - clip
            em.flush_before((c1 * PS).round() as u64)?;
            c0 = c1;
        }
    }
    em.flush_before(u64::MAX)?;
    Ok(em.tally)
}

/// Generates a full stream in memory.
pub fn generate_stream(cfg: &GeneratorConfig, seed: u64) -> Result<(TimetagStream, GeneratorTally)> {
    let meta = cfg.metadata(seed)?;
    let mut events = Vec::new();
    let tally = generate_to_sink(cfg, &meta, seed, &mut events)?;
    Ok((
        TimetagStream {
            metadata: meta,
            events,
        },
        tally,
    ))
}
