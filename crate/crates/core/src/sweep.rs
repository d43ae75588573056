//! Power/window cartography, attenuation scaling and dimension choice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::keyrate::{self, KeyRateReport, DEFAULT_F};
use crate::link::{self, ApparatusParams, CoincidenceMatrix, LinkParams, LinkRates, SourceModel, TemporalProfile};
use crate::qudit::{self, Basis, BellStateSpec, Imperfection};
use crate::spectrum::{ChannelSpec, FrequencyComb};

/// Bisection resolution for extinction and crossover, dB.
pub const RANGE_RESOLUTION: f64 = 0.1;

/// Everything needed to evaluate a link end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    pub source: SourceModel,
    pub apparatus: ApparatusParams,
    pub temporal: TemporalProfile,
    /// Residual spectral phase step between adjacent comb modes, rad.
    pub phase_slope: f64,
    /// Apparatus imperfections of the X projections.
    pub alice_x: Imperfection,
    pub bob_x: Imperfection,
    pub post_processing_f: f64,
    /// Multiplier on accidental coincidences.
    pub accidental_scale: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            source: SourceModel::default(),
            apparatus: ApparatusParams::default(),
            temporal: TemporalProfile::default(),
            phase_slope: FrequencyComb::default().phase_slope,
            alice_x: Imperfection::ideal(),
            bob_x: Imperfection::ideal(),
            post_processing_f: DEFAULT_F,
            accidental_scale: 1.0,
        }
    }
}

/// One fully evaluated operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub params: LinkParams,
    pub rates_z: LinkRates,
    pub rates_x: LinkRates,
    pub intrinsic_z: f64,
    pub intrinsic_x: f64,
    pub matrix_z: CoincidenceMatrix,
    pub matrix_x: CoincidenceMatrix,
    pub report: KeyRateReport,
}

#[derive(Debug, Clone, Copy)]
struct Intrinsic {
    z: f64,
    x: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.apparatus.validate()?;
        self.temporal.validate()?;
        if !(self.post_processing_f >= 1.0) {
            return Err(argument(format!("f must be >= 1, got {}", self.post_processing_f)));
        }
        if !(self.accidental_scale >= 0.0) {
            return Err(argument("accidental_scale must be >= 0"));
        }
        Ok(())
    }

    /// Bell state used for dimension `d`. Qubits and qutrits ride in a
    /// three-resonance channel (qubits on the outer modes); larger `d` use
    /// contiguous modes.
    pub fn state(&self, d: u32) -> Result<BellStateSpec> {
        let comb = FrequencyComb {
            phase_slope: self.phase_slope,
            ..FrequencyComb::default()
        };
        if d <= 3 {
            BellStateSpec::from_channel(&comb, &ChannelSpec::new(1, 3)?, d)
        } else {
            BellStateSpec::with_phase_slope(d, 0, self.phase_slope)
        }
    }

    /// Off-diagonal fractions of true coincidences `(ε_Z, ε_X)`, including
    /// the depolarising X mixing penalty for this dimension.
    pub fn intrinsic_errors(&self, d: u32) -> Result<(f64, f64)> {
        let state = self.state(d)?;
        let (ez, ex) = qudit::intrinsic_error_rates(&state, &self.alice_x, &self.bob_x)?;
        let mix = self.apparatus.x_mixing_error(d);
        let df = f64::from(d);
        Ok((ez, (1.0 - mix) * ex + mix * (df - 1.0) / df))
    }

    fn intrinsic(&self, d: u32) -> Result<Intrinsic> {
        let (z, x) = self.intrinsic_errors(d)?;
        Ok(Intrinsic { z, x })
    }

    fn rates(&self, eta: f64, lp: &LinkParams, basis: Basis) -> LinkRates {
        let mut r = link::rates_with_efficiency(&self.source, &self.apparatus, eta, lp, basis);
        r.accidental_rate *= self.accidental_scale;
        r
    }

    /// Expected rates, matrices and key rate at `lp`.
    pub fn evaluate(&self, lp: &LinkParams) -> Result<Evaluation> {
        self.validate()?;
        lp.validate()?;
        let eta = self.temporal.window_efficiency(lp.coincidence_window)?;
        let intr = self.intrinsic(lp.dimension)?;
        self.evaluate_with(lp, eta, intr)
    }

    fn evaluate_with(&self, lp: &LinkParams, eta: f64, intr: Intrinsic) -> Result<Evaluation> {
        let rates_z = self.rates(eta, lp, Basis::Z);
        let rates_x = self.rates(eta, lp, Basis::X);
        let matrix_z = link::expected_matrix(&rates_z, intr.z, lp)?;
        let matrix_x = link::expected_matrix(&rates_x, intr.x, lp)?;
        let report = report_or_zero(&matrix_z, &matrix_x, self.post_processing_f)?;
        Ok(Evaluation {
            params: *lp,
            rates_z,
            rates_x,
            intrinsic_z: intr.z,
            intrinsic_x: intr.x,
            matrix_z,
            matrix_x,
            report,
        })
    }

    /// Key rate only, on the hot path of the sweeps.
    fn point(&self, lp: &LinkParams, eta: f64, intr: Intrinsic) -> KeyRateReport {
        let d = lp.dimension;
        let df = f64::from(d);
        let mut cells = [(0.0, 0.0); 2];
        for (slot, basis, eps) in [(0, Basis::Z, intr.z), (1, Basis::X, intr.x)] {
            let r = self.rates(eta, lp, basis);
            let duty = link::basis_duty(basis, d) * lp.integration_time;
            let true_total = df * r.true_rate;
            let acc_total = df * df * r.accidental_rate;
            let total = (true_total + acc_total) * duty;
            let off = (true_total * eps + df * (df - 1.0) * r.accidental_rate) * duty;
            cells[slot] = (total, off);
        }
        let raw = (cells[0].0 + cells[1].0) / (2.0 * lp.integration_time);
        let q = |(total, off): (f64, f64)| if total > 0.0 { (off / total).clamp(0.0, 1.0) } else { 0.0 };
        zero_safe_skr(d, raw, q(cells[0]), q(cells[1]), self.post_processing_f)
    }
}

fn zero_safe_skr(d: u32, raw: f64, qz: f64, qx: f64, f: f64) -> KeyRateReport {
    // QBER of exactly 1 (no diagonal) is outside the entropy domain, and
    // carries no key anyway
    if raw > 0.0 && qz < 1.0 && qx < 1.0 {
        if let Ok(r) = keyrate::skr(d, raw, qz, qx, f) {
            return r;
        }
    }
    KeyRateReport {
        qber_z: qz,
        qber_x: qx,
        raw_rate: raw,
        skr: 0.0,
        secure: false,
        dimension: d,
        post_processing_f: f,
    }
}

fn report_or_zero(mz: &CoincidenceMatrix, mx: &CoincidenceMatrix, f: f64) -> Result<KeyRateReport> {
    let raw = keyrate::raw_rate(mz, mx)?;
    let q = |m: &CoincidenceMatrix| if m.total() > 0.0 { keyrate::qber(m) } else { Ok(0.0) };
    Ok(zero_safe_skr(mz.dimension, raw, q(mz)?, q(mx)?, f))
}

/// Rectangular grid over pump power and coincidence window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub power_min: f64,
    pub power_max: f64,
    pub power_step: f64,
    pub window_min: f64,
    pub window_max: f64,
    pub window_step: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            power_min: 1.0,
            power_max: 8.0,
            power_step: 0.1,
            window_min: 30.0,
            window_max: 1500.0,
            window_step: 5.0,
        }
    }
}

fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| min + step * i as f64).collect()
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_step > 0.0 && self.window_step > 0.0) {
            return Err(argument("grid steps must be > 0"));
        }
        if !(self.power_min >= 0.0 && self.power_max >= self.power_min) {
            return Err(argument(format!(
                "invalid power range [{}, {}]",
                self.power_min, self.power_max
            )));
        }
        if !(self.window_min > 0.0 && self.window_max >= self.window_min) {
            return Err(argument(format!(
                "invalid window range [{}, {}]",
                self.window_min, self.window_max
            )));
        }
        Ok(())
    }

    pub fn powers(&self) -> Vec<f64> {
        axis(self.power_min, self.power_max, self.power_step)
    }

    pub fn windows(&self) -> Vec<f64> {
        axis(self.window_min, self.window_max, self.window_step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub power: f64,
    pub window: f64,
    pub report: KeyRateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub dimension: u32,
    pub attenuation: f64,
    pub powers: Vec<f64>,
    pub windows: Vec<f64>,
    /// Power-major: index `i * windows.len() + j`.
    pub points: Vec<SweepPoint>,
    pub optimum: SweepPoint,
}

impl SweepResult {
    pub fn skr_at(&self, power_index: usize, window_index: usize) -> f64 {
        self.points[power_index * self.windows.len() + window_index].skr()
    }

    /// True when the optimum sits on the grid boundary.
    pub fn optimum_on_boundary(&self) -> bool {
        let p = &self.optimum;
        let eq = |a: f64, b: f64| (a - b).abs() < 1e-9;
        eq(p.power, self.powers[0])
            || eq(p.power, *self.powers.last().unwrap())
            || eq(p.window, self.windows[0])
            || eq(p.window, *self.windows.last().unwrap())
    }
}

impl SweepPoint {
    pub fn skr(&self) -> f64 {
        self.report.skr
    }
}

/// Grid argmax; ties go to the first point in power-major order, i.e. the
/// smallest power and then the smallest window.
fn argmax(points: &[SweepPoint]) -> SweepPoint {
    let mut best = points[0];
    for p in &points[1..] {
        if p.skr() > best.skr() {
            best = *p;
        }
    }
    best
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| argument(format!("worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

struct Prepared {
    powers: Vec<f64>,
    windows: Vec<f64>,
    etas: Vec<f64>,
}

impl Prepared {
    fn new(model: &ChannelModel, grid: &SweepGrid) -> Result<Self> {
        model.validate()?;
        grid.validate()?;
        let windows = grid.windows();
        let etas = windows
            .par_iter()
            .map(|&w| model.temporal.window_efficiency(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            powers: grid.powers(),
            windows,
            etas,
        })
    }

    fn point(&self, model: &ChannelModel, intr: Intrinsic, base: &LinkParams, i: usize, j: usize) -> SweepPoint {
        let lp = LinkParams {
            power_on_chip: self.powers[i],
            coincidence_window: self.windows[j],
            ..*base
        };
        SweepPoint {
            power: lp.power_on_chip,
            window: lp.coincidence_window,
            report: model.point(&lp, self.etas[j], intr),
        }
    }

    fn best(&self, model: &ChannelModel, intr: Intrinsic, base: &LinkParams) -> SweepPoint {
        let nw = self.windows.len();
        let pts: Vec<SweepPoint> = (0..self.powers.len() * nw)
            .map(|k| self.point(model, intr, base, k / nw, k % nw))
            .collect();
        argmax(&pts)
    }
}

fn base_params(d: u32, attenuation: f64) -> Result<LinkParams> {
    let lp = LinkParams::new(1.0, 1.0, d).with_attenuation(attenuation);
    lp.validate()?;
    Ok(lp)
}

/// SKR over the whole grid at fixed attenuation, on the global pool.
pub fn cartography(model: &ChannelModel, grid: &SweepGrid, d: u32, attenuation: f64) -> Result<SweepResult> {
    cartography_with_workers(model, grid, d, attenuation, None)
}

/// As [`cartography`], with an explicit worker count. Output does not
/// depend on the number of workers.
pub fn cartography_with_workers(
    model: &ChannelModel,
    grid: &SweepGrid,
    d: u32,
    attenuation: f64,
    workers: Option<usize>,
) -> Result<SweepResult> {
    let base = base_params(d, attenuation)?;
    let intr = model.intrinsic(d)?;
    with_pool(workers, || -> Result<SweepResult> {
        let prep = Prepared::new(model, grid)?;
        let nw = prep.windows.len();
        let points: Vec<SweepPoint> = (0..prep.powers.len() * nw)
            .into_par_iter()
            .map(|k| prep.point(model, intr, &base, k / nw, k % nw))
            .collect();
        let optimum = argmax(&points);
        Ok(SweepResult {
            dimension: d,
            attenuation,
            powers: prep.powers,
            windows: prep.windows,
            points,
            optimum,
        })
    })?
}

/// Optimum location per dimension and whether power and window are
/// non-increasing with `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionOrdering {
    /// `(d, P_op, Δt_op, SKR_max)`, ascending in `d`.
    pub optima: Vec<(u32, f64, f64, f64)>,
    pub power_ordering_holds: bool,
    pub window_ordering_holds: bool,
}

pub fn dimension_ordering(results: &[SweepResult]) -> Result<DimensionOrdering> {
    if results.len() < 2 {
        return Err(argument("need sweep results for at least two dimensions"));
    }
    let mut optima: Vec<_> = results
        .iter()
        .map(|r| (r.dimension, r.optimum.power, r.optimum.window, r.optimum.skr()))
        .collect();
    optima.sort_by_key(|o| o.0);
    let power_ordering_holds = optima.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let window_ordering_holds = optima.windows(2).all(|w| w[1].2 <= w[0].2 + 1e-12);
    Ok(DimensionOrdering {
        optima,
        power_ordering_holds,
        window_ordering_holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangePoint {
    pub attenuation: f64,
    pub power: f64,
    pub window: f64,
    pub skr: f64,
    pub qber_z: f64,
    pub qber_x: f64,
    pub raw_rate: f64,
}

impl RangePoint {
    fn from_sweep(attenuation: f64, p: &SweepPoint) -> Self {
        Self {
            attenuation,
            power: p.power,
            window: p.window,
            skr: p.report.skr,
            qber_z: p.report.qber_z,
            qber_x: p.report.qber_x,
            raw_rate: p.report.raw_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extinction {
    /// dB at which the optimized SKR first reaches zero.
    pub attenuation: f64,
    /// SKR still positive at the end of the scanned grid.
    pub beyond_grid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeCurve {
    pub dimension: u32,
    pub points: Vec<RangePoint>,
    pub extinction: Extinction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeResult {
    pub attenuations: Vec<f64>,
    pub curves: Vec<RangeCurve>,
    /// Largest extinction over all scanned dimensions, dB.
    pub max_attenuation: f64,
    pub max_attenuation_beyond_grid: bool,
    /// dB where SKR(d=3) - SKR(d=2) turns negative, if both were scanned.
    pub crossover: Option<f64>,
}

impl RangeResult {
    pub fn curve(&self, d: u32) -> Option<&RangeCurve> {
        self.curves.iter().find(|c| c.dimension == d)
    }
}

/// Re-optimizes `(P, Δt)` at every attenuation for every dimension, then
/// locates extinctions and the qutrit/qubit crossover by bisection.
pub fn range_scan(
    model: &ChannelModel,
    grid: &SweepGrid,
    dimensions: &[u32],
    attenuations: &[f64],
    workers: Option<usize>,
) -> Result<RangeResult> {
    if dimensions.is_empty() || attenuations.is_empty() {
        return Err(argument("range scan needs at least one dimension and one attenuation"));
    }
    if attenuations.windows(2).any(|w| w[1] <= w[0]) {
        return Err(argument("attenuation grid must be strictly ascending"));
    }
    for &a in attenuations {
        base_params(2, a)?;
    }
    let intrinsic = dimensions
        .iter()
        .map(|&d| {
            base_params(d, 0.0)?;
            model.intrinsic(d)
        })
        .collect::<Result<Vec<_>>>()?;
    with_pool(workers, || -> Result<RangeResult> {
        let prep = Prepared::new(model, grid)?;
        let optimize = |di: usize, a: f64| -> SweepPoint {
            let base = LinkParams::new(1.0, 1.0, dimensions[di]).with_attenuation(a);
            prep.best(model, intrinsic[di], &base)
        };
        let na = attenuations.len();
        let best: Vec<SweepPoint> = (0..dimensions.len() * na)
            .into_par_iter()
            .map(|k| optimize(k / na, attenuations[k % na]))
            .collect();

        let curves: Vec<RangeCurve> = dimensions
            .par_iter()
            .enumerate()
            .map(|(di, &d)| {
                let row = &best[di * na..(di + 1) * na];
                let points: Vec<RangePoint> = row
                    .iter()
                    .zip(attenuations)
                    .map(|(p, &a)| RangePoint::from_sweep(a, p))
                    .collect();
                let extinction = extinction(&points, |a| optimize(di, a).skr());
                RangeCurve {
                    dimension: d,
                    points,
                    extinction,
                }
            })
            .collect();

        let (max_attenuation, max_attenuation_beyond_grid) = curves
            .iter()
            .map(|c| (c.extinction.attenuation, c.extinction.beyond_grid))
            .fold((0.0, false), |acc, e| if e.0 > acc.0 { e } else { acc });

        let crossover = match (
            dimensions.iter().position(|&d| d == 3),
            dimensions.iter().position(|&d| d == 2),
        ) {
            (Some(i3), Some(i2)) => crossover(&curves[i3].points, &curves[i2].points, |a| {
                optimize(i3, a).skr() - optimize(i2, a).skr()
            }),
            _ => None,
        };

        Ok(RangeResult {
            attenuations: attenuations.to_vec(),
            curves,
            max_attenuation,
            max_attenuation_beyond_grid,
            crossover,
        })
    })?
}

fn bisect(mut lo: f64, mut hi: f64, positive: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > RANGE_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn extinction(points: &[RangePoint], skr_at: impl Fn(f64) -> f64) -> Extinction {
    if points[0].skr <= 0.0 {
        return Extinction {
            attenuation: 0.0,
            beyond_grid: false,
        };
    }
    match points.iter().position(|p| p.skr <= 0.0) {
        None => Extinction {
            attenuation: points.last().unwrap().attenuation,
            beyond_grid: true,
        },
        Some(i) => Extinction {
            attenuation: bisect(points[i - 1].attenuation, points[i].attenuation, |a| skr_at(a) > 0.0),
            beyond_grid: false,
        },
    }
}

fn crossover(high: &[RangePoint], low: &[RangePoint], diff_at: impl Fn(f64) -> f64) -> Option<f64> {
    (1..high.len()).find_map(|i| {
        let before = high[i - 1].skr > 0.0 && low[i - 1].skr > 0.0 && high[i - 1].skr > low[i - 1].skr;
        let after = high[i].skr <= low[i].skr && low[i].skr > 0.0;
        (before && after).then(|| bisect(high[i - 1].attenuation, high[i].attenuation, |a| diff_at(a) > 0.0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionVerdict {
    Dimension(u32),
    NoSecureChannel,
}

/// Dimension with the largest SKR at `attenuation`, ties to the smaller
/// `d`. Between grid points the curves are interpolated linearly; beyond a
/// curve's extinction its SKR is zero.
pub fn recommend_dimension(range: &RangeResult, attenuation: f64) -> Result<DimensionVerdict> {
    let (first, last) = (range.attenuations[0], *range.attenuations.last().unwrap());
    if !(attenuation >= first && attenuation <= last) {
        return Err(argument(format!(
            "attenuation {attenuation} dB outside scanned range [{first}, {last}]"
        )));
    }
    let mut curves: Vec<&RangeCurve> = range.curves.iter().collect();
    curves.sort_by_key(|c| c.dimension);
    let mut best: Option<(u32, f64)> = None;
    for c in curves {
        let s = interpolate(c, attenuation);
        if s > 0.0 && best.is_none_or(|(_, b)| s > b) {
            best = Some((c.dimension, s));
        }
    }
    Ok(best.map_or(DimensionVerdict::NoSecureChannel, |(d, _)| DimensionVerdict::Dimension(d)))
}

fn interpolate(c: &RangeCurve, a: f64) -> f64 {
    if !c.extinction.beyond_grid && a >= c.extinction.attenuation {
        return 0.0;
    }
    let pts = &c.points;
    let i = pts.partition_point(|p| p.attenuation <= a);
    if i == 0 {
        return pts[0].skr;
    }
    if i == pts.len() {
        return pts[i - 1].skr;
    }
    let (p, q) = (&pts[i - 1], &pts[i]);
    let t = (a - p.attenuation) / (q.attenuation - p.attenuation);
    p.skr + t * (q.skr - p.skr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepGrid {
        SweepGrid {
            power_min: 2.0,
            power_max: 5.0,
            power_step: 0.5,
            window_min: 100.0,
            window_max: 600.0,
            window_step: 50.0,
        }
    }

    #[test]
    fn axis_counts() {
        let g = SweepGrid::default();
        assert_eq!(g.powers().len(), 71);
        assert_eq!(g.windows().len(), 295);
        assert!((g.powers()[70] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn fast_path_matches_matrices() {
        let m = ChannelModel::default();
        for (p, w, d, a) in [(3.5, 285.0, 3, 0.0), (2.0, 900.0, 2, 30.0), (6.0, 100.0, 5, 10.0)] {
            let lp = LinkParams::new(p, w, d).with_attenuation(a);
            let full = m.evaluate(&lp).unwrap();
            let eta = m.temporal.window_efficiency(w).unwrap();
            let fast = m.point(&lp, eta, m.intrinsic(d).unwrap());
            let r = full.report;
            assert!((fast.skr - r.skr).abs() <= 1e-9 * r.skr.max(1.0));
            assert!((fast.qber_z - r.qber_z).abs() < 1e-12);
            assert!((fast.qber_x - r.qber_x).abs() < 1e-12);
            assert!((fast.raw_rate - r.raw_rate).abs() <= 1e-9 * r.raw_rate);
        }
    }

    #[test]
    fn toy_grid_matches_exhaustive_scan() {
        let m = ChannelModel::default();
        let g = SweepGrid {
            power_min: 3.0,
            power_max: 4.0,
            power_step: 0.5,
            window_min: 200.0,
            window_max: 400.0,
            window_step: 100.0,
        };
        let r = cartography(&m, &g, 3, 0.0).unwrap();
        let mut best = (f64::MIN, 0.0, 0.0);
        for p in [3.0, 3.5, 4.0] {
            for w in [200.0, 300.0, 400.0] {
                let s = m.evaluate(&LinkParams::new(p, w, 3)).unwrap().report.skr;
                if s > best.0 {
                    best = (s, p, w);
                }
            }
        }
        assert_eq!((r.optimum.power, r.optimum.window), (best.1, best.2));
    }

    #[test]
    fn saturated_noise_gives_corner_optimum() {
        let mut m = ChannelModel::default();
        m.apparatus.dark_count_rate = 1e9;
        let r = cartography(&m, &small(), 2, 0.0).unwrap();
        assert!(r.points.iter().all(|p| p.skr() == 0.0));
        assert_eq!((r.optimum.power, r.optimum.window), (2.0, 100.0));
    }

    #[test]
    fn workers_do_not_change_results() {
        let m = ChannelModel::default();
        let a = cartography_with_workers(&m, &small(), 3, 5.0, Some(1)).unwrap();
        let b = cartography_with_workers(&m, &small(), 3, 5.0, Some(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lossless_noise_limit_never_extinguishes() {
        let mut m = ChannelModel::default();
        m.apparatus.dark_count_rate = 0.0;
        m.source.noise_rate = 0.0;
        let alphas: Vec<f64> = (0..=8).map(|i| f64::from(i) * 10.0).collect();
        let r = range_scan(&m, &small(), &[2], &alphas, None).unwrap();
        assert!(r.max_attenuation_beyond_grid);
        assert_eq!(r.max_attenuation, 80.0);
        let c = r.curve(2).unwrap();
        for w in c.points.windows(2) {
            let ratio = w[1].skr / w[0].skr;
            assert!((ratio - 0.1).abs() < 1e-9, "{ratio}");
        }
    }

    #[test]
    fn recommend_examples() {
        let m = ChannelModel::default();
        let alphas: Vec<f64> = (0..=70).map(f64::from).collect();
        let g = SweepGrid {
            power_step: 0.25,
            window_step: 20.0,
            ..SweepGrid::default()
        };
        let r = range_scan(&m, &g, &[2, 3], &alphas, None).unwrap();
        assert_eq!(recommend_dimension(&r, 0.0).unwrap(), DimensionVerdict::Dimension(3));
        assert_eq!(recommend_dimension(&r, 57.0).unwrap(), DimensionVerdict::Dimension(2));
        assert_eq!(recommend_dimension(&r, 69.0).unwrap(), DimensionVerdict::NoSecureChannel);
        assert!(recommend_dimension(&r, 80.0).is_err());
    }

    #[test]
    fn ordering_needs_two() {
        let m = ChannelModel::default();
        let one = cartography(&m, &small(), 2, 0.0).unwrap();
        assert!(dimension_ordering(std::slice::from_ref(&one)).is_err());
        let same = dimension_ordering(&[one.clone(), one]).unwrap();
        assert!(same.power_ordering_holds && same.window_ordering_holds);
    }
}
