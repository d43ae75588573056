//! Delay histograms and the Voigt fit.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Event, EventSink, StreamMetadata, TimetagStream, User};
use crate::error::{argument, Error, Result};
use crate::link::voigt::{voigt_density, voigt_fwhm};

/// Histogram of Bob − Alice delays over `[-span, +span]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayHistogram {
    /// ps.
    pub bin_width: f64,
    /// ps.
    pub span: f64,
    pub counts: Vec<u64>,
}

impl DelayHistogram {
    pub fn new(bin_width: f64, span: f64) -> Result<Self> {
        if !(bin_width > 0.0 && span > bin_width) {
            return Err(argument(format!(
                "histogram needs bin > 0 and span > bin, got bin {bin_width} span {span}"
            )));
        }
        let n = (2.0 * span / bin_width).ceil() as usize;
        Ok(Self {
            bin_width,
            span,
            counts: vec![0; n],
        })
    }

    pub fn add(&mut self, delay: f64) {
        if delay.abs() > self.span {
            return;
        }
        let i = ((delay + self.span) / self.bin_width).floor() as usize;
        let last = self.counts.len() - 1;
        self.counts[i.min(last)] += 1;
    }

    pub fn center(&self, i: usize) -> f64 {
        -self.span + (i as f64 + 0.5) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn median(&self) -> f64 {
        let mut v: Vec<u64> = self.counts.clone();
        v.sort_unstable();
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2] as f64
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2]) as f64
        }
    }

    /// Mean of the outer 5 % of bins on each side.
    pub fn edge_floor(&self) -> f64 {
        let n = self.counts.len();
        let k = (n / 20).max(1);
        let edge: u64 = self.counts[..k].iter().chain(&self.counts[n - k..]).sum();
        edge as f64 / (2 * k) as f64
    }

    /// Width at half height above the edge floor, by linear interpolation
    /// between bin centres.
    pub fn fwhm(&self) -> Option<f64> {
        let floor = self.edge_floor();
        let (peak_i, &peak) = self.counts.iter().enumerate().max_by_key(|(_, c)| **c)?;
        let half = floor + 0.5 * (peak as f64 - floor);
        if !(peak as f64 > floor) {
            return None;
        }
        let y = |i: usize| self.counts[i] as f64;
        let mut left = None;
        for i in (0..peak_i).rev() {
            if y(i) <= half {
                let t = (half - y(i)) / (y(i + 1) - y(i));
                left = Some(self.center(i) + t * self.bin_width);
                break;
            }
        }
        let mut right = None;
        for i in peak_i + 1..self.counts.len() {
            if y(i) <= half {
                let t = (y(i - 1) - half) / (y(i - 1) - y(i));
                right = Some(self.center(i - 1) + t * self.bin_width);
                break;
            }
        }
        Some(right? - left?)
    }
}

/// Streaming histogram of every Alice/Bob pair within the span.
pub struct HistogramBuilder {
    hist: DelayHistogram,
    span: u64,
    users: Vec<Option<User>>,
    filter: Option<(u8, u8)>,
    alice: VecDeque<u64>,
    bob: VecDeque<u64>,
}

impl HistogramBuilder {
    pub fn new(meta: &StreamMetadata, bin_width: f64, span: f64) -> Result<Self> {
        let hist = DelayHistogram::new(bin_width, span)?;
        let users = meta.lookup().iter().map(|d| d.map(|d| d.user)).collect();
        Ok(Self {
            hist,
            span: span.floor() as u64,
            users,
            filter: None,
            alice: VecDeque::new(),
            bob: VecDeque::new(),
        })
    }

    /// Restrict to one Alice detector and one Bob detector.
    pub fn with_pair(mut self, alice: u8, bob: u8) -> Self {
        self.filter = Some((alice, bob));
        self
    }

    pub fn finish(self) -> DelayHistogram {
        self.hist
    }
}

impl EventSink for HistogramBuilder {
    fn push(&mut self, e: Event) -> Result<()> {
        let user = self.users[e.detector as usize]
            .ok_or_else(|| Error::Data(format!("unknown detector id {}", e.detector)))?;
        if let Some((a, b)) = self.filter {
            let wanted = match user {
                User::Alice => a,
                User::Bob => b,
            };
            if e.detector != wanted {
                return Ok(());
            }
        }
        let horizon = e.timestamp.saturating_sub(self.span);
        while self.alice.front().is_some_and(|&t| t < horizon) {
            self.alice.pop_front();
        }
        while self.bob.front().is_some_and(|&t| t < horizon) {
            self.bob.pop_front();
        }
        let now = e.timestamp as f64;
        match user {
            User::Alice => {
                for &tb in &self.bob {
                    self.hist.add(tb as f64 - now);
                }
                self.alice.push_back(e.timestamp);
            }
            User::Bob => {
                for &ta in &self.alice {
                    self.hist.add(now - ta as f64);
                }
                self.bob.push_back(e.timestamp);
            }
        }
        Ok(())
    }
}

/// Histogram of all Alice–Bob delays in an in-memory stream.
pub fn delay_histogram(stream: &TimetagStream, bin_width: f64, span: f64) -> Result<DelayHistogram> {
    let mut b = HistogramBuilder::new(&stream.metadata, bin_width, span)?;
    for &e in &stream.events {
        b.push(e)?;
    }
    Ok(b.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoigtFit {
    /// ps.
    pub sigma: f64,
    /// ps.
    pub gamma: f64,
    /// Counts under the peak.
    pub amplitude: f64,
    /// Counts per bin.
    pub offset: f64,
    /// Reduced chi-square with Poisson weights.
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl VoigtFit {
    pub fn fwhm(&self) -> f64 {
        voigt_fwhm(self.sigma, self.gamma)
    }
}

/// Lower bound on both widths, ps.
pub const WIDTH_FLOOR: f64 = 0.1;
const REL_TOL: f64 = 1e-4;
const MAX_ITER: usize = 4000;

struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    bin: f64,
}

impl Problem {
    /// Best amplitude and offset for fixed widths, and the weighted SSR.
    fn solve(&self, sigma: f64, gamma: f64) -> (f64, f64, f64) {
        let shape: Vec<f64> = self.x.iter().map(|&t| self.bin * voigt_density(t, sigma, gamma)).collect();
        let (mut saa, mut sab, mut sbb, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&v, &y), &w) in shape.iter().zip(&self.y).zip(&self.w) {
            saa += w * v * v;
            sab += w * v;
            sbb += w;
            say += w * v * y;
            sby += w * y;
        }
        let det = saa * sbb - sab * sab;
        let (a, b) = if det.abs() > 0.0 {
            ((say * sbb - sab * sby) / det, (saa * sby - sab * say) / det)
        } else {
            (0.0, sby / sbb)
        };
        let ssr = shape
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&v, &y), &w)| w * (y - a * v - b).powi(2))
            .sum();
        (a, b, ssr)
    }

    fn cost(&self, p: [f64; 2]) -> f64 {
        self.solve(p[0].max(WIDTH_FLOOR), p[1].max(WIDTH_FLOOR)).2
    }
}

fn clamp(p: [f64; 2]) -> [f64; 2] {
    [p[0].max(WIDTH_FLOOR), p[1].max(WIDTH_FLOOR)]
}

/// Least-squares fit of `amplitude · V(t; σ, γ) + offset`.
///
/// Amplitude and offset are solved exactly for each `(σ, γ)`; the widths
/// come from a log-spaced grid refined by Nelder–Mead until the simplex
/// spans less than 1e-4 relative in both widths.
pub fn fit_voigt(h: &DelayHistogram) -> Result<VoigtFit> {
    let median = h.median();
    let peak = h.counts.iter().copied().max().unwrap_or(0) as f64;
    if !(peak > 0.0 && peak > 5.0 * median) {
        return Err(Error::FitRejected(format!(
            "no dominant peak (max bin {peak}, median {median})"
        )));
    }
    let prob = Problem {
        x: (0..h.counts.len()).map(|i| h.center(i)).collect(),
        y: h.counts.iter().map(|&c| c as f64).collect(),
        w: h.counts.iter().map(|&c| 1.0 / (c as f64).max(1.0)).collect(),
        bin: h.bin_width,
    };
    let scale = h.fwhm().unwrap_or(h.bin_width * 4.0).max(h.bin_width);

    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    };
    let mut best = ([scale / 2.355, WIDTH_FLOOR], f64::INFINITY);
    for &s in &grid(0.02 * scale, 0.8 * scale, 14) {
        for &g in std::iter::once(&WIDTH_FLOOR).chain(&grid(0.005 * scale, 0.8 * scale, 14)) {
            let c = prob.cost([s, g]);
            if c < best.1 {
                best = ([s, g], c);
            }
        }
    }

    let x0 = best.0;
    let mut simplex = [
        x0,
        clamp([x0[0] * 1.1, x0[1]]),
        clamp([x0[0], x0[1] * 1.1 + 0.05 * scale]),
    ];
    let mut vals = simplex.map(|p| prob.cost(p));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);
        let spread = (1..3)
            .map(|i| {
                (0..2)
                    .map(|k| (simplex[i][k] - simplex[0][k]).abs() / simplex[0][k].abs().max(WIDTH_FLOOR))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread < REL_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let c = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along = |t: f64| clamp([c[0] + t * (simplex[2][0] - c[0]), c[1] + t * (simplex[2][1] - c[1])]);
        let r = along(-1.0);
        let fr = prob.cost(r);
        if fr < vals[0] {
            let e = along(-2.0);
            let fe = prob.cost(e);
            (simplex[2], vals[2]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < vals[1] {
            (simplex[2], vals[2]) = (r, fr);
        } else {
            let k = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fk = prob.cost(k);
            if fk < vals[2].min(fr) {
                (simplex[2], vals[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    simplex[i] = clamp([
                        (simplex[0][0] + simplex[i][0]) / 2.0,
                        (simplex[0][1] + simplex[i][1]) / 2.0,
                    ]);
                    vals[i] = prob.cost(simplex[i]);
                }
            }
        }
    }
    let [sigma, gamma] = clamp(simplex[0]);
    let (amplitude, offset, ssr) = prob.solve(sigma, gamma);
    let dof = (prob.x.len() as f64 - 4.0).max(1.0);
    Ok(VoigtFit {
        sigma,
        gamma,
        amplitude,
        offset,
        reduced_chi2: ssr / dof,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::voigt::gauss_density;

    fn synth(sigma: f64, gamma: f64, area: f64, offset: f64) -> DelayHistogram {
        let mut h = DelayHistogram::new(8.0, 2000.0).unwrap();
        for i in 0..h.counts.len() {
            let t = h.center(i);
            let v = if gamma > 0.0 { voigt_density(t, sigma, gamma) } else { gauss_density(t, sigma) };
            h.counts[i] = (area * h.bin_width * v + offset).round() as u64;
        }
        h
    }

    #[test]
    fn recovers_widths_from_noiseless_histogram() {
        let h = synth(123.2, 99.3, 1e9, 50.0);
        let f = fit_voigt(&h).unwrap();
        assert!(f.converged);
        assert!((f.sigma - 123.2).abs() / 123.2 < 0.02, "{f:?}");
        assert!((f.gamma - 99.3).abs() / 99.3 < 0.02, "{f:?}");
        assert!((f.offset - 50.0).abs() < 10.0, "{f:?}");
    }

    #[test]
    fn gaussian_data_drives_gamma_to_floor() {
        let h = synth(150.0, 0.0, 1e9, 0.0);
        let f = fit_voigt(&h).unwrap();
        assert!((f.sigma - 150.0).abs() / 150.0 < 0.05, "{f:?}");
        assert!(f.gamma < 1.0, "{f:?}");
    }

    #[test]
    fn flat_histogram_is_rejected() {
        let mut h = DelayHistogram::new(10.0, 500.0).unwrap();
        h.counts.iter_mut().for_each(|c| *c = 100);
        assert!(matches!(fit_voigt(&h), Err(Error::FitRejected(_))));
        let empty = DelayHistogram::new(10.0, 500.0).unwrap();
        assert!(matches!(fit_voigt(&empty), Err(Error::FitRejected(_))));
    }

    #[test]
    fn histogram_binning() {
        let mut h = DelayHistogram::new(10.0, 50.0).unwrap();
        assert_eq!(h.counts.len(), 10);
        for d in [-50.0, -49.0, 0.0, 49.9, 50.0, 50.1] {
            h.add(d);
        }
        assert_eq!(h.total(), 5);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[9], 2);
        assert!(DelayHistogram::new(10.0, 5.0).is_err());
    }

    #[test]
    fn fwhm_of_voigt_histogram() {
        let h = synth(123.2, 99.3, 1e9, 0.0);
        let w = h.fwhm().unwrap();
        assert!((w - voigt_fwhm(123.2, 99.3)).abs() < 4.0, "{w}");
    }
}
