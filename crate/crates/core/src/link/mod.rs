//! Photon-pair source, loss chain, detectors and expected coincidence
//! matrices for one frequency-bin link.

pub mod voigt;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::qudit::Basis;

/// Pair generation with pump saturation: `R_p = K P² / (1 + (P/P_s)^k)`,
/// `K = brightness * linewidth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceModel {
    /// Pairs/s/mW²/GHz, per frequency mode.
    pub brightness: f64,
    /// Resonance linewidth, GHz.
    pub linewidth: f64,
    /// Saturation power, mW.
    pub saturation_power: f64,
    pub saturation_exponent: f64,
    /// Uncorrelated photons/s/mW per mode reaching the filters
    /// (broadband pump leakage and Raman background).
    pub noise_rate: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            brightness: 5.1e6,
            linewidth: 0.41,
            saturation_power: 4.01,
            saturation_exponent: 3.34,
            noise_rate: 2.79e6,
        }
    }
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("brightness", self.brightness),
            ("linewidth", self.linewidth),
            ("saturation_power", self.saturation_power),
            ("saturation_exponent", self.saturation_exponent),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_rate.is_finite() && self.noise_rate >= 0.0) {
            return Err(argument(format!("noise_rate must be >= 0, got {}", self.noise_rate)));
        }
        Ok(())
    }

    /// `K`, pairs/s/mW².
    pub fn efficiency(&self) -> f64 {
        self.brightness * self.linewidth
    }

    /// Generated pairs/s in one frequency mode at on-chip power `power` (mW).
    pub fn pair_rate(&self, power: f64) -> Result<f64> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(argument(format!("pump power must be >= 0 mW, got {power}")));
        }
        self.validate()?;
        Ok(self.pair_rate_unchecked(power))
    }

    pub(crate) fn pair_rate_unchecked(&self, power: f64) -> f64 {
        let sat = 1.0 + (power / self.saturation_power).powf(self.saturation_exponent);
        self.efficiency() * power * power / sat
    }

    /// Uncorrelated photons/s in one mode before transmission.
    pub fn noise_photon_rate(&self, power: f64) -> f64 {
        self.noise_rate * power
    }
}

/// Everything between the chip and the detector outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApparatusParams {
    /// Insertion loss per user (filters, EOM, PS, fibre), dB.
    pub loss_per_user: f64,
    /// Extra loss of the X-basis configuration (second EOM pass), dB.
    pub x_basis_extra_loss: f64,
    pub detector_efficiency: f64,
    /// Dark counts per detector, Hz.
    pub dark_count_rate: f64,
    /// EOM drive frequency, equal to the FSR, GHz.
    pub rf_frequency: f64,
    /// Achievable EOM modulation index.
    pub modulation_index: f64,
    /// Extra X-basis transmission factor indexed by `d - 2` (d = 2..5).
    pub x_efficiency: Vec<f64>,
    /// Depolarising mixing fraction of X projections indexed by `d - 2`.
    pub x_mixing_error: Vec<f64>,
}

impl Default for ApparatusParams {
    fn default() -> Self {
        Self {
            loss_per_user: 17.5,
            x_basis_extra_loss: 3.0,
            detector_efficiency: 0.76,
            dark_count_rate: 350.0,
            rf_frequency: 21.23,
            modulation_index: 1.2,
            x_efficiency: vec![1.0, 1.0, 0.6, 0.35],
            x_mixing_error: vec![0.0, 0.0, 0.06, 0.2],
        }
    }
}

/// Modulation index needed for an efficient d = 5 X measurement.
pub const D5_MODULATION_THRESHOLD: f64 = 1.2;

impl ApparatusParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("loss_per_user", self.loss_per_user),
            ("x_basis_extra_loss", self.x_basis_extra_loss),
            ("dark_count_rate", self.dark_count_rate),
            ("rf_frequency", self.rf_frequency),
            ("modulation_index", self.modulation_index),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(argument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(argument(format!(
                "detector_efficiency must be in (0, 1], got {}",
                self.detector_efficiency
            )));
        }
        for &v in &self.x_efficiency {
            if !(v > 0.0 && v <= 1.0) {
                return Err(argument(format!("x_efficiency entries must be in (0, 1], got {v}")));
            }
        }
        for &v in &self.x_mixing_error {
            if !(0.0..=1.0).contains(&v) {
                return Err(argument(format!("x_mixing_error entries must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    fn per_dimension(table: &[f64], d: u32, fallback: f64) -> f64 {
        d.checked_sub(2)
            .and_then(|i| table.get(i as usize).copied())
            .or_else(|| table.last().copied())
            .unwrap_or(fallback)
    }

    pub fn x_efficiency(&self, d: u32) -> f64 {
        Self::per_dimension(&self.x_efficiency, d, 1.0)
    }

    pub fn x_mixing_error(&self, d: u32) -> f64 {
        Self::per_dimension(&self.x_mixing_error, d, 0.0)
    }

    /// True when the modulation depth is marginal for this dimension.
    pub fn modulation_limited(&self, d: u32) -> bool {
        d >= 5 && self.modulation_index <= D5_MODULATION_THRESHOLD
    }

    /// Probability that a photon of one user is detected in `basis`,
    /// including detector efficiency and the applied attenuation split
    /// evenly between the users.
    pub fn arm_transmission(&self, basis: Basis, attenuation: f64, d: u32) -> f64 {
        let (extra, eff) = match basis {
            Basis::Z => (0.0, 1.0),
            Basis::X => (self.x_basis_extra_loss, self.x_efficiency(d)),
        };
        let db = self.loss_per_user + attenuation / 2.0 + extra;
        10f64.powf(-db / 10.0) * self.detector_efficiency * eff
    }
}

/// Coincidence delay distribution: Voigt with Gaussian `sigma` (ps) and
/// Lorentzian half width `gamma` (ps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalProfile {
    pub gaussian_sigma: f64,
    pub lorentzian_gamma: f64,
}

impl Default for TemporalProfile {
    fn default() -> Self {
        Self {
            gaussian_sigma: 123.2,
            lorentzian_gamma: 99.3,
        }
    }
}

impl TemporalProfile {
    pub fn new(gaussian_sigma: f64, lorentzian_gamma: f64) -> Result<Self> {
        let p = Self {
            gaussian_sigma,
            lorentzian_gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (s, g) = (self.gaussian_sigma, self.lorentzian_gamma);
        if !(s.is_finite() && g.is_finite() && s >= 0.0 && g >= 0.0 && s + g > 0.0) {
            return Err(argument(format!("invalid Voigt widths sigma={s} gamma={g}")));
        }
        Ok(())
    }

    pub fn density(&self, delay: f64) -> f64 {
        voigt::voigt_density(delay, self.gaussian_sigma, self.lorentzian_gamma)
    }

    /// Fraction of true coincidences within `|delay| <= half_width`.
    pub fn window_efficiency(&self, half_width: f64) -> Result<f64> {
        if !(half_width >= 0.0) {
            return Err(argument(format!("coincidence window must be >= 0 ps, got {half_width}")));
        }
        self.validate()?;
        Ok(voigt::voigt_window(half_width, self.gaussian_sigma, self.lorentzian_gamma))
    }

    pub fn fwhm(&self) -> f64 {
        voigt::voigt_fwhm(self.gaussian_sigma, self.lorentzian_gamma)
    }
}

/// One operating point of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// On-chip pump power, mW.
    pub power_on_chip: f64,
    /// Coincidence window half width `Δt`, ps.
    pub coincidence_window: f64,
    /// Applied attenuation, total over both users, dB.
    pub applied_attenuation: f64,
    pub dimension: u32,
    /// Integration time per basis, s.
    pub integration_time: f64,
}

impl LinkParams {
    pub fn new(power_on_chip: f64, coincidence_window: f64, dimension: u32) -> Self {
        Self {
            power_on_chip,
            coincidence_window,
            applied_attenuation: 0.0,
            dimension,
            integration_time: 1.0,
        }
    }

    pub fn with_attenuation(mut self, db: f64) -> Self {
        self.applied_attenuation = db;
        self
    }

    pub fn with_integration_time(mut self, seconds: f64) -> Self {
        self.integration_time = seconds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.dimension) {
            return Err(argument(format!("dimension must be in 2..=5, got {}", self.dimension)));
        }
        if !(self.power_on_chip.is_finite() && self.power_on_chip >= 0.0) {
            return Err(argument(format!("power must be >= 0 mW, got {}", self.power_on_chip)));
        }
        if !(self.coincidence_window.is_finite() && self.coincidence_window > 0.0) {
            return Err(argument(format!(
                "coincidence window must be > 0 ps, got {}",
                self.coincidence_window
            )));
        }
        if !(self.applied_attenuation.is_finite() && self.applied_attenuation >= 0.0) {
            return Err(argument(format!(
                "attenuation must be >= 0 dB, got {}",
                self.applied_attenuation
            )));
        }
        if !(self.integration_time.is_finite() && self.integration_time > 0.0) {
            return Err(argument(format!(
                "integration time must be > 0 s, got {}",
                self.integration_time
            )));
        }
        Ok(())
    }
}

/// Per-detector rates for one basis, all in Hz and all referring to a
/// configuration where that basis is permanently selected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRates {
    pub basis: Basis,
    /// Generated pairs per frequency mode.
    pub pair_rate: f64,
    /// Correlated coincidences inside the window for each matched cell.
    pub true_rate: f64,
    pub singles_alice: f64,
    pub singles_bob: f64,
    /// Accidental coincidences per detector pair.
    pub accidental_rate: f64,
    pub window_efficiency: f64,
    pub dark_count_rate: f64,
    pub transmission_alice: f64,
    pub transmission_bob: f64,
    /// Full window `2Δt`, ps.
    pub window_span: f64,
}

/// Rates for one basis computed from a precomputed window efficiency.
pub(crate) fn rates_with_efficiency(
    src: &SourceModel,
    app: &ApparatusParams,
    eta: f64,
    lp: &LinkParams,
    basis: Basis,
) -> LinkRates {
    let rp = src.pair_rate_unchecked(lp.power_on_chip);
    let t = app.arm_transmission(basis, lp.applied_attenuation, lp.dimension);
    let singles = (rp + src.noise_photon_rate(lp.power_on_chip)) * t + app.dark_count_rate;
    let span = 2.0 * lp.coincidence_window;
    LinkRates {
        basis,
        pair_rate: rp,
        true_rate: rp * t * t * eta,
        singles_alice: singles,
        singles_bob: singles,
        accidental_rate: singles * singles * span * 1e-12,
        window_efficiency: eta,
        dark_count_rate: app.dark_count_rate,
        transmission_alice: t,
        transmission_bob: t,
        window_span: span,
    }
}

/// Expected detector and coincidence rates for `basis` at operating point `lp`.
pub fn expected_rates(
    src: &SourceModel,
    app: &ApparatusParams,
    profile: &TemporalProfile,
    lp: &LinkParams,
    basis: Basis,
) -> Result<LinkRates> {
    src.validate()?;
    app.validate()?;
    lp.validate()?;
    let eta = profile.window_efficiency(lp.coincidence_window)?;
    Ok(rates_with_efficiency(src, app, eta, lp, basis))
}

/// Fraction of integration time during which a basis is selected by both
/// users, given that X measurements cycle the `d` unitary settings on each
/// side.
pub fn basis_duty(basis: Basis, d: u32) -> f64 {
    match basis {
        Basis::Z => 1.0,
        Basis::X => 1.0 / f64::from(d * d),
    }
}

/// `d × d` coincidence counts for one basis. Row index is Alice's outcome,
/// column index Bob's outcome after the key map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceMatrix {
    pub basis: Basis,
    pub dimension: u32,
    /// Row-major counts.
    pub counts: Vec<f64>,
    /// Integration time the counts were accumulated over, s.
    pub integration_time: f64,
}

impl CoincidenceMatrix {
    pub fn zeros(basis: Basis, dimension: u32, integration_time: f64) -> Self {
        let n = (dimension * dimension) as usize;
        Self {
            basis,
            dimension,
            counts: vec![0.0; n],
            integration_time,
        }
    }

    pub fn from_rows(basis: Basis, rows: &[Vec<f64>], integration_time: f64) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(argument("coincidence matrix must be square and non-empty"));
        }
        let m = Self {
            basis,
            dimension: d as u32,
            counts: rows.iter().flatten().copied().collect(),
            integration_time,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension as usize;
        if d == 0 || self.counts.len() != d * d {
            return Err(argument(format!(
                "matrix of dimension {d} needs {} entries, has {}",
                d * d,
                self.counts.len()
            )));
        }
        if let Some(v) = self.counts.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(argument(format!("coincidence counts must be finite and >= 0, got {v}")));
        }
        if !(self.integration_time.is_finite() && self.integration_time > 0.0) {
            return Err(argument(format!(
                "integration time must be > 0 s, got {}",
                self.integration_time
            )));
        }
        Ok(())
    }

    pub fn get(&self, alice: u32, bob: u32) -> f64 {
        self.counts[(alice * self.dimension + bob) as usize]
    }

    pub fn add(&mut self, alice: u32, bob: u32, value: f64) {
        self.counts[(alice * self.dimension + bob) as usize] += value;
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn diagonal(&self) -> f64 {
        (0..self.dimension).map(|i| self.get(i, i)).sum()
    }

    pub fn off_diagonal(&self) -> f64 {
        (self.total() - self.diagonal()).max(0.0)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.counts
            .chunks(self.dimension as usize)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Expected coincidence counts over `lp.integration_time`.
///
/// `intrinsic_error` is the off-diagonal fraction of true coincidences,
/// spread uniformly over the off-diagonal cells; accidentals fill every
/// cell equally.
pub fn expected_matrix(rates: &LinkRates, intrinsic_error: f64, lp: &LinkParams) -> Result<CoincidenceMatrix> {
    lp.validate()?;
    if !(0.0..=1.0).contains(&intrinsic_error) {
        return Err(argument(format!("intrinsic error must be in [0, 1], got {intrinsic_error}")));
    }
    let d = lp.dimension;
    let df = f64::from(d);
    let scale = basis_duty(rates.basis, d) * lp.integration_time;
    let true_total = df * rates.true_rate;
    let on = true_total * (1.0 - intrinsic_error) / df;
    let off = if d > 1 {
        true_total * intrinsic_error / (df * (df - 1.0))
    } else {
        0.0
    };
    let mut m = CoincidenceMatrix::zeros(rates.basis, d, lp.integration_time);
    for a in 0..d {
        for b in 0..d {
            let t = if a == b { on } else { off };
            m.add(a, b, (t + rates.accidental_rate) * scale);
        }
    }
    Ok(m)
}

/// Heralded second-order correlation of Alice's photons, heralded by Bob,
/// with Alice's output split 50:50 onto two detectors. The herald and each
/// split arm accept events within the same window.
pub fn heralded_g2(rates: &LinkRates) -> Result<f64> {
    let span = rates.window_span * 1e-12;
    let herald = rates.singles_bob;
    if !(herald > 0.0) {
        return Err(Error::Undefined("heralding rate is zero".into()));
    }
    let arm = 0.5 * (rates.singles_alice - rates.dark_count_rate) + rates.dark_count_rate;
    let true_arm = 0.5 * rates.true_rate;
    let herald_arm = true_arm + herald * arm * span;
    let triple = 2.0 * true_arm * arm * span + herald * arm * arm * span * span;
    if !(herald_arm > 0.0) {
        return Err(Error::Undefined("no heralded coincidences".into()));
    }
    Ok(herald * triple / (herald_arm * herald_arm))
}
