//! Frequency-bin Bell states, the Z and X mutually unbiased bases and
//! projection probabilities of the PF–EOM–PF measurement chain.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::spectrum::{ChannelSpec, FrequencyComb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    /// Natural basis: one frequency bin per outcome.
    Z,
    /// DFT superposition basis.
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

/// Maximally entangled `d`-level state `Σ_l e^{iφ_l} |l⟩_A |l⟩_B / √d`
/// on the bins of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellStateSpec {
    pub dimension: u32,
    pub center_mode: u32,
    /// One phase per Schmidt term, rad.
    pub mode_phases: Vec<f64>,
}

impl BellStateSpec {
    pub fn new(dimension: u32, center_mode: u32, mode_phases: Vec<f64>) -> Result<Self> {
        check_dimension(dimension)?;
        if mode_phases.len() != dimension as usize {
            return Err(argument(format!(
                "expected {dimension} mode phases, got {}",
                mode_phases.len()
            )));
        }
        Ok(Self {
            dimension,
            center_mode,
            mode_phases,
        })
    }

    pub fn ideal(dimension: u32) -> Result<Self> {
        Self::new(dimension, 0, vec![0.0; dimension as usize])
    }

    /// State carried by `channel`, with the comb's residual phase on each term.
    pub fn from_channel(comb: &FrequencyComb, channel: &ChannelSpec, dimension: u32) -> Result<Self> {
        let modes = channel.bell_modes(dimension)?;
        let phases = modes.iter().map(|&m| comb.residual_phase(m)).collect();
        Self::new(dimension, channel.center_mode, phases)
    }

    /// Contiguous bins under a constant phase step, for any `d`.
    pub fn with_phase_slope(dimension: u32, center_mode: u32, slope: f64) -> Result<Self> {
        let phases = (0..dimension).map(|l| slope * f64::from(l)).collect();
        Self::new(dimension, center_mode, phases)
    }

    fn amplitudes(&self) -> impl Iterator<Item = Complex64> + '_ {
        let norm = 1.0 / f64::from(self.dimension).sqrt();
        self.mode_phases
            .iter()
            .map(move |&p| Complex64::from_polar(norm, p))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().map(|a| a.norm_sqr()).sum()
    }
}

/// Apparatus imperfections of one user's measurement in a given basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Imperfection {
    /// Error on the programmed PF phase step, rad. Bin `l` picks up `l * phase_error`.
    #[serde(default)]
    pub phase_error: f64,
    /// Relative bin amplitudes after equalisation; empty means ideal.
    #[serde(default)]
    pub amplitude_imbalance: Vec<f64>,
}

impl Default for Imperfection {
    fn default() -> Self {
        Self::ideal()
    }
}

impl Imperfection {
    pub fn ideal() -> Self {
        Self {
            phase_error: 0.0,
            amplitude_imbalance: Vec::new(),
        }
    }

    pub fn phase(phase_error: f64) -> Self {
        Self {
            phase_error,
            ..Self::ideal()
        }
    }
}

/// One projection: basis, outcome and the imperfections applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub basis: Basis,
    pub outcome_index: u32,
    pub phase_error: f64,
    pub amplitude_imbalance: Vec<f64>,
}

impl MeasurementSetting {
    pub fn ideal(basis: Basis, outcome_index: u32) -> Self {
        Self {
            basis,
            outcome_index,
            phase_error: 0.0,
            amplitude_imbalance: Vec::new(),
        }
    }

    pub fn with_imperfection(basis: Basis, outcome_index: u32, imp: &Imperfection) -> Self {
        Self {
            basis,
            outcome_index,
            phase_error: imp.phase_error,
            amplitude_imbalance: imp.amplitude_imbalance.clone(),
        }
    }

    /// Projector vector over the `d` bins.
    ///
    /// Amplitude imbalance only affects X projections, where the EOM mixes
    /// all bins into one detector; it is renormalised to unit norm.
    pub fn projector(&self, d: u32) -> Result<Vec<Complex64>> {
        if self.outcome_index >= d {
            return Err(argument(format!(
                "outcome {} out of range for d = {d}",
                self.outcome_index
            )));
        }
        match self.basis {
            Basis::Z => mub_vector(d, Basis::Z, self.outcome_index),
            Basis::X => {
                let weights: Vec<f64> = if self.amplitude_imbalance.is_empty() {
                    vec![1.0; d as usize]
                } else if self.amplitude_imbalance.len() == d as usize {
                    self.amplitude_imbalance.clone()
                } else {
                    return Err(argument(format!(
                        "amplitude_imbalance has {} entries, expected {d}",
                        self.amplitude_imbalance.len()
                    )));
                };
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(argument("amplitude_imbalance entries must be >= 0"));
                }
                let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(argument("amplitude_imbalance is all zero"));
                }
                let k = f64::from(self.outcome_index);
                let dd = f64::from(d);
                Ok(weights
                    .iter()
                    .enumerate()
                    .map(|(l, w)| {
                        let l = l as f64;
                        let phase = 2.0 * PI * k * l / dd + l * self.phase_error;
                        Complex64::from_polar(w / norm, phase)
                    })
                    .collect())
            }
        }
    }
}

/// Key map applied to Bob's outcomes so that `a == b` marks a correct
/// coincidence in both bases.
///
/// The ideal X⊗X statistics of the state are supported on `j + k ≡ 0 mod d`,
/// so Bob's X outcome `k` is relabelled to `(-k) mod d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCorrelation {
    pub dimension: u32,
    pub relabeling: Vec<u32>,
}

impl OutcomeCorrelation {
    pub fn for_basis(dimension: u32, basis: Basis) -> Self {
        let relabeling = (0..dimension)
            .map(|k| match basis {
                Basis::Z => k,
                Basis::X => (dimension - k) % dimension,
            })
            .collect();
        Self {
            dimension,
            relabeling,
        }
    }

    pub fn apply(&self, outcome: u32) -> u32 {
        self.relabeling[outcome as usize]
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.dimension as usize];
        for &k in &self.relabeling {
            match seen.get_mut(k as usize) {
                Some(s) if !*s => *s = true,
                _ => return false,
            }
        }
        true
    }
}

fn check_dimension(d: u32) -> Result<()> {
    if d < 2 {
        return Err(argument(format!("dimension must be >= 2, got {d}")));
    }
    Ok(())
}

/// Basis vector `k` of the Z or X basis in dimension `d`.
pub fn mub_vector(d: u32, basis: Basis, k: u32) -> Result<Vec<Complex64>> {
    check_dimension(d)?;
    if k >= d {
        return Err(argument(format!("outcome {k} out of range for d = {d}")));
    }
    Ok(match basis {
        Basis::Z => (0..d)
            .map(|l| if l == k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect(),
        Basis::X => {
            let norm = 1.0 / f64::from(d).sqrt();
            (0..d)
                .map(|l| {
                    Complex64::from_polar(norm, 2.0 * PI * f64::from(k) * f64::from(l) / f64::from(d))
                })
                .collect()
        }
    })
}

/// `|⟨a ⊗ b|Ψ⟩|²`, summed term by term over the Schmidt decomposition.
pub fn projection_probability(
    state: &BellStateSpec,
    alice: &MeasurementSetting,
    bob: &MeasurementSetting,
) -> Result<f64> {
    let d = state.dimension;
    let a = alice.projector(d)?;
    let b = bob.projector(d)?;
    let amp: Complex64 = state
        .amplitudes()
        .zip(a.iter().zip(&b))
        .map(|(c, (a, b))| c * a.conj() * b.conj())
        .sum();
    Ok(amp.norm_sqr().min(1.0))
}

/// `d × d` outcome distribution in one basis, Bob's outcomes already passed
/// through the key map. Row index is Alice's outcome.
pub fn joint_distribution(
    state: &BellStateSpec,
    basis: Basis,
    alice: &Imperfection,
    bob: &Imperfection,
) -> Result<Vec<Vec<f64>>> {
    let d = state.dimension;
    let map = OutcomeCorrelation::for_basis(d, basis);
    let mut p = vec![vec![0.0; d as usize]; d as usize];
    for j in 0..d {
        let a = MeasurementSetting::with_imperfection(basis, j, alice);
        for k in 0..d {
            let b = MeasurementSetting::with_imperfection(basis, k, bob);
            p[j as usize][map.apply(k) as usize] = projection_probability(state, &a, &b)?;
        }
    }
    Ok(p)
}

fn off_diagonal_fraction(p: &[Vec<f64>]) -> f64 {
    let total: f64 = p.iter().flatten().sum();
    let diag: f64 = p.iter().enumerate().map(|(i, row)| row[i]).sum();
    if total > 0.0 {
        ((total - diag) / total).max(0.0)
    } else {
        0.0
    }
}

/// Error fractions `(ε_Z, ε_X)` from ideal-statistics projections alone.
pub fn intrinsic_error_rates(
    state: &BellStateSpec,
    alice: &Imperfection,
    bob: &Imperfection,
) -> Result<(f64, f64)> {
    let z = joint_distribution(state, Basis::Z, alice, bob)?;
    let x = joint_distribution(state, Basis::X, alice, bob)?;
    Ok((off_diagonal_fraction(&z), off_diagonal_fraction(&x)))
}
