//! QBER, the d-level entropy and the BBM92 secure key rate.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::link::CoincidenceMatrix;

/// Error-correction inefficiency used throughout.
pub const DEFAULT_F: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub qber_z: f64,
    pub qber_x: f64,
    /// Coincidences/s, averaged over the two bases.
    pub raw_rate: f64,
    /// bit/s, clamped at 0.
    pub skr: f64,
    pub secure: bool,
    pub dimension: u32,
    pub post_processing_f: f64,
}

/// Off-diagonal fraction of a coincidence matrix.
pub fn qber(m: &CoincidenceMatrix) -> Result<f64> {
    m.validate()?;
    let total = m.total();
    if !(total > 0.0) {
        return Err(Error::Undefined("QBER of an empty coincidence matrix".into()));
    }
    Ok((m.off_diagonal() / total).clamp(0.0, 1.0))
}

/// `H_d(x) = -x log2(x/(d-1)) - (1-x) log2(1-x)`.
pub fn entropy_d(d: u32, x: f64) -> Result<f64> {
    if d < 2 {
        return Err(argument(format!("entropy needs d >= 2, got {d}")));
    }
    if !(0.0..1.0).contains(&x) {
        return Err(argument(format!("entropy argument must be in [0, 1), got {x}")));
    }
    Ok(entropy_unchecked(d, x))
}

fn entropy_unchecked(d: u32, x: f64) -> f64 {
    let a = if x > 0.0 {
        -x * (x / f64::from(d - 1)).log2()
    } else {
        0.0
    };
    let b = if x < 1.0 { -(1.0 - x) * (1.0 - x).log2() } else { 0.0 };
    a + b
}

/// `(total(mz) + total(mx)) / (2τ)`.
pub fn raw_rate(mz: &CoincidenceMatrix, mx: &CoincidenceMatrix) -> Result<f64> {
    mz.validate()?;
    mx.validate()?;
    if mz.dimension != mx.dimension {
        return Err(argument(format!(
            "basis matrices have dimensions {} and {}",
            mz.dimension, mx.dimension
        )));
    }
    let (tz, tx) = (mz.integration_time, mx.integration_time);
    if (tz - tx).abs() > 1e-12 * tz.max(tx) {
        return Err(argument(format!("integration times differ: {tz} s vs {tx} s")));
    }
    Ok((mz.total() + mx.total()) / (2.0 * tz))
}

/// `log2 d - f H_d(ε_Z) - H_d(ε_X)`, secret bits per sifted coincidence
/// before the sifting factor.
pub fn key_fraction(d: u32, eps_z: f64, eps_x: f64, f: f64) -> Result<f64> {
    Ok(f64::from(d).log2() - f * entropy_d(d, eps_z)? - entropy_d(d, eps_x)?)
}

/// Secure key rate `max(0, ½ raw [log2 d - f H_d(ε_Z) - H_d(ε_X)])`.
pub fn skr(d: u32, raw: f64, eps_z: f64, eps_x: f64, f: f64) -> Result<KeyRateReport> {
    if !(f >= 1.0) {
        return Err(argument(format!("error-correction factor f must be >= 1, got {f}")));
    }
    if !(raw.is_finite() && raw >= 0.0) {
        return Err(argument(format!("raw rate must be >= 0, got {raw}")));
    }
    let value = 0.5 * raw * key_fraction(d, eps_z, eps_x, f)?;
    Ok(KeyRateReport {
        qber_z: eps_z,
        qber_x: eps_x,
        raw_rate: raw,
        skr: value.max(0.0),
        secure: value > 0.0,
        dimension: d,
        post_processing_f: f,
    })
}

/// Full report straight from the two basis matrices.
pub fn report(mz: &CoincidenceMatrix, mx: &CoincidenceMatrix, f: f64) -> Result<KeyRateReport> {
    let raw = raw_rate(mz, mx)?;
    skr(mz.dimension, raw, qber(mz)?, qber(mx)?, f)
}

/// Largest symmetric QBER with positive key at `f = 1`: the root of
/// `log2 d = 2 H_d(ε)` on `(0, (d-1)/d)`.
pub fn qber_threshold(d: u32) -> Result<f64> {
    if d < 2 {
        return Err(argument(format!("threshold needs d >= 2, got {d}")));
    }
    let target = 0.5 * f64::from(d).log2();
    let (mut lo, mut hi) = (0.0, f64::from(d - 1) / f64::from(d));
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if entropy_unchecked(d, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::Basis;

    fn m(rows: &[Vec<f64>], tau: f64) -> CoincidenceMatrix {
        CoincidenceMatrix::from_rows(Basis::Z, rows, tau).unwrap()
    }

    #[test]
    fn qber_examples() {
        assert_eq!(qber(&m(&[vec![5.0, 0.0], vec![0.0, 7.0]], 1.0)).unwrap(), 0.0);
        let q = qber(&m(&[vec![450.0, 50.0], vec![50.0, 450.0]], 1.0)).unwrap();
        assert!((q - 0.1).abs() < 1e-15);
        for d in 2..=5usize {
            let rows = vec![vec![3.0; d]; d];
            let q = qber(&m(&rows, 1.0)).unwrap();
            assert!((q - (d as f64 - 1.0) / d as f64).abs() < 1e-15);
        }
        let zero = CoincidenceMatrix::zeros(Basis::Z, 2, 1.0);
        assert!(matches!(qber(&zero), Err(Error::Undefined(_))));
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_d(2, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(entropy_d(3, 0.0).unwrap(), 0.0);
        assert!(entropy_d(3, 1.0).is_err());
        assert!(entropy_d(3, -0.1).is_err());
        // independent evaluation with natural logs
        let x: f64 = 0.159;
        let by_ln = (-x * (x / 2.0).ln() - (1.0 - x) * (1.0 - x).ln()) / 2f64.ln();
        assert!((entropy_d(3, x).unwrap() - by_ln).abs() < 1e-14);
        assert!((by_ln - 0.7909).abs() < 1e-4);
    }

    #[test]
    fn raw_rate_examples() {
        let a = m(&[vec![500.0, 0.0], vec![0.0, 500.0]], 1.0);
        assert!((raw_rate(&a, &a).unwrap() - 1000.0).abs() < 1e-12);
        let z0 = CoincidenceMatrix::zeros(Basis::Z, 2, 2.0);
        let x = m(&[vec![1000.0, 0.0], vec![0.0, 1000.0]], 2.0);
        assert!((raw_rate(&z0, &x).unwrap() - 500.0).abs() < 1e-12);
        assert!(raw_rate(&a, &x).is_err());
    }

    #[test]
    fn skr_examples() {
        let r = skr(2, 1e4, 0.0, 0.0, 1.7).unwrap();
        assert_eq!(r.skr, 5000.0);
        assert!(r.secure);
        let r = skr(2, 1e4, 0.11, 0.11, 1.0).unwrap();
        assert!(r.skr < 1e-3 * 1e4);
        // 0.159 sits just below the qutrit root 0.15946
        let r = skr(3, 1e4, 0.159, 0.159, 1.0).unwrap();
        assert!(r.skr > 0.0 && r.skr < 2e-3 * 1e4, "{}", r.skr);
        let t3 = qber_threshold(3).unwrap();
        let r = skr(3, 1e4, t3, t3, 1.0).unwrap();
        assert!(r.skr < 1e-6 * 1e4);
        let bad = skr(3, 1e4, 0.4, 0.4, 1.2).unwrap();
        assert_eq!(bad.skr, 0.0);
        assert!(!bad.secure);
        assert!(skr(3, 1e4, 0.0, 0.0, 0.9).is_err());
    }

    #[test]
    fn thresholds() {
        let t2 = qber_threshold(2).unwrap();
        let t3 = qber_threshold(3).unwrap();
        assert!((t2 - 0.1100).abs() < 5e-4, "{t2}");
        assert!((t3 - 0.1590).abs() < 5e-4, "{t3}");
        // fixtures from an independent bisection in f64
        assert!((t2 - 0.110_028).abs() < 1e-6);
        assert!((t3 - 0.159_462).abs() < 1e-6);
        assert!((qber_threshold(4).unwrap() - 0.189_290).abs() < 1e-6);
        assert!((qber_threshold(5).unwrap() - 0.209_867).abs() < 1e-6);
    }
}
