//! Synthetic joint spectral intensity.
//!
//! The comb is modelled over modes 3..=85. Modes 1 and 2 sit inside the
//! pump rejection band and are not recorded, and modes 41, 59 and 77 are
//! missing from the record (mode crossings). Modes 32, 50 and 68 are
//! recorded but fall below the 1 kHz floor. The remaining modes form runs
//! of length 29 and then six runs of 8. That is 80 records, which pack into
//! 21 width-3 channels or 38 width-2 channels.
//!
//! Rates fall off exponentially away from the pump with a small seeded
//! multiplicative ripple. The ripple is bounded so no mode crosses the floor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectrum::JsiRecord;

pub const FIRST_MODE: u32 = 3;
pub const LAST_MODE: u32 = 85;
pub const ABSENT_MODES: [u32; 3] = [41, 59, 77];
pub const SUB_FLOOR_MODES: [u32; 3] = [32, 50, 68];
/// Floor the fixture is designed against, Hz.
pub const RATE_FLOOR: f64 = 1000.0;

/// Header comment written with the fixture.
pub const COMMENT: &str = "synthetic JSI: 80 modes, 21 width-3 / 38 width-2 channels above 1 kHz";

pub fn synthetic_jsi(seed: u64) -> Vec<JsiRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (FIRST_MODE..=LAST_MODE)
        .filter(|m| !ABSENT_MODES.contains(m))
        .map(|m| {
            let ripple = 1.0 + 0.1 * (rng.random::<f64>() - 0.5);
            let envelope = 18_000.0 * (-f64::from(m) / 40.0).exp();
            let coincidence = if SUB_FLOOR_MODES.contains(&m) {
                0.4 * RATE_FLOOR * ripple
            } else {
                envelope * ripple
            };
            let background = 0.02 * envelope * (1.0 + 0.2 * (rng.random::<f64>() - 0.5));
            JsiRecord {
                mode_index: m,
                coincidence_rate: round(coincidence),
                background_rate: round(background),
            }
        })
        .collect()
}

fn round(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}
