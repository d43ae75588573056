//! Optimized key rate versus applied attenuation for d = 2 and d = 3, the
//! extinction of each and the attenuation where qubits overtake qutrits.

use fbqkd::sweep::{self, ChannelModel, DimensionVerdict, SweepGrid};

fn main() -> fbqkd::Result<()> {
    let model = ChannelModel::default();
    let alphas: Vec<f64> = (0..=70).map(f64::from).collect();
    let range = sweep::range_scan(&model, &SweepGrid::default(), &[2, 3], &alphas, None)?;
    let (c2, c3) = (range.curve(2).unwrap(), range.curve(3).unwrap());
    println!("{:>6} {:>12} {:>12}", "dB", "d=2 bit/s", "d=3 bit/s");
    for (a, b) in c2.points.iter().zip(&c3.points).step_by(5) {
        println!("{:>6.0} {:>12.3e} {:>12.3e}", a.attenuation, a.skr, b.skr);
    }
    for c in &range.curves {
        println!("d = {} extinction at {:.1} dB", c.dimension, c.extinction.attenuation);
    }
    match range.crossover {
        Some(x) => println!("qubit overtakes qutrit at {x:.1} dB"),
        None => println!("no crossover in the scanned range"),
    }
    for a in [10.0, 50.0, 57.0, 65.0] {
        let v = match sweep::recommend_dimension(&range, a)? {
            DimensionVerdict::Dimension(d) => format!("d = {d}"),
            DimensionVerdict::NoSecureChannel => "no secure channel".into(),
        };
        println!("at {a:.0} dB use {v}");
    }
    Ok(())
}
