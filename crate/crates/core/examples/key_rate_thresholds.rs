//! QBER thresholds of the d-level key rate and the secret fraction at a few
//! symmetric error rates.

use fbqkd::keyrate::{self, DEFAULT_F};

fn main() -> fbqkd::Result<()> {
    println!("{:>3} {:>10} {:>10} {:>10}", "d", "threshold", "log2 d", "H_d(thr)");
    for d in 2..=5 {
        let t = keyrate::qber_threshold(d)?;
        let h = keyrate::entropy_d(d, t)?;
        println!("{d:>3} {t:>10.6} {:>10.4} {h:>10.4}", f64::from(d).log2());
    }
    println!();
    println!("secret fraction per sifted coincidence, f = {DEFAULT_F}");
    let eps = [0.0, 0.02, 0.05, 0.08, 0.11, 0.15];
    print!("{:>3}", "d");
    for e in eps {
        print!(" {e:>7.2}");
    }
    println!();
    for d in 2..=5 {
        print!("{d:>3}");
        for e in eps {
            let r = keyrate::skr(d, 2.0, e, e, DEFAULT_F)?;
            print!(" {:>7.4}", r.skr);
        }
        println!();
    }
    Ok(())
}
