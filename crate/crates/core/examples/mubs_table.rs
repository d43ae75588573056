//! Prints the Z and X basis vectors for d = 2..5 and checks that every
//! cross-basis overlap is 1/d.

use fbqkd::qudit::{mub_vector, Basis};

fn main() -> fbqkd::Result<()> {
    for d in 2..=5 {
        println!("d = {d}");
        for basis in Basis::BOTH {
            for k in 0..d {
                let v = mub_vector(d, basis, k)?;
                let phases: Vec<String> = v
                    .iter()
                    .map(|a| {
                        if a.norm() < 1e-12 {
                            "  .   ".into()
                        } else {
                            format!("{:+.3}", a.arg() / std::f64::consts::PI)
                        }
                    })
                    .collect();
                println!("  {basis}{k}: phase/pi [{}]", phases.join(" "));
            }
        }
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for k in 0..d {
                let z = mub_vector(d, Basis::Z, j)?;
                let x = mub_vector(d, Basis::X, k)?;
                let overlap: num_complex::Complex64 = z.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
                worst = worst.max((overlap.norm_sqr() - 1.0 / f64::from(d)).abs());
            }
        }
        println!("  max |<z|x>|^2 - 1/d| = {worst:.1e}");
    }
    Ok(())
}
