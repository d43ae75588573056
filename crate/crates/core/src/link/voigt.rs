//! Voigt line shape: Faddeeva function, density, window integral and sampling.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use statrs::function::erf::erf;

const TERMS: usize = 40;

struct Weideman {
    coeffs: [f64; TERMS],
    l: f64,
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = TERMS;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        // f sampled on k = -M+1 .. M-1, prefixed with a zero
        let mut f = vec![0.0; m2];
        for (j, k) in (-(m as i64) + 1..m as i64).enumerate() {
            let theta = k as f64 * PI / m as f64;
            let t = l * (theta / 2.0).tan();
            f[j + 1] = (-t * t).exp() * (l * l + t * t);
        }
        // fftshift, then the real part of a DFT
        let shifted: Vec<f64> = (0..m2).map(|j| f[(j + m) % m2]).collect();
        let dft_re = |idx: usize| -> f64 {
            shifted
                .iter()
                .enumerate()
                .map(|(j, v)| v * (2.0 * PI * (j * idx) as f64 / m2 as f64).cos())
                .sum::<f64>()
                / m2 as f64
        };
        let mut coeffs = [0.0; TERMS];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = dft_re(n - i);
        }
        Weideman { coeffs, l }
    })
}

/// Faddeeva function `w(z) = exp(-z²) erfc(-iz)` for `Im z >= 0`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    let tab = weideman();
    let i = Complex64::new(0.0, 1.0);
    let denom = tab.l - i * z;
    let zz = (tab.l + i * z) / denom;
    let p = tab
        .coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zz + c);
    2.0 * p / (denom * denom) + (1.0 / PI.sqrt()) / denom
}

/// Normalised Voigt density with Gaussian standard deviation `sigma` and
/// Lorentzian half width `gamma`.
pub fn voigt_density(x: f64, sigma: f64, gamma: f64) -> f64 {
    if sigma <= 0.0 {
        return lorentz_density(x, gamma);
    }
    if gamma <= 0.0 {
        return gauss_density(x, sigma);
    }
    let s2 = sigma * std::f64::consts::SQRT_2;
    let z = Complex64::new(x / s2, gamma / s2);
    faddeeva(z).re / (sigma * (2.0 * PI).sqrt())
}

pub fn gauss_density(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

pub fn lorentz_density(x: f64, gamma: f64) -> f64 {
    gamma / (PI * (x * x + gamma * gamma))
}

/// `∫_{-w}^{w} V(t) dt`.
///
/// Written as the Gaussian average of the closed-form Lorentzian window
/// integral so the integrand is smooth even when `gamma << sigma`.
pub fn voigt_window(w: f64, sigma: f64, gamma: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if !w.is_finite() {
        return 1.0;
    }
    if sigma <= 0.0 {
        return 2.0 / PI * (w / gamma).atan();
    }
    if gamma <= 0.0 {
        return erf(w / (sigma * std::f64::consts::SQRT_2));
    }
    let lorentz_window = |g: f64| ((w - g) / gamma).atan() / PI + ((w + g) / gamma).atan() / PI;
    let f = |g: f64| gauss_density(g, sigma) * lorentz_window(g);
    // even integrand
    let reach = 14.0 * sigma;
    let mut total = 0.0;
    // split at the kink positions so the step near g = w is bracketed
    let mut knots = vec![0.0, reach];
    if w < reach {
        knots.insert(1, w);
    }
    for pair in knots.windows(2) {
        total += adaptive_simpson(&f, pair[0], pair[1], 1e-13);
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Full width at half maximum of the Voigt density, by bisection.
pub fn voigt_fwhm(sigma: f64, gamma: f64) -> f64 {
    let peak = voigt_density(0.0, sigma, gamma);
    let half = 0.5 * peak;
    let mut lo = 0.0;
    let mut hi = 4.0 * (sigma + gamma) + 1e-9;
    while voigt_density(hi, sigma, gamma) > half {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if voigt_density(mid, sigma, gamma) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    lo + hi
}

/// Draws a delay as Gaussian(σ) plus Lorentzian(γ) jitter.
pub fn sample_voigt<R: Rng + ?Sized>(rng: &mut R, sigma: f64, gamma: f64) -> f64 {
    let g = if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("sigma > 0").sample(rng)
    } else {
        0.0
    };
    let l = if gamma > 0.0 {
        Cauchy::new(0.0, gamma).expect("gamma > 0").sample(rng)
    } else {
        0.0
    };
    g + l
}
