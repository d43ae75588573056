//! Generates a time-tag stream, histograms the Alice/Bob delays and fits a
//! Voigt profile to recover the jitter and the photon coherence time.

use fbqkd::link::LinkParams;
use fbqkd::sweep::ChannelModel;
use fbqkd::timetag::{self, GeneratorConfig};

fn main() -> fbqkd::Result<()> {
    let model = ChannelModel::default();
    let truth = model.temporal;
    let cfg = GeneratorConfig::new(model, LinkParams::new(3.5, 285.0, 3), 5.0);
    let (stream, tally) = timetag::generate_stream(&cfg, 11)?;
    let h = timetag::delay_histogram(&stream, 10.0, 3000.0)?;
    let fit = timetag::fit_voigt(&h)?;
    println!("{} events, {} in histogram", tally.total_events, h.total());
    println!(
        "true   sigma {:.1} ps  gamma {:.1} ps  FWHM {:.1} ps",
        truth.gaussian_sigma,
        truth.lorentzian_gamma,
        truth.fwhm()
    );
    println!(
        "fitted sigma {:.1} ps  gamma {:.1} ps  FWHM {:.1} ps  chi2/dof {:.2}",
        fit.sigma,
        fit.gamma,
        fit.fwhm(),
        fit.reduced_chi2
    );
    Ok(())
}
