//! Monte Carlo check of the analytic link model: generate tags, count
//! coincidences and compare QBER and counts with the expectation for the
//! same basis schedule.

use fbqkd::keyrate;
use fbqkd::link::LinkParams;
use fbqkd::sweep::ChannelModel;
use fbqkd::timetag::{self, CoincidenceCounter, GeneratorConfig, PairingPolicy};

fn main() -> fbqkd::Result<()> {
    let model = ChannelModel::default();
    let lp = LinkParams::new(3.5, 285.0, 3);
    let mut cfg = GeneratorConfig::new(model.clone(), lp, 20.0);
    cfg.dwell = 0.05;
    cfg.x_probability = 0.7;
    let seed = 3;
    let meta = cfg.metadata(seed)?;
    let mut counter = CoincidenceCounter::new(&meta, lp.coincidence_window, PairingPolicy::Exclusive)?;
    let tally = timetag::generate_to_sink(&cfg, &meta, seed, &mut counter)?;
    let counts = counter.finish();
    let (ez, ex) = timetag::expected_counts(&model, &lp, &meta)?;
    println!("{} events, peak buffer {} events", tally.total_events, counts.peak_pending);
    for (got, want) in [(&counts.z, &ez), (&counts.x, &ex)] {
        let (q, qe) = (keyrate::qber(got)?, keyrate::qber(want)?);
        let sigma = (qe * (1.0 - qe) / got.total()).sqrt();
        println!(
            "{}: {:.0} coincidences (expected {:.0}), QBER {:.4} (expected {:.4}, {:+.1} sigma)",
            got.basis,
            got.total(),
            want.total(),
            q,
            qe,
            (q - qe) / sigma
        );
    }
    let r = counts.report(model.post_processing_f)?;
    let analytic = model.evaluate(&lp)?.report;
    println!("SKR {:.0} bit/s from tags, {:.0} bit/s analytic", r.skr, analytic.skr);
    Ok(())
}
