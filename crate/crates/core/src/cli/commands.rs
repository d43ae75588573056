//! Subcommand implementations. Each takes a resolved [`RunConfig`] and
//! returns an [`Output`]; commands that produce a data file also take the
//! writer it goes to.

use std::io::Write;

use serde_json::{json, Value};

use super::config::RunConfig;
use super::fixtures;
use super::output::{Cell, Output, Table};
use crate::error::{Error, Result};
use crate::keyrate;
use crate::link::{self, CoincidenceMatrix, LinkRates};
use crate::qudit::{mub_vector, Basis};
use crate::row;
use crate::spectrum::{self, allocate_channels};
use crate::sweep::{self, DimensionVerdict};
use crate::timetag::{
    self, CoincidenceCounter, EventSink, HistogramBuilder, PairingPolicy, TimetagReader, TimetagWriter,
};

/// A command's result plus whether it ended with a usable key, for the
/// commands where that question makes sense.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub output: Output,
    pub secure: Option<bool>,
}

fn matrix_rows(t: &mut Table, m: &CoincidenceMatrix) {
    for a in 0..m.dimension {
        for b in 0..m.dimension {
            t.push(row![m.basis.to_string(), a, b, m.get(a, b), m.integration_time]);
        }
    }
}

fn rates_row(t: &mut Table, r: &LinkRates) {
    t.push(row![
        r.basis.to_string(),
        r.pair_rate,
        r.true_rate,
        r.singles_alice,
        r.singles_bob,
        r.accidental_rate,
        r.window_efficiency,
        r.transmission_alice,
        r.transmission_bob,
    ]);
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandResult> {
    let model = cfg.channel_model();
    let lp = cfg.link_params();
    let ev = model.evaluate(&lp)?;
    let g2 = link::heralded_g2(&ev.rates_z).ok();
    let r = ev.report;

    let mut report = Table::new(
        "report",
        &[
            "dimension",
            "power_mw",
            "window_ps",
            "attenuation_db",
            "integration_time_s",
            "raw_rate_hz",
            "qber_z",
            "qber_x",
            "intrinsic_error_z",
            "intrinsic_error_x",
            "skr_bit_per_s",
            "secure",
            "heralded_g2",
        ],
    );
    report.push(row![
        lp.dimension,
        lp.power_on_chip,
        lp.coincidence_window,
        lp.applied_attenuation,
        lp.integration_time,
        r.raw_rate,
        r.qber_z,
        r.qber_x,
        ev.intrinsic_z,
        ev.intrinsic_x,
        r.skr,
        r.secure,
        g2,
    ]);
    let mut rates = Table::new(
        "rates",
        &[
            "basis",
            "pair_rate_hz",
            "true_rate_hz",
            "singles_alice_hz",
            "singles_bob_hz",
            "accidental_rate_hz",
            "window_efficiency",
            "transmission_alice",
            "transmission_bob",
        ],
    );
    rates_row(&mut rates, &ev.rates_z);
    rates_row(&mut rates, &ev.rates_x);
    let mut matrices = Table::new(
        "matrices",
        &["basis", "alice_outcome", "bob_outcome", "coincidences", "integration_time_s"],
    );
    matrix_rows(&mut matrices, &ev.matrix_z);
    matrix_rows(&mut matrices, &ev.matrix_x);

    let body = json!({
        "params": lp,
        "report": r,
        "intrinsic_error": { "z": ev.intrinsic_z, "x": ev.intrinsic_x },
        "heralded_g2": g2,
        "rates": { "z": ev.rates_z, "x": ev.rates_x },
        "matrices": { "z": ev.matrix_z.rows(), "x": ev.matrix_x.rows() },
    });
    Ok(CommandResult {
        output: Output::new("simulate", vec![report, rates, matrices], body),
        secure: Some(r.secure),
    })
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<CommandResult> {
    let model = cfg.channel_model();
    let grid = cfg.sweep.grid();
    let s = &cfg.sweep;
    let results = s
        .dimensions
        .iter()
        .map(|&d| sweep::cartography_with_workers(&model, &grid, d, s.attenuation, s.workers))
        .collect::<Result<Vec<_>>>()?;

    let mut points = Table::new(
        "sweep",
        &[
            "dimension",
            "attenuation_db",
            "power_mw",
            "window_ps",
            "raw_rate_hz",
            "qber_z",
            "qber_x",
            "skr_bit_per_s",
        ],
    );
    let mut summary = Table::new(
        "sweep_summary",
        &[
            "dimension",
            "attenuation_db",
            "power_op_mw",
            "window_op_ps",
            "skr_max_bit_per_s",
            "qber_z",
            "qber_x",
            "optimum_on_boundary",
            "qber_threshold",
        ],
    );
    let mut docs = Vec::new();
    for r in &results {
        for p in &r.points {
            let q = p.report;
            points.push(row![r.dimension, r.attenuation, p.power, p.window, q.raw_rate, q.qber_z, q.qber_x, q.skr]);
        }
        let o = r.optimum;
        let threshold = keyrate::qber_threshold(r.dimension)?;
        summary.push(row![
            r.dimension,
            r.attenuation,
            o.power,
            o.window,
            o.skr(),
            o.report.qber_z,
            o.report.qber_x,
            r.optimum_on_boundary(),
            threshold,
        ]);
        let grid_of = |f: &dyn Fn(&keyrate::KeyRateReport) -> f64| -> Vec<Vec<f64>> {
            r.points
                .chunks(r.windows.len())
                .map(|row| row.iter().map(|p| f(&p.report)).collect())
                .collect()
        };
        docs.push(json!({
            "dimension": r.dimension,
            "attenuation_db": r.attenuation,
            "optimum": o,
            "optimum_on_boundary": r.optimum_on_boundary(),
            "qber_threshold": threshold,
            "powers_mw": r.powers,
            "windows_ps": r.windows,
            "skr_bit_per_s": grid_of(&|q| q.skr),
            "qber_z": grid_of(&|q| q.qber_z),
            "qber_x": grid_of(&|q| q.qber_x),
        }));
    }
    let mut tables = vec![summary, points];
    let mut body = json!({ "grid": grid, "results": docs });
    if results.len() >= 2 {
        let ord = sweep::dimension_ordering(&results)?;
        let mut t = Table::new("sweep_ordering", &["power_ordering_holds", "window_ordering_holds"]);
        t.push(row![ord.power_ordering_holds, ord.window_ordering_holds]);
        tables.push(t);
        body["ordering"] = serde_json::to_value(&ord)?;
    }
    let secure = results.iter().any(|r| r.optimum.skr() > 0.0);
    Ok(CommandResult {
        output: Output::new("sweep", tables, body),
        secure: Some(secure),
    })
}

pub fn cmd_range(cfg: &RunConfig) -> Result<CommandResult> {
    let model = cfg.channel_model();
    let attenuations = cfg.range.attenuations()?;
    let res = sweep::range_scan(
        &model,
        &cfg.sweep.grid(),
        &cfg.range.dimensions,
        &attenuations,
        cfg.sweep.workers,
    )?;
    let mut curve = Table::new(
        "range",
        &[
            "dimension",
            "attenuation_db",
            "power_op_mw",
            "window_op_ps",
            "raw_rate_hz",
            "qber_z",
            "qber_x",
            "skr_bit_per_s",
        ],
    );
    let mut ext = Table::new("range_extinction", &["dimension", "extinction_db", "extinction_beyond_grid"]);
    for c in &res.curves {
        for p in &c.points {
            curve.push(row![c.dimension, p.attenuation, p.power, p.window, p.raw_rate, p.qber_z, p.qber_x, p.skr]);
        }
        ext.push(row![c.dimension, c.extinction.attenuation, c.extinction.beyond_grid]);
    }
    let verdict = cfg
        .range
        .recommend_at
        .map(|a| sweep::recommend_dimension(&res, a).map(|v| (a, v)))
        .transpose()?;
    let verdict_cell = |v: &DimensionVerdict| match v {
        DimensionVerdict::Dimension(d) => d.to_string(),
        DimensionVerdict::NoSecureChannel => "none".into(),
    };
    let mut summary = Table::new(
        "range_summary",
        &[
            "crossover_db",
            "max_attenuation_db",
            "max_attenuation_beyond_grid",
            "recommend_at_db",
            "recommended_dimension",
        ],
    );
    summary.push(row![
        res.crossover,
        res.max_attenuation,
        res.max_attenuation_beyond_grid,
        verdict.map(|v| v.0),
        verdict.as_ref().map(|v| verdict_cell(&v.1)),
    ]);
    let secure = res.curves.iter().any(|c| c.points.iter().any(|p| p.skr > 0.0));
    let body = json!({
        "range": res,
        "recommendation": verdict.map(|(a, v)| json!({ "attenuation_db": a, "verdict": v })),
    });
    Ok(CommandResult {
        output: Output::new("range", vec![summary, ext, curve], body),
        secure: Some(secure),
    })
}

pub fn cmd_plan(cfg: &RunConfig) -> Result<CommandResult> {
    let path = cfg
        .plan
        .jsi
        .as_ref()
        .ok_or_else(|| Error::Config("plan needs a JSI file (--jsi or plan.jsi)".into()))?;
    let jsi = spectrum::load_jsi_path(path)?;
    let (width, floor) = (cfg.plan.width, cfg.plan.rate_floor);
    let channels = allocate_channels(&jsi, width, floor)?;
    let rate = |m: u32| jsi.iter().find(|r| r.mode_index == m).map_or(0.0, |r| r.coincidence_rate);

    let mut t = Table::new(
        "plan",
        &[
            "channel",
            "center_mode",
            "width_resonances",
            "first_mode",
            "last_mode",
            "max_dimension",
            "min_coincidence_rate_hz",
        ],
    );
    let mut docs = Vec::new();
    for (i, c) in channels.iter().enumerate() {
        let modes = c.modes();
        let min_rate = modes.iter().map(|&m| rate(m)).fold(f64::INFINITY, f64::min);
        t.push(row![
            i,
            c.center_mode,
            c.width_resonances,
            modes[0],
            *modes.last().unwrap(),
            c.max_dimension,
            min_rate,
        ]);
        docs.push(json!({ "channel": i, "spec": c, "modes": modes, "min_coincidence_rate_hz": min_rate }));
    }
    let usable = jsi.iter().filter(|r| r.coincidence_rate >= floor).count();
    let mut s = Table::new(
        "plan_summary",
        &["jsi_records", "usable_modes", "width_resonances", "rate_floor_hz", "channels"],
    );
    s.push(row![jsi.len(), usable, width, floor, channels.len()]);
    let body = json!({
        "jsi_records": jsi.len(),
        "usable_modes": usable,
        "width_resonances": width,
        "rate_floor_hz": floor,
        "channel_count": channels.len(),
        "channels": docs,
    });
    Ok(CommandResult {
        output: Output::new("plan", vec![s, t], body),
        secure: None,
    })
}

pub fn cmd_mubs(cfg: &RunConfig) -> Result<CommandResult> {
    let d = cfg.link.dimension;
    let mut headers = vec!["basis".to_string(), "outcome".to_string()];
    for l in 0..d {
        headers.push(format!("bin{l}_re"));
        headers.push(format!("bin{l}_im"));
    }
    let mut t = Table {
        name: "mubs".into(),
        headers,
        rows: Vec::new(),
    };
    let mut docs = Vec::new();
    for basis in Basis::BOTH {
        for k in 0..d {
            let v = mub_vector(d, basis, k)?;
            let mut r = row![basis.to_string(), k];
            for a in &v {
                r.push(a.re.cell());
                r.push(a.im.cell());
            }
            t.push(r);
            let amps: Vec<[f64; 2]> = v.iter().map(|a| [a.re, a.im]).collect();
            docs.push(json!({ "basis": basis, "outcome": k, "amplitudes": amps }));
        }
    }
    Ok(CommandResult {
        output: Output::new("mubs", vec![t], json!({ "dimension": d, "vectors": docs })),
        secure: None,
    })
}

/// Writes the stream to `out` in `generator.file_format`.
pub fn cmd_gen_timetags(cfg: &RunConfig, out: &mut dyn Write) -> Result<CommandResult> {
    let gen = cfg.generator();
    let meta = gen.metadata(cfg.seed)?;
    let mut writer = TimetagWriter::new(out, &meta, cfg.generator.file_format)?;
    let tally = timetag::generate_to_sink(&gen, &meta, cfg.seed, &mut writer)?;
    writer.finish()?;
    let exposure = meta.exposure();

    let mut s = Table::new(
        "timetags_summary",
        &[
            "dimension",
            "duration_s",
            "dwell_s",
            "exposure_z_s",
            "exposure_x_s",
            "total_events",
            "dark_counts",
            "noise_counts",
            "true_pairs_z",
            "true_pairs_x",
            "true_pairs_mismatched",
        ],
    );
    s.push(row![
        meta.dimension,
        meta.duration,
        meta.dwell,
        exposure.z,
        exposure.x,
        tally.total_events,
        tally.dark_counts,
        tally.noise_counts,
        tally.true_pairs_z.total(),
        tally.true_pairs_x.total(),
        tally.true_pairs_mismatched,
    ]);
    let mut det = Table::new("timetags_detectors", &["detector_id", "user", "basis", "outcome", "events"]);
    for info in &meta.detectors {
        let user = match info.user {
            timetag::User::Alice => "alice",
            timetag::User::Bob => "bob",
        };
        det.push(row![
            info.id,
            user,
            info.basis.to_string(),
            info.outcome,
            tally.events_per_detector.get(info.id as usize).copied().unwrap_or(0),
        ]);
    }
    let body = json!({
        "dimension": meta.dimension,
        "duration_s": meta.duration,
        "dwell_s": meta.dwell,
        "exposure": { "z_s": exposure.z, "x_s": exposure.x, "x_settings_s": exposure.x_settings },
        "detectors": meta.detectors,
        "tally": tally,
    });
    Ok(CommandResult {
        output: Output::new("gen-timetags", vec![s, det], body),
        secure: None,
    })
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<CommandResult> {
    let ing = &cfg.ingest;
    let path = ing
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("ingest needs a time-tag file".into()))?;
    let window = ing.window.unwrap_or(cfg.link.coincidence_window);
    let reader = TimetagReader::open(path)?;
    let meta = reader.metadata().clone();
    let mut counter = CoincidenceCounter::new(&meta, window, ing.pairing)?;
    let mut hist = if ing.histogram {
        Some(HistogramBuilder::new(&meta, ing.histogram_bin, ing.histogram_span)?)
    } else {
        None
    };
    for e in reader {
        let e = e?;
        counter.push(e)?;
        if let Some(h) = hist.as_mut() {
            h.push(e)?;
        }
    }
    let counts = counter.finish();
    let report = counts.report(cfg.model.post_processing_f)?;
    let sigma = |m: &CoincidenceMatrix, q: f64| (q * (1.0 - q) / m.total()).sqrt();

    let mut c = Table::new("ingest_counts", &["basis", "alice_outcome", "bob_outcome", "coincidences", "exposure_s"]);
    matrix_rows(&mut c, &counts.z);
    matrix_rows(&mut c, &counts.x);
    let mut r = Table::new(
        "ingest_report",
        &[
            "dimension",
            "window_ps",
            "pairing",
            "exposure_z_s",
            "exposure_x_s",
            "alice_events",
            "bob_events",
            "sifted_out",
            "coincidences_z",
            "coincidences_x",
            "qber_z",
            "qber_z_sigma",
            "qber_x",
            "qber_x_sigma",
            "raw_rate_hz",
            "skr_bit_per_s",
            "secure",
        ],
    );
    let pairing = match ing.pairing {
        PairingPolicy::Exclusive => "exclusive",
        PairingPolicy::AllPairs => "all-pairs",
    };
    r.push(row![
        meta.dimension,
        window,
        pairing,
        counts.exposure.z,
        counts.exposure.x,
        counts.alice_events,
        counts.bob_events,
        counts.sifted_out,
        counts.z.total(),
        counts.x.total(),
        report.qber_z,
        sigma(&counts.z, report.qber_z),
        report.qber_x,
        sigma(&counts.x, report.qber_x),
        report.raw_rate,
        report.skr,
        report.secure,
    ]);
    let mut tables = vec![r, c];
    let mut body = json!({
        "dimension": meta.dimension,
        "window_ps": window,
        "pairing": ing.pairing,
        "exposure": { "z_s": counts.exposure.z, "x_s": counts.exposure.x },
        "alice_events": counts.alice_events,
        "bob_events": counts.bob_events,
        "sifted_out": counts.sifted_out,
        "counts": { "z": counts.z.rows(), "x": counts.x.rows() },
        "qber_sigma": { "z": sigma(&counts.z, report.qber_z), "x": sigma(&counts.x, report.qber_x) },
        "report": report,
    });
    if let Some(h) = hist {
        let h = h.finish();
        let mut ht = Table::new("ingest_histogram", &["delay_ps", "counts"]);
        for (i, &n) in h.counts.iter().enumerate() {
            ht.push(row![h.center(i), n]);
        }
        tables.push(ht);
        body["histogram"] = json!({ "bin_width_ps": h.bin_width, "span_ps": h.span, "counts": h.counts });
        match timetag::fit_voigt(&h) {
            Ok(fit) => {
                let mut ft = Table::new(
                    "ingest_fit",
                    &[
                        "sigma_ps",
                        "gamma_ps",
                        "fwhm_ps",
                        "histogram_fwhm_ps",
                        "amplitude",
                        "offset",
                        "reduced_chi2",
                        "converged",
                    ],
                );
                ft.push(row![
                    fit.sigma,
                    fit.gamma,
                    fit.fwhm(),
                    h.fwhm(),
                    fit.amplitude,
                    fit.offset,
                    fit.reduced_chi2,
                    fit.converged,
                ]);
                tables.push(ft);
                body["fit"] = serde_json::to_value(fit)?;
                body["fit"]["fwhm_ps"] = json!(fit.fwhm());
            }
            Err(e) => body["fit_error"] = Value::String(e.to_string()),
        }
    }
    Ok(CommandResult {
        output: Output::new("ingest", tables, body),
        secure: Some(report.secure),
    })
}

/// Writes the synthetic JSI in the tabular JSI format to `out`.
pub fn cmd_gen_jsi(cfg: &RunConfig, out: &mut dyn Write) -> Result<CommandResult> {
    let records = fixtures::synthetic_jsi(cfg.seed);
    spectrum::write_jsi(&mut *out, &records, fixtures::COMMENT)?;
    let floor = fixtures::RATE_FLOOR;
    let w3 = allocate_channels(&records, 3, floor)?.len();
    let w2 = allocate_channels(&records, 2, floor)?.len();
    let mut t = Table::new(
        "jsi_summary",
        &["records", "first_mode", "last_mode", "rate_floor_hz", "channels_width3", "channels_width2"],
    );
    t.push(row![records.len(), fixtures::FIRST_MODE, fixtures::LAST_MODE, floor, w3, w2]);
    let body = json!({
        "records": records.len(),
        "rate_floor_hz": floor,
        "channels": { "width3": w3, "width2": w2 },
        "absent_modes": fixtures::ABSENT_MODES,
        "sub_floor_modes": fixtures::SUB_FLOOR_MODES,
    });
    Ok(CommandResult {
        output: Output::new("gen-jsi", vec![t], body),
        secure: None,
    })
}
