use proptest::prelude::*;

use fbqkd::keyrate::{entropy_d, qber, skr};
use fbqkd::link::{CoincidenceMatrix, LinkParams, TemporalProfile};
use fbqkd::qudit::{joint_distribution, Basis, BellStateSpec, Imperfection};
use fbqkd::spectrum::{allocate_channels, JsiRecord};
use fbqkd::sweep::ChannelModel;
use fbqkd::timetag::{count_coincidences, Event, PairingPolicy, StreamMetadata, TimetagStream};

fn dim() -> impl Strategy<Value = u32> {
    2u32..=5
}

fn stream(d: u32, raw: Vec<(u64, u8)>) -> TimetagStream {
    let events = raw
        .into_iter()
        .map(|(t, det)| Event {
            timestamp: t,
            detector: det % (4 * d as u8),
        })
        .collect();
    TimetagStream::new(StreamMetadata::new(d, 1e-6), events).unwrap()
}

fn jsi() -> impl Strategy<Value = Vec<JsiRecord>> {
    prop::collection::btree_set(1u32..60, 0..50).prop_flat_map(|modes| {
        let n = modes.len();
        prop::collection::vec(0.0f64..5000.0, n).prop_map(move |rates| {
            modes
                .iter()
                .zip(rates)
                .map(|(&m, r)| JsiRecord {
                    mode_index: m,
                    coincidence_rate: r,
                    background_rate: 0.0,
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn entropy_bounded_and_peaks_at_uniform(d in dim(), x in 0.0f64..=1.0) {
        let h = entropy_d(d, x).unwrap();
        let peak = entropy_d(d, f64::from(d - 1) / f64::from(d)).unwrap();
        prop_assert!(h >= -1e-12 && h <= peak + 1e-12);
        prop_assert!((peak - f64::from(d).log2()).abs() < 1e-12);
    }

    #[test]
    fn entropy_concave(d in dim(), a in 0.0f64..=1.0, b in 0.0f64..=1.0, l in 0.0f64..=1.0) {
        let mid = entropy_d(d, l * a + (1.0 - l) * b).unwrap();
        let chord = l * entropy_d(d, a).unwrap() + (1.0 - l) * entropy_d(d, b).unwrap();
        prop_assert!(mid >= chord - 1e-9);
    }

    #[test]
    fn skr_non_increasing_in_errors(
        d in dim(),
        raw in 1.0f64..1e5,
        ez in 0.0f64..0.3,
        ex in 0.0f64..0.3,
        dz in 0.0f64..0.05,
        dx in 0.0f64..0.05,
    ) {
        let base = skr(d, raw, ez, ex, 1.2).unwrap().skr;
        prop_assert!(skr(d, raw, ez + dz, ex, 1.2).unwrap().skr <= base + 1e-9);
        prop_assert!(skr(d, raw, ez, ex + dx, 1.2).unwrap().skr <= base + 1e-9);
        prop_assert!(base >= 0.0 && base <= 0.5 * raw * f64::from(d).log2() + 1e-9);
    }

    #[test]
    fn qber_scale_invariant(d in dim(), cells in prop::collection::vec(0.0f64..1e4, 25), c in 1e-3f64..1e3) {
        let n = d as usize;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cells[i * n..(i + 1) * n].to_vec()).collect();
        prop_assume!(rows.iter().flatten().sum::<f64>() > 0.0);
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let a = qber(&CoincidenceMatrix::from_rows(Basis::Z, &rows, 1.0).unwrap()).unwrap();
        let b = qber(&CoincidenceMatrix::from_rows(Basis::Z, &scaled, 1.0).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn window_efficiency_monotone(sigma in 10.0f64..300.0, gamma in 1.0f64..300.0, w in 1.0f64..2000.0, dw in 0.0f64..500.0) {
        let p = TemporalProfile::new(sigma, gamma).unwrap();
        let a = p.window_efficiency(w).unwrap();
        let b = p.window_efficiency(w + dw).unwrap();
        prop_assert!(a <= b + 1e-9);
        prop_assert!(a > 0.0 && b <= 1.0 + 1e-12);
    }

    #[test]
    fn attenuation_scales_rates(d in 2u32..=3, a in 0.0f64..60.0, da in 0.0f64..20.0) {
        let model = ChannelModel::default();
        let e0 = model.evaluate(&LinkParams::new(3.5, 285.0, d).with_attenuation(a)).unwrap();
        let e1 = model.evaluate(&LinkParams::new(3.5, 285.0, d).with_attenuation(a + da)).unwrap();
        let ratio = e1.rates_z.true_rate / e0.rates_z.true_rate;
        prop_assert!((ratio / 10f64.powf(-da / 10.0) - 1.0).abs() < 1e-9);
        prop_assert!(e1.report.raw_rate <= e0.report.raw_rate * (1.0 + 1e-12));
        prop_assert!(e1.report.skr <= e0.report.skr + 1e-9);
    }

    #[test]
    fn wider_window_never_loses_pairs(
        d in 2u32..=4,
        raw in prop::collection::vec((0u64..2_000_000, any::<u8>()), 0..300),
        w in 1.0f64..5000.0,
        dw in 0.0f64..5000.0,
    ) {
        let s = stream(d, raw);
        let narrow = count_coincidences(&s, w, PairingPolicy::AllPairs).unwrap();
        let wide = count_coincidences(&s, w + dw, PairingPolicy::AllPairs).unwrap();
        prop_assert!(narrow.total() + narrow.sifted_out as f64 <= wide.total() + wide.sifted_out as f64);
    }

    #[test]
    fn exclusive_pairs_bounded_by_events(
        d in 2u32..=4,
        raw in prop::collection::vec((0u64..2_000_000, any::<u8>()), 0..300),
        w in 1.0f64..20000.0,
    ) {
        let s = stream(d, raw);
        let ex = count_coincidences(&s, w, PairingPolicy::Exclusive).unwrap();
        let all = count_coincidences(&s, w, PairingPolicy::AllPairs).unwrap();
        let pairs = ex.total() + ex.sifted_out as f64;
        prop_assert!(pairs <= ex.alice_events.min(ex.bob_events) as f64);
        prop_assert!(pairs <= all.total() + all.sifted_out as f64);
        prop_assert_eq!(ex.alice_events + ex.bob_events, s.events.len() as u64);
    }

    #[test]
    fn channels_disjoint_and_above_floor(records in jsi(), width in 2u32..=3, floor in 0.0f64..5000.0) {
        let channels = allocate_channels(&records, width, floor).unwrap();
        let mut used: Vec<u32> = channels.iter().flat_map(|c| c.modes()).collect();
        let n = used.len();
        used.sort_unstable();
        used.dedup();
        prop_assert_eq!(used.len(), n);
        for m in used {
            let r = records.iter().find(|r| r.mode_index == m);
            prop_assert!(r.is_some_and(|r| r.coincidence_rate >= floor));
        }
    }

    #[test]
    fn higher_floor_never_adds_channels(records in jsi(), width in 2u32..=3, lo in 0.0f64..5000.0, extra in 0.0f64..2000.0) {
        let a = allocate_channels(&records, width, lo).unwrap().len();
        let b = allocate_channels(&records, width, lo + extra).unwrap().len();
        prop_assert!(b <= a);
    }

    #[test]
    fn joint_distribution_normalised(d in dim(), slope in -1.0f64..1.0) {
        let state = BellStateSpec::with_phase_slope(d, 10, slope).unwrap();
        let ideal = Imperfection::ideal();
        for basis in Basis::BOTH {
            let p = joint_distribution(&state, basis, &ideal, &ideal).unwrap();
            let total: f64 = p.iter().flatten().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
        let z = joint_distribution(&state, Basis::Z, &ideal, &ideal).unwrap();
        for (i, row) in z.iter().enumerate() {
            prop_assert!((row[i] - 1.0 / f64::from(d)).abs() < 1e-9);
        }
    }
}
