//! Key rate over pump power and coincidence window for qubits and qutrits,
//! with the optimum for each and a coarse text map of the qutrit surface.
//!
//! ```text
//! cargo run --release --example cartography
//! ```

use fbqkd::sweep::{self, ChannelModel, SweepGrid};

fn main() -> fbqkd::Result<()> {
    let model = ChannelModel::default();
    let grid = SweepGrid::default();
    let mut results = Vec::new();
    for d in [2, 3] {
        let r = sweep::cartography(&model, &grid, d, 0.0)?;
        let o = r.optimum;
        println!(
            "d = {d}: P_op = {:.1} mW, dt_op = {:.0} ps, SKR = {:.0} bit/s, QBER Z {:.2}% X {:.2}%",
            o.power,
            o.window,
            o.skr(),
            100.0 * o.report.qber_z,
            100.0 * o.report.qber_x
        );
        results.push(r);
    }
    let ord = sweep::dimension_ordering(&results)?;
    println!(
        "P_op non-increasing in d: {}, dt_op non-increasing in d: {}",
        ord.power_ordering_holds, ord.window_ordering_holds
    );

    let r = &results[1];
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    let max = r.optimum.skr();
    println!("\nqutrit SKR (rows: P from 8 to 1 mW; columns: dt from 30 to 1500 ps)");
    for i in (0..r.powers.len()).rev().step_by(5) {
        let line: String = (0..r.windows.len())
            .step_by(6)
            .map(|j| {
                let s = r.skr_at(i, j) / max;
                shades[((s * 9.0).round() as usize).min(9)]
            })
            .collect();
        println!("{:>4.1} |{line}|", r.powers[i]);
    }
    Ok(())
}
