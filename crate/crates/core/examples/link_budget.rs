//! Rates, matrices and heralded g2 of one qutrit link, and how pump power
//! trades key rate against multi-pair noise.

use fbqkd::link::{self, LinkParams};
use fbqkd::sweep::ChannelModel;

fn main() -> fbqkd::Result<()> {
    let model = ChannelModel::default();
    let ev = model.evaluate(&LinkParams::new(3.5, 285.0, 3))?;
    let r = &ev.rates_z;
    println!("pairs/s per mode   {:.3e}", r.pair_rate);
    println!("transmission A, B  {:.4}, {:.4}", r.transmission_alice, r.transmission_bob);
    println!("singles A, B (Hz)  {:.0}, {:.0}", r.singles_alice, r.singles_bob);
    println!("window efficiency  {:.3}", r.window_efficiency);
    println!("Z matrix (Hz)");
    for row in ev.matrix_z.rows() {
        println!("  {}", row.iter().map(|v| format!("{v:9.2}")).collect::<String>());
    }
    println!("X matrix (Hz)");
    for row in ev.matrix_x.rows() {
        println!("  {}", row.iter().map(|v| format!("{v:9.2}")).collect::<String>());
    }
    println!("report {:?}", ev.report);
    println!("\n{:>6} {:>10} {:>8} {:>8}", "P mW", "SKR", "QBER Z", "g2");
    for p in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
        let ev = model.evaluate(&LinkParams::new(p, 285.0, 3))?;
        let g2 = link::heralded_g2(&ev.rates_z)?;
        println!("{p:>6.1} {:>10.1} {:>8.4} {g2:>8.4}", ev.report.skr, ev.report.qber_z);
    }
    Ok(())
}
