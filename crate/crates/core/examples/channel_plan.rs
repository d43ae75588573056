//! Packs the synthetic 80-mode JSI into width-3 and width-2 channels and
//! lists the qutrit channels.

use fbqkd::cli::fixtures;
use fbqkd::spectrum::{allocate_channels, contiguous_runs};

fn main() -> fbqkd::Result<()> {
    let jsi = fixtures::synthetic_jsi(0);
    let floor = fixtures::RATE_FLOOR;
    let usable: Vec<u32> = jsi
        .iter()
        .filter(|r| r.coincidence_rate >= floor)
        .map(|r| r.mode_index)
        .collect();
    println!("{} records, {} above {floor} Hz", jsi.len(), usable.len());
    for (start, len) in contiguous_runs(&usable) {
        println!("  run {start}..={} ({len} modes)", start + len - 1);
    }
    let w3 = allocate_channels(&jsi, 3, floor)?;
    let w2 = allocate_channels(&jsi, 2, floor)?;
    println!("width 3: {} channels, width 2: {} channels", w3.len(), w2.len());
    for (i, c) in w3.iter().enumerate() {
        println!("  ch{i:02} modes {:?} qutrit {:?} qubit {:?}", c.modes(), c.bell_modes(3)?, c.bell_modes(2)?);
    }
    Ok(())
}
