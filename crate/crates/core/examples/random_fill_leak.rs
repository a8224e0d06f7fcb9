//! A squashed speculative load under the Random Fill cache still installs a
//! line from the window around the secret-dependent address, so the window
//! itself leaks. The same load under RaS-Spec installs nothing.

use rascache::hierarchy::Level;
use rascache::shb::window_base;
use rascache::{DefenseMode, HierarchyConfig, Simulator};

const SECRET_ADDR: u64 = 0x40_0000 + 30 * 64 * 4;

fn main() -> rascache::Result<()> {
    for defense in [DefenseMode::random_fill(4), DefenseMode::ras_spec_default()] {
        let cfg = HierarchyConfig::new(defense);
        let mut sim = Simulator::new(cfg, 7)?;
        sim.record_fills(true);
        sim.transient_load(SECRET_ADDR, 10)?;
        sim.run_to_quiet()?;
        let base = window_base(SECRET_ADDR, 4, cfg.l1.line_bytes);
        println!("{} (window {base:#x}..{:#x})", defense.label(), base + 4 * cfg.l1.line_bytes);
        let fills: Vec<_> = sim.hierarchy().fill_log().iter().filter(|r| r.level == Level::L1).collect();
        if fills.is_empty() {
            println!("  no L1 fills");
        }
        for r in fills {
            println!("  cycle {:>4}: L1 fill {:#x} via {:?}", r.cycle, r.line_addr, r.provenance);
        }
    }
    Ok(())
}
