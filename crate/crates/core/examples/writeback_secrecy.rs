//! A no-fill store's dirty line leaves the core through the writeback
//! path. Keeping the NoFill bit on that writeback stops it from installing
//! the line in L2; stripping the bit recreates the channel.

use rascache::cache::LevelRequest;
use rascache::hierarchy::{AccessResult, Hierarchy};
use rascache::{DefenseMode, HierarchyConfig};

const SECRET_LINE: u64 = 0x9000;

fn probe_after_store(strip: bool) -> rascache::Result<u64> {
    let mut cfg = HierarchyConfig::new(DefenseMode::ras_plus_default());
    cfg.strip_writeback_nofill = strip;
    let mut h = Hierarchy::new(cfg, 1)?;
    let AccessResult::Done { fills, .. } = h.access(LevelRequest::store(SECRET_LINE, true), 0) else {
        unreachable!("an idle hierarchy never blocks");
    };
    for f in fills {
        h.fill_return(f, f.at)?;
    }
    let AccessResult::Done { outcome, .. } = h.access(LevelRequest::load(SECRET_LINE, true), 1_000) else {
        unreachable!("an idle hierarchy never blocks");
    };
    Ok(outcome.total_latency)
}

fn main() -> rascache::Result<()> {
    println!("probe latency with NoFill kept on writebacks:  {} cycles", probe_after_store(false)?);
    println!("probe latency with NoFill stripped:            {} cycles", probe_after_store(true)?);
    Ok(())
}
