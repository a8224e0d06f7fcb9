//! Life of no-fill misses under RaS-Spec. A speculative load that is
//! authorized while its miss is outstanding enters the Safe History Buffer;
//! an SHB Fetch that lands on its line clears the NoFill bit and the line is
//! installed. A squashed load's miss returns without a fill.

use rascache::{DefenseMode, HierarchyConfig, OpKind, Resolve, Simulator};

fn main() -> rascache::Result<()> {
    let mut sim = Simulator::new(HierarchyConfig::new(DefenseMode::ras_spec(3, 1, 1)), 3)?;
    sim.record_fills(true);
    sim.trace_shb(true);
    let kept = sim.push(OpKind::Load, 0x1_0000, 0, Resolve::AuthorizeAt(40))?;
    let squashed = sim.push(OpKind::Load, 0x2_0000, 1, Resolve::SquashAt(30))?;
    sim.run_to_quiet()?;

    for seq in [kept, squashed] {
        let e = sim.entry(seq).expect("pushed op");
        println!(
            "op {seq} addr {:#x}: state {:?}, no_fill at issue {}, completed at {:?}",
            e.op.addr, e.state, e.no_fill, e.completed_at
        );
    }
    for i in sim.shb_insertions() {
        println!("SHB insert at cycle {}: {:#x}", i.cycle, i.addr);
    }
    let first = sim.emissions().first().map(|e| e.cycle);
    println!("{} SHB Fetches, first at cycle {first:?}", sim.emissions().len());
    for r in sim.hierarchy().fill_log() {
        println!("cycle {:>4}: {:?} fill {:#x} via {:?}", r.cycle, r.level, r.line_addr, r.provenance);
    }
    let h = sim.hierarchy();
    println!("L1 no-fill split: {:?}", h.l1().nofill_split());
    Ok(())
}
