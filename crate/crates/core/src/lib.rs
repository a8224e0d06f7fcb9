//! Cycle-level model of a two-level cache hierarchy with the Random and Safe
//! (RaS) speculative-attack defense, plus attack and workload drivers.

pub mod attacks;
pub mod cache;
pub mod error;
pub mod harness;
pub mod hierarchy;
pub mod kernel;
pub mod shb;
pub mod speculative;
pub mod workloads;

pub use error::{Error, Result};
pub use hierarchy::{DefenseKind, DefenseMode, Hierarchy, HierarchyConfig};
pub use kernel::{Cycle, Rng};
pub use speculative::{MemOp, OpKind, Resolve, RobEntry, RobState, Simulator};
