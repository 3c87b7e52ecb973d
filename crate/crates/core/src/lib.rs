//! Instrumented mini-Scheme runtime for measuring drag: how long heap objects
//! stay reachable after their last use.
//!
//! * [`heap`]: pairs and vectors in two semispaces.
//! * [`gc`]: the copying collector and an independent reachability oracle.
//! * [`profiler`]: lifetime registry, logical clock and the DRAGLOG format.
//! * [`runtime`]: allocation triggers and run termination.
//! * [`interp`]: reader and tree-walking evaluator.
//! * [`analyzer`]: drag statistics, reachable/live curves, space-time report.

pub mod analyzer;
pub mod gc;
pub mod heap;
pub mod interp;
pub mod profiler;
pub mod programs;
pub mod runtime;

pub use heap::{Heap, HeapError, ObjId, ObjKind, Ref, Value};
pub use profiler::{LifetimeRecord, Tick, TraceLog};
pub use runtime::{Runtime, RuntimeConfig};
