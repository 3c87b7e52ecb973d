//! Cheney-style stop-and-copy collection over the two semispaces.
//!
//! Each collection runs the profiler's flag protocol: flags are reset, every
//! evacuated object is marked with its new address, and once the copy is
//! complete every unflagged registry entry is flushed to the log stamped with
//! the collection tick.
//!
//! Roots come from the mutator through [`Roots`]. Procedures are not heap
//! objects, but a procedure stored in a heap slot can capture references, so
//! the collector hands any procedure it finds back to the mutator's tracer.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::heap::{Heap, HeapError, ObjId, ObjKind, ProcId, Ref, Value};
use crate::profiler::{Profiler, ProfilerError, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    Interval,
    Exhaustion,
    Manual,
    Termination,
}

/// Per-cycle summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionStats {
    pub trigger: Trigger,
    pub tick: Tick,
    pub survivors: usize,
    pub collected: usize,
    pub slots_copied: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GcError {
    #[error("to-space overflow: {needed} slots needed, {capacity} available")]
    ToSpaceOverflow { needed: usize, capacity: usize },
    #[error(transparent)]
    Heap(#[from] HeapError),
    #[error(transparent)]
    Profiler(#[from] ProfilerError),
    #[error("collector disagrees with reachability oracle at tick {tick}: {missing} reachable objects dropped, {extra} unreachable objects kept")]
    OracleMismatch {
        tick: Tick,
        missing: usize,
        extra: usize,
    },
}

/// Walks the mutator-side (non-heap) object graph for one trace.
///
/// A tracer is created per trace and remembers which procedures and frames it
/// has expanded, so cycles through closures terminate.
pub trait RootTracer {
    /// Push every heap reference held directly by the mutator.
    fn trace_roots(&mut self, out: &mut Vec<Ref>);

    /// Push the heap references reachable from `value`: the value itself if it
    /// is a reference, or whatever a procedure captures.
    fn trace_value(&mut self, value: Value, out: &mut Vec<Ref>);
}

pub trait Roots {
    fn tracer(&self) -> Box<dyn RootTracer + '_>;
}

/// A flat list of root values with no procedures to expand.
#[derive(Debug, Default, Clone)]
pub struct ValueRoots(pub Vec<Value>);

struct FlatTracer<'a>(&'a [Value]);

impl RootTracer for FlatTracer<'_> {
    fn trace_roots(&mut self, out: &mut Vec<Ref>) {
        out.extend(self.0.iter().filter_map(Value::as_ref));
    }

    fn trace_value(&mut self, value: Value, out: &mut Vec<Ref>) {
        if let Value::Ref(r) = value {
            out.push(r);
        }
    }
}

impl Roots for ValueRoots {
    fn tracer(&self) -> Box<dyn RootTracer + '_> {
        Box::new(FlatTracer(&self.0))
    }
}

impl Roots for [Value] {
    fn tracer(&self) -> Box<dyn RootTracer + '_> {
        Box::new(FlatTracer(self))
    }
}

impl Roots for Vec<Value> {
    fn tracer(&self) -> Box<dyn RootTracer + '_> {
        Box::new(FlatTracer(self))
    }
}

/// Roots plus a handful of extra values (e.g. the operands of an allocation
/// in flight).
pub struct WithExtra<'a> {
    pub roots: &'a dyn Roots,
    pub extra: &'a [Value],
}

struct ExtraTracer<'a> {
    inner: Box<dyn RootTracer + 'a>,
    extra: &'a [Value],
}

impl RootTracer for ExtraTracer<'_> {
    fn trace_roots(&mut self, out: &mut Vec<Ref>) {
        self.inner.trace_roots(out);
        for &v in self.extra {
            self.inner.trace_value(v, out);
        }
    }

    fn trace_value(&mut self, value: Value, out: &mut Vec<Ref>) {
        self.inner.trace_value(value, out);
    }
}

impl Roots for WithExtra<'_> {
    fn tracer(&self) -> Box<dyn RootTracer + '_> {
        Box::new(ExtraTracer {
            inner: self.roots.tracer(),
            extra: self.extra,
        })
    }
}

struct Evacuator<'h> {
    heap: &'h mut Heap,
    profiler: &'h mut Profiler,
    from: usize,
    to: usize,
    slots_copied: usize,
}

impl Evacuator<'_> {
    /// Copies `id` to to-space unless already forwarded; returns its new address.
    fn evacuate(&mut self, id: ObjId) -> Result<usize, GcError> {
        let epoch = self.heap.epoch;
        let info = self
            .heap
            .table
            .get_mut(&id)
            .ok_or(HeapError::DanglingRef(id))?;
        if info.epoch == epoch {
            return Ok(info.addr);
        }
        let (from, to) = if self.from == 0 {
            let (a, b) = self.heap.spaces.split_at_mut(1);
            (&a[0], &mut b[0])
        } else {
            let (a, b) = self.heap.spaces.split_at_mut(1);
            (&b[0], &mut a[0])
        };
        if to.free_slots() < info.len {
            return Err(GcError::ToSpaceOverflow {
                needed: to.used_slots() + info.len,
                capacity: to.capacity,
            });
        }
        let new_addr = to.slots.len();
        to.slots
            .extend_from_slice(&from.slots[info.addr..info.addr + info.len]);
        to.directory.push(id);
        info.addr = new_addr;
        info.epoch = epoch;
        self.slots_copied += info.len;
        self.profiler.mark_survivor(id, new_addr)?;
        Ok(new_addr)
    }
}

/// Collects the heap at `clock`.
///
/// The collector only touches the object table and the two semispaces; root
/// values held by the mutator are not rewritten, they re-resolve through the
/// table on their next access.
pub fn collect(
    heap: &mut Heap,
    profiler: &mut Profiler,
    roots: &dyn Roots,
    clock: Tick,
    trigger: Trigger,
) -> Result<CollectionStats, GcError> {
    let objects_before = heap.table.len();
    profiler.reset_flags()?;
    heap.epoch += 1;
    let from = heap.active;
    let to = 1 - from;
    heap.spaces[to].clear();

    let mut tracer = roots.tracer();
    let mut pending = Vec::new();
    tracer.trace_roots(&mut pending);

    let mut ev = Evacuator {
        heap,
        profiler,
        from,
        to,
        slots_copied: 0,
    };
    for r in pending.drain(..) {
        ev.evacuate(r.id)?;
    }

    // Cheney scan: the to-space directory is the queue.
    let mut scan = 0;
    while scan < ev.heap.spaces[ev.to].directory.len() {
        let id = ev.heap.spaces[ev.to].directory[scan];
        let info = ev.heap.table[&id];
        for i in info.addr..info.addr + info.len {
            match ev.heap.spaces[ev.to].slots[i] {
                Value::Ref(r) => {
                    let addr = ev.evacuate(r.id)?;
                    ev.heap.spaces[ev.to].slots[i] = Value::Ref(Ref { id: r.id, addr });
                }
                v @ Value::Proc(_) => {
                    tracer.trace_value(v, &mut pending);
                    for r in pending.drain(..) {
                        ev.evacuate(r.id)?;
                    }
                }
                _ => {}
            }
        }
        scan += 1;
    }
    let slots_copied = ev.slots_copied;

    // Anything left in from-space with a stale epoch was not copied.
    let epoch = heap.epoch;
    let mut collected = 0;
    let from_dir = std::mem::take(&mut heap.spaces[from].directory);
    for id in &from_dir {
        if heap.table[id].epoch != epoch {
            heap.table.remove(id);
            collected += 1;
        }
    }
    heap.spaces[from].clear();
    heap.active = to;

    let flushed = profiler.flush_unflagged(clock)?;
    debug_assert_eq!(flushed.len(), collected);
    let survivors = heap.table.len();
    debug_assert_eq!(survivors + collected, objects_before);

    Ok(CollectionStats {
        trigger,
        tick: clock,
        survivors,
        collected,
        slots_copied,
    })
}

/// Exact transitive closure over reference slots, by depth-first search on the
/// heap's read API. Shares no traversal code with [`collect`].
pub fn reachability_oracle(heap: &Heap, roots: &dyn Roots) -> HashSet<ObjId> {
    let mut tracer = roots.tracer();
    let mut stack = Vec::new();
    tracer.trace_roots(&mut stack);
    let mut seen = HashSet::new();
    let mut extra = Vec::new();
    while let Some(r) = stack.pop() {
        if !seen.insert(r.id) {
            continue;
        }
        let Ok(slots) = heap.slots(r) else {
            continue;
        };
        for &v in slots {
            match v {
                Value::Ref(child) if !seen.contains(&child.id) => stack.push(child),
                Value::Proc(_) => {
                    tracer.trace_value(v, &mut extra);
                    stack.append(&mut extra);
                }
                _ => {}
            }
        }
    }
    seen
}

/// Serializes the graph reachable from `values` without mentioning ids or
/// addresses. Shared or cyclic objects are printed once with a `#n=` label and
/// referenced afterwards as `#n#`, so two heaps print the same iff the
/// reachable graphs are isomorphic.
pub fn canonical_form(heap: &Heap, values: &[Value]) -> Result<String, HeapError> {
    let mut labels: HashMap<ObjId, usize> = HashMap::new();
    let mut out = String::new();
    // Explicit stack so long lists cannot overflow.
    enum Item {
        Val(Value),
        Text(&'static str),
    }
    let mut stack: Vec<Item> = values.iter().rev().map(|&v| Item::Val(v)).collect();
    while let Some(item) = stack.pop() {
        let v = match item {
            Item::Text(t) => {
                out.push_str(t);
                continue;
            }
            Item::Val(v) => v,
        };
        match v {
            Value::Number(n) => write!(out, "{n} ").unwrap(),
            Value::Boolean(b) => out.push_str(if b { "#t " } else { "#f " }),
            Value::Nil => out.push_str("() "),
            Value::Symbol(s) => write!(out, "'{} ", s.0).unwrap(),
            Value::Proc(ProcId(p)) => write!(out, "#<proc {p}> ").unwrap(),
            Value::Unspecified => out.push_str("#<unspecified> "),
            Value::Ref(r) => {
                if let Some(label) = labels.get(&r.id) {
                    write!(out, "#{label}# ").unwrap();
                    continue;
                }
                let label = labels.len();
                labels.insert(r.id, label);
                let open = match heap.kind(r)? {
                    ObjKind::Pair => "(",
                    ObjKind::Vector => "#(",
                };
                write!(out, "#{label}={open}").unwrap();
                stack.push(Item::Text(") "));
                for &slot in heap.slots(r)?.iter().rev() {
                    stack.push(Item::Val(slot));
                }
            }
        }
    }
    Ok(out)
}
