//! The instrumented heap as the mutator sees it: allocation with collection
//! triggers, use events, and run termination.

use thiserror::Error;

use crate::gc::{self, CollectionStats, GcError, Roots, Trigger, WithExtra};
use crate::heap::{Heap, HeapError, ObjId, ObjKind, Ref, Value, DEFAULT_HEAP_SLOTS};
use crate::profiler::{LogHeader, Profiler, ProfilerError, Tick, TraceLog};

/// Allocations between interval-triggered collections unless configured.
pub const DEFAULT_GC_INTERVAL: u64 = 16;

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    /// Collect every `gc_interval` allocation events (must be ≥ 1).
    pub gc_interval: u64,
    pub heap_slots: usize,
    pub source: String,
    /// Cross-check every collection against the reachability oracle.
    pub verify: bool,
    /// Keep the raw event stream (for replay checks).
    pub record_events: bool,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            gc_interval: DEFAULT_GC_INTERVAL,
            heap_slots: DEFAULT_HEAP_SLOTS,
            source: "<input>".into(),
            verify: false,
            record_events: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("out of memory: {requested} slots requested, heap holds {capacity}")]
    OutOfMemory { requested: usize, capacity: usize },
    #[error(transparent)]
    Heap(#[from] HeapError),
    #[error(transparent)]
    Gc(#[from] GcError),
    #[error(transparent)]
    Profiler(#[from] ProfilerError),
}

/// One entry of the raw event stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Created { id: ObjId, tick: Tick },
    Used { id: ObjId, tick: Tick },
    Collected { id: ObjId, tick: Tick },
    /// Still reachable when the run ended.
    Censored { id: ObjId, tick: Tick },
}

/// Aggregate over all collections of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GcSummary {
    pub collections: usize,
    pub by_interval: usize,
    pub by_exhaustion: usize,
    pub manual: usize,
    pub collected: usize,
    pub slots_copied: usize,
    pub peak_slots: usize,
}

impl GcSummary {
    fn add(&mut self, stats: &CollectionStats) {
        self.collections += 1;
        match stats.trigger {
            Trigger::Interval => self.by_interval += 1,
            Trigger::Exhaustion => self.by_exhaustion += 1,
            Trigger::Manual | Trigger::Termination => self.manual += 1,
        }
        self.collected += stats.collected;
        self.slots_copied += stats.slots_copied;
    }
}

#[derive(Debug)]
pub struct Runtime {
    heap: Heap,
    profiler: Profiler,
    gc_interval: u64,
    allocs_since_gc: u64,
    verify: bool,
    summary: GcSummary,
    events: Option<Vec<Event>>,
}

impl Runtime {
    pub fn new(config: &RuntimeConfig) -> Self {
        let header = LogHeader {
            gc_interval: config.gc_interval,
            heap_slots: config.heap_slots,
            source: config.source.clone(),
        };
        Runtime {
            heap: Heap::new(config.heap_slots),
            profiler: Profiler::new(header),
            gc_interval: config.gc_interval.max(1),
            allocs_since_gc: 0,
            verify: config.verify,
            summary: GcSummary::default(),
            events: config.record_events.then(Vec::new),
        }
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    /// Direct heap access for stores that are not use events (initializing
    /// fresh objects, building literals).
    pub fn heap_mut(&mut self) -> &mut Heap {
        &mut self.heap
    }

    pub fn profiler(&self) -> &Profiler {
        &self.profiler
    }

    pub fn now(&self) -> Tick {
        self.profiler.now()
    }

    pub fn summary(&self) -> &GcSummary {
        &self.summary
    }

    pub fn events(&self) -> Option<&[Event]> {
        self.events.as_deref()
    }

    /// Runs a collection at `clock`. With verification on, the survivor set
    /// is compared against the oracle computed just before.
    pub fn collect_at(
        &mut self,
        roots: &dyn Roots,
        clock: Tick,
        trigger: Trigger,
    ) -> Result<CollectionStats, RuntimeError> {
        let expected = self
            .verify
            .then(|| gc::reachability_oracle(&self.heap, roots));
        let before: Option<Vec<ObjId>> = self.events.as_ref().map(|_| self.heap.live_ids().to_vec());
        let stats = gc::collect(&mut self.heap, &mut self.profiler, roots, clock, trigger)?;
        if let Some(expected) = expected {
            let missing = expected.iter().filter(|id| !self.heap.contains(**id)).count();
            let extra = self.heap.object_count() - (expected.len() - missing);
            if missing != 0 || extra != 0 {
                return Err(GcError::OracleMismatch {
                    tick: clock,
                    missing,
                    extra,
                }
                .into());
            }
        }
        if let (Some(events), Some(before)) = (self.events.as_mut(), before) {
            events.extend(
                before
                    .into_iter()
                    .filter(|id| !self.heap.contains(*id))
                    .map(|id| Event::Collected { id, tick: clock }),
            );
        }
        self.summary.add(&stats);
        self.allocs_since_gc = 0;
        Ok(stats)
    }

    /// Manual collection between events. It is stamped with the next tick,
    /// so an object dropped right after its creation still lives one tick.
    pub fn collect(&mut self, roots: &dyn Roots) -> Result<CollectionStats, RuntimeError> {
        let clock = self.profiler.next_tick();
        self.collect_at(roots, clock, Trigger::Manual)
    }

    /// Allocation event. Any collection it triggers runs at the allocation's
    /// own tick, before the new object exists; `pending` values are rooted for
    /// that collection.
    fn alloc(
        &mut self,
        kind: ObjKind,
        len: usize,
        fill: Value,
        pending: &[Value],
        roots: &dyn Roots,
    ) -> Result<Ref, RuntimeError> {
        let tick = self.profiler.next_tick();
        let roots = WithExtra {
            roots,
            extra: pending,
        };
        self.allocs_since_gc += 1;
        let mut collected_now = false;
        if self.allocs_since_gc >= self.gc_interval {
            self.collect_at(&roots, tick, Trigger::Interval)?;
            collected_now = true;
        }
        if self.heap.free_slots() < len && !collected_now {
            self.collect_at(&roots, tick, Trigger::Exhaustion)?;
        }
        let r = match self.heap.try_alloc(kind, len, fill) {
            Ok(r) => r,
            Err(HeapError::Full { requested, capacity, .. }) => {
                return Err(RuntimeError::OutOfMemory { requested, capacity })
            }
            Err(e) => return Err(e.into()),
        };
        let tick = self.profiler.record_creation(r.id, kind, len, r.addr)?;
        if let Some(events) = self.events.as_mut() {
            events.push(Event::Created { id: r.id, tick });
        }
        self.summary.peak_slots = self.summary.peak_slots.max(self.heap.used_slots());
        Ok(r)
    }

    pub fn alloc_pair(&mut self, car: Value, cdr: Value, roots: &dyn Roots) -> Result<Ref, RuntimeError> {
        let r = self.alloc(ObjKind::Pair, 2, car, &[car, cdr], roots)?;
        self.heap.write_slot(r, 1, cdr)?;
        Ok(r)
    }

    pub fn alloc_vector(&mut self, length: i64, fill: Value, roots: &dyn Roots) -> Result<Ref, RuntimeError> {
        if length < 0 {
            return Err(HeapError::NegativeLength(length).into());
        }
        self.alloc(ObjKind::Vector, length as usize, fill, &[fill], roots)
    }

    /// Use event on a heap object.
    pub fn record_use(&mut self, r: Ref) -> Result<Tick, RuntimeError> {
        let tick = self.profiler.record_use(r.id)?;
        if let Some(events) = self.events.as_mut() {
            events.push(Event::Used { id: r.id, tick });
        }
        Ok(tick)
    }

    /// Ends the run. Termination takes one tick; a final collection with
    /// `roots` runs at that tick, and whatever survives it is censored.
    pub fn finish(&mut self, roots: &dyn Roots) -> Result<TraceLog, RuntimeError> {
        let end_tick = self.profiler.next_tick();
        self.collect_at(roots, end_tick, Trigger::Termination)?;
        if let Some(events) = self.events.as_mut() {
            events.extend(
                self.heap
                    .live_ids()
                    .iter()
                    .map(|&id| Event::Censored { id, tick: end_tick }),
            );
        }
        Ok(self.profiler.finalize(end_tick)?)
    }
}
