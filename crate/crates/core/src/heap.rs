//! Object model and semispace bump allocator.
//!
//! Only pairs and vectors live in the profiled heap. Every object gets a
//! stable [`ObjId`] at allocation; its address (a slot index into the active
//! semispace) may change whenever the collector copies it. The object table
//! keyed by id is the authority for where an object currently lives, so a
//! [`Ref`] whose cached address is stale still resolves correctly.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// Default semispace capacity, in slots.
pub const DEFAULT_HEAP_SLOTS: usize = 1 << 16;

/// Stable object identity. Never reused within a heap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjId(pub u64);

impl fmt::Display for ObjId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjKind {
    Pair,
    Vector,
}

impl ObjKind {
    /// Single-letter tag used by the trace log.
    pub fn tag(self) -> char {
        match self {
            ObjKind::Pair => 'P',
            ObjKind::Vector => 'V',
        }
    }

    pub fn from_tag(tag: &str) -> Option<ObjKind> {
        match tag {
            "P" => Some(ObjKind::Pair),
            "V" => Some(ObjKind::Vector),
            _ => None,
        }
    }
}

/// Interned symbol. The name table lives outside the profiled heap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(pub u32);

/// Handle to a procedure owned by the evaluator (closures and primitives are
/// not profiled objects).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcId(pub u32);

/// Reference to a heap object.
///
/// `addr` is the address the holder last saw; equality and hashing only
/// consider the id.
#[derive(Debug, Clone, Copy)]
pub struct Ref {
    pub id: ObjId,
    pub addr: usize,
}

impl PartialEq for Ref {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Ref {}

impl Hash for Ref {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Number(i64),
    Boolean(bool),
    /// The empty list. Immediate: `'()` allocates nothing.
    Nil,
    Symbol(Sym),
    Ref(Ref),
    Proc(ProcId),
    Unspecified,
}

impl Value {
    pub fn as_ref(&self) -> Option<Ref> {
        match self {
            Value::Ref(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_truthy(&self) -> bool {
        !matches!(self, Value::Boolean(false))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeapError {
    #[error("heap exhausted: {requested} slots requested, {free} free of {capacity}")]
    Full {
        requested: usize,
        free: usize,
        capacity: usize,
    },
    #[error("index {index} out of bounds for object of {len} slots")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("dangling reference to collected object {0}")]
    DanglingRef(ObjId),
    #[error("negative vector length {0}")]
    NegativeLength(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceRole {
    Active,
    Standby,
}

/// One half of the heap.
#[derive(Debug, Clone)]
pub struct Semispace {
    pub(crate) slots: Vec<Value>,
    pub(crate) capacity: usize,
    /// Ids of the objects in this space, in address order. In to-space this
    /// doubles as the collector's scan queue.
    pub(crate) directory: Vec<ObjId>,
}

impl Semispace {
    fn new(capacity: usize) -> Self {
        Semispace {
            slots: Vec::new(),
            capacity,
            directory: Vec::new(),
        }
    }

    pub fn capacity_slots(&self) -> usize {
        self.capacity
    }

    pub fn used_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn free_slots(&self) -> usize {
        self.capacity - self.slots.len()
    }

    pub fn object_count(&self) -> usize {
        self.directory.len()
    }

    pub(crate) fn clear(&mut self) {
        self.slots.clear();
        self.directory.clear();
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ObjectInfo {
    pub(crate) kind: ObjKind,
    pub(crate) addr: usize,
    pub(crate) len: usize,
    /// Collection epoch in which the object was last evacuated. Together with
    /// `addr` this is the forwarding record while a collection is running.
    pub(crate) epoch: u64,
}

#[derive(Debug, Clone)]
pub struct Heap {
    pub(crate) spaces: [Semispace; 2],
    pub(crate) active: usize,
    pub(crate) table: HashMap<ObjId, ObjectInfo>,
    pub(crate) next_id: u64,
    pub(crate) epoch: u64,
}

impl Default for Heap {
    fn default() -> Self {
        Heap::new(DEFAULT_HEAP_SLOTS)
    }
}

impl Heap {
    /// Creates a heap with two semispaces of `capacity_slots` each.
    pub fn new(capacity_slots: usize) -> Self {
        Heap {
            spaces: [
                Semispace::new(capacity_slots),
                Semispace::new(capacity_slots),
            ],
            active: 0,
            table: HashMap::new(),
            next_id: 0,
            epoch: 0,
        }
    }

    pub fn semispace(&self, role: SpaceRole) -> &Semispace {
        match role {
            SpaceRole::Active => &self.spaces[self.active],
            SpaceRole::Standby => &self.spaces[1 - self.active],
        }
    }

    pub fn capacity_slots(&self) -> usize {
        self.spaces[self.active].capacity
    }

    pub fn used_slots(&self) -> usize {
        self.spaces[self.active].used_slots()
    }

    pub fn free_slots(&self) -> usize {
        self.spaces[self.active].free_slots()
    }

    pub fn object_count(&self) -> usize {
        self.table.len()
    }

    /// Id the next allocation will receive.
    pub fn next_id(&self) -> ObjId {
        ObjId(self.next_id)
    }

    pub fn contains(&self, id: ObjId) -> bool {
        self.table.contains_key(&id)
    }

    /// Ids of all uncollected objects in address order.
    pub fn live_ids(&self) -> &[ObjId] {
        &self.spaces[self.active].directory
    }

    /// Bump-allocates an object of `kind` whose slots are all `fill`. Does not
    /// collect; the caller decides what to do on [`HeapError::Full`].
    pub fn try_alloc(&mut self, kind: ObjKind, len: usize, fill: Value) -> Result<Ref, HeapError> {
        let space = &mut self.spaces[self.active];
        if space.free_slots() < len {
            return Err(HeapError::Full {
                requested: len,
                free: space.free_slots(),
                capacity: space.capacity,
            });
        }
        let id = ObjId(self.next_id);
        self.next_id += 1;
        let addr = space.slots.len();
        space.slots.resize(addr + len, fill);
        space.directory.push(id);
        self.table.insert(
            id,
            ObjectInfo {
                kind,
                addr,
                len,
                epoch: self.epoch,
            },
        );
        Ok(Ref { id, addr })
    }

    pub fn try_alloc_pair(&mut self, car: Value, cdr: Value) -> Result<Ref, HeapError> {
        let r = self.try_alloc(ObjKind::Pair, 2, car)?;
        self.spaces[self.active].slots[r.addr + 1] = cdr;
        Ok(r)
    }

    fn info(&self, id: ObjId) -> Result<&ObjectInfo, HeapError> {
        self.table.get(&id).ok_or(HeapError::DanglingRef(id))
    }

    /// Current address of `r`, re-resolved through the object table.
    pub fn resolve(&self, r: Ref) -> Result<Ref, HeapError> {
        let info = self.info(r.id)?;
        Ok(Ref {
            id: r.id,
            addr: info.addr,
        })
    }

    pub fn kind(&self, r: Ref) -> Result<ObjKind, HeapError> {
        Ok(self.info(r.id)?.kind)
    }

    pub fn size_slots(&self, r: Ref) -> Result<usize, HeapError> {
        Ok(self.info(r.id)?.len)
    }

    pub fn read_slot(&self, r: Ref, index: usize) -> Result<Value, HeapError> {
        let info = self.info(r.id)?;
        if index >= info.len {
            return Err(HeapError::IndexOutOfBounds {
                index,
                len: info.len,
            });
        }
        Ok(self.spaces[self.active].slots[info.addr + index])
    }

    pub fn write_slot(&mut self, r: Ref, index: usize, v: Value) -> Result<(), HeapError> {
        let info = *self.info(r.id)?;
        if index >= info.len {
            return Err(HeapError::IndexOutOfBounds {
                index,
                len: info.len,
            });
        }
        self.spaces[self.active].slots[info.addr + index] = v;
        Ok(())
    }

    /// All payload slots of an object.
    pub fn slots(&self, r: Ref) -> Result<&[Value], HeapError> {
        let info = self.info(r.id)?;
        Ok(&self.spaces[self.active].slots[info.addr..info.addr + info.len])
    }
}
