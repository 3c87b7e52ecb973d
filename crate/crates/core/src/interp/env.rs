//! Environments, procedures, and the mutator root set.

use std::cell::RefCell;
use std::collections::HashSet;
use std::rc::Rc;

use super::prims::Prim;
use super::syntax::Lambda;
use crate::gc::{RootTracer, Roots};
use crate::heap::{ProcId, Ref, Sym, Value};

#[derive(Debug, Default)]
pub struct Frame {
    pub vars: Vec<(Sym, Value)>,
    pub parent: Option<Env>,
}

pub type Env = Rc<RefCell<Frame>>;

pub fn new_frame(vars: Vec<(Sym, Value)>, parent: Option<Env>) -> Env {
    Rc::new(RefCell::new(Frame { vars, parent }))
}

#[derive(Debug)]
pub enum Procedure {
    Closure { lambda: Rc<Lambda>, env: Option<Env> },
    Primitive(Prim),
}

/// Everything the evaluator holds outside the heap. Closures and frames are
/// not profiled, but the references they hold are roots.
#[derive(Debug, Default)]
pub struct MutatorState {
    /// Top-level bindings indexed by symbol.
    pub globals: Vec<Option<Value>>,
    /// Environments of every active evaluation.
    pub envs: Vec<Option<Env>>,
    /// Intermediate values pinned while an evaluation step is in progress.
    pub temps: Vec<Value>,
    pub procs: Vec<Procedure>,
}

impl MutatorState {
    pub fn global(&self, sym: Sym) -> Option<Value> {
        self.globals.get(sym.0 as usize).copied().flatten()
    }

    pub fn set_global(&mut self, sym: Sym, value: Value) {
        let i = sym.0 as usize;
        if self.globals.len() <= i {
            self.globals.resize(i + 1, None);
        }
        self.globals[i] = Some(value);
    }

    pub fn add_proc(&mut self, proc: Procedure) -> Value {
        self.procs.push(proc);
        Value::Proc(ProcId(self.procs.len() as u32 - 1))
    }

    pub fn proc(&self, id: ProcId) -> &Procedure {
        &self.procs[id.0 as usize]
    }

    /// Roots that only include top-level bindings.
    pub fn globals_only(&self) -> GlobalRoots<'_> {
        GlobalRoots(self)
    }
}

struct MutatorTracer<'a> {
    state: &'a MutatorState,
    globals_only: bool,
    seen_frames: HashSet<*const RefCell<Frame>>,
    seen_procs: HashSet<ProcId>,
    pending: Vec<Env>,
}

impl MutatorTracer<'_> {
    fn value(&mut self, value: Value, out: &mut Vec<Ref>) {
        match value {
            Value::Ref(r) => out.push(r),
            Value::Proc(id) => {
                if self.seen_procs.insert(id) {
                    if let Procedure::Closure { env: Some(env), .. } = self.state.proc(id) {
                        self.pending.push(env.clone());
                    }
                }
            }
            _ => {}
        }
    }

    fn drain(&mut self, out: &mut Vec<Ref>) {
        while let Some(env) = self.pending.pop() {
            if !self.seen_frames.insert(Rc::as_ptr(&env)) {
                continue;
            }
            let frame = env.borrow();
            for &(_, v) in &frame.vars {
                self.value(v, out);
            }
            if let Some(parent) = &frame.parent {
                self.pending.push(parent.clone());
            }
        }
    }
}

impl RootTracer for MutatorTracer<'_> {
    fn trace_roots(&mut self, out: &mut Vec<Ref>) {
        let state = self.state;
        for v in state.globals.iter().flatten() {
            self.value(*v, out);
        }
        if !self.globals_only {
            for v in &state.temps {
                self.value(*v, out);
            }
            self.pending.extend(state.envs.iter().flatten().cloned());
        }
        self.drain(out);
    }

    fn trace_value(&mut self, value: Value, out: &mut Vec<Ref>) {
        self.value(value, out);
        self.drain(out);
    }
}

impl Roots for MutatorState {
    fn tracer(&self) -> Box<dyn RootTracer + '_> {
        Box::new(MutatorTracer {
            state: self,
            globals_only: false,
            seen_frames: HashSet::new(),
            seen_procs: HashSet::new(),
            pending: Vec::new(),
        })
    }
}

pub struct GlobalRoots<'a>(&'a MutatorState);

impl Roots for GlobalRoots<'_> {
    fn tracer(&self) -> Box<dyn RootTracer + '_> {
        Box::new(MutatorTracer {
            state: self.0,
            globals_only: true,
            seen_frames: HashSet::new(),
            seen_procs: HashSet::new(),
            pending: Vec::new(),
        })
    }
}
