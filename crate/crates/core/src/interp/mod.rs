//! Tree-walking evaluator for a small Scheme.
//!
//! Every allocation and every use of a heap object goes through the
//! [`Runtime`], which stamps it on the logical clock and runs the collector
//! when due. The evaluator keeps its environments and intermediate values in a
//! [`MutatorState`] that the collector reads as the root set.

mod env;
mod prims;
mod printer;
pub mod reader;
pub mod syntax;

use thiserror::Error;

use crate::gc::Roots;
use crate::heap::{Heap, HeapError, Ref, Sym, Value};
use crate::profiler::{Tick, TraceLog};
use crate::runtime::{Event, GcSummary, Runtime, RuntimeConfig, RuntimeError};

pub use env::{Env, Frame, MutatorState, Procedure};
pub use prims::Prim;
pub use reader::SyntaxError;
pub use syntax::{parse, Datum, Expr, ExprRef, Form, Interner, Lambda};

/// Default bound on nested (non-tail) evaluation.
pub const DEFAULT_MAX_DEPTH: usize = 10_000;

/// Stack reserved for the evaluation thread.
const EVAL_STACK_BYTES: usize = 256 << 20;

const PRELUDE: &str = "
(define (length l)
  (let loop ((l l) (n 0)) (if (null? l) n (loop (cdr l) (+ n 1)))))
(define (reverse l)
  (let loop ((l l) (acc '())) (if (null? l) acc (loop (cdr l) (cons (car l) acc)))))
(define (append a b)
  (let loop ((r (reverse a)) (acc b)) (if (null? r) acc (loop (cdr r) (cons (car r) acc)))))
(define (list-tail l k) (if (= k 0) l (list-tail (cdr l) (- k 1))))
(define (list-ref l k) (car (list-tail l k)))
(define (map f l)
  (let loop ((l l) (acc '())) (if (null? l) (reverse acc) (loop (cdr l) (cons (f (car l)) acc)))))
(define (for-each f l)
  (let loop ((l l)) (if (null? l) #t (begin (f (car l)) (loop (cdr l))))))
(define (memq x l)
  (let loop ((l l)) (cond ((null? l) #f) ((eq? x (car l)) l) (else (loop (cdr l))))))
(define (assq x l)
  (let loop ((l l)) (cond ((null? l) #f) ((eq? x (car (car l))) (car l)) (else (loop (cdr l))))))
(define (abs n) (if (< n 0) (- n) n))
(define (max a b) (if (< a b) b a))
(define (min a b) (if (< a b) a b))
";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("{0}")]
    Runtime(String),
    #[error("out of memory: {requested} slots requested, heap holds {capacity}")]
    OutOfMemory { requested: usize, capacity: usize },
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<RuntimeError> for EvalError {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::OutOfMemory { requested, capacity } => EvalError::OutOfMemory { requested, capacity },
            RuntimeError::Heap(HeapError::NegativeLength(n)) => {
                EvalError::Runtime(format!("negative vector length {n}"))
            }
            other => EvalError::Internal(other.to_string()),
        }
    }
}

impl From<HeapError> for EvalError {
    fn from(e: HeapError) -> Self {
        EvalError::from(RuntimeError::Heap(e))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{error}\n  in form at {line}:{col}: {form}")]
    Eval {
        line: usize,
        col: usize,
        form: String,
        error: EvalError,
    },
    #[error("at termination: {0}")]
    Termination(EvalError),
}

impl RunError {
    pub fn eval_error(&self) -> Option<&EvalError> {
        match self {
            RunError::Syntax(_) => None,
            RunError::Eval { error, .. } | RunError::Termination(error) => Some(error),
        }
    }
}

/// Called before each clock event with the heap and root set as they stand.
pub trait EventObserver {
    fn before_event(&mut self, heap: &Heap, roots: &dyn Roots, clock: Tick);
}

#[derive(Debug, Clone)]
pub struct InterpConfig {
    pub runtime: RuntimeConfig,
    pub max_depth: usize,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig {
            runtime: RuntimeConfig::default(),
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    /// Value of the last top-level form. References in it are stale once the
    /// final collection has run; use `printed`.
    pub value: Value,
    pub printed: String,
    /// Text written by `display` and `newline`.
    pub output: String,
    pub log: TraceLog,
    pub summary: GcSummary,
    pub events: Option<Vec<Event>>,
}

pub struct Interpreter<'o> {
    rt: Runtime,
    m: MutatorState,
    symbols: Interner,
    observer: Option<&'o mut dyn EventObserver>,
    output: String,
    depth: usize,
    max_depth: usize,
}

impl<'o> Interpreter<'o> {
    pub fn new(config: &InterpConfig, observer: Option<&'o mut dyn EventObserver>) -> Self {
        let mut interp = Interpreter {
            rt: Runtime::new(&config.runtime),
            m: MutatorState::default(),
            symbols: Interner::default(),
            observer,
            output: String::new(),
            depth: 0,
            max_depth: config.max_depth,
        };
        for &prim in Prim::ALL {
            let sym = interp.symbols.intern(prim.name());
            let value = interp.m.add_proc(Procedure::Primitive(prim));
            interp.m.set_global(sym, value);
        }
        let prelude = parse(PRELUDE, &mut interp.symbols).expect("prelude parses");
        for form in &prelude {
            interp.eval(&form.expr, None).expect("prelude evaluates");
        }
        interp
    }

    pub fn runtime(&self) -> &Runtime {
        &self.rt
    }

    pub fn mutator(&self) -> &MutatorState {
        &self.m
    }

    pub fn symbols(&self) -> &Interner {
        &self.symbols
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    fn observe(&mut self) {
        if let Some(observer) = self.observer.as_deref_mut() {
            observer.before_event(self.rt.heap(), &self.m, self.rt.now());
        }
    }

    fn alloc_pair(&mut self, car: Value, cdr: Value) -> Result<Value, EvalError> {
        self.observe();
        Ok(Value::Ref(self.rt.alloc_pair(car, cdr, &self.m)?))
    }

    fn alloc_vector(&mut self, len: i64, fill: Value) -> Result<Value, EvalError> {
        self.observe();
        Ok(Value::Ref(self.rt.alloc_vector(len, fill, &self.m)?))
    }

    fn use_obj(&mut self, r: Ref) -> Result<(), EvalError> {
        self.observe();
        self.rt.record_use(r)?;
        Ok(())
    }

    /// Evaluates top-level forms in order and returns the last value.
    pub fn eval_forms(&mut self, forms: &[Form]) -> Result<Value, RunError> {
        let mut last = Value::Unspecified;
        for form in forms {
            last = self.eval(&form.expr, None).map_err(|error| RunError::Eval {
                line: form.line,
                col: form.col,
                form: form.snippet.clone(),
                error,
            })?;
        }
        Ok(last)
    }

    /// Ends the run: the final collection sees only top-level bindings.
    pub fn finish(mut self, value: Value) -> Result<RunOutput, RunError> {
        let printed = self.write_value(value).map_err(RunError::Termination)?;
        self.m.envs.clear();
        self.m.temps.clear();
        self.observe();
        let log = self
            .rt
            .finish(&self.m.globals_only())
            .map_err(|e| RunError::Termination(e.into()))?;
        Ok(RunOutput {
            value,
            printed,
            output: self.output,
            log,
            summary: self.rt.summary().clone(),
            events: self.rt.events().map(<[Event]>::to_vec),
        })
    }

    pub fn eval(&mut self, expr: &ExprRef, env: Option<Env>) -> Result<Value, EvalError> {
        if self.depth >= self.max_depth {
            return Err(EvalError::Runtime(format!(
                "maximum recursion depth {} exceeded",
                self.max_depth
            )));
        }
        self.depth += 1;
        let envs = self.m.envs.len();
        let temps = self.m.temps.len();
        self.m.envs.push(env);
        let result = self.eval_loop(expr.clone());
        self.m.envs.truncate(envs);
        self.m.temps.truncate(temps);
        self.depth -= 1;
        result
    }

    fn current_env(&self) -> Option<Env> {
        self.m.envs.last().cloned().flatten()
    }

    fn set_env(&mut self, env: Option<Env>) {
        *self.m.envs.last_mut().expect("active evaluation") = env;
    }

    /// Evaluates all but the last expression; the last is returned for the
    /// caller to continue with in tail position.
    fn eval_body(&mut self, body: &[ExprRef]) -> Result<ExprRef, EvalError> {
        let (last, init) = body.split_last().expect("non-empty body");
        for e in init {
            self.eval(e, self.current_env())?;
        }
        Ok(last.clone())
    }

    fn lookup(&self, sym: Sym, env: &Option<Env>) -> Result<Value, EvalError> {
        let mut cur = env.clone();
        while let Some(frame) = cur {
            let f = frame.borrow();
            if let Some(&(_, v)) = f.vars.iter().rev().find(|(s, _)| *s == sym) {
                return Ok(v);
            }
            cur = f.parent.clone();
        }
        self.m
            .global(sym)
            .ok_or_else(|| EvalError::Runtime(format!("unbound variable {}", self.symbols.name(sym))))
    }

    fn assign(&mut self, sym: Sym, value: Value, env: &Option<Env>) -> Result<(), EvalError> {
        let mut cur = env.clone();
        while let Some(frame) = cur {
            let mut f = frame.borrow_mut();
            if let Some(slot) = f.vars.iter_mut().rev().find(|(s, _)| *s == sym) {
                slot.1 = value;
                return Ok(());
            }
            cur = f.parent.clone();
        }
        if self.m.global(sym).is_none() {
            return Err(EvalError::Runtime(format!(
                "set!: unbound variable {}",
                self.symbols.name(sym)
            )));
        }
        self.m.set_global(sym, value);
        Ok(())
    }

    fn build_datum(&mut self, d: &Datum) -> Result<Value, EvalError> {
        match d {
            Datum::Imm(v) => Ok(*v),
            Datum::List(items, tail) => {
                let base = self.m.temps.len();
                let tail = self.build_datum(tail)?;
                self.m.temps.push(tail);
                for item in items.iter().rev() {
                    let v = self.build_datum(item)?;
                    self.m.temps.push(v);
                    let cell = self.alloc_pair(v, self.m.temps[base])?;
                    self.m.temps.truncate(base);
                    self.m.temps.push(cell);
                }
                Ok(self.m.temps.pop().expect("pinned datum"))
            }
            Datum::Vector(items) => {
                let base = self.m.temps.len();
                for item in items {
                    let v = self.build_datum(item)?;
                    self.m.temps.push(v);
                }
                let values = self.m.temps[base..].to_vec();
                let r = self.apply_prim(Prim::Vector, &values);
                self.m.temps.truncate(base);
                r
            }
        }
    }

    /// Creates the call frame for a closure. `args` must be pinned.
    fn bind(&mut self, lambda: &Lambda, env: Option<Env>, args: &[Value]) -> Result<Env, EvalError> {
        let n = lambda.params.len();
        let arity_ok = if lambda.rest.is_some() { args.len() >= n } else { args.len() == n };
        if !arity_ok {
            let name = lambda.name.map_or("#[procedure]", |s| self.symbols.name(s));
            return Err(EvalError::Runtime(format!(
                "{name}: expected {}{n} arguments, got {}",
                if lambda.rest.is_some() { "at least " } else { "" },
                args.len()
            )));
        }
        let mut vars: Vec<(Sym, Value)> = lambda.params.iter().copied().zip(args.iter().copied()).collect();
        if let Some(rest) = lambda.rest {
            vars.push((rest, self.build_list(&args[n..], Value::Nil)?));
        }
        Ok(env::new_frame(vars, env))
    }

    fn eval_loop(&mut self, mut expr: ExprRef) -> Result<Value, EvalError> {
        loop {
            let env = self.current_env();
            match &*expr {
                Expr::Literal(v) => return Ok(*v),
                Expr::Var(sym) => return self.lookup(*sym, &env),
                Expr::Quote(d) => return self.build_datum(d),
                Expr::Lambda(lambda) => {
                    return Ok(self.m.add_proc(Procedure::Closure {
                        lambda: lambda.clone(),
                        env,
                    }))
                }
                Expr::If(test, then, otherwise) => {
                    let next = if self.eval(test, env)?.is_truthy() {
                        then
                    } else {
                        match otherwise {
                            Some(e) => e,
                            None => return Ok(Value::Unspecified),
                        }
                    };
                    expr = next.clone();
                }
                Expr::Begin(body) => expr = self.eval_body(body)?,
                Expr::And(parts) | Expr::Or(parts) => {
                    let is_and = matches!(&*expr, Expr::And(_));
                    let Some((last, init)) = parts.split_last() else {
                        return Ok(Value::Boolean(is_and));
                    };
                    for part in init {
                        let v = self.eval(part, env.clone())?;
                        if v.is_truthy() != is_and {
                            return Ok(v);
                        }
                    }
                    expr = last.clone();
                }
                Expr::Define(sym, value) => {
                    let v = self.eval(value, env.clone())?;
                    match env {
                        None => self.m.set_global(*sym, v),
                        Some(frame) => {
                            let mut f = frame.borrow_mut();
                            match f.vars.iter_mut().find(|(s, _)| s == sym) {
                                Some(slot) => slot.1 = v,
                                None => f.vars.push((*sym, v)),
                            }
                        }
                    }
                    return Ok(Value::Unspecified);
                }
                Expr::SetVar(sym, value) => {
                    let v = self.eval(value, env.clone())?;
                    self.assign(*sym, v, &env)?;
                    return Ok(Value::Unspecified);
                }
                Expr::Let(bindings, body) => {
                    let base = self.m.temps.len();
                    for (_, init) in bindings {
                        let v = self.eval(init, env.clone())?;
                        self.m.temps.push(v);
                    }
                    let vars = bindings
                        .iter()
                        .map(|(s, _)| *s)
                        .zip(self.m.temps[base..].iter().copied())
                        .collect();
                    self.set_env(Some(env::new_frame(vars, env)));
                    self.m.temps.truncate(base);
                    expr = self.eval_body(body)?;
                }
                Expr::NamedLet(name, inits, lambda) => {
                    let base = self.m.temps.len();
                    for init in inits {
                        let v = self.eval(init, env.clone())?;
                        self.m.temps.push(v);
                    }
                    let loop_frame = env::new_frame(vec![(*name, Value::Unspecified)], env);
                    let proc = self.m.add_proc(Procedure::Closure {
                        lambda: lambda.clone(),
                        env: Some(loop_frame.clone()),
                    });
                    loop_frame.borrow_mut().vars[0].1 = proc;
                    let args = self.m.temps[base..].to_vec();
                    let frame = self.bind(lambda, Some(loop_frame), &args)?;
                    self.set_env(Some(frame));
                    self.m.temps.truncate(base);
                    expr = self.eval_body(&lambda.body)?;
                }
                Expr::Apply(f, operands) => {
                    let base = self.m.temps.len();
                    let fv = self.eval(f, env.clone())?;
                    self.m.temps.push(fv);
                    for operand in operands {
                        let v = self.eval(operand, env.clone())?;
                        self.m.temps.push(v);
                    }
                    let args = self.m.temps[base + 1..].to_vec();
                    let Value::Proc(id) = fv else {
                        let shown = self.write_value(fv)?;
                        return Err(EvalError::Runtime(format!("not a procedure: {shown}")));
                    };
                    match self.m.proc(id) {
                        Procedure::Primitive(prim) => {
                            let prim = *prim;
                            let result = self.apply_prim(prim, &args);
                            self.m.temps.truncate(base);
                            return result;
                        }
                        Procedure::Closure { lambda, env: captured } => {
                            let (lambda, captured) = (lambda.clone(), captured.clone());
                            let frame = self.bind(&lambda, captured, &args)?;
                            self.set_env(Some(frame));
                            self.m.temps.truncate(base);
                            expr = self.eval_body(&lambda.body)?;
                        }
                    }
                }
            }
        }
    }
}

fn run_inner(
    src: &str,
    config: &InterpConfig,
    observer: Option<&mut dyn EventObserver>,
) -> Result<RunOutput, RunError> {
    let mut interp = Interpreter::new(config, observer);
    let forms = parse(src, &mut interp.symbols)?;
    let value = interp.eval_forms(&forms)?;
    interp.finish(value)
}

fn on_eval_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        let handle = std::thread::Builder::new()
            .name("eval".into())
            .stack_size(EVAL_STACK_BYTES)
            .spawn_scoped(s, f)
            .expect("spawn evaluation thread");
        match handle.join() {
            Ok(v) => v,
            Err(panic) => std::panic::resume_unwind(panic),
        }
    })
}

/// Parses and runs a program, returning its trace log.
pub fn run(src: &str, config: &InterpConfig) -> Result<RunOutput, RunError> {
    on_eval_thread(|| run_inner(src, config, None))
}

/// Like [`run`], reporting every clock event to `observer` first.
pub fn run_observed(
    src: &str,
    config: &InterpConfig,
    observer: &mut (dyn EventObserver + Send),
) -> Result<RunOutput, RunError> {
    on_eval_thread(|| run_inner(src, config, Some(observer)))
}
