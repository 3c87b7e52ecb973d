//! External representation of values. Printing reads the heap directly and
//! fires no use events.

use std::fmt::Write as _;

use super::env::Procedure;
use super::{EvalError, Interpreter};
use crate::heap::{ObjKind, Value};

/// Objects printed before output is cut short (circular structure).
const PRINT_LIMIT: usize = 1 << 20;

enum Task {
    Value(Value),
    /// Remaining list after at least one element has been printed.
    Rest(Value),
    Text(&'static str),
    VectorFrom(Value, usize),
}

impl Interpreter<'_> {
    pub fn write_value(&self, root: Value) -> Result<String, EvalError> {
        let heap = self.rt.heap();
        let mut out = String::new();
        let mut budget = PRINT_LIMIT;
        let mut stack = vec![Task::Value(root)];
        while let Some(task) = stack.pop() {
            match task {
                Task::Text(t) => out.push_str(t),
                Task::Value(v) => match v {
                    Value::Number(n) => write!(out, "{n}").unwrap(),
                    Value::Boolean(b) => out.push_str(if b { "#t" } else { "#f" }),
                    Value::Nil => out.push_str("()"),
                    Value::Symbol(s) => out.push_str(self.symbols.name(s)),
                    Value::Unspecified => {}
                    Value::Proc(id) => match self.m.proc(id) {
                        Procedure::Primitive(p) => write!(out, "#[primitive {}]", p.name()).unwrap(),
                        Procedure::Closure { lambda, .. } => match lambda.name {
                            Some(n) => write!(out, "#[procedure {}]", self.symbols.name(n)).unwrap(),
                            None => out.push_str("#[procedure]"),
                        },
                    },
                    Value::Ref(r) => {
                        if budget == 0 {
                            out.push_str("...");
                            continue;
                        }
                        budget -= 1;
                        match heap.kind(r)? {
                            ObjKind::Pair => {
                                out.push('(');
                                stack.push(Task::Rest(heap.read_slot(r, 1)?));
                                stack.push(Task::Value(heap.read_slot(r, 0)?));
                            }
                            ObjKind::Vector => {
                                out.push_str("#(");
                                stack.push(Task::VectorFrom(v, 0));
                            }
                        }
                    }
                },
                Task::Rest(rest) => match rest {
                    Value::Nil => out.push(')'),
                    Value::Ref(r) if heap.kind(r)? == ObjKind::Pair => {
                        if budget == 0 {
                            out.push_str(" ...)");
                            continue;
                        }
                        budget -= 1;
                        out.push(' ');
                        stack.push(Task::Rest(heap.read_slot(r, 1)?));
                        stack.push(Task::Value(heap.read_slot(r, 0)?));
                    }
                    tail => {
                        out.push_str(" . ");
                        stack.push(Task::Text(")"));
                        stack.push(Task::Value(tail));
                    }
                },
                Task::VectorFrom(v, i) => {
                    let Value::Ref(r) = v else { unreachable!() };
                    let len = heap.size_slots(r)?;
                    if i == len {
                        out.push(')');
                        continue;
                    }
                    if i > 0 {
                        out.push(' ');
                    }
                    stack.push(Task::VectorFrom(v, i + 1));
                    stack.push(Task::Value(heap.read_slot(r, i)?));
                }
            }
        }
        Ok(out)
    }
}
