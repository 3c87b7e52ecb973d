//! Primitive procedures.
//!
//! A primitive fires a use event on each heap argument it inspects: the pair
//! of `car`/`set-car!`, the vector of `vector-ref`, the argument of a type
//! predicate, both operands of `eq?`. Values that are merely stored (the
//! operands of `cons`, the value of `vector-set!`) are not used. All argument
//! checks run before the first use event.

use super::{EvalError, Interpreter};
use crate::heap::{ObjKind, Ref, Value};

macro_rules! prims {
    ($($variant:ident = $name:literal, $min:literal, $max:expr;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum Prim {
            $($variant,)*
        }

        impl Prim {
            pub const ALL: &'static [Prim] = &[$(Prim::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Prim::$variant => $name,)*
                }
            }

            fn arity(self) -> (usize, Option<usize>) {
                match self {
                    $(Prim::$variant => ($min, $max),)*
                }
            }
        }
    };
}

prims! {
    Cons = "cons", 2, Some(2);
    List = "list", 0, None;
    Car = "car", 1, Some(1);
    Cdr = "cdr", 1, Some(1);
    SetCar = "set-car!", 2, Some(2);
    SetCdr = "set-cdr!", 2, Some(2);
    NullP = "null?", 1, Some(1);
    PairP = "pair?", 1, Some(1);
    NumberP = "number?", 1, Some(1);
    VectorP = "vector?", 1, Some(1);
    SymbolP = "symbol?", 1, Some(1);
    BooleanP = "boolean?", 1, Some(1);
    ProcedureP = "procedure?", 1, Some(1);
    Not = "not", 1, Some(1);
    Vector = "vector", 0, None;
    MakeVector = "make-vector", 1, Some(2);
    VectorRef = "vector-ref", 2, Some(2);
    VectorSet = "vector-set!", 3, Some(3);
    VectorLength = "vector-length", 1, Some(1);
    VectorToList = "vector->list", 1, Some(1);
    ListToVector = "list->vector", 1, Some(1);
    Add = "+", 0, None;
    Sub = "-", 1, None;
    Mul = "*", 0, None;
    Quotient = "quotient", 2, Some(2);
    Remainder = "remainder", 2, Some(2);
    Modulo = "modulo", 2, Some(2);
    NumEq = "=", 1, None;
    Lt = "<", 1, None;
    Gt = ">", 1, None;
    Le = "<=", 1, None;
    Ge = ">=", 1, None;
    ZeroP = "zero?", 1, Some(1);
    EqP = "eq?", 2, Some(2);
    EqvP = "eqv?", 2, Some(2);
    Display = "display", 1, Some(1);
    Newline = "newline", 0, Some(0);
}

fn type_error(prim: Prim, expected: &str, got: Value) -> EvalError {
    EvalError::Runtime(format!("{}: expected {expected}, got {}", prim.name(), describe(got)))
}

fn describe(v: Value) -> &'static str {
    match v {
        Value::Number(_) => "a number",
        Value::Boolean(_) => "a boolean",
        Value::Nil => "the empty list",
        Value::Symbol(_) => "a symbol",
        Value::Ref(_) => "a heap object",
        Value::Proc(_) => "a procedure",
        Value::Unspecified => "an unspecified value",
    }
}

fn number(prim: Prim, v: Value) -> Result<i64, EvalError> {
    match v {
        Value::Number(n) => Ok(n),
        other => Err(type_error(prim, "a number", other)),
    }
}

fn overflow(prim: Prim) -> EvalError {
    EvalError::Runtime(format!("{}: integer overflow", prim.name()))
}

impl Interpreter<'_> {
    fn expect_kind(&self, prim: Prim, v: Value, kind: ObjKind) -> Result<Ref, EvalError> {
        let what = match kind {
            ObjKind::Pair => "a pair",
            ObjKind::Vector => "a vector",
        };
        match v {
            Value::Ref(r) if self.rt.heap().kind(r)? == kind => Ok(r),
            Value::Ref(_) => Err(EvalError::Runtime(format!("{}: expected {what}, got a {}", prim.name(), match kind {
                ObjKind::Pair => "vector",
                ObjKind::Vector => "pair",
            }))),
            other => Err(type_error(prim, what, other)),
        }
    }

    fn index(&self, prim: Prim, vector: Ref, index: Value) -> Result<usize, EvalError> {
        let i = number(prim, index)?;
        let len = self.rt.heap().size_slots(vector)?;
        if i < 0 || i as usize >= len {
            return Err(EvalError::Runtime(format!(
                "{}: index {i} out of range for vector of length {len}",
                prim.name()
            )));
        }
        Ok(i as usize)
    }

    fn use_value(&mut self, v: Value) -> Result<(), EvalError> {
        if let Value::Ref(r) = v {
            self.use_obj(r)?;
        }
        Ok(())
    }

    fn kind_of(&self, v: Value) -> Result<Option<ObjKind>, EvalError> {
        match v {
            Value::Ref(r) => Ok(Some(self.rt.heap().kind(r)?)),
            _ => Ok(None),
        }
    }

    /// Builds a proper list of `items`, keeping the partial list pinned.
    pub(super) fn build_list(&mut self, items: &[Value], tail: Value) -> Result<Value, EvalError> {
        let base = self.m.temps.len();
        self.m.temps.push(tail);
        for &item in items.iter().rev() {
            let rest = self.m.temps[base];
            let cell = self.alloc_pair(item, rest)?;
            self.m.temps[base] = cell;
        }
        Ok(self.m.temps.pop().expect("pinned list"))
    }

    fn arith(&self, prim: Prim, args: &[Value]) -> Result<Value, EvalError> {
        let nums = args.iter().map(|&a| number(prim, a)).collect::<Result<Vec<_>, _>>()?;
        let result = match prim {
            Prim::Add => nums.iter().try_fold(0i64, |acc, &n| acc.checked_add(n)),
            Prim::Mul => nums.iter().try_fold(1i64, |acc, &n| acc.checked_mul(n)),
            Prim::Sub if nums.len() == 1 => nums[0].checked_neg(),
            Prim::Sub => nums[1..].iter().try_fold(nums[0], |acc, &n| acc.checked_sub(n)),
            Prim::Quotient | Prim::Remainder | Prim::Modulo => {
                let (a, b) = (nums[0], nums[1]);
                if b == 0 {
                    return Err(EvalError::Runtime(format!("{}: division by zero", prim.name())));
                }
                match prim {
                    Prim::Quotient => a.checked_div(b),
                    Prim::Remainder => a.checked_rem(b),
                    _ => a.checked_rem(b).map(|r| if r != 0 && (r < 0) != (b < 0) { r + b } else { r }),
                }
            }
            _ => {
                let holds = |a: i64, b: i64| match prim {
                    Prim::NumEq => a == b,
                    Prim::Lt => a < b,
                    Prim::Gt => a > b,
                    Prim::Le => a <= b,
                    _ => a >= b,
                };
                return Ok(Value::Boolean(nums.windows(2).all(|w| holds(w[0], w[1]))));
            }
        };
        result.map(Value::Number).ok_or_else(|| overflow(prim))
    }

    pub(super) fn apply_prim(&mut self, prim: Prim, args: &[Value]) -> Result<Value, EvalError> {
        let (min, max) = prim.arity();
        if args.len() < min || max.is_some_and(|m| args.len() > m) {
            let expected = match max {
                Some(m) if m == min => format!("{min}"),
                Some(m) => format!("{min} to {m}"),
                None => format!("at least {min}"),
            };
            return Err(EvalError::Runtime(format!(
                "{}: expected {expected} arguments, got {}",
                prim.name(),
                args.len()
            )));
        }
        match prim {
            Prim::Cons => self.alloc_pair(args[0], args[1]),
            Prim::List => self.build_list(args, Value::Nil),
            Prim::Car | Prim::Cdr => {
                let p = self.expect_kind(prim, args[0], ObjKind::Pair)?;
                self.use_obj(p)?;
                Ok(self.rt.heap().read_slot(p, usize::from(prim == Prim::Cdr))?)
            }
            Prim::SetCar | Prim::SetCdr => {
                let p = self.expect_kind(prim, args[0], ObjKind::Pair)?;
                self.use_obj(p)?;
                self.rt.heap_mut().write_slot(p, usize::from(prim == Prim::SetCdr), args[1])?;
                Ok(Value::Unspecified)
            }
            Prim::NullP | Prim::PairP | Prim::NumberP | Prim::VectorP | Prim::SymbolP | Prim::BooleanP
            | Prim::ProcedureP | Prim::Not => {
                let v = args[0];
                let kind = self.kind_of(v)?;
                self.use_value(v)?;
                Ok(Value::Boolean(match prim {
                    Prim::NullP => v == Value::Nil,
                    Prim::PairP => kind == Some(ObjKind::Pair),
                    Prim::VectorP => kind == Some(ObjKind::Vector),
                    Prim::NumberP => matches!(v, Value::Number(_)),
                    Prim::SymbolP => matches!(v, Value::Symbol(_)),
                    Prim::BooleanP => matches!(v, Value::Boolean(_)),
                    Prim::ProcedureP => matches!(v, Value::Proc(_)),
                    _ => v == Value::Boolean(false),
                }))
            }
            Prim::Vector => {
                let r = self.alloc_vector(args.len() as i64, Value::Unspecified)?;
                let Value::Ref(vr) = r else { unreachable!() };
                for (i, &a) in args.iter().enumerate() {
                    self.rt.heap_mut().write_slot(vr, i, a)?;
                }
                Ok(r)
            }
            Prim::MakeVector => {
                let len = number(prim, args[0])?;
                if len < 0 {
                    return Err(EvalError::Runtime(format!("make-vector: negative length {len}")));
                }
                self.alloc_vector(len, args.get(1).copied().unwrap_or(Value::Number(0)))
            }
            Prim::VectorRef => {
                let v = self.expect_kind(prim, args[0], ObjKind::Vector)?;
                let i = self.index(prim, v, args[1])?;
                self.use_obj(v)?;
                Ok(self.rt.heap().read_slot(v, i)?)
            }
            Prim::VectorSet => {
                let v = self.expect_kind(prim, args[0], ObjKind::Vector)?;
                let i = self.index(prim, v, args[1])?;
                self.use_obj(v)?;
                self.rt.heap_mut().write_slot(v, i, args[2])?;
                Ok(Value::Unspecified)
            }
            Prim::VectorLength => {
                let v = self.expect_kind(prim, args[0], ObjKind::Vector)?;
                self.use_obj(v)?;
                Ok(Value::Number(self.rt.heap().size_slots(v)? as i64))
            }
            Prim::VectorToList => {
                let v = self.expect_kind(prim, args[0], ObjKind::Vector)?;
                self.use_obj(v)?;
                let items = self.rt.heap().slots(v)?.to_vec();
                self.build_list(&items, Value::Nil)
            }
            Prim::ListToVector => {
                let mut spine = Vec::new();
                let mut items = Vec::new();
                let mut cur = args[0];
                while cur != Value::Nil {
                    let p = self.expect_kind(prim, cur, ObjKind::Pair)?;
                    spine.push(p);
                    if spine.len() > self.rt.heap().object_count() {
                        return Err(EvalError::Runtime("list->vector: circular list".into()));
                    }
                    items.push(self.rt.heap().read_slot(p, 0)?);
                    cur = self.rt.heap().read_slot(p, 1)?;
                }
                for p in spine {
                    self.use_obj(p)?;
                }
                let r = self.alloc_vector(items.len() as i64, Value::Unspecified)?;
                let Value::Ref(vr) = r else { unreachable!() };
                for (i, item) in items.into_iter().enumerate() {
                    self.rt.heap_mut().write_slot(vr, i, item)?;
                }
                Ok(r)
            }
            Prim::Add | Prim::Sub | Prim::Mul | Prim::Quotient | Prim::Remainder | Prim::Modulo
            | Prim::NumEq | Prim::Lt | Prim::Gt | Prim::Le | Prim::Ge => self.arith(prim, args),
            Prim::ZeroP => Ok(Value::Boolean(number(prim, args[0])? == 0)),
            Prim::EqP | Prim::EqvP => {
                self.use_value(args[0])?;
                self.use_value(args[1])?;
                Ok(Value::Boolean(args[0] == args[1]))
            }
            Prim::Display => {
                self.use_value(args[0])?;
                let text = self.write_value(args[0])?;
                self.output.push_str(&text);
                Ok(Value::Unspecified)
            }
            Prim::Newline => {
                self.output.push('\n');
                Ok(Value::Unspecified)
            }
        }
    }
}
