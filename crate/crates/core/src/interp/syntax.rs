//! Expression tree and the compiler from s-expressions.

use std::collections::HashMap;
use std::rc::Rc;

use super::reader::{read_all, Sexp, SexpKind, SyntaxError};
use crate::heap::{Sym, Value};

#[derive(Debug, Default, Clone)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, Sym>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> Sym {
        if let Some(&sym) = self.index.get(name) {
            return sym;
        }
        let sym = Sym(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), sym);
        sym
    }

    pub fn name(&self, sym: Sym) -> &str {
        &self.names[sym.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub type ExprRef = Rc<Expr>;

/// Quoted structure. Compound data is allocated each time the quote is
/// evaluated, never at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Imm(Value),
    List(Vec<Datum>, Box<Datum>),
    Vector(Vec<Datum>),
}

#[derive(Debug, PartialEq)]
pub struct Lambda {
    pub name: Option<Sym>,
    pub params: Vec<Sym>,
    pub rest: Option<Sym>,
    pub body: Vec<ExprRef>,
}

#[derive(Debug, PartialEq)]
pub enum Expr {
    Literal(Value),
    Var(Sym),
    Quote(Datum),
    If(ExprRef, ExprRef, Option<ExprRef>),
    Let(Vec<(Sym, ExprRef)>, Vec<ExprRef>),
    /// `(let name ((v init) ...) body)`: a recursive binding of `lambda`
    /// applied to the inits.
    NamedLet(Sym, Vec<ExprRef>, Rc<Lambda>),
    Lambda(Rc<Lambda>),
    Begin(Vec<ExprRef>),
    Define(Sym, ExprRef),
    SetVar(Sym, ExprRef),
    Apply(ExprRef, Vec<ExprRef>),
    And(Vec<ExprRef>),
    Or(Vec<ExprRef>),
}

/// A top-level form with its source location.
#[derive(Debug)]
pub struct Form {
    pub expr: ExprRef,
    pub line: usize,
    pub col: usize,
    /// Abbreviated source text, for diagnostics.
    pub snippet: String,
}

fn err(at: &Sexp, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        line: at.line,
        col: at.col,
        message: message.into(),
    }
}

struct Compiler<'a> {
    symbols: &'a mut Interner,
}

impl Compiler<'_> {
    fn datum(&mut self, s: &Sexp) -> Datum {
        match &s.kind {
            SexpKind::Int(n) => Datum::Imm(Value::Number(*n)),
            SexpKind::Bool(b) => Datum::Imm(Value::Boolean(*b)),
            SexpKind::Symbol(name) => Datum::Imm(Value::Symbol(self.symbols.intern(name))),
            SexpKind::List(items, tail) if items.is_empty() && tail.is_none() => Datum::Imm(Value::Nil),
            SexpKind::List(items, tail) => Datum::List(
                items.iter().map(|i| self.datum(i)).collect(),
                Box::new(match tail {
                    Some(t) => self.datum(t),
                    None => Datum::Imm(Value::Nil),
                }),
            ),
            SexpKind::Vector(items) => Datum::Vector(items.iter().map(|i| self.datum(i)).collect()),
        }
    }

    fn quote(&mut self, s: &Sexp) -> Expr {
        match self.datum(s) {
            Datum::Imm(v) => Expr::Literal(v),
            d => Expr::Quote(d),
        }
    }

    fn ident(&mut self, s: &Sexp, what: &str) -> Result<Sym, SyntaxError> {
        s.symbol()
            .map(|name| self.symbols.intern(name))
            .ok_or_else(|| err(s, format!("expected identifier in {what}, found {s}")))
    }

    fn body(&mut self, forms: &[Sexp], at: &Sexp, what: &str) -> Result<Vec<ExprRef>, SyntaxError> {
        if forms.is_empty() {
            return Err(err(at, format!("empty body in {what}")));
        }
        forms.iter().map(|f| self.expr(f)).collect()
    }

    fn params(&mut self, s: &Sexp) -> Result<(Vec<Sym>, Option<Sym>), SyntaxError> {
        match &s.kind {
            SexpKind::Symbol(_) => Ok((Vec::new(), Some(self.ident(s, "parameters")?))),
            SexpKind::List(items, tail) => {
                let params = items
                    .iter()
                    .map(|p| self.ident(p, "parameters"))
                    .collect::<Result<Vec<_>, _>>()?;
                let rest = tail.as_ref().map(|t| self.ident(t, "parameters")).transpose()?;
                let mut seen = params.clone();
                seen.extend(rest);
                seen.sort();
                if seen.windows(2).any(|w| w[0] == w[1]) {
                    return Err(err(s, "duplicate parameter"));
                }
                Ok((params, rest))
            }
            _ => Err(err(s, format!("bad parameter list {s}"))),
        }
    }

    fn bindings(&mut self, s: &Sexp, what: &str) -> Result<Vec<(Sym, ExprRef)>, SyntaxError> {
        let items = s
            .list()
            .ok_or_else(|| err(s, format!("bad bindings in {what}")))?;
        items
            .iter()
            .map(|b| match b.list() {
                Some([name, init]) => Ok((self.ident(name, what)?, self.expr(init)?)),
                _ => Err(err(b, format!("bad binding {b} in {what}"))),
            })
            .collect()
    }

    fn expr(&mut self, s: &Sexp) -> Result<ExprRef, SyntaxError> {
        Ok(Rc::new(self.expr_inner(s)?))
    }

    fn expr_inner(&mut self, s: &Sexp) -> Result<Expr, SyntaxError> {
        let items = match &s.kind {
            SexpKind::Int(n) => return Ok(Expr::Literal(Value::Number(*n))),
            SexpKind::Bool(b) => return Ok(Expr::Literal(Value::Boolean(*b))),
            SexpKind::Symbol(name) => return Ok(Expr::Var(self.symbols.intern(name))),
            SexpKind::Vector(_) => return Ok(self.quote(s)),
            SexpKind::List(_, Some(_)) => return Err(err(s, "dotted list in expression")),
            SexpKind::List(items, None) => items,
        };
        let Some(head) = items.first() else {
            return Err(err(s, "empty combination ()"));
        };
        let args = &items[1..];
        let keyword = head.symbol().unwrap_or("");
        match keyword {
            "quote" => match args {
                [d] => Ok(self.quote(d)),
                _ => Err(err(s, "quote takes one datum")),
            },
            "if" => match args {
                [c, t] => Ok(Expr::If(self.expr(c)?, self.expr(t)?, None)),
                [c, t, e] => Ok(Expr::If(self.expr(c)?, self.expr(t)?, Some(self.expr(e)?))),
                _ => Err(err(s, "if takes 2 or 3 operands")),
            },
            "define" => match args {
                [target, rest @ ..] if target.symbol().is_some() => match rest {
                    [value] => Ok(Expr::Define(self.ident(target, "define")?, self.expr(value)?)),
                    [] => Ok(Expr::Define(
                        self.ident(target, "define")?,
                        Rc::new(Expr::Literal(Value::Unspecified)),
                    )),
                    _ => Err(err(s, "define takes one value")),
                },
                [target, body @ ..] => {
                    let SexpKind::List(parts, tail) = &target.kind else {
                        return Err(err(target, "bad define target"));
                    };
                    let Some((name, params)) = parts.split_first() else {
                        return Err(err(target, "missing procedure name"));
                    };
                    let name = self.ident(name, "define")?;
                    let params_sexp = Sexp {
                        kind: SexpKind::List(params.to_vec(), tail.clone()),
                        ..target.clone()
                    };
                    let (params, rest) = self.params(&params_sexp)?;
                    let body = self.body(body, s, "define")?;
                    Ok(Expr::Define(
                        name,
                        Rc::new(Expr::Lambda(Rc::new(Lambda {
                            name: Some(name),
                            params,
                            rest,
                            body,
                        }))),
                    ))
                }
                [] => Err(err(s, "define needs a target")),
            },
            "set!" => match args {
                [name, value] => Ok(Expr::SetVar(self.ident(name, "set!")?, self.expr(value)?)),
                _ => Err(err(s, "set! takes a name and a value")),
            },
            "lambda" => match args {
                [params, body @ ..] => {
                    let (params, rest) = self.params(params)?;
                    let body = self.body(body, s, "lambda")?;
                    Ok(Expr::Lambda(Rc::new(Lambda {
                        name: None,
                        params,
                        rest,
                        body,
                    })))
                }
                _ => Err(err(s, "lambda needs parameters and a body")),
            },
            "let" => match args {
                [name, bindings, body @ ..] if name.symbol().is_some() => {
                    let name = self.ident(name, "named let")?;
                    let bindings = self.bindings(bindings, "named let")?;
                    let body = self.body(body, s, "named let")?;
                    let (params, inits): (Vec<_>, Vec<_>) = bindings.into_iter().unzip();
                    let mut sorted = params.clone();
                    sorted.sort();
                    if sorted.windows(2).any(|w| w[0] == w[1]) {
                        return Err(err(s, "duplicate binding in named let"));
                    }
                    Ok(Expr::NamedLet(
                        name,
                        inits,
                        Rc::new(Lambda {
                            name: Some(name),
                            params,
                            rest: None,
                            body,
                        }),
                    ))
                }
                [bindings, body @ ..] => {
                    let bindings = self.bindings(bindings, "let")?;
                    let body = self.body(body, s, "let")?;
                    Ok(Expr::Let(bindings, body))
                }
                [] => Err(err(s, "let needs bindings")),
            },
            "let*" => match args {
                [bindings, body @ ..] => {
                    let bindings = self.bindings(bindings, "let*")?;
                    let mut body = self.body(body, s, "let*")?;
                    let mut bindings = bindings.into_iter().rev();
                    let Some(last) = bindings.next() else {
                        return Ok(Expr::Let(Vec::new(), body));
                    };
                    let mut nested = Expr::Let(vec![last], body);
                    for binding in bindings {
                        body = vec![Rc::new(nested)];
                        nested = Expr::Let(vec![binding], body);
                    }
                    Ok(nested)
                }
                [] => Err(err(s, "let* needs bindings")),
            },
            "letrec" | "letrec*" => match args {
                [bindings, body @ ..] => {
                    let bindings = self.bindings(bindings, keyword)?;
                    let body = self.body(body, s, keyword)?;
                    let holes = bindings
                        .iter()
                        .map(|(name, _)| (*name, Rc::new(Expr::Literal(Value::Unspecified))))
                        .collect();
                    let mut seq: Vec<ExprRef> = bindings
                        .into_iter()
                        .map(|(name, init)| Rc::new(Expr::SetVar(name, init)))
                        .collect();
                    seq.extend(body);
                    Ok(Expr::Let(holes, seq))
                }
                [] => Err(err(s, "letrec needs bindings")),
            },
            "begin" => {
                if args.is_empty() {
                    Ok(Expr::Literal(Value::Unspecified))
                } else {
                    Ok(Expr::Begin(self.body(args, s, "begin")?))
                }
            }
            "and" => Ok(Expr::And(args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?)),
            "or" => Ok(Expr::Or(args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?)),
            "when" | "unless" => match args {
                [test, body @ ..] => {
                    let test = self.expr(test)?;
                    let body = Rc::new(Expr::Begin(self.body(body, s, keyword)?));
                    let nothing = Rc::new(Expr::Literal(Value::Unspecified));
                    Ok(if keyword == "when" {
                        Expr::If(test, body, Some(nothing))
                    } else {
                        Expr::If(test, nothing, Some(body))
                    })
                }
                [] => Err(err(s, format!("{keyword} needs a test"))),
            },
            "cond" => self.cond(args, s),
            _ => {
                let f = self.expr(head)?;
                let args = args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?;
                Ok(Expr::Apply(f, args))
            }
        }
    }

    fn cond(&mut self, clauses: &[Sexp], at: &Sexp) -> Result<Expr, SyntaxError> {
        let Some((clause, rest)) = clauses.split_first() else {
            return Ok(Expr::Literal(Value::Unspecified));
        };
        let parts = clause
            .list()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| err(clause, "bad cond clause"))?;
        if parts[0].symbol() == Some("else") {
            if !rest.is_empty() {
                return Err(err(clause, "else clause must be last"));
            }
            return Ok(Expr::Begin(self.body(&parts[1..], clause, "cond else")?));
        }
        let test = self.expr(&parts[0])?;
        let otherwise = Rc::new(self.cond(rest, at)?);
        if parts.len() == 1 {
            return Ok(Expr::Or(vec![test, otherwise]));
        }
        let body = Rc::new(Expr::Begin(self.body(&parts[1..], clause, "cond")?));
        Ok(Expr::If(test, body, Some(otherwise)))
    }
}

fn snippet(src: &str, s: &Sexp) -> String {
    let text = &src[s.span.0..s.span.1];
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() > 60 {
        let cut: String = flat.chars().take(57).collect();
        format!("{cut}...")
    } else {
        flat
    }
}

/// Parses a whole program. Symbols are interned into `symbols`.
pub fn parse(src: &str, symbols: &mut Interner) -> Result<Vec<Form>, SyntaxError> {
    let sexps = read_all(src)?;
    let mut compiler = Compiler { symbols };
    sexps
        .iter()
        .map(|s| {
            Ok(Form {
                expr: compiler.expr(s)?,
                line: s.line,
                col: s.col,
                snippet: snippet(src, s),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &str) -> (Expr, Interner) {
        let mut syms = Interner::default();
        let mut forms = parse(src, &mut syms).unwrap();
        assert_eq!(forms.len(), 1);
        let form = forms.pop().unwrap();
        (Rc::try_unwrap(form.expr).unwrap(), syms)
    }

    #[test]
    fn arithmetic_application() {
        let (e, mut syms) = one("(+ 1 2)");
        let plus = syms.intern("+");
        assert_eq!(
            e,
            Expr::Apply(
                Rc::new(Expr::Var(plus)),
                vec![
                    Rc::new(Expr::Literal(Value::Number(1))),
                    Rc::new(Expr::Literal(Value::Number(2)))
                ]
            )
        );
    }

    #[test]
    fn motivating_program_shape() {
        let src = "(let ((x (list 1 2 3)))
                     (let loop ((y x))
                       (if (null? y)
                           '()
                           (begin (car y) (loop (cdr y))))))";
        let (e, _) = one(src);
        let Expr::Let(bindings, body) = e else {
            panic!("outer form is not a let")
        };
        assert_eq!(bindings.len(), 1);
        assert!(matches!(&*bindings[0].1, Expr::Apply(..)));
        let Expr::NamedLet(_, inits, lambda) = &*body[0] else {
            panic!("inner form is not a named let")
        };
        assert_eq!(inits.len(), 1);
        assert_eq!(lambda.params.len(), 1);
        assert!(matches!(&*lambda.body[0], Expr::If(..)));
    }

    #[test]
    fn quoted_lists_are_not_preallocated() {
        let (e, _) = one("'(1 2)");
        assert!(matches!(e, Expr::Quote(Datum::List(..))));
        let (e, _) = one("'()");
        assert_eq!(e, Expr::Literal(Value::Nil));
        let (e, _) = one("'sym");
        assert!(matches!(e, Expr::Literal(Value::Symbol(_))));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let mut syms = Interner::default();
        let e = parse("(car", &mut syms).unwrap_err();
        assert!(e.message.contains("end of input"));
        let e = parse("\n (if)", &mut syms).unwrap_err();
        assert_eq!((e.line, e.col), (2, 2));
        assert!(parse("(lambda (x x) x)", &mut syms).is_err());
        assert!(parse("()", &mut syms).is_err());
    }

    #[test]
    fn derived_forms() {
        let mut syms = Interner::default();
        let forms = parse(
            "(define (f a . rest) a) (let* ((a 1) (b a)) b) (cond ((f 1) 2) (else 3)) (letrec ((g 1)) g)",
            &mut syms,
        )
        .unwrap();
        assert!(matches!(&*forms[0].expr, Expr::Define(..)));
        assert!(matches!(&*forms[1].expr, Expr::Let(b, _) if b.len() == 1));
        assert!(matches!(&*forms[2].expr, Expr::If(..)));
        assert!(matches!(&*forms[3].expr, Expr::Let(..)));
        assert_eq!(forms[0].snippet, "(define (f a . rest) a)");
    }
}
