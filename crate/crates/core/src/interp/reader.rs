//! S-expression reader.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SexpKind {
    Int(i64),
    Bool(bool),
    Symbol(String),
    /// Proper list, or dotted list when the tail is present.
    List(Vec<Sexp>, Option<Box<Sexp>>),
    Vector(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sexp {
    pub kind: SexpKind,
    pub line: usize,
    pub col: usize,
    /// Byte range in the source.
    pub span: (usize, usize),
}

impl Sexp {
    pub fn symbol(&self) -> Option<&str> {
        match &self.kind {
            SexpKind::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match &self.kind {
            SexpKind::List(items, None) => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SexpKind::Int(n) => write!(f, "{n}"),
            SexpKind::Bool(b) => write!(f, "{}", if *b { "#t" } else { "#f" }),
            SexpKind::Symbol(s) => write!(f, "{s}"),
            SexpKind::List(items, tail) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                if let Some(t) = tail {
                    write!(f, " . {t}")?;
                }
                write!(f, ")")
            }
            SexpKind::Vector(items) => {
                write!(f, "#(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Reader<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

fn is_delimiter(b: u8) -> bool {
    b.is_ascii_whitespace() || matches!(b, b'(' | b')' | b'\'' | b';' | b'"')
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) {
        if let Some(b) = self.peek() {
            self.pos += 1;
            if b == b'\n' {
                self.line += 1;
                self.col = 1;
            } else if b & 0xC0 != 0x80 {
                self.col += 1;
            }
        }
    }

    fn skip_atmosphere(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.bump();
            } else if b == b';' {
                while let Some(b) = self.peek() {
                    if b == b'\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, SyntaxError> {
        self.skip_atmosphere();
        let (line, col, start) = (self.line, self.col, self.pos);
        let make = |kind, end| Sexp {
            kind,
            line,
            col,
            span: (start, end),
        };
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.bump();
                let mut items = Vec::new();
                let mut tail = None;
                loop {
                    self.skip_atmosphere();
                    match self.peek() {
                        None => {
                            return Err(self.err(format!(
                                "unexpected end of input: list opened at {line}:{col} is not closed"
                            )))
                        }
                        Some(b')') => {
                            self.bump();
                            break;
                        }
                        Some(b'.')
                            if self
                                .bytes
                                .get(self.pos + 1)
                                .map_or(true, |&b| is_delimiter(b)) =>
                        {
                            if items.is_empty() {
                                return Err(self.err("dot at start of list"));
                            }
                            self.bump();
                            tail = Some(Box::new(self.read()?));
                            self.skip_atmosphere();
                            if self.peek() != Some(b')') {
                                return Err(self.err("expected `)` after dotted tail"));
                            }
                            self.bump();
                            break;
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
                Ok(make(SexpKind::List(items, tail), self.pos))
            }
            Some(b')') => Err(self.err("unexpected `)`")),
            Some(b'\'') => {
                self.bump();
                let quoted = self.read()?;
                let end = quoted.span.1;
                let head = Sexp {
                    kind: SexpKind::Symbol("quote".into()),
                    line,
                    col,
                    span: (start, start + 1),
                };
                Ok(make(SexpKind::List(vec![head, quoted], None), end))
            }
            Some(b'"') => Err(self.err("string literals are not supported")),
            Some(b'#') if self.bytes.get(self.pos + 1) == Some(&b'(') => {
                self.bump();
                let list = self.read()?;
                match list.kind {
                    SexpKind::List(items, None) => Ok(make(SexpKind::Vector(items), list.span.1)),
                    _ => Err(SyntaxError {
                        line,
                        col,
                        message: "dotted vector literal".into(),
                    }),
                }
            }
            Some(_) => {
                while let Some(b) = self.peek() {
                    if is_delimiter(b) {
                        break;
                    }
                    self.bump();
                }
                let text = &self.src[start..self.pos];
                let kind = match text {
                    "#t" | "#true" => SexpKind::Bool(true),
                    "#f" | "#false" => SexpKind::Bool(false),
                    _ if text.starts_with('#') => {
                        return Err(SyntaxError {
                            line,
                            col,
                            message: format!("unsupported literal {text}"),
                        })
                    }
                    _ => match text.parse::<i64>() {
                        Ok(n) => SexpKind::Int(n),
                        Err(_) if looks_numeric(text) => {
                            return Err(SyntaxError {
                                line,
                                col,
                                message: format!("unsupported number {text}"),
                            })
                        }
                        Err(_) => SexpKind::Symbol(text.to_ascii_lowercase()),
                    },
                };
                Ok(make(kind, self.pos))
            }
        }
    }
}

fn looks_numeric(text: &str) -> bool {
    let digits = text.trim_start_matches(['+', '-']);
    digits.starts_with(|c: char| c.is_ascii_digit())
}

/// Reads every datum in `src`.
pub fn read_all(src: &str) -> Result<Vec<Sexp>, SyntaxError> {
    let mut reader = Reader {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        reader.skip_atmosphere();
        if reader.peek().is_none() {
            return Ok(out);
        }
        out.push(reader.read()?);
    }
}
