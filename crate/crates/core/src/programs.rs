//! Example programs shipped with the crate.

pub struct Program {
    pub name: &'static str,
    pub source: &'static str,
}

pub const MOTIV: Program = Program {
    name: "motiv.scm",
    source: include_str!("../programs/motiv.scm"),
};

pub const MOTIV_NULLIFIED: Program = Program {
    name: "motiv-nullified.scm",
    source: include_str!("../programs/motiv-nullified.scm"),
};

pub const ALL: &[Program] = &[
    MOTIV,
    MOTIV_NULLIFIED,
    Program {
        name: "queens.scm",
        source: include_str!("../programs/queens.scm"),
    },
    Program {
        name: "sieve.scm",
        source: include_str!("../programs/sieve.scm"),
    },
    Program {
        name: "mergesort.scm",
        source: include_str!("../programs/mergesort.scm"),
    },
    Program {
        name: "assoc.scm",
        source: include_str!("../programs/assoc.scm"),
    },
    Program {
        name: "trees.scm",
        source: include_str!("../programs/trees.scm"),
    },
];

pub fn find(name: &str) -> Option<&'static Program> {
    ALL.iter().find(|p| p.name == name || p.name.trim_end_matches(".scm") == name)
}

/// Replaces the `(define n …)` line of a motiv-style program.
///
/// Panics if the source has no such line.
pub fn with_n(source: &str, n: u64) -> String {
    let mut found = false;
    let out: Vec<String> = source
        .lines()
        .map(|line| {
            if !found && line.trim_start().starts_with("(define n ") {
                found = true;
                format!("(define n {n})")
            } else {
                line.to_string()
            }
        })
        .collect();
    assert!(found, "program has no `(define n ...)` line");
    out.join("\n") + "\n"
}
