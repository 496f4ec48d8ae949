//! Abstract syntax for the annotated imperative language.
//!
//! Programs are a list of predicate and routine definitions followed by a
//! main command. Assertions are separation-logic formulas built from boolean
//! facts, spatial chunks, separating conjunction, and conditionals. Chunk
//! assertions list their fixed argument expressions first, then the pattern
//! variables (`?x`) that consumption binds.

use std::collections::BTreeSet;

/// The variable that a routine body assigns its return value to. It is bound
/// at call sites and in postconditions but may never be a routine parameter.
pub const RESULT_VAR: &str = "result";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    IntLit(i64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    // Boxing constructors, not operator impls.
    #[allow(clippy::should_implement_trait)]
    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Add(Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(lhs), Box::new(rhs))
    }

    fn visit_vars(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Expr::IntLit(_) => {}
            Expr::Var(x) => f(x),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Eq(Expr, Expr),
    Lt(Expr, Expr),
    Not(Box<BoolExpr>),
}

impl BoolExpr {
    #[allow(clippy::should_implement_trait)]
    pub fn not(b: BoolExpr) -> BoolExpr {
        BoolExpr::Not(Box::new(b))
    }

    fn visit_vars(&self, f: &mut dyn FnMut(&str)) {
        match self {
            BoolExpr::Eq(a, b) | BoolExpr::Lt(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            BoolExpr::Not(inner) => inner.visit_vars(f),
        }
    }
}

/// Predicate names. `PointsTo` (written `e |-> v`) and `Mb` (written
/// `mb(l, n)`) are built in; everything else refers to a `predicate`
/// definition. Built-ins always have arity 2.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredName {
    PointsTo,
    Mb,
    User(String),
}

impl PredName {
    pub fn from_ident(name: &str) -> PredName {
        if name == "mb" {
            PredName::Mb
        } else {
            PredName::User(name.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assertion {
    Bool(BoolExpr),
    /// `name(args..., ?patterns...)`; for `PointsTo` the printable shapes are
    /// one fixed argument plus one pattern, or two fixed arguments.
    Pred {
        name: PredName,
        args: Vec<Expr>,
        patterns: Vec<String>,
    },
    SepConj(Box<Assertion>, Box<Assertion>),
    IfThenElse {
        cond: BoolExpr,
        then_a: Box<Assertion>,
        else_a: Box<Assertion>,
    },
}

impl Assertion {
    pub fn sep(lhs: Assertion, rhs: Assertion) -> Assertion {
        Assertion::SepConj(Box::new(lhs), Box::new(rhs))
    }

    pub fn points_to(addr: Expr, value: Expr) -> Assertion {
        Assertion::Pred {
            name: PredName::PointsTo,
            args: vec![addr, value],
            patterns: vec![],
        }
    }

    pub fn points_to_pat(addr: Expr, pattern: &str) -> Assertion {
        Assertion::Pred {
            name: PredName::PointsTo,
            args: vec![addr],
            patterns: vec![pattern.to_string()],
        }
    }

    /// True if the assertion reads or binds the given variable anywhere.
    pub fn mentions_var(&self, var: &str) -> bool {
        let mut found = false;
        self.visit_vars(&mut |x| {
            if x == var {
                found = true;
            }
        });
        found
    }

    fn visit_vars(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Assertion::Bool(b) => b.visit_vars(f),
            Assertion::Pred { args, patterns, .. } => {
                for a in args {
                    a.visit_vars(f);
                }
                for p in patterns {
                    f(p);
                }
            }
            Assertion::SepConj(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Assertion::IfThenElse {
                cond,
                then_a,
                else_a,
            } => {
                cond.visit_vars(f);
                then_a.visit_vars(f);
                else_a.visit_vars(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Assign(String, Expr),
    Seq(Box<Command>, Box<Command>),
    If(BoolExpr, Box<Command>, Box<Command>),
    While {
        cond: BoolExpr,
        invariant: Assertion,
        body: Box<Command>,
    },
    /// `r(args)` or `ret := r(args)`.
    Call {
        ret: Option<String>,
        routine: String,
        args: Vec<Expr>,
    },
    Malloc {
        target: String,
        size: u32,
    },
    /// `target := [addr]`
    Read {
        target: String,
        addr: Expr,
    },
    /// `[addr] := value`
    Write {
        addr: Expr,
        value: Expr,
    },
    Free(Expr),
    /// `open q(args, ?_, ...)`; `wildcards` counts the trailing `?_` slots.
    Open {
        pred: String,
        args: Vec<Expr>,
        wildcards: u32,
    },
    Close {
        pred: String,
        args: Vec<Expr>,
    },
    Skip,
    Message(String),
}

impl Command {
    pub fn seq(first: Command, rest: Command) -> Command {
        Command::Seq(Box::new(first), Box::new(rest))
    }

    /// Folds a nonempty list of commands into a right-nested sequence.
    pub fn seq_all(mut cmds: Vec<Command>) -> Command {
        let mut acc = cmds.pop().expect("seq_all needs at least one command");
        while let Some(c) = cmds.pop() {
            acc = Command::seq(c, acc);
        }
        acc
    }
}

/// The set of variables a command may assign to. Loop havoc and the
/// frame-discipline tests rely on this.
pub fn targets(cmd: &Command) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_targets(cmd, &mut out);
    out
}

fn collect_targets(cmd: &Command, out: &mut BTreeSet<String>) {
    match cmd {
        Command::Assign(x, _) => {
            out.insert(x.clone());
        }
        Command::Seq(a, b) => {
            collect_targets(a, out);
            collect_targets(b, out);
        }
        Command::If(_, a, b) => {
            collect_targets(a, out);
            collect_targets(b, out);
        }
        Command::While { body, .. } => collect_targets(body, out),
        Command::Call { ret, .. } => {
            if let Some(x) = ret {
                out.insert(x.clone());
            }
        }
        Command::Malloc { target, .. } | Command::Read { target, .. } => {
            out.insert(target.clone());
        }
        Command::Write { .. }
        | Command::Free(_)
        | Command::Open { .. }
        | Command::Close { .. }
        | Command::Skip
        | Command::Message(_) => {}
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Assertion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutineDef {
    pub name: String,
    pub params: Vec<String>,
    pub pre: Assertion,
    pub post: Assertion,
    pub body: Command,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub predicates: Vec<PredicateDef>,
    pub routines: Vec<RoutineDef>,
    pub main: Command,
}

impl Program {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDef> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn routine(&self, name: &str) -> Option<&RoutineDef> {
        self.routines.iter().find(|r| r.name == name)
    }
}
