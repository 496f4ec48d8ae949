//! Static well-formedness checks, run as part of `parse_program`.

use super::ast::*;
use super::lexer::Pos;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StaticErrorKind {
    DuplicatePredicate(String),
    DuplicateRoutine(String),
    DuplicateParam(String),
    ReservedPredicateName(String),
    ResultAsParam,
    PrePatternShadowsParam(String),
    UnknownRoutine(String),
    RoutineArity {
        routine: String,
        expected: usize,
        found: usize,
    },
    UnknownPredicate(String),
    PredicateArity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    OpenCloseBuiltin(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticError {
    pub kind: StaticErrorKind,
    /// The enclosing definition ("routine foo", "predicate list", "main").
    pub context: String,
    /// Source position of the enclosing definition when known.
    pub pos: Option<Pos>,
}

impl fmt::Display for StaticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(pos) = self.pos {
            write!(f, "{pos}: ")?;
        }
        write!(f, "in {}: ", self.context)?;
        match &self.kind {
            StaticErrorKind::DuplicatePredicate(n) => write!(f, "duplicate predicate '{n}'"),
            StaticErrorKind::DuplicateRoutine(n) => write!(f, "duplicate routine '{n}'"),
            StaticErrorKind::DuplicateParam(n) => write!(f, "duplicate parameter '{n}'"),
            StaticErrorKind::ReservedPredicateName(n) => {
                write!(f, "'{n}' is a built-in predicate and cannot be redefined")
            }
            StaticErrorKind::ResultAsParam => {
                write!(
                    f,
                    "'{RESULT_VAR}' is reserved for return values and cannot be a parameter"
                )
            }
            StaticErrorKind::PrePatternShadowsParam(n) => {
                write!(f, "precondition pattern '?{n}' shadows a parameter")
            }
            StaticErrorKind::UnknownRoutine(n) => write!(f, "call to undeclared routine '{n}'"),
            StaticErrorKind::RoutineArity {
                routine,
                expected,
                found,
            } => write!(
                f,
                "routine '{routine}' takes {expected} argument(s), found {found}"
            ),
            StaticErrorKind::UnknownPredicate(n) => {
                write!(f, "use of undeclared predicate '{n}'")
            }
            StaticErrorKind::PredicateArity {
                predicate,
                expected,
                found,
            } => write!(
                f,
                "predicate '{predicate}' takes {expected} argument(s), found {found}"
            ),
            StaticErrorKind::OpenCloseBuiltin(n) => {
                write!(f, "open/close is not allowed on built-in predicate '{n}'")
            }
        }
    }
}

impl std::error::Error for StaticError {}

struct Checker<'a> {
    program: &'a Program,
    errors: Vec<StaticError>,
    context: String,
    pos: Option<Pos>,
}

impl<'a> Checker<'a> {
    fn report(&mut self, kind: StaticErrorKind) {
        self.errors.push(StaticError {
            kind,
            context: self.context.clone(),
            pos: self.pos,
        });
    }

    fn pred_arity(&self, name: &PredName) -> Option<usize> {
        match name {
            PredName::PointsTo | PredName::Mb => Some(2),
            PredName::User(n) => self.program.predicate(n).map(|p| p.params.len()),
        }
    }

    fn check_params(&mut self, params: &[String], check_result: bool) {
        let mut seen = BTreeSet::new();
        for p in params {
            if !seen.insert(p.clone()) {
                self.report(StaticErrorKind::DuplicateParam(p.clone()));
            }
            if check_result && p == RESULT_VAR {
                self.report(StaticErrorKind::ResultAsParam);
            }
        }
    }

    fn check_assertion(&mut self, a: &Assertion) {
        match a {
            Assertion::Bool(_) => {}
            Assertion::Pred {
                name,
                args,
                patterns,
            } => {
                let found = args.len() + patterns.len();
                match self.pred_arity(name) {
                    None => {
                        if let PredName::User(n) = name {
                            self.report(StaticErrorKind::UnknownPredicate(n.clone()));
                        }
                    }
                    Some(expected) if expected != found => {
                        let pname = match name {
                            PredName::PointsTo => "|->".to_string(),
                            PredName::Mb => "mb".to_string(),
                            PredName::User(n) => n.clone(),
                        };
                        self.report(StaticErrorKind::PredicateArity {
                            predicate: pname,
                            expected,
                            found,
                        });
                    }
                    Some(_) => {}
                }
            }
            Assertion::SepConj(l, r) => {
                self.check_assertion(l);
                self.check_assertion(r);
            }
            Assertion::IfThenElse { then_a, else_a, .. } => {
                self.check_assertion(then_a);
                self.check_assertion(else_a);
            }
        }
    }

    fn check_command(&mut self, c: &Command) {
        match c {
            Command::Seq(a, b) => {
                self.check_command(a);
                self.check_command(b);
            }
            Command::If(_, a, b) => {
                self.check_command(a);
                self.check_command(b);
            }
            Command::While {
                invariant, body, ..
            } => {
                self.check_assertion(invariant);
                self.check_command(body);
            }
            Command::Call { routine, args, .. } => match self.program.routine(routine) {
                None => self.report(StaticErrorKind::UnknownRoutine(routine.clone())),
                Some(def) if def.params.len() != args.len() => {
                    self.report(StaticErrorKind::RoutineArity {
                        routine: routine.clone(),
                        expected: def.params.len(),
                        found: args.len(),
                    });
                }
                Some(_) => {}
            },
            Command::Open {
                pred,
                args,
                wildcards,
            } => {
                if pred == "mb" {
                    self.report(StaticErrorKind::OpenCloseBuiltin(pred.clone()));
                } else {
                    match self.program.predicate(pred) {
                        None => self.report(StaticErrorKind::UnknownPredicate(pred.clone())),
                        Some(def) => {
                            let found = args.len() + *wildcards as usize;
                            if def.params.len() != found {
                                self.report(StaticErrorKind::PredicateArity {
                                    predicate: pred.clone(),
                                    expected: def.params.len(),
                                    found,
                                });
                            }
                        }
                    }
                }
            }
            Command::Close { pred, args } => {
                if pred == "mb" {
                    self.report(StaticErrorKind::OpenCloseBuiltin(pred.clone()));
                } else {
                    match self.program.predicate(pred) {
                        None => self.report(StaticErrorKind::UnknownPredicate(pred.clone())),
                        Some(def) => {
                            if def.params.len() != args.len() {
                                self.report(StaticErrorKind::PredicateArity {
                                    predicate: pred.clone(),
                                    expected: def.params.len(),
                                    found: args.len(),
                                });
                            }
                        }
                    }
                }
            }
            Command::Assign(..)
            | Command::Malloc { .. }
            | Command::Read { .. }
            | Command::Write { .. }
            | Command::Free(_)
            | Command::Skip
            | Command::Message(_) => {}
        }
    }
}

fn pre_patterns(a: &Assertion, out: &mut Vec<String>) {
    match a {
        Assertion::Bool(_) => {}
        Assertion::Pred { patterns, .. } => out.extend(patterns.iter().cloned()),
        Assertion::SepConj(l, r) => {
            pre_patterns(l, out);
            pre_patterns(r, out);
        }
        Assertion::IfThenElse { then_a, else_a, .. } => {
            pre_patterns(then_a, out);
            pre_patterns(else_a, out);
        }
    }
}

pub(crate) fn check_program(program: &Program, def_spans: &[(String, Pos)]) -> Vec<StaticError> {
    let span_of = |ctx: &str| -> Option<Pos> {
        def_spans
            .iter()
            .find(|(name, _)| name == ctx)
            .map(|(_, pos)| *pos)
    };
    let mut checker = Checker {
        program,
        errors: Vec::new(),
        context: String::new(),
        pos: None,
    };

    let mut seen_preds = BTreeSet::new();
    for p in &program.predicates {
        checker.context = format!("predicate {}", p.name);
        checker.pos = span_of(&checker.context);
        if p.name == "mb" {
            checker.report(StaticErrorKind::ReservedPredicateName(p.name.clone()));
        }
        if !seen_preds.insert(p.name.clone()) {
            checker.report(StaticErrorKind::DuplicatePredicate(p.name.clone()));
        }
        checker.check_params(&p.params, false);
        checker.check_assertion(&p.body);
    }

    let mut seen_routines = BTreeSet::new();
    for r in &program.routines {
        checker.context = format!("routine {}", r.name);
        checker.pos = span_of(&checker.context);
        if !seen_routines.insert(r.name.clone()) {
            checker.report(StaticErrorKind::DuplicateRoutine(r.name.clone()));
        }
        checker.check_params(&r.params, true);
        let mut pats = Vec::new();
        pre_patterns(&r.pre, &mut pats);
        for pat in pats {
            if r.params.contains(&pat) {
                checker.report(StaticErrorKind::PrePatternShadowsParam(pat));
            }
        }
        checker.check_assertion(&r.pre);
        checker.check_assertion(&r.post);
        checker.check_command(&r.body);
    }

    checker.context = "main".to_string();
    checker.pos = None;
    checker.check_command(&program.main);

    checker.errors
}

/// Re-checks an already constructed `Program`. Positions are unavailable on
/// this path; errors carry the enclosing definition name instead.
pub fn check_well_formed(program: &Program) -> Vec<StaticError> {
    check_program(program, &[])
}
