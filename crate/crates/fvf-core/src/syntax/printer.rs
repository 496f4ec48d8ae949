//! Pretty-printing. `parse_program(pretty_print(p)) == p` holds for every
//! well-formed program; the printer inserts parentheses exactly where the
//! grammar needs them (left operands of `;` and `*`, right operands of
//! `+`/`-`).

use super::ast::*;
use std::fmt;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::IntLit(n) => write!(f, "{n}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Add(a, b) => {
                write!(f, "{a} + ")?;
                write_expr_operand(f, b)
            }
            Expr::Sub(a, b) => {
                write!(f, "{a} - ")?;
                write_expr_operand(f, b)
            }
        }
    }
}

fn write_expr_operand(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    if matches!(e, Expr::Add(..) | Expr::Sub(..)) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Eq(a, b) => write!(f, "{a} = {b}"),
            BoolExpr::Lt(a, b) => write!(f, "{a} < {b}"),
            BoolExpr::Not(inner) => match inner.as_ref() {
                BoolExpr::Not(_) => write!(f, "!{inner}"),
                _ => write!(f, "!({inner})"),
            },
        }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::Bool(b) => write!(f, "{b}"),
            Assertion::Pred {
                name,
                args,
                patterns,
            } => match name {
                PredName::PointsTo if args.len() == 1 && patterns.len() == 1 => {
                    write!(f, "{} |-> ?{}", args[0], patterns[0])
                }
                PredName::PointsTo if args.len() == 2 && patterns.is_empty() => {
                    write!(f, "{} |-> {}", args[0], write_value(&args[1]))
                }
                _ => {
                    let pname = match name {
                        PredName::PointsTo => "|->",
                        PredName::Mb => "mb",
                        PredName::User(n) => n,
                    };
                    write!(f, "{pname}(")?;
                    let mut first = true;
                    for a in args {
                        if !first {
                            write!(f, ", ")?;
                        }
                        first = false;
                        write!(f, "{a}")?;
                    }
                    for p in patterns {
                        if !first {
                            write!(f, ", ")?;
                        }
                        first = false;
                        write!(f, "?{p}")?;
                    }
                    write!(f, ")")
                }
            },
            Assertion::SepConj(l, r) => {
                if matches!(
                    l.as_ref(),
                    Assertion::SepConj(..) | Assertion::IfThenElse { .. }
                ) {
                    write!(f, "({l}) * {r}")
                } else {
                    write!(f, "{l} * {r}")
                }
            }
            Assertion::IfThenElse {
                cond,
                then_a,
                else_a,
            } => write!(f, "if {cond} then {then_a} else {else_a}"),
        }
    }
}

fn write_value(e: &Expr) -> String {
    e.to_string()
}

/// One-line command rendering; sequences are joined with `; `.
impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Assign(x, e) => write!(f, "{x} := {e}"),
            Command::Seq(a, b) => {
                write_seq_head(f, a)?;
                write!(f, "; {b}")
            }
            Command::If(cond, t, e) => {
                write!(f, "if {cond} then ")?;
                write_branch(f, t)?;
                write!(f, " else ")?;
                write_branch(f, e)
            }
            Command::While {
                cond,
                invariant,
                body,
            } => {
                write!(f, "while {cond} inv {invariant} do ")?;
                write_branch(f, body)
            }
            Command::Call { ret, routine, args } => {
                if let Some(x) = ret {
                    write!(f, "{x} := ")?;
                }
                write!(f, "{routine}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Command::Malloc { target, size } => write!(f, "{target} := malloc({size})"),
            Command::Read { target, addr } => write!(f, "{target} := [{addr}]"),
            Command::Write { addr, value } => write!(f, "[{addr}] := {value}"),
            Command::Free(e) => write!(f, "free({e})"),
            Command::Open {
                pred,
                args,
                wildcards,
            } => {
                write!(f, "open {pred}(")?;
                let mut first = true;
                for a in args {
                    if !first {
                        write!(f, ", ")?;
                    }
                    first = false;
                    write!(f, "{a}")?;
                }
                for _ in 0..*wildcards {
                    if !first {
                        write!(f, ", ")?;
                    }
                    first = false;
                    write!(f, "?_")?;
                }
                write!(f, ")")
            }
            Command::Close { pred, args } => {
                write!(f, "close {pred}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Command::Skip => write!(f, "skip"),
            Command::Message(text) => write!(f, "message \"{text}\""),
        }
    }
}

fn write_seq_head(f: &mut fmt::Formatter<'_>, c: &Command) -> fmt::Result {
    // A nested sequence must regroup explicitly; conditionals and loops keep
    // their parens too so a reader never has to think about `;` precedence.
    if matches!(
        c,
        Command::Seq(..) | Command::If(..) | Command::While { .. }
    ) {
        write!(f, "({c})")
    } else {
        write!(f, "{c}")
    }
}

/// Branches and loop bodies hold a single simple command; a sequence in
/// that position must be parenthesized to reparse as one unit.
fn write_branch(f: &mut fmt::Formatter<'_>, c: &Command) -> fmt::Result {
    if matches!(c, Command::Seq(..)) {
        write!(f, "({c})")
    } else {
        write!(f, "{c}")
    }
}

fn push_command(out: &mut String, c: &Command, indent: usize) {
    let pad = "  ".repeat(indent);
    match c {
        Command::Seq(a, b) => {
            match a.as_ref() {
                Command::Seq(..) | Command::If(..) | Command::While { .. } => {
                    out.push_str(&pad);
                    out.push('(');
                    out.push('\n');
                    push_command(out, a, indent + 1);
                    out.push('\n');
                    out.push_str(&pad);
                    out.push(')');
                }
                _ => {
                    out.push_str(&pad);
                    out.push_str(&a.to_string());
                }
            }
            out.push_str(";\n");
            push_command(out, b, indent);
        }
        Command::If(cond, t, e) => {
            out.push_str(&pad);
            out.push_str(&format!("if {cond} then (\n"));
            push_command(out, t, indent + 1);
            out.push('\n');
            out.push_str(&pad);
            out.push_str(") else (\n");
            push_command(out, e, indent + 1);
            out.push('\n');
            out.push_str(&pad);
            out.push(')');
        }
        Command::While {
            cond,
            invariant,
            body,
        } => {
            out.push_str(&pad);
            out.push_str(&format!("while {cond} inv {invariant} do (\n"));
            push_command(out, body, indent + 1);
            out.push('\n');
            out.push_str(&pad);
            out.push(')');
        }
        other => {
            out.push_str(&pad);
            out.push_str(&other.to_string());
        }
    }
}

/// Renders a whole program in a form that reparses to the same AST.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for pred in &p.predicates {
        out.push_str(&format!(
            "predicate {}({}) =\n  {}\n\n",
            pred.name,
            pred.params.join(", "),
            pred.body
        ));
    }
    for r in &p.routines {
        out.push_str(&format!(
            "routine {}({})\n  req {}\n  ens {}\n=\n",
            r.name,
            r.params.join(", "),
            r.pre,
            r.post
        ));
        push_command(&mut out, &r.body, 1);
        out.push_str("\n\n");
    }
    push_command(&mut out, &p.main, 0);
    out.push('\n');
    out
}
