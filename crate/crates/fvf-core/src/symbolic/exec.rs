//! The symbolic executor.
//!
//! Commands run against a `SymState`; contracts and predicate bodies are
//! produced (assumed into the state) and consumed (proved and removed).
//! Every step wraps its result in a `Msg` node carrying a one-line rendering
//! of the command and the state after it, so a depth-first walk of the
//! outcome tree is a human-readable trace and failures come with the path
//! that led to them.
//!
//! Branch discipline: conditionals and loop exits split demonically, with
//! the assumed condition checked against the prover first. An assumption
//! contradicting the path condition blocks that branch (⊤); a fact or chunk
//! that cannot be proved or found fails it (⊥).

use std::rc::Rc;

use crate::outcome::{
    demonic2, first_failure, satisfies, seq_fn, single, top, trace_lines, Outcome,
};
use crate::prover::Prover;
use crate::store::Store;
use crate::symbolic::term::{seval, seval_bool, Formula, SymChunk, SymState, Term};
use crate::syntax::{targets, Assertion, Command, PredName, Program, RoutineDef, RESULT_VAR};

/// Everything the executor threads through closures: the program for
/// routine and predicate lookups, and the prover for entailment queries.
#[derive(Clone)]
pub struct SymEnv {
    pub program: Rc<Program>,
    pub prover: Rc<Prover>,
}

impl SymEnv {
    pub fn new(program: Rc<Program>, prover: Rc<Prover>) -> SymEnv {
        SymEnv { program, prover }
    }

    fn entails(&self, st: &SymState, f: &Formula) -> bool {
        self.prover.entails(st.pc.formulas(), f)
    }
}

pub type SymOut = Outcome<SymState, ()>;

/// Successful step: a message node over a singleton.
fn step(st: SymState, label: impl Into<String>) -> SymOut {
    debug_assert!(
        st.well_formed(),
        "symbolic state mentions unregistered symbols"
    );
    let text = format!("{} | {}", label.into(), st.render());
    Outcome::Msg(text, Box::new(single(st, ())))
}

/// Infeasible path: annotated block.
fn blocked(st: &SymState, label: impl Into<String>) -> SymOut {
    Outcome::Msg(
        format!("{} | {}", label.into(), st.render()),
        Box::new(top()),
    )
}

/// Verification failure: annotated ⊥.
fn failed(st: &SymState, label: impl Into<String>) -> SymOut {
    Outcome::Msg(
        format!("{} | {}", label.into(), st.render()),
        Box::new(crate::outcome::bot()),
    )
}

/// Assume a fact. If the prover shows it contradicts the path condition the
/// path blocks; if the fact is already a consequence the condition is left
/// unchanged; otherwise the fact joins the path condition.
pub fn sassume(env: &SymEnv, mut st: SymState, f: Formula) -> SymOut {
    let shown = st.render_formula(&f);
    if env.entails(&st, &Formula::not(f.clone())) {
        return blocked(&st, format!("assume {shown}: contradicts path, pruned"));
    }
    if env.entails(&st, &f) {
        return step(st, format!("assume {shown}: already implied"));
    }
    st.pc.insert(f);
    step(st, format!("assume {shown}"))
}

/// Assert a fact: it must follow from the path condition.
fn sassert(env: &SymEnv, st: SymState, f: Formula) -> SymOut {
    let shown = st.render_formula(&f);
    if env.entails(&st, &f) {
        step(st, format!("assert {shown}"))
    } else {
        failed(&st, format!("assert {shown}: cannot prove"))
    }
}

/// Remove the least chunk whose predicate matches and whose first
/// `fixed.len()` arguments are provably equal to `fixed`; answer the
/// remaining `n_unfixed` arguments. Candidates are scanned in canonical
/// argument order so the choice is deterministic.
fn sconsume_chunk(
    env: &SymEnv,
    mut st: SymState,
    pred: PredName,
    fixed: Vec<Term>,
    n_unfixed: usize,
) -> Outcome<SymState, Vec<Term>> {
    let mut candidates: Vec<usize> = (0..st.heap.len())
        .filter(|&i| st.heap[i].pred == pred && st.heap[i].args.len() == fixed.len() + n_unfixed)
        .collect();
    candidates.sort_by(|&a, &b| st.heap[a].args.cmp(&st.heap[b].args));
    for i in candidates {
        let matches = fixed.iter().zip(&st.heap[i].args).all(|(want, have)| {
            want == have || env.entails(&st, &Formula::Eq(want.clone(), have.clone()))
        });
        if matches {
            let chunk = st.heap.remove(i);
            let suffix = chunk.args[fixed.len()..].to_vec();
            let label = format!("consume {}", st.render_chunk(&chunk));
            debug_assert!(st.well_formed());
            return Outcome::Msg(
                format!("{label} | {}", st.render()),
                Box::new(single(st, suffix)),
            );
        }
    }
    let wanted = SymChunk { pred, args: fixed };
    let mut shown = st.render_chunk(&wanted);
    if n_unfixed > 0 {
        shown = format!("{shown} (with {n_unfixed} open argument(s))");
    }
    Outcome::Msg(
        format!("consume {shown}: no matching chunk | {}", st.render()),
        Box::new(crate::outcome::bot()),
    )
}

/// Assume an assertion into the state: facts join the path condition,
/// chunks join the heap, patterns bind fresh symbols, conditionals split.
pub fn sproduce(env: &SymEnv, a: &Assertion, st: SymState) -> SymOut {
    match a {
        Assertion::Bool(b) => {
            let f = seval_bool(&st.store, b);
            sassume(env, st, f)
        }
        Assertion::Pred {
            name,
            args,
            patterns,
        } => {
            let mut st = st;
            let mut terms: Vec<Term> = args.iter().map(|e| seval(&st.store, e)).collect();
            for p in patterns {
                let s = st.fresh(p);
                st.store.set(p, s.clone());
                terms.push(s);
            }
            let chunk = SymChunk {
                pred: name.clone(),
                args: terms,
            };
            let label = format!("produce {}", st.render_chunk(&chunk));
            st.heap.push(chunk);
            step(st, label)
        }
        Assertion::SepConj(l, r) => {
            let env2 = env.clone();
            let r2 = (**r).clone();
            seq_fn(sproduce(env, l, st), move |st, ()| sproduce(&env2, &r2, st))
        }
        Assertion::IfThenElse {
            cond,
            then_a,
            else_a,
        } => {
            let f = seval_bool(&st.store, cond);
            let arm = |branch: &Assertion, cond: Formula, st: SymState| {
                let env2 = env.clone();
                let branch2 = branch.clone();
                seq_fn(sassume(env, st, cond), move |st, ()| {
                    sproduce(&env2, &branch2, st)
                })
            };
            demonic2(
                arm(then_a, f.clone(), st.clone()),
                arm(else_a, Formula::not(f), st),
            )
        }
    }
}

/// Check an assertion against the state and remove what it claims: facts
/// are proved, chunks are matched and removed, patterns bind the matched
/// chunk's arguments, conditionals split.
pub fn sconsume(env: &SymEnv, a: &Assertion, st: SymState) -> SymOut {
    match a {
        Assertion::Bool(b) => {
            let f = seval_bool(&st.store, b);
            sassert(env, st, f)
        }
        Assertion::Pred {
            name,
            args,
            patterns,
        } => {
            let fixed: Vec<Term> = args.iter().map(|e| seval(&st.store, e)).collect();
            let patterns2 = patterns.clone();
            seq_fn(
                sconsume_chunk(env, st, name.clone(), fixed, patterns.len()),
                move |mut st, suffix: Vec<Term>| {
                    for (p, t) in patterns2.iter().zip(suffix) {
                        st.store.set(p, t);
                    }
                    single(st, ())
                },
            )
        }
        Assertion::SepConj(l, r) => {
            let env2 = env.clone();
            let r2 = (**r).clone();
            seq_fn(sconsume(env, l, st), move |st, ()| sconsume(&env2, &r2, st))
        }
        Assertion::IfThenElse {
            cond,
            then_a,
            else_a,
        } => {
            let f = seval_bool(&st.store, cond);
            let arm = |branch: &Assertion, cond: Formula, st: SymState| {
                let env2 = env.clone();
                let branch2 = branch.clone();
                seq_fn(sassume(env, st, cond), move |st, ()| {
                    sconsume(&env2, &branch2, st)
                })
            };
            demonic2(
                arm(then_a, f.clone(), st.clone()),
                arm(else_a, Formula::not(f), st),
            )
        }
    }
}

/// Run a continuation after `build`, restoring the store the state had
/// before `build` ran.
fn with_store_restored(build: impl FnOnce(SymState) -> SymOut, st: SymState) -> SymOut {
    let saved = st.store.clone();
    seq_fn(build(st), move |mut st, ()| {
        st.store = saved.clone();
        single(st, ())
    })
}

/// Succeeds into ⊤: a leak-free end of a verification branch is final, so
/// nothing sequenced after it (such as the code following a loop) runs.
fn leak_check(st: SymState) -> SymOut {
    if st.heap.is_empty() {
        blocked(&st, "leak check: heap empty")
    } else {
        let chunks: Vec<String> = st.heap.iter().map(|c| st.render_chunk(c)).collect();
        failed(
            &st,
            format!("leak check failed: {} left behind", chunks.join(", ")),
        )
    }
}

/// Symbolically execute one command.
pub fn symexec(env: &SymEnv, c: &Command, st: SymState) -> SymOut {
    match c {
        Command::Skip => step(st, "skip"),
        Command::Message(m) => step(st, format!("message \"{m}\"")),
        Command::Assign(x, e) => {
            let t = seval(&st.store, e);
            let mut st = st;
            st.store.set(x, t);
            step(st, format!("{c}"))
        }
        Command::Seq(a, b) => {
            let env2 = env.clone();
            let b2 = (**b).clone();
            seq_fn(symexec(env, a, st), move |st, ()| symexec(&env2, &b2, st))
        }
        Command::If(b, then_c, else_c) => {
            let f = seval_bool(&st.store, b);
            let arm = |cmd: &Command, cond: Formula, st: SymState| {
                let env2 = env.clone();
                let cmd2 = cmd.clone();
                seq_fn(sassume(env, st, cond), move |st, ()| {
                    symexec(&env2, &cmd2, st)
                })
            };
            demonic2(
                arm(then_c, f.clone(), st.clone()),
                arm(else_c, Formula::not(f), st),
            )
        }
        Command::While {
            cond,
            invariant,
            body,
        } => symexec_while(env, cond, invariant, body, st),
        Command::Call { ret, routine, args } => {
            let r = env
                .program
                .routine(routine)
                .expect("well-formedness guarantees the routine exists")
                .clone();
            let cmd_line = format!("{c}");
            let argv: Vec<Term> = args.iter().map(|e| seval(&st.store, e)).collect();
            let caller_store = st.store.clone();
            let mut st = st;
            st.store = Store::from_pairs(r.params.iter().cloned().zip(argv));
            let o = step(st, format!("call {routine}: switch to callee frame"));
            let env2 = env.clone();
            let pre = r.pre.clone();
            let o = seq_fn(o, move |st, ()| sconsume(&env2, &pre, st));
            let env3 = env.clone();
            let post = r.post.clone();
            let ret2 = ret.clone();
            let o = seq_fn(o, move |mut st, ()| {
                if ret2.is_some() || post.mentions_var(RESULT_VAR) {
                    let hint = ret2.as_deref().unwrap_or(RESULT_VAR);
                    let s = st.fresh(hint);
                    st.store.set(RESULT_VAR, s);
                }
                sproduce(&env3, &post, st)
            });
            let ret3 = ret.clone();
            seq_fn(o, move |mut st, ()| {
                let rv = st.store.get(RESULT_VAR);
                st.store = caller_store.clone();
                if let Some(x) = &ret3 {
                    st.store.set(x, rv);
                }
                step(st, cmd_line.clone())
            })
        }
        Command::Malloc { target, size } => {
            let cmd_line = format!("{c}");
            let mut st = st;
            let addr = st.fresh(target);
            let cells: Vec<Term> = (0..*size).map(|_| st.fresh("v")).collect();
            let o = sassume(env, st, Formula::Lt(Term::Lit(0), addr.clone()));
            let target2 = target.clone();
            let size2 = *size;
            seq_fn(o, move |mut st, ()| {
                st.heap.push(SymChunk {
                    pred: PredName::Mb,
                    args: vec![addr.clone(), Term::Lit(i64::from(size2))],
                });
                for (i, v) in cells.iter().enumerate() {
                    st.heap.push(SymChunk::points_to(
                        addr.clone().offset(i as i64),
                        v.clone(),
                    ));
                }
                st.store.set(&target2, addr.clone());
                step(st, cmd_line.clone())
            })
        }
        Command::Read { target, addr } => {
            let cmd_line = format!("{c}");
            let l = seval(&st.store, addr);
            let l2 = l.clone();
            let target2 = target.clone();
            seq_fn(
                sconsume_chunk(env, st, PredName::PointsTo, vec![l], 1),
                move |mut st, suffix: Vec<Term>| {
                    let v = suffix.into_iter().next().expect("one open argument");
                    st.heap.push(SymChunk::points_to(l2.clone(), v.clone()));
                    st.store.set(&target2, v);
                    step(st, cmd_line.clone())
                },
            )
        }
        Command::Write { addr, value } => {
            let cmd_line = format!("{c}");
            let l = seval(&st.store, addr);
            let v = seval(&st.store, value);
            let l2 = l.clone();
            seq_fn(
                sconsume_chunk(env, st, PredName::PointsTo, vec![l], 1),
                move |mut st, _old: Vec<Term>| {
                    st.heap.push(SymChunk::points_to(l2.clone(), v.clone()));
                    step(st, cmd_line.clone())
                },
            )
        }
        Command::Free(e) => {
            let cmd_line = format!("{c}");
            let l = seval(&st.store, e);
            let l2 = l.clone();
            let env2 = env.clone();
            seq_fn(
                sconsume_chunk(env, st, PredName::Mb, vec![l], 1),
                move |st, suffix: Vec<Term>| {
                    let size = suffix.into_iter().next().expect("one open argument");
                    let n = match size {
                        Term::Lit(n) if n >= 0 => n,
                        other => {
                            let shown = st.render_term(&other);
                            return failed(
                                &st,
                                format!("free: block size {shown} is not a literal"),
                            );
                        }
                    };
                    let mut o = single(st, ());
                    for i in 0..n {
                        let cell = l2.clone().offset(i);
                        let env3 = env2.clone();
                        o = seq_fn(o, move |st, ()| {
                            seq_fn(
                                sconsume_chunk(
                                    &env3,
                                    st,
                                    PredName::PointsTo,
                                    vec![cell.clone()],
                                    1,
                                ),
                                |st, _: Vec<Term>| single(st, ()),
                            )
                        });
                    }
                    let cmd_line = cmd_line.clone();
                    seq_fn(o, move |st, ()| step(st, cmd_line.clone()))
                },
            )
        }
        Command::Open {
            pred,
            args,
            wildcards,
        } => {
            let cmd_line = format!("{c}");
            let pdef = env
                .program
                .predicate(pred)
                .expect("well-formedness guarantees the predicate exists")
                .clone();
            let argv: Vec<Term> = args.iter().map(|e| seval(&st.store, e)).collect();
            let env2 = env.clone();
            let argv2 = argv.clone();
            seq_fn(
                sconsume_chunk(
                    env,
                    st,
                    PredName::User(pred.clone()),
                    argv,
                    *wildcards as usize,
                ),
                move |mut st, suffix: Vec<Term>| {
                    let saved = st.store.clone();
                    let full = argv2.iter().cloned().chain(suffix);
                    st.store = Store::from_pairs(pdef.params.iter().cloned().zip(full));
                    let o = sproduce(&env2, &pdef.body, st);
                    let cmd_line = cmd_line.clone();
                    seq_fn(o, move |mut st, ()| {
                        st.store = saved.clone();
                        step(st, cmd_line.clone())
                    })
                },
            )
        }
        Command::Close { pred, args } => {
            let cmd_line = format!("{c}");
            let pdef = env
                .program
                .predicate(pred)
                .expect("well-formedness guarantees the predicate exists")
                .clone();
            let argv: Vec<Term> = args.iter().map(|e| seval(&st.store, e)).collect();
            let saved = st.store.clone();
            let mut st = st;
            st.store = Store::from_pairs(pdef.params.iter().cloned().zip(argv.iter().cloned()));
            let o = sconsume(env, &pdef.body, st);
            let pred2 = pred.clone();
            seq_fn(o, move |mut st, ()| {
                st.store = saved.clone();
                st.heap.push(SymChunk {
                    pred: PredName::User(pred2.clone()),
                    args: argv.clone(),
                });
                step(st, cmd_line.clone())
            })
        }
    }
}

/// The while rule: consume the invariant, havoc the loop targets, then
/// split demonically between verifying one iteration in isolation (just the
/// invariant's chunks, nothing may leak) and continuing past the loop with
/// the invariant restored.
fn symexec_while(
    env: &SymEnv,
    cond: &crate::syntax::BoolExpr,
    invariant: &Assertion,
    body: &Command,
    st: SymState,
) -> SymOut {
    let inv = invariant.clone();
    let env2 = env.clone();
    let o = with_store_restored(|st| sconsume(env, invariant, st), st);
    let cond2 = cond.clone();
    let body2 = body.clone();
    seq_fn(o, move |mut st, ()| {
        let tgts = targets(&body2);
        for x in &tgts {
            let s = st.fresh(x);
            st.store.set(x, s);
        }
        let names: Vec<&str> = tgts.iter().map(|s| s.as_str()).collect();
        let o = step(st, format!("havoc {}", names.join(", ")));
        let env3 = env2.clone();
        let inv2 = inv.clone();
        let cond3 = cond2.clone();
        let body3 = body2.clone();
        seq_fn(o, move |st, ()| {
            let f = seval_bool(&st.store, &cond3);

            let iter_arm = {
                let mut st = st.clone();
                st.heap.clear();
                let env4 = env3.clone();
                let inv3 = inv2.clone();
                let o = step(st, "enter loop body: frame set aside");
                let o = seq_fn(o, move |st, ()| {
                    with_store_restored(|st| sproduce(&env4, &inv3, st), st)
                });
                let env5 = env3.clone();
                let f2 = f.clone();
                let o = seq_fn(o, move |st, ()| sassume(&env5, st, f2.clone()));
                let env6 = env3.clone();
                let body4 = body3.clone();
                let o = seq_fn(o, move |st, ()| symexec(&env6, &body4, st));
                let env7 = env3.clone();
                let inv4 = inv2.clone();
                let o = seq_fn(o, move |st, ()| {
                    with_store_restored(|st| sconsume(&env7, &inv4, st), st)
                });
                seq_fn(o, |st, ()| leak_check(st))
            };

            let exit_arm = {
                let env4 = env3.clone();
                let inv3 = inv2.clone();
                let o = with_store_restored(move |st| sproduce(&env4, &inv3, st), st);
                let env5 = env3.clone();
                let notf = Formula::not(f.clone());
                seq_fn(o, move |st, ()| sassume(&env5, st, notf.clone()))
            };

            demonic2(iter_arm, exit_arm)
        })
    })
}

/// The verdict for one routine (or for `main`).
#[derive(Debug, Clone)]
pub struct RoutineVerdict {
    pub name: String,
    pub valid: bool,
    /// Depth-first message trace of the whole outcome tree.
    pub trace: Vec<String>,
    /// Message path to the first failing leaf, when invalid.
    pub failure: Option<Vec<String>>,
}

fn conclude(name: &str, tree: SymOut) -> RoutineVerdict {
    debug_assert!(tree.is_finitary(), "verification trees are finitary");
    let valid = satisfies(&tree, &mut |_, _| true).unwrap_or(false);
    RoutineVerdict {
        name: name.to_string(),
        valid,
        trace: trace_lines(&tree),
        failure: first_failure(&tree),
    }
}

/// Verify one routine body against its contract: produce the precondition,
/// run the body from a clean frame, consume the postcondition under the
/// contract's store with `result` bound, and require an empty heap.
pub fn svalid_routine(env: &SymEnv, r: &RoutineDef) -> RoutineVerdict {
    let mut st = SymState::new();
    for p in &r.params {
        let s = st.fresh(p);
        st.store.set(p, s);
    }
    let o = step(st, format!("routine {}({})", r.name, r.params.join(", ")));
    let env2 = env.clone();
    let pre = r.pre.clone();
    let o = seq_fn(o, move |st, ()| sproduce(&env2, &pre, st));
    let env3 = env.clone();
    let params = r.params.clone();
    let body = r.body.clone();
    let o = seq_fn(o, move |mut st, ()| {
        // The contract's frame (including pattern bindings) is restored for
        // the postcondition; the body starts from parameters only.
        let contract_store = st.store.clone();
        st.store = Store::from_pairs(params.iter().map(|p| (p.clone(), contract_store.get(p))));
        let o = symexec(&env3, &body, st);
        seq_fn(o, move |mut st, ()| {
            let rv = st.store.get(RESULT_VAR);
            st.store = contract_store.clone();
            st.store.set(RESULT_VAR, rv);
            single(st, ())
        })
    });
    let env5 = env.clone();
    let post = r.post.clone();
    let o = seq_fn(o, move |st, ()| sconsume(&env5, &post, st));
    let o = seq_fn(o, |st, ()| leak_check(st));
    conclude(&r.name, o)
}

/// Verdict for a whole program: every routine against its contract, plus
/// `main` from the empty state (which must also end with an empty heap).
#[derive(Debug, Clone)]
pub struct Verdict {
    pub routines: Vec<RoutineVerdict>,
    pub main: RoutineVerdict,
}

impl Verdict {
    pub fn valid(&self) -> bool {
        self.main.valid && self.routines.iter().all(|r| r.valid)
    }

    /// All verdicts in report order: routines first, then `main`.
    pub fn all(&self) -> impl Iterator<Item = &RoutineVerdict> {
        self.routines.iter().chain(std::iter::once(&self.main))
    }
}

pub fn svalid_program(program: &Rc<Program>, prover: Rc<Prover>) -> Verdict {
    let env = SymEnv::new(program.clone(), prover);
    let routines = program
        .routines
        .iter()
        .map(|r| svalid_routine(&env, r))
        .collect();
    let st = SymState::new();
    let o = step(st, "main");
    let env2 = env.clone();
    let main_cmd = program.main.clone();
    let o = seq_fn(o, move |st, ()| symexec(&env2, &main_cmd, st));
    let o = seq_fn(o, |st, ()| leak_check(st));
    Verdict {
        routines,
        main: conclude("main", o),
    }
}
