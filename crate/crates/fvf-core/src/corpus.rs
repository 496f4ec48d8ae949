//! The bundled program corpus and the differential soundness harness.
//!
//! Corpus files live in `corpus/` at the repository root. Each file opens
//! with a `// key: value` header block stating its expected verification
//! verdict and any scripted run expectations; [`check_entry`] re-checks
//! those expectations, so the corpus cannot drift from the tools.
//!
//! The harness side connects the verifier to the concrete interpreter:
//! [`differential_soundness`] runs a symbolically verified program many
//! times with random choice scripts after erasing all annotations, and
//! reports any concrete failure, which would witness a soundness bug,
//! together with the exact script that reproduces it.

use std::fs;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use crate::choices::{DrawKind, ValueSource};
use crate::concrete::{self, CChunk, CState, RunOutcome};
use crate::prover::Prover;
use crate::semiconcrete::ScStop;
use crate::store::Store;
use crate::symbolic::svalid_program;
use crate::syntax::{
    parse_program, Assertion, BoolExpr, Command, Expr, ParseError, PredName, Program, RoutineDef,
};

/// How a scripted run is expected to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Ok,
    Fail,
    Block,
}

#[derive(Debug, Clone)]
pub struct RunExpectation {
    pub depth: u32,
    pub script: Vec<i64>,
    pub expect: RunKind,
}

/// One bundled program plus its machine-checked expectations.
pub struct CorpusEntry {
    pub name: String,
    pub path: PathBuf,
    pub source: String,
    pub program: Program,
    /// Whether `verify` is expected to succeed.
    pub expect_verify: bool,
    /// For failing entries, a substring the failure trace must contain;
    /// this is the documented failing step.
    pub fail_at: Option<String>,
    pub runs: Vec<RunExpectation>,
    pub notes: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {err}")]
    Io {
        path: String,
        #[source]
        err: std::io::Error,
    },
    #[error("{path}: {err}")]
    Parse {
        path: String,
        #[source]
        err: ParseError,
    },
    #[error("{path}: bad header line '{line}'")]
    Header { path: String, line: String },
}

/// The `corpus/` directory at the repository root.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("..")
        .join("..")
        .join("corpus")
}

/// Loads every `.fvf` file in the corpus directory, sorted by name.
pub fn corpus() -> Result<Vec<CorpusEntry>, CorpusError> {
    let dir = corpus_dir();
    let entries = fs::read_dir(&dir).map_err(|err| CorpusError::Io {
        path: dir.display().to_string(),
        err,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "fvf"))
        .collect();
    paths.sort();
    paths.into_iter().map(|p| load_entry(&p)).collect()
}

/// Loads one corpus file and parses its expectation header.
pub fn load_entry(path: &Path) -> Result<CorpusEntry, CorpusError> {
    let shown = path.display().to_string();
    let source = fs::read_to_string(path).map_err(|err| CorpusError::Io {
        path: shown.clone(),
        err,
    })?;
    let mut expect_verify = true;
    let mut fail_at = None;
    let mut runs = Vec::new();
    let mut notes = Vec::new();
    let bad = |line: &str| CorpusError::Header {
        path: shown.clone(),
        line: line.to_string(),
    };
    for line in source.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(rest) = line.strip_prefix("//") else {
            break;
        };
        let Some((key, value)) = rest.split_once(':') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "verify" => match value {
                "pass" => expect_verify = true,
                "fail" => expect_verify = false,
                _ => return Err(bad(line)),
            },
            "fail-at" => fail_at = Some(value.to_string()),
            "run" => runs.push(parse_run_expectation(value).ok_or_else(|| bad(line))?),
            "note" => notes.push(value.to_string()),
            _ => return Err(bad(line)),
        }
    }
    let program = parse_program(&source).map_err(|err| CorpusError::Parse { path: shown, err })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(CorpusEntry {
        name,
        path: path.to_path_buf(),
        source,
        program,
        expect_verify,
        fail_at,
        runs,
        notes,
    })
}

/// `depth=N choices=a,b,... expect=ok|fail|blocked`; choices may be absent.
fn parse_run_expectation(value: &str) -> Option<RunExpectation> {
    let mut depth = None;
    let mut script = Vec::new();
    let mut expect = None;
    for token in value.split_whitespace() {
        let (k, v) = token.split_once('=')?;
        match k {
            "depth" => depth = Some(v.parse().ok()?),
            "choices" => {
                let mut src = ValueSource::script_csv(v).ok()?;
                while let Some(x) = src.draw(DrawKind::Value) {
                    script.push(x);
                }
            }
            "expect" => {
                expect = Some(match v {
                    "ok" => RunKind::Ok,
                    "fail" => RunKind::Fail,
                    "blocked" => RunKind::Block,
                    _ => return None,
                })
            }
            _ => return None,
        }
    }
    Some(RunExpectation {
        depth: depth?,
        script,
        expect: expect?,
    })
}

fn trivial() -> Assertion {
    Assertion::Bool(BoolExpr::Eq(Expr::IntLit(0), Expr::IntLit(0)))
}

fn erase_command(c: &Command) -> Command {
    match c {
        Command::Seq(a, b) => Command::seq(erase_command(a), erase_command(b)),
        Command::If(cond, t, e) => Command::If(
            cond.clone(),
            Box::new(erase_command(t)),
            Box::new(erase_command(e)),
        ),
        Command::While { cond, body, .. } => Command::While {
            cond: cond.clone(),
            invariant: trivial(),
            body: Box::new(erase_command(body)),
        },
        Command::Open { .. } | Command::Close { .. } => Command::Skip,
        other => other.clone(),
    }
}

/// Strips every annotation: contracts and invariants become `0 = 0`,
/// `open`/`close` become `skip`, predicate definitions are dropped. The
/// result is the executable skeleton the concrete interpreter sees.
pub fn erase_annotations(p: &Program) -> Program {
    Program {
        predicates: Vec::new(),
        routines: p
            .routines
            .iter()
            .map(|r| RoutineDef {
                name: r.name.clone(),
                params: r.params.clone(),
                pre: trivial(),
                post: trivial(),
                body: erase_command(&r.body),
            })
            .collect(),
        main: erase_command(&p.main),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SoundnessError {
    #[error("program does not verify ({0} fails); refusing to fuzz an unverified program")]
    NotVerified(String),
    #[error("unknown routine {0}")]
    UnknownRoutine(String),
}

/// A concrete failure observed on a verified program: a soundness bug.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub trial: u32,
    /// Every value drawn during the trial; replaying it as a choice
    /// script reproduces the identical run.
    pub script: Vec<i64>,
    pub message: String,
}

impl TrialFailure {
    /// The script as a `--choices` argument.
    pub fn choices_csv(&self) -> String {
        self.script
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone)]
pub struct SoundnessReport {
    pub trials: u32,
    pub completed: u32,
    pub blocked: u32,
    pub failures: Vec<TrialFailure>,
}

impl SoundnessReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn require_verified(program: &Program) -> Result<(), SoundnessError> {
    let verdict = svalid_program(&Rc::new(program.clone()), Rc::new(Prover::new()));
    if verdict.valid() {
        Ok(())
    } else {
        let who = verdict
            .all()
            .find(|r| !r.valid)
            .map(|r| r.name.clone())
            .unwrap_or_default();
        Err(SoundnessError::NotVerified(who))
    }
}

/// Runs `trials` seeded concrete executions of the annotation-erased
/// program. The program must verify first; the whole point is that a
/// verified program's erased runs can block but never fail. Trial `t`
/// draws from stream `t` of `seed`, so reports are reproducible and any
/// failure carries its full replay script.
pub fn differential_soundness(
    program: &Program,
    trials: u32,
    depth: u32,
    seed: u64,
) -> Result<SoundnessReport, SoundnessError> {
    require_verified(program)?;
    let erased = erase_annotations(program);
    let mut report = SoundnessReport {
        trials,
        completed: 0,
        blocked: 0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let mut src = ValueSource::random(seed, u64::from(trial));
        let run = concrete::run(&erased, depth, &mut src);
        match run.outcome {
            RunOutcome::Completed(_) => report.completed += 1,
            RunOutcome::Blocked(_) => report.blocked += 1,
            RunOutcome::Failed(message) => report.failures.push(TrialFailure {
                trial,
                script: src.drawn().to_vec(),
                message,
            }),
        }
    }
    Ok(report)
}

/// Caps on precondition unfolding. Drawn values are forced to 0 once the
/// draw budget is spent, which bottoms out self-referential predicates
/// like a list; the depth cap is a hard stop for predicates that recurse
/// on fixed arguments.
const UNFOLD_DRAWS: u32 = 24;
const UNFOLD_DEPTH: u32 = 64;

fn draw_or_zero(src: &mut ValueSource, budget: &mut u32) -> Result<i64, ScStop> {
    if *budget == 0 {
        return Ok(0);
    }
    *budget -= 1;
    src.draw(DrawKind::Value)
        .ok_or_else(|| ScStop::Blocked("choice source exhausted".to_string()))
}

/// Produces an assertion into a ground state for the concrete
/// interpreter: built-in chunks are added directly, user-defined chunks
/// are unfolded into their bodies, facts are assumed, guards choose
/// branches. Pattern bindings stay in the store, as in production.
fn produce_ground(
    prog: &Program,
    a: &Assertion,
    mut st: CState,
    src: &mut ValueSource,
    budget: &mut u32,
    depth: u32,
) -> Result<CState, ScStop> {
    if depth == 0 {
        return Err(ScStop::Blocked("unfolding depth cap reached".to_string()));
    }
    match a {
        Assertion::Bool(b) => {
            if concrete::eval_bool(&st.store, b) {
                Ok(st)
            } else {
                Err(ScStop::Blocked(format!("assume {b}: false, path pruned")))
            }
        }
        Assertion::Pred {
            name,
            args,
            patterns,
        } => {
            let mut vals: Vec<i64> = args.iter().map(|e| concrete::eval(&st.store, e)).collect();
            for p in patterns {
                let v = draw_or_zero(src, budget)?;
                st.store.set(p, v);
                vals.push(v);
            }
            match name {
                PredName::User(p) => {
                    let def = prog
                        .predicate(p)
                        .unwrap_or_else(|| panic!("unknown predicate {p}"));
                    let saved = st.store.clone();
                    st.store = Store::from_pairs(def.params.iter().cloned().zip(vals));
                    let mut st = produce_ground(prog, &def.body, st, src, budget, depth - 1)?;
                    st.store = saved;
                    Ok(st)
                }
                _ => {
                    // Mirror concrete production: a chunk whose name and
                    // address are already taken cannot occur in any
                    // reachable concrete heap, so the sample is vacuous.
                    let addr = vals.first().copied().unwrap_or(0);
                    if concrete::find_chunk(&st.heap, name, addr).is_some() {
                        return Err(ScStop::Blocked(format!(
                            "unfolded chunk at {addr} clashes with an existing one"
                        )));
                    }
                    st.heap.push(CChunk {
                        pred: name.clone(),
                        args: vals,
                    });
                    Ok(st)
                }
            }
        }
        Assertion::SepConj(l, r) => {
            let st = produce_ground(prog, l, st, src, budget, depth)?;
            produce_ground(prog, r, st, src, budget, depth)
        }
        Assertion::IfThenElse {
            cond,
            then_a,
            else_a,
        } => {
            if concrete::eval_bool(&st.store, cond) {
                produce_ground(prog, then_a, st, src, budget, depth)
            } else {
                produce_ground(prog, else_a, st, src, budget, depth)
            }
        }
    }
}

/// Samples one routine: draw parameter values, produce the precondition
/// into a ground heap (user chunks unfolded), then run the erased body
/// concretely from the parameters-only store. A verified routine's body
/// may block but must never fail from such a state.
pub fn routine_soundness_sample(
    program: &Program,
    routine: &str,
    trials: u32,
    depth: u32,
    seed: u64,
) -> Result<SoundnessReport, SoundnessError> {
    require_verified(program)?;
    let def = program
        .routine(routine)
        .ok_or_else(|| SoundnessError::UnknownRoutine(routine.to_string()))?;
    let erased = erase_annotations(program);
    let erased_body = erase_command(&def.body);
    let mut report = SoundnessReport {
        trials,
        completed: 0,
        blocked: 0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let mut src = ValueSource::random(seed, u64::from(trial));
        let mut params = Store::new();
        let mut exhausted = false;
        for p in &def.params {
            match src.draw(DrawKind::Value) {
                Some(v) => params.set(p, v),
                None => exhausted = true,
            }
        }
        if exhausted {
            report.blocked += 1;
            continue;
        }
        let st = CState {
            store: params.clone(),
            heap: Vec::new(),
        };
        let mut budget = UNFOLD_DRAWS;
        let mut st =
            match produce_ground(program, &def.pre, st, &mut src, &mut budget, UNFOLD_DEPTH) {
                Ok(st) => st,
                Err(_) => {
                    report.blocked += 1;
                    continue;
                }
            };
        st.store = params;
        let run = concrete::run_from(&erased, &erased_body, st, depth, &mut src);
        match run.outcome {
            RunOutcome::Completed(_) => report.completed += 1,
            RunOutcome::Blocked(_) => report.blocked += 1,
            RunOutcome::Failed(message) => report.failures.push(TrialFailure {
                trial,
                script: src.drawn().to_vec(),
                message,
            }),
        }
    }
    Ok(report)
}

/// Re-checks one corpus entry's header expectations: the verification
/// verdict (and, for failures, the documented failing step) plus every
/// scripted run. Returns a description of the first mismatch.
pub fn check_entry(entry: &CorpusEntry) -> Result<(), String> {
    let verdict = svalid_program(&Rc::new(entry.program.clone()), Rc::new(Prover::new()));
    if verdict.valid() != entry.expect_verify {
        return Err(format!(
            "{}: expected verify={}, got {}",
            entry.name,
            if entry.expect_verify { "pass" } else { "fail" },
            if verdict.valid() { "pass" } else { "fail" }
        ));
    }
    if let Some(needle) = &entry.fail_at {
        let text: String = verdict
            .all()
            .filter_map(|r| r.failure.as_ref())
            .flat_map(|lines| lines.iter())
            .cloned()
            .collect::<Vec<_>>()
            .join("\n");
        if !text.contains(needle.as_str()) {
            return Err(format!(
                "{}: failure trace does not mention '{needle}':\n{text}",
                entry.name
            ));
        }
    }
    for (i, r) in entry.runs.iter().enumerate() {
        let mut src = ValueSource::from_values(r.script.iter().copied());
        let report = concrete::run(&entry.program, r.depth, &mut src);
        let got = match &report.outcome {
            RunOutcome::Completed(_) => RunKind::Ok,
            RunOutcome::Failed(_) => RunKind::Fail,
            RunOutcome::Blocked(_) => RunKind::Block,
        };
        if got != r.expect {
            return Err(format!(
                "{} run #{i} (depth {}, script {:?}): expected {:?}, got {:?}",
                entry.name, r.depth, r.script, r.expect, report.outcome
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erasure_keeps_the_executable_skeleton() {
        let src = "
predicate box(l) = l |-> ?v

routine fill(l)
  req box(l)
  ens box(l)
=
  open box(l);
  [l] := 7;
  i := 0;
  while i < 1 inv 0 = 0 do i := i + 1;
  close box(l)

skip
";
        let prog = parse_program(src).unwrap();
        let erased = erase_annotations(&prog);
        assert!(erased.predicates.is_empty());
        let r = &erased.routines[0];
        assert_eq!(r.pre, trivial());
        assert_eq!(r.post, trivial());
        let shown = crate::syntax::pretty_print(&erased);
        assert!(!shown.contains("open"), "{shown}");
        assert!(!shown.contains("close"), "{shown}");
        // The erased text must itself be a well-formed program.
        parse_program(&shown).unwrap();
    }

    #[test]
    fn erased_and_annotated_runs_agree() {
        let src = "
pair := malloc(2); [pair] := 0; free(pair)
";
        let prog = parse_program(src).unwrap();
        let erased = erase_annotations(&prog);
        let script = [100, 42, 24];
        let mut a = ValueSource::from_values(script);
        let mut b = ValueSource::from_values(script);
        let x = concrete::run(&prog, 8, &mut a);
        let y = concrete::run(&erased, 8, &mut b);
        match (x.outcome, y.outcome) {
            (RunOutcome::Completed(p), RunOutcome::Completed(q)) => {
                assert!(p.semantic_eq(&q))
            }
            other => panic!("outcomes diverged: {other:?}"),
        }
    }

    #[test]
    fn fuzzing_an_unverified_program_is_refused() {
        let prog = parse_program("x := malloc(1); [42] := 123").unwrap();
        match differential_soundness(&prog, 5, 8, 1) {
            Err(SoundnessError::NotVerified(_)) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn verified_alloc_free_program_survives_trials() {
        let prog = parse_program("pair := malloc(2); [pair] := 0; free(pair)").unwrap();
        let report = differential_soundness(&prog, 25, 16, 7).unwrap();
        assert!(report.ok(), "failures: {:?}", report.failures);
        assert_eq!(report.completed, 25);
    }

    #[test]
    fn trial_failures_replay_identically() {
        // Not a verified program, so drive the trial loop by hand: draw a
        // random run, then replay its logged script and compare outcomes.
        let prog = parse_program("x := malloc(1); [42] := 123").unwrap();
        for stream in 0..20 {
            let mut random = ValueSource::random(11, stream);
            let first = concrete::run(&prog, 8, &mut random);
            let mut replay = ValueSource::from_values(random.drawn().iter().copied());
            let second = concrete::run(&prog, 8, &mut replay);
            match (&first.outcome, &second.outcome) {
                (RunOutcome::Completed(a), RunOutcome::Completed(b)) => {
                    assert!(a.semantic_eq(b))
                }
                (RunOutcome::Failed(a), RunOutcome::Failed(b)) => assert_eq!(a, b),
                (RunOutcome::Blocked(a), RunOutcome::Blocked(b)) => assert_eq!(a, b),
                other => panic!("replay diverged: {other:?}"),
            }
            assert_eq!(first.trace, second.trace);
        }
    }

    #[test]
    fn unfolding_builds_ground_list_heaps() {
        let src = "
predicate list(l) =
  if l = 0 then 0 = 0 else mb(l, 2) * l |-> ?v * l + 1 |-> ?n * list(n)

routine keep(l)
  req list(l)
  ens list(l)
=
  close list(l)

skip
";
        let prog = parse_program(src).unwrap();
        let pre = &prog.routines[0].pre;
        let mut st = CState::new();
        st.store.set("l", 5);
        // l = 5, node value 9, tail 3; node value 4, tail 0.
        let mut src = ValueSource::from_values([9, 3, 4, 0]);
        let mut budget = UNFOLD_DRAWS;
        let out = produce_ground(&prog, pre, st, &mut src, &mut budget, UNFOLD_DEPTH).unwrap();
        let expected = vec![
            CChunk::mb(5, 2),
            CChunk::points_to(5, 9),
            CChunk::points_to(6, 3),
            CChunk::mb(3, 2),
            CChunk::points_to(3, 4),
            CChunk::points_to(4, 0),
        ];
        assert!(
            concrete::cmultiset_eq(&out.heap, &expected),
            "heap: {:?}",
            out.heap
        );
    }

    #[test]
    fn forced_zero_terminates_self_referential_unfolding() {
        let src = "
predicate list(l) =
  if l = 0 then 0 = 0 else mb(l, 2) * l |-> ?v * l + 1 |-> ?n * list(n)

skip
";
        let prog = parse_program(src).unwrap();
        let a = crate::syntax::parse_assertion("list(1)").unwrap();
        let mut src = ValueSource::random(3, 0);
        let mut budget: u32 = 4;
        let out = produce_ground(
            &prog,
            &a,
            CState::new(),
            &mut src,
            &mut budget,
            UNFOLD_DEPTH,
        );
        // Termination is the property; the heap contents depend on draws,
        // and a drawn address collision may legitimately block the sample.
        match out {
            Ok(_) | Err(ScStop::Blocked(_)) => {}
            Err(other) => panic!("unfolding failed: {other:?}"),
        }
    }
}
