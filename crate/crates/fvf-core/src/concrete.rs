//! Concrete execution: ground stores, multiset heaps, demonic integer
//! choices at `malloc`.
//!
//! Two interchangeable drivers are provided. [`exec_n`] builds the
//! depth-bounded outcome tree, whose only branch points are the integer
//! choices of `malloc`; depth 0 is the blocked outcome. [`run`] walks one
//! path directly, resolving each choice against a [`ValueSource`] and
//! recording a trace line per executed command. Both agree path-for-path;
//! tests compare them on shared scripts.
//!
//! Memory errors (reading, writing, or freeing a missing chunk) are
//! failures. A `malloc` whose drawn address is not positive, or whose new
//! chunks would collide with an existing chunk of the same name and
//! address, blocks instead: such a draw does not correspond to a completed
//! allocation. Annotation commands (`open`, `close`, loop invariants,
//! contracts) have no concrete effect; they are ghost code here.

use std::rc::Rc;

use crate::choices::{DrawKind, ValueSource};
use crate::outcome::{bot, demonic_int, single, top, Branches, Outcome};
use crate::store::Store;
use crate::syntax::{BoolExpr, Command, Expr, PredName, Program, RESULT_VAR};

/// A ground chunk `p(args...)`. The built-ins are binary: `a ↦ v` and
/// `mb(a, n)`. User-defined chunks only show up in semiconcrete heaps but
/// share this representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CChunk {
    pub pred: PredName,
    pub args: Vec<i64>,
}

impl CChunk {
    pub fn points_to(addr: i64, value: i64) -> CChunk {
        CChunk {
            pred: PredName::PointsTo,
            args: vec![addr, value],
        }
    }

    pub fn mb(addr: i64, size: i64) -> CChunk {
        CChunk {
            pred: PredName::Mb,
            args: vec![addr, size],
        }
    }

    /// First argument, the chunk's address for clash purposes.
    pub fn addr(&self) -> i64 {
        self.args.first().copied().unwrap_or(0)
    }
}

pub fn render_chunk(c: &CChunk) -> String {
    match &c.pred {
        PredName::PointsTo => format!("{}\u{21a6}{}", c.args[0], c.args[1]),
        PredName::Mb => format!("mb({},{})", c.args[0], c.args[1]),
        PredName::User(name) => {
            let args: Vec<String> = c.args.iter().map(|v| v.to_string()).collect();
            format!("{}({})", name, args.join(","))
        }
    }
}

pub fn render_heap(heap: &[CChunk]) -> String {
    if heap.is_empty() {
        "\u{1d7ce}".to_string()
    } else {
        let chunks: Vec<String> = heap.iter().map(render_chunk).collect();
        format!("{{[{}]}}", chunks.join(", "))
    }
}

/// Multiset equality of chunk lists: order-insensitive, multiplicity-aware.
pub fn cmultiset_eq(a: &[CChunk], b: &[CChunk]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut rest: Vec<&CChunk> = b.iter().collect();
    for c in a {
        match rest.iter().position(|d| *d == c) {
            Some(i) => {
                rest.swap_remove(i);
            }
            None => return false,
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct CState {
    pub store: Store<i64>,
    pub heap: Vec<CChunk>,
}

impl CState {
    pub fn new() -> CState {
        CState {
            store: Store::new(),
            heap: Vec::new(),
        }
    }

    /// `s:{...} | h:{[...]}` on one line; the empty heap prints as 𝟎.
    pub fn render(&self) -> String {
        let store_parts: Vec<String> = self
            .store
            .entries()
            .iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect();
        format!(
            "s:{{{}}} | h:{}",
            store_parts.join(", "),
            render_heap(&self.heap)
        )
    }

    /// Stores compared as total functions, heaps as multisets.
    pub fn semantic_eq(&self, other: &CState) -> bool {
        self.store.semantic_eq(&other.store) && cmultiset_eq(&self.heap, &other.heap)
    }
}

impl Default for CState {
    fn default() -> CState {
        CState::new()
    }
}

/// Expression evaluation over a ground store; arithmetic wraps.
pub fn eval(store: &Store<i64>, e: &Expr) -> i64 {
    match e {
        Expr::IntLit(n) => *n,
        Expr::Var(x) => store.get(x),
        Expr::Add(a, b) => eval(store, a).wrapping_add(eval(store, b)),
        Expr::Sub(a, b) => eval(store, a).wrapping_sub(eval(store, b)),
    }
}

pub fn eval_bool(store: &Store<i64>, b: &BoolExpr) -> bool {
    match b {
        BoolExpr::Eq(a, b) => eval(store, a) == eval(store, b),
        BoolExpr::Lt(a, b) => eval(store, a) < eval(store, b),
        BoolExpr::Not(inner) => !eval_bool(store, inner),
    }
}

/// Index of the least chunk with this name and address, if any.
pub(crate) fn find_chunk(heap: &[CChunk], pred: &PredName, addr: i64) -> Option<usize> {
    heap.iter()
        .position(|c| c.pred == *pred && c.addr() == addr)
}

/// Adds a batch of chunks. Returns false (and leaves the heap unchanged)
/// when some new chunk shares name and address with an existing one.
fn produce_chunks(st: &mut CState, new: Vec<CChunk>) -> bool {
    for c in &new {
        if find_chunk(&st.heap, &c.pred, c.addr()).is_some() {
            return false;
        }
    }
    st.heap.extend(new);
    true
}

fn fail<S>(st: &CState, what: String) -> Outcome<S, ()> {
    Outcome::Msg(format!("{what} | {}", st.render()), Box::new(bot()))
}

/// The depth-bounded execution tree for one command. Depth 0 blocks;
/// every structural recursion steps down one level.
pub fn exec_n(prog: &Rc<Program>, c: &Command, depth: u32, st: CState) -> Outcome<CState, ()> {
    if depth == 0 {
        return top();
    }
    let d = depth - 1;
    match c {
        Command::Skip => single(st, ()),
        Command::Message(m) => Outcome::Msg(m.clone(), Box::new(single(st, ()))),
        Command::Assign(x, e) => {
            let v = eval(&st.store, e);
            let mut st = st;
            st.store.set(x, v);
            single(st, ())
        }
        Command::Seq(a, b) => {
            let prog2 = Rc::clone(prog);
            let b2 = (**b).clone();
            crate::outcome::seq_fn(exec_n(prog, a, d, st), move |st, ()| {
                exec_n(&prog2, &b2, d, st)
            })
        }
        // The demonic assume-split of the formal rule collapses to the
        // taken branch on a ground store; the other branch is blocked.
        Command::If(cond, t, e) => {
            if eval_bool(&st.store, cond) {
                exec_n(prog, t, d, st)
            } else {
                exec_n(prog, e, d, st)
            }
        }
        Command::While { cond, body, .. } => {
            if eval_bool(&st.store, cond) {
                let prog2 = Rc::clone(prog);
                let again = c.clone();
                crate::outcome::seq_fn(exec_n(prog, body, d, st), move |st, ()| {
                    exec_n(&prog2, &again, d, st)
                })
            } else {
                single(st, ())
            }
        }
        Command::Call { ret, routine, args } => {
            let def = prog
                .routine(routine)
                .unwrap_or_else(|| panic!("unknown routine {routine}"));
            let vals: Vec<i64> = args.iter().map(|a| eval(&st.store, a)).collect();
            let callee = Store::from_pairs(def.params.iter().cloned().zip(vals));
            let caller_store = st.store.clone();
            let ret2 = ret.clone();
            let mut st = st;
            st.store = callee;
            crate::outcome::seq_fn(exec_n(prog, &def.body.clone(), d, st), move |mut st, ()| {
                let rv = st.store.get(RESULT_VAR);
                st.store = caller_store.clone();
                if let Some(x) = &ret2 {
                    st.store.set(x, rv);
                }
                single(st, ())
            })
        }
        Command::Malloc { target, size } => {
            let target = target.clone();
            let size = *size;
            demonic_int(move |l| {
                if l <= 0 {
                    return top();
                }
                fill_cells(st.clone(), target.clone(), l, size, Vec::new())
            })
        }
        Command::Read { target, addr } => {
            let l = eval(&st.store, addr);
            match find_chunk(&st.heap, &PredName::PointsTo, l) {
                Some(i) => {
                    let v = st.heap[i].args[1];
                    let mut st = st;
                    st.store.set(target, v);
                    single(st, ())
                }
                None => fail(&st, format!("{c}: no points-to chunk at address {l}")),
            }
        }
        Command::Write { addr, value } => {
            let l = eval(&st.store, addr);
            let v = eval(&st.store, value);
            match find_chunk(&st.heap, &PredName::PointsTo, l) {
                Some(i) => {
                    // Consume-then-produce of the same address keeps the
                    // chunk's position, so traces render stably.
                    let mut st = st;
                    st.heap[i].args[1] = v;
                    single(st, ())
                }
                None => fail(&st, format!("{c}: no points-to chunk at address {l}")),
            }
        }
        Command::Free(e) => {
            let l = eval(&st.store, e);
            match free_block(st.clone(), l) {
                Ok(st) => single(st, ()),
                Err(msg) => fail(&st, format!("{c}: {msg}")),
            }
        }
        Command::Open { .. } | Command::Close { .. } => single(st, ()),
    }
}

/// Draws the remaining cell values of a `malloc`, then produces the block.
fn fill_cells(
    st: CState,
    target: String,
    l: i64,
    size: u32,
    cells: Vec<i64>,
) -> Outcome<CState, ()> {
    if cells.len() == size as usize {
        let mut chunks = vec![CChunk::mb(l, size as i64)];
        for (i, v) in cells.iter().enumerate() {
            chunks.push(CChunk::points_to(l.wrapping_add(i as i64), *v));
        }
        let mut st = st;
        if !produce_chunks(&mut st, chunks) {
            return top();
        }
        st.store.set(&target, l);
        single(st, ())
    } else {
        demonic_int(move |v| {
            let mut cells = cells.clone();
            cells.push(v);
            fill_cells(st.clone(), target.clone(), l, size, cells)
        })
    }
}

/// Removes `mb(l, n)` plus the n cells at l..l+n-1, or says what is missing.
pub(crate) fn free_block(mut st: CState, l: i64) -> Result<CState, String> {
    let mb = match find_chunk(&st.heap, &PredName::Mb, l) {
        Some(i) => i,
        None => return Err(format!("no malloc block at address {l}")),
    };
    let n = st.heap[mb].args[1];
    st.heap.remove(mb);
    for off in 0..n {
        let a = l.wrapping_add(off);
        match find_chunk(&st.heap, &PredName::PointsTo, a) {
            Some(i) => {
                st.heap.remove(i);
            }
            None => return Err(format!("no points-to chunk at address {a}")),
        }
    }
    Ok(st)
}

/// The whole-program tree: main, from the empty state.
pub fn exec_program(prog: &Rc<Program>, depth: u32) -> Outcome<CState, ()> {
    let main = prog.main.clone();
    exec_n(prog, &main, depth, CState::new())
}

/// How a single scripted or random path ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(CState),
    Blocked(String),
    Failed(String),
}

pub struct RunReport {
    pub outcome: RunOutcome,
    /// One line per executed command: `cmd | s:{...} | h:{...}`.
    pub trace: Vec<String>,
}

enum Stop {
    Blocked(String),
    Failed(String),
}

/// Runs main directly, resolving malloc draws against `choices`.
pub fn run(prog: &Program, depth: u32, choices: &mut ValueSource) -> RunReport {
    run_from(prog, &prog.main, CState::new(), depth, choices)
}

/// Runs an arbitrary command from a given start state; the soundness
/// trials use this to execute routine bodies from produced preconditions.
pub fn run_from(
    prog: &Program,
    c: &Command,
    st: CState,
    depth: u32,
    choices: &mut ValueSource,
) -> RunReport {
    let mut trace = Vec::new();
    let outcome = match step(prog, c, depth, st, choices, &mut trace) {
        Ok(st) => RunOutcome::Completed(st),
        Err(Stop::Blocked(m)) => RunOutcome::Blocked(m),
        Err(Stop::Failed(m)) => RunOutcome::Failed(m),
    };
    RunReport { outcome, trace }
}

fn emit(trace: &mut Vec<String>, c: &Command, st: &CState) {
    trace.push(format!("{c} | {}", st.render()));
}

fn step(
    prog: &Program,
    c: &Command,
    depth: u32,
    st: CState,
    choices: &mut ValueSource,
    trace: &mut Vec<String>,
) -> Result<CState, Stop> {
    if depth == 0 {
        return Err(Stop::Blocked("depth bound reached".to_string()));
    }
    let d = depth - 1;
    match c {
        Command::Skip => {
            emit(trace, c, &st);
            Ok(st)
        }
        Command::Message(_) => {
            emit(trace, c, &st);
            Ok(st)
        }
        Command::Assign(x, e) => {
            let v = eval(&st.store, e);
            let mut st = st;
            st.store.set(x, v);
            emit(trace, c, &st);
            Ok(st)
        }
        Command::Seq(a, b) => {
            let st = step(prog, a, d, st, choices, trace)?;
            step(prog, b, d, st, choices, trace)
        }
        Command::If(cond, t, e) => {
            if eval_bool(&st.store, cond) {
                step(prog, t, d, st, choices, trace)
            } else {
                step(prog, e, d, st, choices, trace)
            }
        }
        Command::While { cond, body, .. } => {
            if eval_bool(&st.store, cond) {
                let st = step(prog, body, d, st, choices, trace)?;
                step(prog, c, d, st, choices, trace)
            } else {
                Ok(st)
            }
        }
        Command::Call { ret, routine, args } => {
            let def = prog
                .routine(routine)
                .unwrap_or_else(|| panic!("unknown routine {routine}"));
            let vals: Vec<i64> = args.iter().map(|a| eval(&st.store, a)).collect();
            let caller_store = st.store.clone();
            let mut st = st;
            st.store = Store::from_pairs(def.params.iter().cloned().zip(vals));
            let mut st = step(prog, &def.body, d, st, choices, trace)?;
            let rv = st.store.get(RESULT_VAR);
            st.store = caller_store;
            if let Some(x) = ret {
                st.store.set(x, rv);
            }
            emit(trace, c, &st);
            Ok(st)
        }
        Command::Malloc { target, size } => {
            let l = choices
                .draw(DrawKind::Address)
                .ok_or_else(|| Stop::Blocked(format!("{c}: choice source exhausted")))?;
            if l <= 0 {
                return Err(Stop::Blocked(format!(
                    "{c}: drawn address {l} is not positive"
                )));
            }
            let mut chunks = vec![CChunk::mb(l, *size as i64)];
            for i in 0..*size {
                let v = choices
                    .draw(DrawKind::Value)
                    .ok_or_else(|| Stop::Blocked(format!("{c}: choice source exhausted")))?;
                chunks.push(CChunk::points_to(l.wrapping_add(i as i64), v));
            }
            let mut st = st;
            if !produce_chunks(&mut st, chunks) {
                return Err(Stop::Blocked(format!(
                    "{c}: drawn address {l} clashes with an existing chunk"
                )));
            }
            st.store.set(target, l);
            emit(trace, c, &st);
            Ok(st)
        }
        Command::Read { target, addr } => {
            let l = eval(&st.store, addr);
            match find_chunk(&st.heap, &PredName::PointsTo, l) {
                Some(i) => {
                    let v = st.heap[i].args[1];
                    let mut st = st;
                    st.store.set(target, v);
                    emit(trace, c, &st);
                    Ok(st)
                }
                None => Err(Stop::Failed(format!(
                    "{c}: no points-to chunk at address {l}"
                ))),
            }
        }
        Command::Write { addr, value } => {
            let l = eval(&st.store, addr);
            let v = eval(&st.store, value);
            match find_chunk(&st.heap, &PredName::PointsTo, l) {
                Some(i) => {
                    let mut st = st;
                    st.heap[i].args[1] = v;
                    emit(trace, c, &st);
                    Ok(st)
                }
                None => Err(Stop::Failed(format!(
                    "{c}: no points-to chunk at address {l}"
                ))),
            }
        }
        Command::Free(e) => {
            let l = eval(&st.store, e);
            match free_block(st, l) {
                Ok(st) => {
                    emit(trace, c, &st);
                    Ok(st)
                }
                Err(msg) => Err(Stop::Failed(format!("{c}: {msg}"))),
            }
        }
        Command::Open { .. } | Command::Close { .. } => Ok(st),
    }
}

/// Walks an execution tree along a script: demonic integer nodes consume
/// one draw each, messages pass through, leaves classify the path. Bool
/// branches never appear in concrete trees.
pub fn walk_tree(phi: &Outcome<CState, ()>, choices: &mut ValueSource) -> RunOutcome {
    let mut note = String::new();
    let mut cur = phi.clone();
    loop {
        match cur {
            Outcome::Single(st, ()) => return RunOutcome::Completed(st),
            Outcome::Msg(m, rest) => {
                note = m;
                cur = *rest;
            }
            Outcome::Demonic(Branches::Empty) => {
                return RunOutcome::Blocked(if note.is_empty() {
                    "blocked".to_string()
                } else {
                    note
                })
            }
            Outcome::Angelic(Branches::Empty) => {
                return RunOutcome::Failed(if note.is_empty() {
                    "failed".to_string()
                } else {
                    note
                })
            }
            Outcome::Demonic(Branches::Int(f)) => match choices.draw(DrawKind::Value) {
                Some(v) => cur = f(v),
                None => return RunOutcome::Blocked("choice source exhausted".to_string()),
            },
            _ => return RunOutcome::Blocked("unexpected branch shape".to_string()),
        }
    }
}
