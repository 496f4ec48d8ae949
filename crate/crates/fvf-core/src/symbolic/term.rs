//! First-order terms and formulas over integer symbols, and the symbolic
//! machine state built from them.
//!
//! A symbol is "in use" exactly when the path condition contains the
//! housekeeping fact `σ = σ`; freshness is defined against that set, so the
//! path condition fully determines which names the executor may still pick.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::store::{Store, Zero};
use crate::syntax::{BoolExpr, Expr, PredName};

/// An opaque integer symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Lit(i64),
    Sym(SymId),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
}

impl Term {
    // Constructors, not operator impls: they take owned operands by design.
    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }

    /// Offset by a literal, folding `t + 0` to `t`.
    pub fn offset(self, n: i64) -> Term {
        if n == 0 {
            self
        } else {
            Term::add(self, Term::Lit(n))
        }
    }

    pub fn symbols(&self, out: &mut BTreeSet<SymId>) {
        match self {
            Term::Lit(_) => {}
            Term::Sym(s) => {
                out.insert(*s);
            }
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
        }
    }

    /// Evaluate under an assignment. Arithmetic wraps, matching the concrete
    /// machine; callers that care keep values small.
    pub fn eval(&self, env: &BTreeMap<SymId, i64>) -> i64 {
        match self {
            Term::Lit(n) => *n,
            Term::Sym(s) => env.get(s).copied().unwrap_or(0),
            Term::Add(a, b) => a.eval(env).wrapping_add(b.eval(env)),
            Term::Sub(a, b) => a.eval(env).wrapping_sub(b.eval(env)),
        }
    }
}

impl Zero for Term {
    fn zero() -> Term {
        Term::Lit(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Eq(Term, Term),
    Lt(Term, Term),
    Not(Box<Formula>),
}

impl Formula {
    /// Boxing constructor; a static method on purpose, like `Term::add`.
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn symbols(&self, out: &mut BTreeSet<SymId>) {
        match self {
            Formula::Eq(a, b) | Formula::Lt(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Formula::Not(f) => f.symbols(out),
        }
    }

    pub fn eval(&self, env: &BTreeMap<SymId, i64>) -> bool {
        match self {
            Formula::Eq(a, b) => a.eval(env) == b.eval(env),
            Formula::Lt(a, b) => a.eval(env) < b.eval(env),
            Formula::Not(f) => !f.eval(env),
        }
    }

    /// The housekeeping fact marking a symbol as in use.
    pub fn in_use(s: SymId) -> Formula {
        Formula::Eq(Term::Sym(s), Term::Sym(s))
    }
}

/// Insertion-ordered set of assumed formulas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathCond {
    formulas: Vec<Formula>,
}

impl PathCond {
    pub fn new() -> PathCond {
        PathCond::default()
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.formulas.contains(f)
    }

    pub fn insert(&mut self, f: Formula) {
        if !self.contains(&f) {
            self.formulas.push(f);
        }
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    /// Symbols marked in use by a `σ = σ` housekeeping fact.
    pub fn used(&self) -> BTreeSet<SymId> {
        let mut out = BTreeSet::new();
        for f in &self.formulas {
            if let Formula::Eq(Term::Sym(a), Term::Sym(b)) = f {
                if a == b {
                    out.insert(*a);
                }
            }
        }
        out
    }

    /// All symbols mentioned anywhere in the condition.
    pub fn symbols(&self) -> BTreeSet<SymId> {
        let mut out = BTreeSet::new();
        for f in &self.formulas {
            f.symbols(&mut out);
        }
        out
    }

    pub fn set_eq(&self, other: &PathCond) -> bool {
        self.formulas.iter().all(|f| other.contains(f))
            && other.formulas.iter().all(|f| self.contains(f))
    }
}

/// A heap chunk with symbolic arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymChunk {
    pub pred: PredName,
    pub args: Vec<Term>,
}

impl SymChunk {
    pub fn points_to(addr: Term, value: Term) -> SymChunk {
        SymChunk {
            pred: PredName::PointsTo,
            args: vec![addr, value],
        }
    }
}

/// Full symbolic execution state: path condition, store, heap, plus display
/// names for the symbols in play.
#[derive(Debug, Clone)]
pub struct SymState {
    pub pc: PathCond,
    pub store: Store<Term>,
    pub heap: Vec<SymChunk>,
    names: BTreeMap<SymId, String>,
}

impl SymState {
    pub fn new() -> SymState {
        SymState {
            pc: PathCond::new(),
            store: Store::new(),
            heap: Vec::new(),
            names: BTreeMap::new(),
        }
    }

    /// Pick the least symbol not in use, record it in the path condition,
    /// and derive a display name from `hint` (first letter, hatted, primed
    /// until unique).
    pub fn fresh(&mut self, hint: &str) -> Term {
        let used = self.pc.used();
        let mut id = 0u32;
        while used.contains(&SymId(id)) {
            id += 1;
        }
        let sym = SymId(id);
        self.pc.insert(Formula::in_use(sym));
        let base: String = hint
            .chars()
            .find(|c| c.is_ascii_alphanumeric())
            .unwrap_or('s')
            .to_string();
        let mut name = format!("{base}\u{0302}");
        while self.names.values().any(|n| n == &name) {
            name.push('\u{2032}');
        }
        self.names.insert(sym, name);
        Term::Sym(sym)
    }

    pub fn name_of(&self, s: SymId) -> String {
        match self.names.get(&s) {
            Some(n) => n.clone(),
            None => format!("?{}", s.0),
        }
    }

    /// Every symbol mentioned by the store, heap, or path condition is
    /// marked in use by the path condition.
    pub fn well_formed(&self) -> bool {
        let used = self.pc.used();
        let mut mentioned = self.pc.symbols();
        for (_, t) in self.store.entries() {
            t.symbols(&mut mentioned);
        }
        for c in &self.heap {
            for a in &c.args {
                a.symbols(&mut mentioned);
            }
        }
        mentioned.is_subset(&used)
    }

    /// State equality up to path-condition ordering and heap permutation.
    pub fn semantic_eq(&self, other: &SymState) -> bool {
        self.pc.set_eq(&other.pc)
            && self.store.semantic_eq(&other.store)
            && multiset_eq(&self.heap, &other.heap)
    }

    pub fn render_term(&self, t: &Term) -> String {
        render_term_with(t, &|s| self.name_of(s))
    }

    pub fn render_formula(&self, f: &Formula) -> String {
        render_formula_with(f, &|s| self.name_of(s))
    }

    pub fn render_chunk(&self, c: &SymChunk) -> String {
        let args: Vec<String> = c.args.iter().map(|a| self.render_term(a)).collect();
        match &c.pred {
            PredName::PointsTo if args.len() == 2 => {
                format!("{}\u{21a6}{}", args[0], args[1])
            }
            // A consume can ask for a points-to chunk with the cell value
            // still open; show the hole explicitly.
            PredName::PointsTo => format!("{}\u{21a6}?", args.join(",")),
            PredName::Mb => format!("mb({})", args.join(",")),
            PredName::User(n) => format!("{}({})", n, args.join(",")),
        }
    }

    /// One-line rendering: `Φ:{...} | s:{...} | h:{...}`.
    pub fn render(&self) -> String {
        let mut pc_parts = Vec::new();
        for f in self.pc.formulas() {
            if let Formula::Eq(Term::Sym(a), Term::Sym(b)) = f {
                if a == b {
                    pc_parts.push(self.name_of(*a));
                    continue;
                }
            }
            pc_parts.push(self.render_formula(f));
        }
        let store_parts: Vec<String> = self
            .store
            .entries()
            .iter()
            .map(|(k, v)| format!("{k}:{}", self.render_term(v)))
            .collect();
        let heap = if self.heap.is_empty() {
            "\u{1d7ce}".to_string()
        } else {
            let chunks: Vec<String> = self.heap.iter().map(|c| self.render_chunk(c)).collect();
            format!("{{[{}]}}", chunks.join(", "))
        };
        format!(
            "\u{03a6}:{{{}}} | s:{{{}}} | h:{}",
            pc_parts.join(", "),
            store_parts.join(", "),
            heap
        )
    }
}

impl Default for SymState {
    fn default() -> SymState {
        SymState::new()
    }
}

pub fn multiset_eq(a: &[SymChunk], b: &[SymChunk]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut remaining: Vec<&SymChunk> = b.iter().collect();
    for c in a {
        match remaining.iter().position(|r| *r == c) {
            Some(i) => {
                remaining.swap_remove(i);
            }
            None => return false,
        }
    }
    true
}

fn render_term_with(t: &Term, name: &dyn Fn(SymId) -> String) -> String {
    match t {
        Term::Lit(n) => n.to_string(),
        Term::Sym(s) => name(*s),
        Term::Add(a, b) => format!("{}+{}", render_term_with(a, name), render_operand(b, name)),
        Term::Sub(a, b) => format!("{}-{}", render_term_with(a, name), render_operand(b, name)),
    }
}

fn render_operand(t: &Term, name: &dyn Fn(SymId) -> String) -> String {
    match t {
        Term::Add(..) | Term::Sub(..) => format!("({})", render_term_with(t, name)),
        _ => render_term_with(t, name),
    }
}

fn render_formula_with(f: &Formula, name: &dyn Fn(SymId) -> String) -> String {
    match f {
        Formula::Eq(a, b) => format!(
            "{}={}",
            render_term_with(a, name),
            render_term_with(b, name)
        ),
        Formula::Lt(a, b) => format!(
            "{}<{}",
            render_term_with(a, name),
            render_term_with(b, name)
        ),
        Formula::Not(inner) => match inner.as_ref() {
            Formula::Eq(a, b) => format!(
                "{}\u{2260}{}",
                render_term_with(a, name),
                render_term_with(b, name)
            ),
            _ => format!("\u{00ac}({})", render_formula_with(inner, name)),
        },
    }
}

/// Translate a program expression under a symbolic store.
pub fn seval(store: &Store<Term>, e: &Expr) -> Term {
    match e {
        Expr::IntLit(n) => Term::Lit(*n),
        Expr::Var(x) => store.get(x),
        Expr::Add(a, b) => Term::add(seval(store, a), seval(store, b)),
        Expr::Sub(a, b) => Term::sub(seval(store, a), seval(store, b)),
    }
}

/// Translate a program boolean under a symbolic store.
pub fn seval_bool(store: &Store<Term>, b: &BoolExpr) -> Formula {
    match b {
        BoolExpr::Eq(a, c) => Formula::Eq(seval(store, a), seval(store, c)),
        BoolExpr::Lt(a, c) => Formula::Lt(seval(store, a), seval(store, c)),
        BoolExpr::Not(inner) => Formula::not(seval_bool(store, inner)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_picks_least_unused_and_records_use() {
        let mut st = SymState::new();
        let a = st.fresh("i");
        let b = st.fresh("n");
        assert_eq!(a, Term::Sym(SymId(0)));
        assert_eq!(b, Term::Sym(SymId(1)));
        assert_eq!(st.pc.used().len(), 2);
        assert!(st.well_formed());
    }

    #[test]
    fn fresh_reuses_gaps() {
        let mut st = SymState::new();
        st.pc.insert(Formula::in_use(SymId(0)));
        st.pc.insert(Formula::in_use(SymId(2)));
        assert_eq!(st.fresh("x"), Term::Sym(SymId(1)));
        assert_eq!(st.fresh("y"), Term::Sym(SymId(3)));
    }

    #[test]
    fn display_names_hat_and_prime() {
        let mut st = SymState::new();
        let v1 = st.fresh("v");
        let v2 = st.fresh("v");
        let l = st.fresh("list");
        match (v1, v2, l) {
            (Term::Sym(a), Term::Sym(b), Term::Sym(c)) => {
                assert_eq!(st.name_of(a), "v\u{0302}");
                assert_eq!(st.name_of(b), "v\u{0302}\u{2032}");
                assert_eq!(st.name_of(c), "l\u{0302}");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn well_formed_rejects_unregistered_symbols() {
        let mut st = SymState::new();
        st.store.set("x", Term::Sym(SymId(7)));
        assert!(!st.well_formed());
    }

    #[test]
    fn render_shows_housekeeping_as_bare_names() {
        let mut st = SymState::new();
        let i = st.fresh("i");
        let n = st.fresh("n");
        st.store.set("i", i.clone());
        st.pc.insert(Formula::not(Formula::Eq(i, n)));
        let line = st.render();
        assert!(line.starts_with("\u{03a6}:{i\u{0302}, n\u{0302}, i\u{0302}\u{2260}n\u{0302}}"));
        assert!(line.contains("s:{i:i\u{0302}}"));
        assert!(line.ends_with("h:\u{1d7ce}"));
    }

    #[test]
    fn heap_multiset_equality_ignores_order_not_multiplicity() {
        let c1 = SymChunk::points_to(Term::Lit(1), Term::Lit(2));
        let c2 = SymChunk::points_to(Term::Lit(3), Term::Lit(4));
        assert!(multiset_eq(
            &[c1.clone(), c2.clone()],
            &[c2.clone(), c1.clone()]
        ));
        assert!(!multiset_eq(&[c1.clone(), c1.clone()], &[c1, c2]));
    }

    #[test]
    fn eval_agrees_with_rendering_intuition() {
        let mut env = BTreeMap::new();
        env.insert(SymId(0), 5);
        let t = Term::add(Term::Sym(SymId(0)), Term::Lit(1));
        assert_eq!(t.eval(&env), 6);
        let f = Formula::Lt(Term::Sym(SymId(0)), Term::Lit(4));
        assert!(!f.eval(&env));
        assert!(Formula::not(f).eval(&env));
    }
}
