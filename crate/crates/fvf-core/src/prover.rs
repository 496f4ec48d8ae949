//! Entailment checking for path conditions.
//!
//! `entails(pc, goal)` asks whether every integer assignment satisfying all
//! of `pc` also satisfies `goal`. The check is sound but incomplete: a `true`
//! answer is a real entailment, a `false` answer only means "not proved".
//!
//! Strategy: normalize to linear forms, try a syntactic membership fast
//! path, then refute `pc ∧ ¬goal` by equality elimination followed by
//! Fourier-Motzkin elimination with integer tightening. Disequalities split
//! into two inequality branches, capped by a small budget. All coefficient
//! arithmetic is checked; overflow abandons the proof attempt rather than
//! risking unsoundness.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Mutex;

use crate::symbolic::term::{Formula, SymId, Term};

/// Maximum number of disequality case splits (2^budget branches).
const SPLIT_BUDGET: usize = 8;
/// Fourier-Motzkin gives up past this many inequalities.
const FM_LIMIT: usize = 600;

/// `constant + Σ coeffs[s]·s`, zero coefficients never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearForm {
    pub constant: i64,
    pub coeffs: BTreeMap<SymId, i64>,
}

impl LinearForm {
    pub fn constant(c: i64) -> LinearForm {
        LinearForm {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn sym(s: SymId) -> LinearForm {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(s, 1);
        LinearForm {
            constant: 0,
            coeffs,
        }
    }

    pub fn coeff(&self, s: SymId) -> i64 {
        self.coeffs.get(&s).copied().unwrap_or(0)
    }

    pub fn as_const(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            Some(self.constant)
        } else {
            None
        }
    }

    /// `self + k·other`, checked.
    pub fn add_scaled(&self, other: &LinearForm, k: i64) -> Option<LinearForm> {
        let mut out = self.clone();
        out.constant = out.constant.checked_add(other.constant.checked_mul(k)?)?;
        for (s, c) in &other.coeffs {
            let v = out.coeff(*s).checked_add(c.checked_mul(k)?)?;
            if v == 0 {
                out.coeffs.remove(s);
            } else {
                out.coeffs.insert(*s, v);
            }
        }
        Some(out)
    }

    pub fn scale(&self, k: i64) -> Option<LinearForm> {
        LinearForm::constant(0).add_scaled(self, k)
    }

    pub fn plus_const(&self, k: i64) -> Option<LinearForm> {
        let mut out = self.clone();
        out.constant = out.constant.checked_add(k)?;
        Some(out)
    }

    pub fn negate(&self) -> Option<LinearForm> {
        self.scale(-1)
    }

    pub fn eval(&self, env: &BTreeMap<SymId, i64>) -> i64 {
        let mut acc = self.constant;
        for (s, c) in &self.coeffs {
            acc = acc.wrapping_add(c.wrapping_mul(env.get(s).copied().unwrap_or(0)));
        }
        acc
    }
}

/// Rewrite a term as a linear form. Fails only on coefficient overflow.
pub fn normalize(t: &Term) -> Option<LinearForm> {
    match t {
        Term::Lit(n) => Some(LinearForm::constant(*n)),
        Term::Sym(s) => Some(LinearForm::sym(*s)),
        Term::Add(a, b) => normalize(a)?.add_scaled(&normalize(b)?, 1),
        Term::Sub(a, b) => normalize(a)?.add_scaled(&normalize(b)?, -1),
    }
}

/// Polarity-reduced canonical shape: `= 0`, `≤ 0`, or `≠ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Canon {
    Eq(LinearForm),
    Le(LinearForm),
    Ne(LinearForm),
}

/// Reduce a (possibly negated) formula to canonical shape.
pub fn canon(f: &Formula) -> Option<Canon> {
    canon_pol(f, true)
}

fn canon_pol(f: &Formula, positive: bool) -> Option<Canon> {
    match (f, positive) {
        (Formula::Not(g), _) => canon_pol(g, !positive),
        (Formula::Eq(a, b), true) => Some(Canon::Eq(sign_normalize(diff(a, b)?))),
        (Formula::Eq(a, b), false) => Some(Canon::Ne(sign_normalize(diff(a, b)?))),
        (Formula::Lt(a, b), true) => Some(Canon::Le(diff(a, b)?.plus_const(1)?)),
        (Formula::Lt(a, b), false) => Some(Canon::Le(diff(b, a)?)),
    }
}

fn diff(a: &Term, b: &Term) -> Option<LinearForm> {
    normalize(a)?.add_scaled(&normalize(b)?, -1)
}

/// For `= 0` and `≠ 0` shapes the sign of the whole form is irrelevant;
/// flip so the leading coefficient (or bare constant) is positive.
fn sign_normalize(lf: LinearForm) -> LinearForm {
    let negative = match lf.coeffs.iter().next() {
        Some((_, c)) => *c < 0,
        None => lf.constant < 0,
    };
    if negative {
        lf.negate().unwrap_or(lf)
    } else {
        lf
    }
}

/// An atomic refutation constraint.
#[derive(Debug, Clone)]
enum Atom {
    /// form = 0
    Eq(LinearForm),
    /// form ≤ 0
    Le(LinearForm),
}

/// Lower a formula (under a polarity) into conjunction atoms plus
/// two-way disequality splits.
fn lower(
    f: &Formula,
    positive: bool,
    base: &mut Vec<Atom>,
    splits: &mut Vec<(Atom, Atom)>,
) -> Option<()> {
    match (f, positive) {
        (Formula::Not(g), _) => lower(g, !positive, base, splits),
        (Formula::Eq(a, b), true) => {
            base.push(Atom::Eq(diff(a, b)?));
            Some(())
        }
        (Formula::Eq(a, b), false) => {
            let d = diff(a, b)?;
            // d ≠ 0  ⇔  d+1 ≤ 0 ∨ 1−d ≤ 0
            let lo = Atom::Le(d.plus_const(1)?);
            let hi = Atom::Le(d.negate()?.plus_const(1)?);
            splits.push((lo, hi));
            Some(())
        }
        (Formula::Lt(a, b), true) => {
            base.push(Atom::Le(diff(a, b)?.plus_const(1)?));
            Some(())
        }
        (Formula::Lt(a, b), false) => {
            base.push(Atom::Le(diff(b, a)?));
            Some(())
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Divide an `≤ 0` form by the gcd of its coefficients, rounding the
/// constant up (integer tightening).
fn tighten(lf: LinearForm) -> Option<LinearForm> {
    if lf.coeffs.is_empty() {
        return Some(lf);
    }
    let g = lf.coeffs.values().fold(0, |acc, c| gcd(acc, *c));
    if g <= 1 {
        return Some(lf);
    }
    let mut coeffs = BTreeMap::new();
    for (s, c) in &lf.coeffs {
        coeffs.insert(*s, c / g);
    }
    // Σc/g·x ≤ −k/g with integer left side: round the bound down,
    // i.e. the moved constant up.
    let q = lf.constant.div_euclid(g);
    let constant = if lf.constant.rem_euclid(g) == 0 {
        q
    } else {
        q.checked_add(1)?
    };
    Some(LinearForm { constant, coeffs })
}

/// Is the conjunction of atoms unsatisfiable over the integers?
/// `false` means "could not prove unsat" (including on overflow).
fn conj_unsat(atoms: &[Atom]) -> bool {
    conj_unsat_inner(atoms).unwrap_or(false)
}

fn conj_unsat_inner(atoms: &[Atom]) -> Option<bool> {
    let mut eqs: Vec<LinearForm> = Vec::new();
    let mut les: Vec<LinearForm> = Vec::new();
    for a in atoms {
        match a {
            Atom::Eq(lf) => eqs.push(lf.clone()),
            Atom::Le(lf) => les.push(lf.clone()),
        }
    }

    // Equality elimination.
    while let Some(eq) = eqs.pop() {
        if let Some(c) = eq.as_const() {
            if c != 0 {
                return Some(true);
            }
            continue;
        }
        let g = eq.coeffs.values().fold(0, |acc, c| gcd(acc, *c));
        if eq.constant % g != 0 {
            // Σ coeffs·x is a multiple of g, the constant is not.
            return Some(true);
        }
        let (&x, &c) = eq
            .coeffs
            .iter()
            .min_by_key(|(s, c)| (c.unsigned_abs(), **s))?;
        let sign = if c > 0 { 1 } else { -1 };
        let abs_c = c.abs();
        let substitute = |f: &LinearForm| -> Option<LinearForm> {
            let d = f.coeff(x);
            if d == 0 {
                return Some(f.clone());
            }
            // f·|c| − eq·(d·sign) zeroes the x coefficient; |c| > 0
            // keeps ≤ facing the same way.
            f.scale(abs_c)?
                .add_scaled(&eq, d.checked_mul(sign)?.checked_neg()?)
        };
        for f in eqs.iter_mut() {
            *f = substitute(f)?;
        }
        for f in les.iter_mut() {
            *f = substitute(f)?;
        }
    }

    // Inequality saturation.
    for f in les.iter_mut() {
        *f = tighten(f.clone())?;
    }
    loop {
        if les
            .iter()
            .any(|f| f.as_const().map(|c| c > 0).unwrap_or(false))
        {
            return Some(true);
        }
        les.retain(|f| !f.coeffs.is_empty());
        let mut vars: BTreeSet<SymId> = BTreeSet::new();
        for f in &les {
            vars.extend(f.coeffs.keys().copied());
        }
        let Some(&x) = vars.iter().min_by_key(|x| {
            let pos = les.iter().filter(|f| f.coeff(**x) > 0).count();
            let neg = les.iter().filter(|f| f.coeff(**x) < 0).count();
            (pos * neg, x.0)
        }) else {
            // Only trivially satisfiable constants remain.
            return Some(false);
        };
        let (with_x, rest): (Vec<LinearForm>, Vec<LinearForm>) =
            les.into_iter().partition(|f| f.coeff(x) != 0);
        let (pos, neg): (Vec<LinearForm>, Vec<LinearForm>) =
            with_x.into_iter().partition(|f| f.coeff(x) > 0);
        let mut next = rest;
        for p in &pos {
            for n in &neg {
                // p has cp·x (cp>0), n has cn·x (cn<0); cancel x.
                let cp = p.coeff(x);
                let cn = n.coeff(x);
                let combined = p.scale(-cn)?.add_scaled(n, cp)?;
                let combined = tighten(combined)?;
                if combined.as_const().map(|c| c > 0).unwrap_or(false) {
                    return Some(true);
                }
                next.push(combined);
            }
        }
        if next.len() > FM_LIMIT {
            return Some(false);
        }
        les = next;
    }
}

/// Core decision procedure, no logging.
pub fn entails(pc: &[Formula], goal: &Formula) -> bool {
    // Fast path: goal is trivially valid or literally assumed.
    if let Some(cg) = canon(goal) {
        let trivial = match &cg {
            Canon::Eq(lf) => lf.as_const() == Some(0),
            Canon::Le(lf) => lf.as_const().map(|c| c <= 0).unwrap_or(false),
            Canon::Ne(lf) => lf.as_const().map(|c| c != 0).unwrap_or(false),
        };
        if trivial {
            return true;
        }
        if pc.iter().any(|f| canon(f).as_ref() == Some(&cg)) {
            return true;
        }
    }

    // Refute pc ∧ ¬goal.
    let mut base = Vec::new();
    let mut splits = Vec::new();
    for f in pc {
        if lower(f, true, &mut base, &mut splits).is_none() {
            return false;
        }
    }
    if lower(goal, false, &mut base, &mut splits).is_none() {
        return false;
    }
    if splits.len() > SPLIT_BUDGET {
        return false;
    }
    for mask in 0..(1u32 << splits.len()) {
        let mut atoms = base.clone();
        for (i, (lo, hi)) in splits.iter().enumerate() {
            atoms.push(if mask & (1 << i) == 0 {
                lo.clone()
            } else {
                hi.clone()
            });
        }
        if !conj_unsat(&atoms) {
            return false;
        }
    }
    true
}

/// Render the query as an SMT-LIB 2 script asserting `pc ∧ ¬goal`;
/// an external solver must answer `unsat` whenever `entails` said yes.
pub fn export_smtlib(pc: &[Formula], goal: &Formula) -> String {
    let mut syms = BTreeSet::new();
    for f in pc {
        f.symbols(&mut syms);
    }
    goal.symbols(&mut syms);
    let mut out = String::from("(set-logic QF_LIA)\n");
    for s in &syms {
        out.push_str(&format!("(declare-const x{} Int)\n", s.0));
    }
    for f in pc {
        out.push_str(&format!("(assert {})\n", formula_sexp(f)));
    }
    out.push_str(&format!("(assert (not {}))\n", formula_sexp(goal)));
    out.push_str("(check-sat)\n");
    out
}

fn term_sexp(t: &Term) -> String {
    match t {
        Term::Lit(n) if *n < 0 => format!("(- {})", n.unsigned_abs()),
        Term::Lit(n) => n.to_string(),
        Term::Sym(s) => format!("x{}", s.0),
        Term::Add(a, b) => format!("(+ {} {})", term_sexp(a), term_sexp(b)),
        Term::Sub(a, b) => format!("(- {} {})", term_sexp(a), term_sexp(b)),
    }
}

fn formula_sexp(f: &Formula) -> String {
    match f {
        Formula::Eq(a, b) => format!("(= {} {})", term_sexp(a), term_sexp(b)),
        Formula::Lt(a, b) => format!("(< {} {})", term_sexp(a), term_sexp(b)),
        Formula::Not(g) => format!("(not {})", formula_sexp(g)),
    }
}

/// Exhaustive search for an assignment in `[lo, hi]` per symbol that
/// satisfies all of `pc` but falsifies `goal`. `None` means no
/// countermodel exists in the box. Only usable for small symbol counts.
pub fn countermodel_search(
    pc: &[Formula],
    goal: &Formula,
    lo: i64,
    hi: i64,
) -> Option<BTreeMap<SymId, i64>> {
    let mut syms = BTreeSet::new();
    for f in pc {
        f.symbols(&mut syms);
    }
    goal.symbols(&mut syms);
    let syms: Vec<SymId> = syms.into_iter().collect();
    assert!(syms.len() <= 6, "countermodel search box too large");
    let width = (hi - lo + 1) as u64;
    let total = width.pow(syms.len() as u32);
    for idx in 0..total {
        let mut env = BTreeMap::new();
        let mut rem = idx;
        for s in &syms {
            env.insert(*s, lo + (rem % width) as i64);
            rem /= width;
        }
        if pc.iter().all(|f| f.eval(&env)) && !goal.eval(&env) {
            return Some(env);
        }
    }
    None
}

struct Dump {
    dir: PathBuf,
    counter: u64,
}

/// Entailment front end. Optionally mirrors every query to a directory as
/// SMT-LIB scripts for external replay.
pub struct Prover {
    dump: Option<Mutex<Dump>>,
}

impl Prover {
    pub fn new() -> Prover {
        Prover { dump: None }
    }

    pub fn with_dump_dir(dir: impl Into<PathBuf>) -> Prover {
        Prover {
            dump: Some(Mutex::new(Dump {
                dir: dir.into(),
                counter: 0,
            })),
        }
    }

    pub fn entails(&self, pc: &[Formula], goal: &Formula) -> bool {
        let proved = entails(pc, goal);
        if let Some(m) = &self.dump {
            let mut d = m.lock().expect("prover dump lock");
            let verdict = if proved { "proved" } else { "unproved" };
            let path = d.dir.join(format!("q{:05}_{verdict}.smt2", d.counter));
            d.counter += 1;
            let _ = std::fs::create_dir_all(&d.dir);
            let _ = std::fs::write(path, export_smtlib(pc, goal));
        }
        proved
    }
}

impl Default for Prover {
    fn default() -> Prover {
        Prover::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(i: u32) -> Term {
        Term::Sym(SymId(i))
    }

    fn lt(a: Term, b: Term) -> Formula {
        Formula::Lt(a, b)
    }

    fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }

    fn ne(a: Term, b: Term) -> Formula {
        Formula::not(Formula::Eq(a, b))
    }

    #[test]
    fn positive_address_is_nonzero() {
        let pc = [lt(Term::Lit(0), sym(0))];
        assert!(entails(&pc, &ne(sym(0), Term::Lit(0))));
    }

    #[test]
    fn strict_order_implies_disequality() {
        let pc = [lt(sym(0), sym(1))];
        assert!(entails(&pc, &ne(sym(0), sym(1))));
        assert!(entails(&pc, &Formula::not(lt(sym(1), sym(0)))));
    }

    #[test]
    fn transitivity() {
        let pc = [lt(sym(0), sym(1)), lt(sym(1), sym(2))];
        assert!(entails(&pc, &lt(sym(0), sym(2))));
    }

    #[test]
    fn membership_and_double_negation() {
        let g = lt(sym(0), sym(1));
        let pc = [Formula::not(Formula::not(g.clone()))];
        assert!(entails(&pc, &g));
        assert!(entails(
            std::slice::from_ref(&g),
            &Formula::not(Formula::not(g.clone()))
        ));
    }

    #[test]
    fn disequality_does_not_prove_order() {
        let pc = [ne(sym(0), sym(1))];
        assert!(!entails(&pc, &lt(sym(0), sym(1))));
        assert!(!entails(&pc, &lt(sym(1), sym(0))));
    }

    #[test]
    fn equality_does_not_prove_strictness() {
        let pc = [eq(sym(0), sym(1))];
        assert!(!entails(&pc, &lt(sym(0), sym(1))));
        assert!(entails(&pc, &Formula::not(lt(sym(0), sym(1)))));
    }

    #[test]
    fn ground_arithmetic() {
        assert!(entails(&[], &lt(Term::Lit(3), Term::Lit(5))));
        assert!(!entails(&[], &lt(Term::Lit(5), Term::Lit(3))));
        assert!(entails(
            &[],
            &eq(
                Term::add(Term::Lit(2), Term::Lit(2)),
                Term::sub(Term::Lit(5), Term::Lit(1))
            )
        ));
    }

    #[test]
    fn constant_propagation_through_equalities() {
        let pc = [eq(sym(0), Term::Lit(5))];
        assert!(entails(&pc, &lt(Term::Lit(4), sym(0))));
        assert!(entails(&pc, &ne(sym(0), Term::Lit(0))));
        assert!(!entails(&pc, &lt(Term::Lit(5), sym(0))));
    }

    #[test]
    fn parity_contradiction_in_pc_proves_anything() {
        // x + x = y + y + 1 has no integer solutions.
        let two_x = Term::add(sym(0), sym(0));
        let two_y1 = Term::add(Term::add(sym(1), sym(1)), Term::Lit(1));
        let pc = [eq(two_x, two_y1)];
        assert!(entails(&pc, &eq(Term::Lit(0), Term::Lit(1))));
    }

    #[test]
    fn integer_tightening_pins_value() {
        // 0 < 2x and 2x < 4 force x = 1 over the integers.
        let two_x = Term::add(sym(0), sym(0));
        let pc = [lt(Term::Lit(0), two_x.clone()), lt(two_x, Term::Lit(4))];
        assert!(entails(&pc, &eq(sym(0), Term::Lit(1))));
    }

    #[test]
    fn housekeeping_facts_are_inert() {
        let pc = [eq(sym(0), sym(0)), eq(sym(1), sym(1)), lt(sym(0), sym(1))];
        assert!(entails(&pc, &ne(sym(1), sym(0))));
        assert!(!entails(&pc, &eq(sym(0), sym(1))));
    }

    #[test]
    fn split_budget_fails_closed() {
        // 2x ≠ 0 follows from x ≠ 0 but shares no canonical form with it,
        // so membership cannot shortcut and every pc disequality splits.
        let goal = ne(Term::add(sym(0), sym(0)), Term::Lit(0));
        let within: Vec<Formula> = (0..SPLIT_BUDGET as u32)
            .map(|i| ne(sym(i), Term::Lit(0)))
            .collect();
        assert!(entails(&within, &goal));
        let over: Vec<Formula> = (0..(SPLIT_BUDGET as u32 + 1))
            .map(|i| ne(sym(i), Term::Lit(0)))
            .collect();
        assert!(!entails(&over, &goal));
    }

    fn random_term(rng: &mut ChaCha8Rng, depth: u32) -> Term {
        if depth == 0 || rng.random_range(0..3) == 0 {
            if rng.random_range(0..2) == 0 {
                Term::Lit(rng.random_range(-4..=4))
            } else {
                sym(rng.random_range(0..3))
            }
        } else if rng.random_range(0..2) == 0 {
            Term::add(random_term(rng, depth - 1), random_term(rng, depth - 1))
        } else {
            Term::sub(random_term(rng, depth - 1), random_term(rng, depth - 1))
        }
    }

    #[test]
    fn normalize_agrees_with_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let t = random_term(&mut rng, 3);
            let mut env = BTreeMap::new();
            for i in 0..3 {
                env.insert(SymId(i), rng.random_range(-5..=5));
            }
            let lf = normalize(&t).expect("small terms never overflow");
            assert_eq!(lf.eval(&env), t.eval(&env));
        }
    }

    #[test]
    fn smtlib_export_is_deterministic_and_complete() {
        let pc = [lt(Term::Lit(0), sym(1)), ne(sym(0), sym(1))];
        let goal = ne(sym(1), Term::Lit(0));
        let a = export_smtlib(&pc, &goal);
        let b = export_smtlib(&pc, &goal);
        assert_eq!(a, b);
        assert!(a.starts_with("(set-logic QF_LIA)\n"));
        assert!(a.contains("(declare-const x0 Int)"));
        assert!(a.contains("(declare-const x1 Int)"));
        assert!(a.contains("(assert (< 0 x1))"));
        assert!(a.contains("(assert (not (not (= x1 0))))"));
        assert!(a.trim_end().ends_with("(check-sat)"));
    }

    #[test]
    fn countermodel_search_finds_and_rejects() {
        let pc = [ne(sym(0), sym(1))];
        // Not entailed: a countermodel exists.
        assert!(countermodel_search(&pc, &lt(sym(0), sym(1)), -3, 3).is_some());
        // Entailed: no countermodel in any box.
        let pc2 = [lt(sym(0), sym(1))];
        assert!(countermodel_search(&pc2, &ne(sym(0), sym(1)), -6, 6).is_none());
    }
}
