//! Execution outcomes.
//!
//! An `Outcome<S, A>` is a tree describing every way a computation over
//! states `S` can end. Leaves carry a final state and an answer; interior
//! nodes are demonic choices (the machine picks, so every branch must be
//! acceptable) or angelic choices (the program picks, so some branch must
//! be acceptable), each over a typed index domain. `Demonic` over the empty
//! domain blocks (vacuously acceptable, written ⊤); `Angelic` over the empty
//! domain fails (unsatisfiable, written ⊥). `Msg` nodes carry observability
//! text and are transparent to satisfaction and sequencing.
//!
//! Satisfaction is decidable on the finitary fragment, where every choice
//! node indexes over the empty or boolean domain. Integer-indexed nodes keep
//! their branches as functions, so infinite trees stay representable; they
//! are navigated, never enumerated.

use std::fmt;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexDomain {
    Empty,
    Bool,
    Int,
    Opaque,
}

impl IndexDomain {
    /// Only empty and boolean domains can be exhaustively enumerated.
    pub fn is_finitary(self) -> bool {
        matches!(self, IndexDomain::Empty | IndexDomain::Bool)
    }
}

pub type IntBranch<S, A> = Rc<dyn Fn(i64) -> Outcome<S, A>>;

#[derive(Clone)]
pub enum Branches<S, A> {
    Empty,
    Bool(Box<Outcome<S, A>>, Box<Outcome<S, A>>),
    Int(IntBranch<S, A>),
    /// A choice over a domain with no available enumerator. Nothing in the
    /// executors builds one; it exists so foreign trees can be classified
    /// (satisfaction reports them as non-finitary).
    Opaque,
}

impl<S, A> Branches<S, A> {
    pub fn domain(&self) -> IndexDomain {
        match self {
            Branches::Empty => IndexDomain::Empty,
            Branches::Bool(..) => IndexDomain::Bool,
            Branches::Int(_) => IndexDomain::Int,
            Branches::Opaque => IndexDomain::Opaque,
        }
    }
}

#[derive(Clone)]
pub enum Outcome<S, A> {
    Single(S, A),
    Demonic(Branches<S, A>),
    Angelic(Branches<S, A>),
    Msg(String, Box<Outcome<S, A>>),
}

impl<S: fmt::Debug, A: fmt::Debug> fmt::Debug for Outcome<S, A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Single(s, a) => write!(f, "Single({s:?}, {a:?})"),
            Outcome::Demonic(Branches::Empty) => write!(f, "Top"),
            Outcome::Angelic(Branches::Empty) => write!(f, "Bot"),
            Outcome::Demonic(Branches::Bool(l, r)) => write!(f, "Demonic({l:?}, {r:?})"),
            Outcome::Angelic(Branches::Bool(l, r)) => write!(f, "Angelic({l:?}, {r:?})"),
            Outcome::Demonic(br) => write!(f, "Demonic(<{:?}>)", br.domain()),
            Outcome::Angelic(br) => write!(f, "Angelic(<{:?}>)", br.domain()),
            Outcome::Msg(t, rest) => write!(f, "Msg({t:?}, {rest:?})"),
        }
    }
}

/// Blocked: the demonic choice over no alternatives. Satisfies everything.
pub fn top<S, A>() -> Outcome<S, A> {
    Outcome::Demonic(Branches::Empty)
}

/// Failed: the angelic choice over no alternatives. Satisfies nothing.
pub fn bot<S, A>() -> Outcome<S, A> {
    Outcome::Angelic(Branches::Empty)
}

pub fn single<S, A>(s: S, a: A) -> Outcome<S, A> {
    Outcome::Single(s, a)
}

pub fn demonic2<S, A>(l: Outcome<S, A>, r: Outcome<S, A>) -> Outcome<S, A> {
    Outcome::Demonic(Branches::Bool(Box::new(l), Box::new(r)))
}

pub fn angelic2<S, A>(l: Outcome<S, A>, r: Outcome<S, A>) -> Outcome<S, A> {
    Outcome::Angelic(Branches::Bool(Box::new(l), Box::new(r)))
}

pub fn demonic_int<S, A>(f: impl Fn(i64) -> Outcome<S, A> + 'static) -> Outcome<S, A> {
    Outcome::Demonic(Branches::Int(Rc::new(f)))
}

impl<S, A> Outcome<S, A> {
    pub fn is_single(&self) -> bool {
        matches!(self, Outcome::Single(..))
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Outcome::Angelic(Branches::Empty))
    }

    pub fn is_block(&self) -> bool {
        matches!(self, Outcome::Demonic(Branches::Empty))
    }

    /// Skips over `Msg` wrappers to the first structural node.
    pub fn strip_msgs(&self) -> &Outcome<S, A> {
        let mut cur = self;
        while let Outcome::Msg(_, rest) = cur {
            cur = rest;
        }
        cur
    }

    /// True when every choice node in the (fully materialized) tree indexes
    /// over an enumerable domain.
    pub fn is_finitary(&self) -> bool {
        match self {
            Outcome::Single(..) => true,
            Outcome::Demonic(br) | Outcome::Angelic(br) => match br {
                Branches::Empty => true,
                Branches::Bool(l, r) => l.is_finitary() && r.is_finitary(),
                Branches::Int(_) | Branches::Opaque => false,
            },
            Outcome::Msg(_, rest) => rest.is_finitary(),
        }
    }

    /// All leaf states and answers, left to right, looking through messages.
    pub fn singles(&self) -> Vec<(&S, &A)> {
        let mut out = Vec::new();
        self.collect_singles(&mut out);
        out
    }

    fn collect_singles<'a>(&'a self, out: &mut Vec<(&'a S, &'a A)>) {
        match self {
            Outcome::Single(s, a) => out.push((s, a)),
            Outcome::Demonic(Branches::Bool(l, r)) | Outcome::Angelic(Branches::Bool(l, r)) => {
                l.collect_singles(out);
                r.collect_singles(out);
            }
            Outcome::Demonic(_) | Outcome::Angelic(_) => {}
            Outcome::Msg(_, rest) => rest.collect_singles(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavStep {
    Here,
    AtBool(bool),
    AtInt(i64),
}

/// Descends one step into a choice node. Returns `None` when the step does
/// not match the node's shape (including `At*` on leaves or messages).
pub fn navigate<S: Clone, A: Clone>(phi: &Outcome<S, A>, step: NavStep) -> Option<Outcome<S, A>> {
    match step {
        NavStep::Here => Some(phi.clone()),
        NavStep::AtBool(b) => match phi {
            Outcome::Demonic(Branches::Bool(l, r)) | Outcome::Angelic(Branches::Bool(l, r)) => {
                Some(if b { (**l).clone() } else { (**r).clone() })
            }
            _ => None,
        },
        NavStep::AtInt(z) => match phi {
            Outcome::Demonic(Branches::Int(f)) | Outcome::Angelic(Branches::Int(f)) => Some(f(z)),
            _ => None,
        },
    }
}

/// Walks a navigation path, returning the outcome it lands on.
pub fn navigate_path<S: Clone, A: Clone>(
    phi: &Outcome<S, A>,
    steps: &[NavStep],
) -> Option<Outcome<S, A>> {
    let mut cur = phi.clone();
    for step in steps {
        cur = navigate(&cur, *step)?;
    }
    Some(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("satisfaction is undecidable here: encountered a non-finitary {domain:?} choice node")]
pub struct NonFinitary {
    pub domain: IndexDomain,
}

/// Decides whether an outcome satisfies a postcondition on states and
/// answers: leaves are tested, demonic nodes need every branch acceptable,
/// angelic nodes need some branch acceptable, messages are transparent.
/// Errors out on integer or opaque choice nodes.
pub fn satisfies<S, A, Q>(phi: &Outcome<S, A>, q: &mut Q) -> Result<bool, NonFinitary>
where
    Q: FnMut(&S, &A) -> bool,
{
    match phi {
        Outcome::Single(s, a) => Ok(q(s, a)),
        Outcome::Demonic(Branches::Empty) => Ok(true),
        Outcome::Angelic(Branches::Empty) => Ok(false),
        Outcome::Demonic(Branches::Bool(l, r)) => Ok(satisfies(l, q)? && satisfies(r, q)?),
        Outcome::Angelic(Branches::Bool(l, r)) => Ok(satisfies(l, q)? || satisfies(r, q)?),
        Outcome::Demonic(br) | Outcome::Angelic(br) => Err(NonFinitary {
            domain: br.domain(),
        }),
        Outcome::Msg(_, rest) => satisfies(rest, q),
    }
}

/// Sequential composition: runs `k` from every leaf, distributing over
/// choices and preserving messages in place.
pub fn seq<S: 'static, A: 'static, T: 'static, B: 'static>(
    phi: Outcome<S, A>,
    k: Rc<dyn Fn(S, A) -> Outcome<T, B>>,
) -> Outcome<T, B> {
    match phi {
        Outcome::Single(s, a) => k(s, a),
        Outcome::Demonic(br) => Outcome::Demonic(seq_branches(br, k)),
        Outcome::Angelic(br) => Outcome::Angelic(seq_branches(br, k)),
        Outcome::Msg(t, rest) => Outcome::Msg(t, Box::new(seq(*rest, k))),
    }
}

fn seq_branches<S: 'static, A: 'static, T: 'static, B: 'static>(
    br: Branches<S, A>,
    k: Rc<dyn Fn(S, A) -> Outcome<T, B>>,
) -> Branches<T, B> {
    match br {
        Branches::Empty => Branches::Empty,
        Branches::Bool(l, r) => Branches::Bool(Box::new(seq(*l, k.clone())), Box::new(seq(*r, k))),
        Branches::Int(f) => Branches::Int(Rc::new(move |z| seq(f(z), k.clone()))),
        Branches::Opaque => Branches::Opaque,
    }
}

/// `seq` with an inline continuation.
pub fn seq_fn<S: 'static, A: 'static, T: 'static, B: 'static>(
    phi: Outcome<S, A>,
    k: impl Fn(S, A) -> Outcome<T, B> + 'static,
) -> Outcome<T, B> {
    seq(phi, Rc::new(k))
}

/// A state transformer producing an outcome; the shape every executor
/// primitive takes.
pub type Mutator<S, A> = Rc<dyn Fn(S) -> Outcome<S, A>>;

/// The mutator that changes nothing and answers `a`.
pub fn yield_val<S: 'static, A: Clone + 'static>(a: A) -> Mutator<S, A> {
    Rc::new(move |s| Outcome::Single(s, a.clone()))
}

/// The mutator that changes nothing and answers unit.
pub fn noop<S: 'static>() -> Mutator<S, ()> {
    yield_val(())
}

/// Answer-passing composition of mutators.
pub fn mutator_seq<S: 'static, A: 'static, B: 'static>(
    c: Mutator<S, A>,
    k: Rc<dyn Fn(A) -> Mutator<S, B>>,
) -> Mutator<S, B> {
    Rc::new(move |s| {
        let k = k.clone();
        seq_fn(c(s), move |s2, a| (k(a))(s2))
    })
}

/// Runs `c` then `c2`, keeping `c`'s answer.
pub fn side_seq<S: 'static, A: Clone + 'static, B: 'static>(
    c: Mutator<S, A>,
    c2: Mutator<S, B>,
) -> Mutator<S, A> {
    Rc::new(move |s| {
        let c2 = c2.clone();
        seq_fn(c(s), move |s2, a: A| {
            let a = a.clone();
            seq_fn(c2(s2), move |s3, _| Outcome::Single(s3, a.clone()))
        })
    })
}

/// Finds a message-path witnessing failure: the texts leading to the first
/// `⊥` leaf that a satisfaction check would stumble over, or `None` when the
/// tree satisfies the trivial postcondition.
pub fn first_failure<S, A>(phi: &Outcome<S, A>) -> Option<Vec<String>> {
    match phi {
        Outcome::Single(..) | Outcome::Demonic(Branches::Empty) => None,
        Outcome::Angelic(Branches::Empty) => Some(Vec::new()),
        Outcome::Demonic(Branches::Bool(l, r)) => first_failure(l).or_else(|| first_failure(r)),
        Outcome::Angelic(Branches::Bool(l, r)) => match (first_failure(l), first_failure(r)) {
            (Some(path), Some(_)) => Some(path),
            _ => None,
        },
        Outcome::Demonic(_) | Outcome::Angelic(_) => None,
        Outcome::Msg(t, rest) => first_failure(rest).map(|mut path| {
            path.insert(0, t.clone());
            path
        }),
    }
}

/// All message texts in depth-first order, left branches first. Integer
/// branches are not enumerated.
pub fn trace_lines<S, A>(phi: &Outcome<S, A>) -> Vec<String> {
    fn walk<S, A>(phi: &Outcome<S, A>, out: &mut Vec<String>) {
        match phi {
            Outcome::Single(..) => {}
            Outcome::Demonic(Branches::Bool(l, r)) | Outcome::Angelic(Branches::Bool(l, r)) => {
                walk(l, out);
                walk(r, out);
            }
            Outcome::Demonic(_) | Outcome::Angelic(_) => {}
            Outcome::Msg(t, rest) => {
                out.push(t.clone());
                walk(rest, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(phi, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    type O = Outcome<u8, u8>;

    #[test]
    fn yield_answers_without_touching_state() {
        let m: Mutator<u8, u8> = yield_val(5);
        match m(9) {
            Outcome::Single(s, a) => {
                assert_eq!((s, a), (9, 5));
            }
            _ => panic!("expected a singleton"),
        }
    }

    #[test]
    fn noop_is_yield_unit() {
        let m: Mutator<u8, ()> = noop();
        assert!(matches!(m(3), Outcome::Single(3, ())));
    }

    #[test]
    fn side_seq_keeps_first_answer() {
        let m = side_seq::<u8, u8, u8>(yield_val(1), yield_val(2));
        match m(0) {
            Outcome::Single(_, a) => assert_eq!(a, 1),
            _ => panic!("expected a singleton"),
        }
    }

    #[test]
    fn satisfaction_of_leaves_and_units() {
        let tt = |_: &u8, _: &u8| true;
        assert_eq!(satisfies(&single(0u8, 0u8), &mut tt.clone()), Ok(true));
        assert_eq!(satisfies::<u8, u8, _>(&top(), &mut tt.clone()), Ok(true));
        assert_eq!(satisfies::<u8, u8, _>(&bot(), &mut tt.clone()), Ok(false));
        // A demonic node with a failing branch fails as a whole.
        let phi: O = demonic2(single(0, 0), bot());
        assert_eq!(satisfies(&phi, &mut tt.clone()), Ok(false));
        // An angelic node with one good branch succeeds.
        let phi: O = angelic2(bot(), single(0, 0));
        assert_eq!(satisfies(&phi, &mut tt.clone()), Ok(true));
    }

    #[test]
    fn messages_are_transparent() {
        let phi: O = Outcome::Msg("note".into(), Box::new(bot()));
        assert_eq!(satisfies(&phi, &mut |_, _| true), Ok(false));
        assert!(phi.strip_msgs().is_fail());
        assert!(!phi.is_fail());
    }

    #[test]
    fn non_finitary_nodes_are_reported() {
        let phi: O = demonic_int(|_| top());
        assert_eq!(
            satisfies(&phi, &mut |_, _| true),
            Err(NonFinitary {
                domain: IndexDomain::Int
            })
        );
        assert!(!phi.is_finitary());
        let phi: O = Outcome::Demonic(Branches::Opaque);
        assert_eq!(
            satisfies(&phi, &mut |_, _| true),
            Err(NonFinitary {
                domain: IndexDomain::Opaque
            })
        );
    }

    #[test]
    fn seq_runs_continuations_from_leaves() {
        let phi: O = single(1, 10);
        let out = seq_fn(phi, |s, a| single(s + 1, a + 1));
        match out {
            Outcome::Single(s, a) => assert_eq!((s, a), (2, 11)),
            _ => panic!("expected a singleton"),
        }
    }

    #[test]
    fn seq_absorbs_failure_and_block() {
        let out = seq_fn::<u8, u8, u8, u8>(bot(), |_, _| single(0, 0));
        assert!(out.is_fail());
        let out = seq_fn::<u8, u8, u8, u8>(top(), |_, _| bot());
        assert!(out.is_block());
    }

    #[test]
    fn seq_distributes_through_int_branches() {
        let phi: O = demonic_int(|z| single(z as u8, 0));
        let out = seq_fn(phi, |s, a| single(s, a + 1));
        let down = navigate(&out, NavStep::AtInt(7)).expect("int node");
        match down {
            Outcome::Single(s, a) => assert_eq!((s, a), (7, 1)),
            _ => panic!("expected a singleton"),
        }
    }

    #[test]
    fn navigation_matches_shapes_only() {
        let phi: O = single(0, 0);
        assert!(navigate(&phi, NavStep::AtBool(true)).is_none());
        assert!(navigate(&phi, NavStep::AtInt(3)).is_none());
        assert!(navigate(&phi, NavStep::Here).unwrap().is_single());
        let phi: O = demonic2(top(), bot());
        assert!(navigate(&phi, NavStep::AtBool(true)).unwrap().is_block());
        assert!(navigate(&phi, NavStep::AtBool(false)).unwrap().is_fail());
    }

    #[test]
    fn first_failure_reports_message_path() {
        let failing: O = Outcome::Msg(
            "step 1".into(),
            Box::new(demonic2(
                top(),
                Outcome::Msg("step 2".into(), Box::new(bot())),
            )),
        );
        assert_eq!(
            first_failure(&failing),
            Some(vec!["step 1".to_string(), "step 2".to_string()])
        );
        let fine: O = demonic2(single(0, 0), top());
        assert_eq!(first_failure(&fine), None);
    }
}
