//! Concrete-execution properties over the corpus: once a run settles at
//! some depth budget it must settle the same way at every larger budget,
//! and stripping annotations must not change what a run does.

use fvf_core::choices::ValueSource;
use fvf_core::concrete::{self, RunOutcome};
use fvf_core::corpus::{corpus, erase_annotations};

const DEPTHS: [u32; 9] = [1, 2, 3, 4, 6, 8, 16, 32, 64];

fn outcomes_agree(prior: &RunOutcome, now: &RunOutcome) -> bool {
    match (prior, now) {
        (RunOutcome::Completed(a), RunOutcome::Completed(b)) => a.semantic_eq(b),
        (RunOutcome::Failed(m), RunOutcome::Failed(n)) => m == n,
        _ => false,
    }
}

#[test]
fn settled_runs_are_depth_monotone() {
    let entries = corpus().unwrap();
    let mut settled_runs = 0;
    for e in &entries {
        for seed in 0..8u64 {
            let mut settled: Option<(u32, RunOutcome)> = None;
            for depth in DEPTHS {
                let mut src = ValueSource::random(0xdee9, seed);
                let report = concrete::run(&e.program, depth, &mut src);
                match (&settled, report.outcome) {
                    (None, RunOutcome::Blocked(_)) => {}
                    (None, outcome) => settled = Some((depth, outcome)),
                    (Some((at, prior)), outcome) => {
                        assert!(
                            outcomes_agree(prior, &outcome),
                            "{} seed {seed}: settled at depth {at} as {prior:?}, \
                             but depth {depth} gave {outcome:?}",
                            e.name
                        );
                    }
                }
            }
            if settled.is_some() {
                settled_runs += 1;
            }
        }
    }
    assert!(settled_runs >= 50, "only {settled_runs} runs ever settled");
}

#[test]
fn annotation_erasure_preserves_concrete_runs() {
    let entries = corpus().unwrap();
    for e in &entries {
        let erased = erase_annotations(&e.program);
        for seed in 0..10u64 {
            let mut a = ValueSource::random(0xe7a5, seed);
            let mut b = ValueSource::random(0xe7a5, seed);
            let full = concrete::run(&e.program, 64, &mut a);
            let bare = concrete::run(&erased, 64, &mut b);
            match (full.outcome, bare.outcome) {
                (RunOutcome::Completed(p), RunOutcome::Completed(q)) => assert!(
                    p.semantic_eq(&q),
                    "{} seed {seed}: final states diverged",
                    e.name
                ),
                // Real memory operations survive erasure verbatim, so the
                // messages must match, not just the classification.
                (RunOutcome::Failed(m), RunOutcome::Failed(n)) => {
                    assert_eq!(m, n, "{} seed {seed}", e.name)
                }
                (RunOutcome::Blocked(m), RunOutcome::Blocked(n)) => {
                    assert_eq!(m, n, "{} seed {seed}", e.name)
                }
                (x, y) => panic!(
                    "{} seed {seed}: annotated run ended {x:?}, erased run ended {y:?}",
                    e.name
                ),
            }
        }
    }
}
