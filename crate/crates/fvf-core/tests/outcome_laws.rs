//! Algebraic laws of the outcome type, checked on randomly generated
//! finitary trees: satisfaction must be monotone in the postcondition,
//! sequencing must commute with satisfaction, composition must be
//! associative as far as any postcondition can tell, and the blocked and
//! failed leaves must be units of demonic and angelic choice.

use std::rc::Rc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fvf_core::outcome::{angelic2, bot, demonic2, satisfies, seq, single, top, Outcome};

type O = Outcome<i64, i64>;

/// A small finitary tree; depth keeps satisfaction checks cheap.
fn gen_tree(rng: &mut ChaCha8Rng, depth: u32) -> O {
    let roll = if depth == 0 {
        rng.random_range(0..3)
    } else {
        rng.random_range(0..6)
    };
    match roll {
        0 => single(rng.random_range(-8..=8), rng.random_range(-8..=8)),
        1 => top(),
        2 => bot(),
        3 => demonic2(gen_tree(rng, depth - 1), gen_tree(rng, depth - 1)),
        4 => angelic2(gen_tree(rng, depth - 1), gen_tree(rng, depth - 1)),
        _ => Outcome::Msg(
            format!("note {}", rng.random_range(0..100)),
            Box::new(gen_tree(rng, depth - 1)),
        ),
    }
}

/// A continuation with drawn coefficients; leaves depend on the incoming
/// state and answer so associativity is not tested on constants only.
fn gen_kont(rng: &mut ChaCha8Rng) -> Rc<dyn Fn(i64, i64) -> O> {
    let c = rng.random_range(-4..=4);
    let d = rng.random_range(-4..=4);
    match rng.random_range(0..6) {
        0 => Rc::new(move |s, a| single(s + c, a + d)),
        1 => Rc::new(move |_, _| top()),
        2 => Rc::new(move |_, _| bot()),
        3 => Rc::new(move |s, a| demonic2(single(s + c, a), single(s, a + d))),
        4 => Rc::new(move |s, a| angelic2(single(s - c, a * d), bot())),
        _ => Rc::new(move |s, a| Outcome::Msg("k".into(), Box::new(single(a + c, s + d)))),
    }
}

/// A drawn postcondition on final state and answer.
fn gen_post(rng: &mut ChaCha8Rng) -> impl Fn(&i64, &i64) -> bool + Clone {
    let c1 = rng.random_range(-3..=3);
    let c2 = rng.random_range(-3..=3);
    let m = rng.random_range(2..=5);
    let r = rng.random_range(0..m);
    move |s: &i64, a: &i64| (s * c1 + a * c2).rem_euclid(m) == r
}

#[test]
fn satisfaction_is_monotone_in_the_postcondition() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac0);
    for case in 0..1000 {
        let phi = gen_tree(&mut rng, 4);
        let q = gen_post(&mut rng);
        let extra = gen_post(&mut rng);
        // q' is q weakened by disjunction, so q implies q' pointwise.
        let holds_q = satisfies(&phi, &mut |s, a| q(s, a)).unwrap();
        let holds_weaker = satisfies(&phi, &mut |s, a| q(s, a) || extra(s, a)).unwrap();
        assert!(
            !holds_q || holds_weaker,
            "case {case}: satisfaction lost under a weaker postcondition"
        );
    }
}

#[test]
fn blocked_and_failed_are_choice_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac3);
    let mut posts = Vec::new();
    for _ in 0..20 {
        posts.push(gen_post(&mut rng));
    }
    for case in 0..1000 {
        let phi = gen_tree(&mut rng, 4);
        let with_top = demonic2(phi.clone(), top());
        let with_bot = angelic2(phi.clone(), bot());
        for (qi, q) in posts.iter().enumerate() {
            let plain = satisfies(&phi, &mut |s, a| q(s, a)).unwrap();
            assert_eq!(
                satisfies(&with_top, &mut |s, a| q(s, a)).unwrap(),
                plain,
                "case {case}, postcondition {qi}: demonic choice with blocked"
            );
            assert_eq!(
                satisfies(&with_bot, &mut |s, a| q(s, a)).unwrap(),
                plain,
                "case {case}, postcondition {qi}: angelic choice with failed"
            );
        }
    }
}

#[test]
fn sequencing_commutes_with_satisfaction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1);
    let mut posts = Vec::new();
    for _ in 0..20 {
        posts.push(gen_post(&mut rng));
    }
    let mut checked = 0;
    for case in 0..1000 {
        let phi = gen_tree(&mut rng, 4);
        let k = gen_kont(&mut rng);
        let composed = seq(phi.clone(), {
            let k = k.clone();
            Rc::new(move |s, a| k(s, a))
        });
        for (qi, q) in posts.iter().enumerate() {
            let lhs = satisfies(&composed, &mut |s, a| q(s, a)).unwrap();
            let rhs = satisfies(&phi, &mut |s: &i64, a: &i64| {
                satisfies(&k(*s, *a), &mut |t, b| q(t, b)).unwrap()
            })
            .unwrap();
            assert_eq!(
                lhs, rhs,
                "case {case}, postcondition {qi}: \
                 satisfies(seq(phi, k)) != satisfies(phi, satisfies(k))"
            );
            checked += 1;
        }
    }
    assert!(checked >= 20_000);
}

#[test]
fn composition_is_associative_up_to_satisfaction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac2);
    let mut posts = Vec::new();
    for _ in 0..20 {
        posts.push(gen_post(&mut rng));
    }
    for case in 0..1000 {
        let phi = gen_tree(&mut rng, 4);
        let k1 = gen_kont(&mut rng);
        let k2 = gen_kont(&mut rng);
        let left = seq(
            seq(phi.clone(), {
                let k1 = k1.clone();
                Rc::new(move |s, a| k1(s, a))
            }),
            {
                let k2 = k2.clone();
                Rc::new(move |s, a| k2(s, a))
            },
        );
        let right = seq(phi, {
            let (k1, k2) = (k1.clone(), k2.clone());
            Rc::new(move |s, a| {
                seq(k1(s, a), {
                    let k2 = k2.clone();
                    Rc::new(move |t, b| k2(t, b))
                })
            })
        });
        for (qi, q) in posts.iter().enumerate() {
            let l = satisfies(&left, &mut |s, a| q(s, a)).unwrap();
            let r = satisfies(&right, &mut |s, a| q(s, a)).unwrap();
            assert_eq!(l, r, "case {case}, postcondition {qi}");
        }
    }
}
