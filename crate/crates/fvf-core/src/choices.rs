//! Choice resolution for executable paths.
//!
//! Demonic integer choices (malloc addresses and cell contents, pattern
//! values, loop havoc) are resolved against a value source: either a fixed
//! script or a seeded random stream. Every drawn value is logged, so any
//! run can be replayed later as a script.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a draw will be used for. Addresses stay positive and keep their
/// distance from earlier ones; plain values stay small so states and
/// counterexamples read well.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawKind {
    Address,
    Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChoiceError {
    #[error("choice entry '{0}' is not an integer")]
    BadEntry(String),
}

/// Random addresses keep at least this distance from one another, so the
/// cells of distinct blocks never interleave.
pub const ADDRESS_GAP: i64 = 64;

// One source lives per run, so the variant size gap is irrelevant and
// boxing the rng would only slow draws down.
#[allow(clippy::large_enum_variant)]
enum SourceKind {
    Script(VecDeque<i64>),
    Random {
        rng: ChaCha8Rng,
        claimed: BTreeSet<i64>,
    },
}

pub struct ValueSource {
    kind: SourceKind,
    log: Vec<i64>,
}

impl ValueSource {
    /// A fixed script, parsed from a comma-separated list such as
    /// `"100,42,24"`. Blank entries are skipped.
    pub fn script_csv(text: &str) -> Result<ValueSource, ChoiceError> {
        let mut values = VecDeque::new();
        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let v: i64 = part
                .parse()
                .map_err(|_| ChoiceError::BadEntry(part.to_string()))?;
            values.push_back(v);
        }
        Ok(ValueSource {
            kind: SourceKind::Script(values),
            log: Vec::new(),
        })
    }

    pub fn from_values(values: impl IntoIterator<Item = i64>) -> ValueSource {
        ValueSource {
            kind: SourceKind::Script(values.into_iter().collect()),
            log: Vec::new(),
        }
    }

    /// A reproducible random source: (seed, stream) fixes the sequence,
    /// and streams under one seed are mutually independent.
    pub fn random(seed: u64, stream: u64) -> ValueSource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        ValueSource {
            kind: SourceKind::Random {
                rng,
                claimed: BTreeSet::new(),
            },
            log: Vec::new(),
        }
    }

    /// Draws the next value; None once a script is exhausted.
    pub fn draw(&mut self, kind: DrawKind) -> Option<i64> {
        let v = match &mut self.kind {
            SourceKind::Script(values) => values.pop_front()?,
            SourceKind::Random { rng, claimed } => match kind {
                DrawKind::Address => loop {
                    let a = rng.random_range(1..=100_000i64);
                    let crowded = claimed
                        .range(a - ADDRESS_GAP..=a + ADDRESS_GAP)
                        .next()
                        .is_some();
                    if !crowded {
                        claimed.insert(a);
                        break a;
                    }
                },
                DrawKind::Value => rng.random_range(-16..=16i64),
            },
        };
        self.log.push(v);
        Some(v)
    }

    /// Everything drawn so far, in order: a replay script for this run.
    pub fn drawn(&self) -> &[i64] {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_parses_and_exhausts() {
        let mut src = ValueSource::script_csv(" 100, 42,24 ").unwrap();
        assert_eq!(src.draw(DrawKind::Address), Some(100));
        assert_eq!(src.draw(DrawKind::Value), Some(42));
        assert_eq!(src.draw(DrawKind::Value), Some(24));
        assert_eq!(src.draw(DrawKind::Value), None);
        assert_eq!(src.drawn(), &[100, 42, 24]);
    }

    #[test]
    fn script_rejects_garbage() {
        match ValueSource::script_csv("1,x") {
            Err(ChoiceError::BadEntry(s)) => assert_eq!(s, "x"),
            Ok(_) => panic!("expected a parse error"),
        }
    }

    #[test]
    fn random_addresses_are_positive_and_spread() {
        let mut src = ValueSource::random(7, 0);
        let mut addrs = Vec::new();
        for _ in 0..50 {
            let a = src.draw(DrawKind::Address).unwrap();
            assert!(a > 0);
            addrs.push(a);
        }
        for (i, a) in addrs.iter().enumerate() {
            for b in &addrs[i + 1..] {
                assert!((a - b).abs() > ADDRESS_GAP, "{a} and {b} too close");
            }
        }
    }

    #[test]
    fn streams_are_independent_but_reproducible() {
        let draw_all = |seed, stream| {
            let mut src = ValueSource::random(seed, stream);
            (0..32)
                .map(|_| src.draw(DrawKind::Value).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw_all(9, 1), draw_all(9, 1));
        assert_ne!(draw_all(9, 1), draw_all(9, 2));
    }
}
