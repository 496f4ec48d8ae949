//! A modular program verifier for a small heap-manipulating language.
//!
//! The pipeline is organized around one algebra of execution outcomes and
//! three executors that share it:
//!
//! - [`syntax`] parses annotated programs (contracts, loop invariants,
//!   predicate definitions, ghost `open`/`close` commands).
//! - [`outcome`] defines the outcome trees all executors produce: demonic and
//!   angelic choice over typed index domains, with decidable satisfaction on
//!   the finitary fragment.
//! - [`concrete`] runs programs for real, depth-bounded, ignoring all
//!   annotations; nondeterminism (allocation) is resolved by a choice script.
//! - [`semiconcrete`] executes with ground values but mediates every heap
//!   access through produce/consume of assertions, drawing demonic values
//!   from an explicit source.
//! - [`symbolic`] verifies routines against their contracts over symbolic
//!   states, discharging facts through [`prover`].
//! - [`corpus`] ships the example programs and the differential-soundness
//!   harness that replays verified programs concretely.

pub mod choices;
pub mod concrete;
pub mod corpus;
pub mod outcome;
pub mod prover;
pub mod semiconcrete;
pub mod store;
pub mod symbolic;
pub mod syntax;
