//! Symbolic execution: states over opaque integer symbols, assertion
//! production and consumption against a symbolic heap, and whole-program
//! verification.

pub mod exec;
pub mod term;

pub use exec::{
    sassume, sconsume, sproduce, svalid_program, svalid_routine, symexec, RoutineVerdict, SymEnv,
    Verdict,
};
pub use term::{seval, seval_bool, Formula, PathCond, SymChunk, SymId, SymState, Term};
