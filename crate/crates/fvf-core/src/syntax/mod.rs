//! Surface syntax: AST, lexer, parser, printer, and static checks.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod wf;

pub use ast::*;
pub use lexer::Pos;
pub use parser::{parse_assertion, parse_command, parse_program, ParseError, ParseResult};
pub use printer::pretty_print;
pub use wf::{check_well_formed, StaticError, StaticErrorKind};
