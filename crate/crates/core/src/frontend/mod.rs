//! C-subset front end: lexing, parsing, lowering to statement IR and labels.

pub mod ast;
pub mod labels;
pub mod lexer;
pub mod lower;
pub mod parser;

pub use labels::{label_program, read_labels, LabelMode, LabelWarning};
pub use lexer::{lex, render, tokenize, Token, TokenKind};
pub use lower::{
    lower, Flow, Label, LoweredFunction, LoweredProgram, NodeId, StatementIR, StmtKind,
};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("line {line}: lex error: {message}")]
    Lex { line: u32, message: String },
    #[error("line {line}: parse error: {message}")]
    Parse { line: u32, message: String },
}

impl FrontendError {
    pub fn line(&self) -> u32 {
        match self {
            FrontendError::Lex { line, .. } | FrontendError::Parse { line, .. } => *line,
        }
    }
}

/// Lexes, parses, lowers and labels one source file.
pub fn load_source(
    source: &str,
    mode: LabelMode,
) -> Result<(LoweredProgram, Vec<LabelWarning>), FrontendError> {
    let program = parse(&tokenize(source)?)?;
    let mut lowered = lower(&program);
    let warnings = label_program(source, &mut lowered, mode)?;
    Ok((lowered, warnings))
}
