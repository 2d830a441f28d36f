//! Statement tokenization and paragraph-vector node embeddings.

pub mod doc2vec;
pub mod vocab;

use std::collections::HashMap;

pub use doc2vec::{
    pvdm_loss_grad, train_doc2vec, Doc2VecConfig, Doc2VecModel, ModelFormat, PvdmGrad,
};
pub use vocab::{Vocab, OOV};

use crate::frontend::{tokenize, StatementIR, TokenKind};
use crate::persist::PersistError;

pub const EMPTY_TOKEN: &str = "<empty>";

#[derive(Debug, thiserror::Error)]
pub enum EmbedderError {
    #[error("no training documents")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed model file: {0}")]
    Format(String),
}

pub fn statement_tokens(stmt: &StatementIR, normalize_identifiers: bool) -> Vec<String> {
    text_tokens(&stmt.text, normalize_identifiers)
}

/// Lexical tokens of a statement text. Unlexable text falls back to
/// whitespace splitting; empty text becomes a single placeholder token.
pub fn text_tokens(text: &str, normalize_identifiers: bool) -> Vec<String> {
    let Ok(tokens) = tokenize(text) else {
        let words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        return if words.is_empty() {
            vec![EMPTY_TOKEN.to_string()]
        } else {
            words
        };
    };
    if tokens.is_empty() {
        return vec![EMPTY_TOKEN.to_string()];
    }
    if !normalize_identifiers {
        return tokens.into_iter().map(|t| t.text).collect();
    }
    // variables become VAR0, VAR1, ... in order of appearance; callees stay
    let mut names: HashMap<String, usize> = HashMap::new();
    (0..tokens.len())
        .map(|i| {
            let t = &tokens[i];
            let is_callee = tokens.get(i + 1).is_some_and(|n| n.is("("));
            if t.kind == TokenKind::Identifier && !is_callee {
                let next = names.len();
                format!("VAR{}", names.entry(t.text.clone()).or_insert(next))
            } else {
                t.text.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokens_keep_punctuation() {
        assert_eq!(
            text_tokens("free(p);", false),
            v(&["free", "(", "p", ")", ";"])
        );
        assert_eq!(
            text_tokens("x = y + 1;", false),
            v(&["x", "=", "y", "+", "1", ";"])
        );
        assert_eq!(text_tokens("", false), v(&[EMPTY_TOKEN]));
    }

    #[test]
    fn normalization_renames_variables_only() {
        assert_eq!(
            text_tokens("q = memcpy(q, p);", true),
            v(&["VAR0", "=", "memcpy", "(", "VAR0", ",", "VAR1", ")", ";"])
        );
    }
}
