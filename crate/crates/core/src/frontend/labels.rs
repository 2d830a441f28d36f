//! Attaches ground-truth labels from `// @vuln` markers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::lexer::lex;
use super::lower::{Label, LoweredProgram, StatementIR};
use super::FrontendError;

/// How statements are labeled when a file carries no marker at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// Unmarked files are treated as entirely non-vulnerable.
    #[default]
    Training,
    /// Unmarked files stay unlabeled.
    Detection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelWarning {
    pub line: u32,
    pub message: String,
}

/// Labels `statements` in place from the markers found in `source`.
pub fn read_labels(
    source: &str,
    statements: &mut [StatementIR],
    mode: LabelMode,
) -> Result<Vec<LabelWarning>, FrontendError> {
    let markers: BTreeSet<u32> = lex(source)?.markers.into_iter().collect();
    Ok(apply_markers(&markers, statements.iter_mut(), mode))
}

pub fn label_program(
    source: &str,
    program: &mut LoweredProgram,
    mode: LabelMode,
) -> Result<Vec<LabelWarning>, FrontendError> {
    let markers: BTreeSet<u32> = lex(source)?.markers.into_iter().collect();
    Ok(apply_markers(&markers, program.statements_mut(), mode))
}

fn apply_markers<'a>(
    markers: &BTreeSet<u32>,
    statements: impl Iterator<Item = &'a mut StatementIR>,
    mode: LabelMode,
) -> Vec<LabelWarning> {
    let mut covered = BTreeSet::new();
    for s in statements {
        s.label = if markers.contains(&s.line) {
            covered.insert(s.line);
            Label::Vulnerable
        } else if markers.is_empty() && mode == LabelMode::Detection {
            Label::Unlabeled
        } else {
            Label::NonVulnerable
        };
    }
    markers
        .difference(&covered)
        .map(|&line| {
            let w = LabelWarning {
                line,
                message: "marker does not annotate any statement".into(),
            };
            log::warn!("line {}: {}", w.line, w.message);
            w
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{lexer::tokenize, lower::lower, parser::parse};

    fn labeled(src: &str, mode: LabelMode) -> (Vec<(u32, Label)>, Vec<LabelWarning>) {
        let mut prog = lower(&parse(&tokenize(src).unwrap()).unwrap());
        let warnings = label_program(src, &mut prog, mode).unwrap();
        (
            prog.statements().map(|s| (s.line, s.label)).collect(),
            warnings,
        )
    }

    #[test]
    fn marked_line_is_vulnerable() {
        let src = "void f(char *p)\n{\n  free(p);\n  free(p); // @vuln\n}\n";
        let (labels, warnings) = labeled(src, LabelMode::Detection);
        assert!(warnings.is_empty());
        assert_eq!(
            labels,
            [
                (1, Label::NonVulnerable),
                (3, Label::NonVulnerable),
                (4, Label::Vulnerable)
            ]
        );
    }

    #[test]
    fn unmarked_file_depends_on_mode() {
        let src = "void f(int x)\n{\n  x = 1;\n}\n";
        let (train, _) = labeled(src, LabelMode::Training);
        assert!(train.iter().all(|(_, l)| *l == Label::NonVulnerable));
        let (detect, _) = labeled(src, LabelMode::Detection);
        assert!(detect.iter().all(|(_, l)| *l == Label::Unlabeled));
    }

    #[test]
    fn dangling_marker_warns() {
        let src = "void f(int x)\n{\n  // @vuln\n  x = 1;\n}\n";
        let (labels, warnings) = labeled(src, LabelMode::Training);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].line, 3);
        assert!(labels.iter().all(|(_, l)| *l == Label::NonVulnerable));
    }
}
