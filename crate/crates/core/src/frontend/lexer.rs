//! Hand-written lexer for the supported C subset.
//!
//! Comments never reach the token stream. Line comments whose body is exactly
//! `@vuln` are recorded as annotation markers so that labels can be attached
//! to statements later on.

use serde::{Deserialize, Serialize};

use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub line: u32,
    pub text: String,
}

/// Everything the lexer extracts from one source file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexOutput {
    pub tokens: Vec<Token>,
    pub comments: Vec<Comment>,
    /// Lines carrying a `// @vuln` marker, ascending.
    pub markers: Vec<u32>,
}

pub const MARKER: &str = "@vuln";

pub const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "int", "long", "register", "return", "short",
    "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
    "volatile", "while",
];

// Longest first so that maximal munch falls out of a linear scan.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~",
    "&", "|", "^", "?", ":", ".",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ','];

/// Splits `source` into tokens, dropping comments.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    lex(source).map(|out| out.tokens)
}

pub fn lex(source: &str) -> Result<LexOutput, FrontendError> {
    Lexer::new(source).run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    out: LexOutput,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            out: LexOutput::default(),
        }
    }

    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, text: String, line: u32) {
        self.out.tokens.push(Token { kind, text, line });
    }

    fn run(mut self) -> Result<LexOutput, FrontendError> {
        while let Some(c) = self.peek(0) {
            let line = self.line;
            if c.is_whitespace() {
                self.bump();
            } else if c == '/' && self.peek(1) == Some('/') {
                self.line_comment();
            } else if c == '/' && self.peek(1) == Some('*') {
                self.block_comment()?;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
                let kind = if word == "NULL" {
                    TokenKind::Literal
                } else if KEYWORDS.contains(&word.as_str()) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                };
                self.push(kind, word, line);
            } else if c.is_ascii_digit()
                || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit()))
            {
                let num = self.take_while(|c| c.is_ascii_alphanumeric() || c == '.');
                self.push(TokenKind::Literal, num, line);
            } else if c == '"' || c == '\'' {
                let lit = self.quoted(c)?;
                self.push(TokenKind::Literal, lit, line);
            } else if PUNCTUATION.contains(&c) {
                self.bump();
                self.push(TokenKind::Punctuation, c.to_string(), line);
            } else if let Some(op) = self.operator() {
                self.push(TokenKind::Operator, op.to_string(), line);
            } else {
                return Err(FrontendError::Lex {
                    line,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
        Ok(self.out)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn line_comment(&mut self) {
        let line = self.line;
        self.pos += 2;
        let body = self.take_while(|c| c != '\n');
        if body.trim() == MARKER {
            self.out.markers.push(line);
        }
        self.out.comments.push(Comment { line, text: body });
    }

    fn block_comment(&mut self) -> Result<(), FrontendError> {
        let line = self.line;
        self.pos += 2;
        let mut body = String::new();
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some('*'), Some('/')) => {
                    self.pos += 2;
                    break;
                }
                (Some(_), _) => body.push(self.bump().unwrap()),
                (None, _) => {
                    return Err(FrontendError::Lex {
                        line,
                        message: "unterminated comment".into(),
                    })
                }
            }
        }
        self.out.comments.push(Comment { line, text: body });
        Ok(())
    }

    fn quoted(&mut self, quote: char) -> Result<String, FrontendError> {
        let line = self.line;
        let mut s = String::new();
        s.push(self.bump().unwrap());
        loop {
            match self.bump() {
                Some('\\') => {
                    s.push('\\');
                    match self.bump() {
                        Some(c) if c != '\n' => s.push(c),
                        _ => break,
                    }
                }
                Some(c) if c == quote => {
                    s.push(c);
                    return Ok(s);
                }
                Some('\n') | None => break,
                Some(c) => s.push(c),
            }
        }
        let what = if quote == '"' {
            "string"
        } else {
            "character literal"
        };
        Err(FrontendError::Lex {
            line,
            message: format!("unterminated {what}"),
        })
    }

    fn operator(&mut self) -> Option<&'static str> {
        let op = OPERATORS
            .iter()
            .find(|op| op.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c)))?;
        self.pos += op.chars().count();
        Some(op)
    }
}

/// Renders tokens back to compact C text (`free(p);`, `x = y + 1;`).
pub fn render(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Token> = None;
    let mut prev_unary = false;
    for tok in tokens {
        let unary = is_prefix_position(prev)
            && matches!(
                tok.text.as_str(),
                "*" | "&" | "-" | "+" | "!" | "~" | "++" | "--"
            );
        if let Some(p) = prev {
            if needs_space(p, tok, prev_unary) {
                out.push(' ');
            }
        }
        out.push_str(&tok.text);
        prev_unary = unary;
        prev = Some(tok);
    }
    out
}

fn is_prefix_position(prev: Option<&Token>) -> bool {
    match prev {
        None => true,
        Some(p) => match p.kind {
            TokenKind::Operator => !matches!(p.text.as_str(), "++" | "--"),
            TokenKind::Punctuation => matches!(p.text.as_str(), "(" | "[" | "," | "{" | ";"),
            TokenKind::Keyword => true,
            _ => false,
        },
    }
}

fn needs_space(prev: &Token, tok: &Token, prev_unary: bool) -> bool {
    let p = prev.text.as_str();
    let t = tok.text.as_str();
    if prev_unary || matches!(p, "(" | "[" | "." | "->") {
        return false;
    }
    if matches!(t, ")" | "]" | ";" | "," | "." | "->") {
        return false;
    }
    if t == "[" {
        return false;
    }
    if t == "(" {
        // calls and sizeof hug the paren, control keywords do not
        return !(prev.kind == TokenKind::Identifier || p == "sizeof" || p == ")" || p == "]");
    }
    if matches!(t, "++" | "--") && matches!(prev.kind, TokenKind::Identifier) {
        return false;
    }
    if matches!(t, "++" | "--") && matches!(p, ")" | "]") {
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn free_call() {
        let toks = tokenize("free(p);").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| (t.kind, t.text.as_str())).collect();
        assert_eq!(
            kinds,
            vec![
                (TokenKind::Identifier, "free"),
                (TokenKind::Punctuation, "("),
                (TokenKind::Identifier, "p"),
                (TokenKind::Punctuation, ")"),
                (TokenKind::Punctuation, ";"),
            ]
        );
    }

    #[test]
    fn block_comment_dropped() {
        // int | x | = | 1 | ;  -- the comment is not a token
        assert_eq!(texts("int x = 1; /* c */"), vec!["int", "x", "=", "1", ";"]);
        let out = lex("int x = 1; /* c */").unwrap();
        assert_eq!(out.comments.len(), 1);
    }

    #[test]
    fn markers_are_captured() {
        let out = lex("a = 1;\nfree(p); // @vuln\n// not a marker @vuln x\n").unwrap();
        assert_eq!(out.markers, vec![2]);
        assert_eq!(out.comments.len(), 2);
    }

    #[test]
    fn maximal_munch() {
        assert_eq!(texts("a<<=b->c++"), vec!["a", "<<=", "b", "->", "c", "++"]);
    }

    #[test]
    fn lines_are_tracked() {
        let toks = tokenize("a\n/* x\ny */ b\n\"s\" c").unwrap();
        let lines: Vec<_> = toks.iter().map(|t| t.line).collect();
        assert_eq!(lines, vec![1, 3, 4, 4]);
    }

    #[test]
    fn unterminated_string_reports_line() {
        let err = tokenize("x;\ny = \"abc;\n").unwrap_err();
        assert!(matches!(err, FrontendError::Lex { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unterminated_comment_reports_line() {
        let err = tokenize("x;\n\n/* open").unwrap_err();
        assert!(matches!(err, FrontendError::Lex { line: 3, .. }));
    }

    #[test]
    fn escapes_in_strings() {
        assert_eq!(texts(r#"s = "a\"b";"#), vec!["s", "=", r#""a\"b""#, ";"]);
    }

    #[test]
    fn render_compact() {
        let r = |s: &str| render(&tokenize(s).unwrap());
        assert_eq!(r("free ( p ) ;"), "free(p);");
        assert_eq!(r("char * str = \"x\" ;"), "char *str = \"x\";");
        assert_eq!(r("f(strlen(str),&str1);"), "f(strlen(str), &str1);");
        assert_eq!(r("if(x>0)"), "if (x > 0)");
        assert_eq!(r("a[i]=b->c;"), "a[i] = b->c;");
        assert_eq!(r("i++"), "i++");
        assert_eq!(r("x = -y * *p;"), "x = -y * *p;");
    }
}
