//! Recursive-descent parser producing a [`Program`].

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{render, Token, TokenKind};
use super::FrontendError;

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned",
];
const QUALIFIERS: &[&str] = &["const", "static", "volatile", "register", "auto", "extern"];
const UNSUPPORTED: &[&str] = &[
    "goto", "switch", "case", "default", "do", "break", "continue", "typedef", "union", "enum",
];
/// Common typedef names accepted as builtin types since `typedef` itself is out of the grammar.
const KNOWN_TYPEDEFS: &[&str] = &[
    "size_t",
    "ssize_t",
    "bool",
    "FILE",
    "uint8_t",
    "uint16_t",
    "uint32_t",
    "uint64_t",
    "int8_t",
    "int16_t",
    "int32_t",
    "int64_t",
    "uintptr_t",
    "intptr_t",
    "u8",
    "u16",
    "u32",
    "u64",
    "gfp_t",
];

pub fn parse(tokens: &[Token]) -> Result<Program, FrontendError> {
    Parser {
        toks: tokens,
        pos: 0,
    }
    .program()
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
}

type PResult<T> = Result<T, FrontendError>;

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + off)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.text == text)
    }

    fn line(&self) -> u32 {
        self.peek()
            .or_else(|| self.toks.last())
            .map_or(1, |t| t.line)
    }

    fn bump(&mut self) -> PResult<&'t Token> {
        let tok = self
            .toks
            .get(self.pos)
            .ok_or_else(|| FrontendError::Parse {
                line: self.line(),
                message: "unexpected end of input".into(),
            })?;
        self.pos += 1;
        Ok(tok)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> PResult<&'t Token> {
        match self.peek() {
            Some(t) if t.text == text => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.error(t.line, format!("expected `{text}`, found `{}`", t.text))),
            None => Err(self.error(
                self.line(),
                format!("expected `{text}`, found end of input"),
            )),
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(t.text.clone())
            }
            Some(t) => Err(self.error(t.line, format!("expected identifier, found `{}`", t.text))),
            None => Err(self.error(
                self.line(),
                "expected identifier, found end of input".into(),
            )),
        }
    }

    fn error(&self, line: u32, message: String) -> FrontendError {
        FrontendError::Parse { line, message }
    }

    fn unsupported(&self, line: u32, what: &str) -> FrontendError {
        self.error(line, format!("unsupported construct: {what}"))
    }

    fn text(&self, start: usize) -> String {
        render(&self.toks[start..self.pos])
    }

    fn check_supported(&self) -> PResult<()> {
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Keyword && UNSUPPORTED.contains(&t.text.as_str()) {
                return Err(self.unsupported(t.line, &format!("`{}`", t.text)));
            }
        }
        Ok(())
    }

    fn starts_type(&self, off: usize) -> bool {
        match self.peek_at(off) {
            Some(t) if t.kind == TokenKind::Keyword => {
                TYPE_KEYWORDS.contains(&t.text.as_str())
                    || QUALIFIERS.contains(&t.text.as_str())
                    || t.text == "struct"
            }
            Some(t) if t.kind == TokenKind::Identifier => KNOWN_TYPEDEFS.contains(&t.text.as_str()),
            _ => false,
        }
    }

    /// Declaration start: a type word, or `Name name` (an unknown typedef used as a type).
    fn starts_decl(&self) -> bool {
        if self.starts_type(0) {
            return true;
        }
        matches!(
            (self.peek_at(0), self.peek_at(1)),
            (Some(a), Some(b)) if a.kind == TokenKind::Identifier && b.kind == TokenKind::Identifier
        )
    }

    fn base_type(&mut self) -> PResult<String> {
        let mut words = Vec::new();
        loop {
            self.check_supported()?;
            let Some(t) = self.peek() else { break };
            if t.kind == TokenKind::Keyword && QUALIFIERS.contains(&t.text.as_str()) {
                self.pos += 1;
            } else if t.kind == TokenKind::Keyword && TYPE_KEYWORDS.contains(&t.text.as_str()) {
                self.pos += 1;
                words.push(t.text.clone());
            } else if t.is("struct") {
                self.pos += 1;
                let name = self.ident()?;
                if self.at("{") {
                    return Err(self.unsupported(t.line, "struct definition"));
                }
                words.push(format!("struct {name}"));
            } else if words.is_empty() && t.kind == TokenKind::Identifier {
                self.pos += 1;
                words.push(t.text.clone());
            } else {
                break;
            }
        }
        if words.is_empty() {
            return Err(self.error(self.line(), "expected a type".into()));
        }
        Ok(words.join(" "))
    }

    fn pointer_stars(&mut self) -> u8 {
        let mut depth = 0;
        while self.eat("*") {
            depth += 1;
            while self.eat("const") {}
        }
        depth
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let base = self.base_type()?;
        let pointer_depth = self.pointer_stars();
        Ok(TypeName {
            base,
            pointer_depth,
        })
    }

    // ---- top level ----

    fn program(mut self) -> PResult<Program> {
        let mut functions: Vec<Function> = Vec::new();
        let mut seen = HashSet::new();
        while self.peek().is_some() {
            if let Some(f) = self.external_decl()? {
                if !seen.insert(f.name.clone()) {
                    return Err(self.error(f.line, format!("duplicate function `{}`", f.name)));
                }
                functions.push(f);
            }
        }
        Ok(Program { functions })
    }

    /// Parses a function definition, or skips a prototype (returns `None`).
    fn external_decl(&mut self) -> PResult<Option<Function>> {
        let start = self.pos;
        let line = self.line();
        if !self.starts_decl() {
            self.check_supported()?;
            let t = self.peek().unwrap();
            return Err(self.unsupported(t.line, &format!("`{}` at top level", t.text)));
        }
        let return_type = self.type_name()?;
        if self.at("(") {
            return Err(self.unsupported(line, "function pointer declaration"));
        }
        let name = self.ident()?;
        if !self.at("(") {
            return Err(self.unsupported(line, "global declaration"));
        }
        let params = self.params()?;
        let signature = self.text(start);
        if self.eat(";") {
            return Ok(None);
        }
        if !self.at("{") {
            let t = self.peek();
            return Err(self.error(t.map_or(line, |t| t.line), "expected function body".into()));
        }
        let body = match self.block()? {
            Stmt::Block(stmts) => stmts,
            _ => unreachable!(),
        };
        let params = params
            .into_iter()
            .enumerate()
            .map(|(i, mut p)| {
                if p.name.is_empty() {
                    p.name = format!("_arg{i}");
                }
                p
            })
            .collect();
        Ok(Some(Function {
            name,
            line,
            return_type,
            params,
            body,
            signature,
        }))
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect("(")?;
        let mut params = Vec::new();
        if self.eat(")") {
            return Ok(params);
        }
        if self.at("void") && self.peek_at(1).is_some_and(|t| t.is(")")) {
            self.pos += 2;
            return Ok(params);
        }
        loop {
            if self.eat("...") {
                self.expect(")")?;
                break;
            }
            let line = self.line();
            let mut ty = self.type_name()?;
            if self.at("(") {
                return Err(self.unsupported(line, "function pointer parameter"));
            }
            let name = match self.peek() {
                Some(t) if t.kind == TokenKind::Identifier => self.ident()?,
                _ => String::new(),
            };
            while self.eat("[") {
                while !self.eat("]") {
                    self.bump()?;
                }
                ty.pointer_depth += 1;
            }
            params.push(Param {
                is_pointer: ty.pointer_depth > 0,
                name,
                ty,
            });
            if self.eat(")") {
                break;
            }
            self.expect(",")?;
        }
        Ok(params)
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Stmt> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.eat("}") {
            if self.peek().is_none() {
                return Err(self.error(self.line(), "unterminated block".into()));
            }
            stmts.push(self.statement()?);
        }
        Ok(Stmt::Block(stmts))
    }

    fn statement(&mut self) -> PResult<Stmt> {
        self.check_supported()?;
        let tok = self
            .peek()
            .ok_or_else(|| self.error(self.line(), "expected statement".into()))?;
        match tok.text.as_str() {
            "{" => self.block(),
            ";" => {
                self.pos += 1;
                Ok(Stmt::Empty)
            }
            "if" => self.if_stmt(),
            "while" => self.while_stmt(),
            "for" => self.for_stmt(),
            "return" => self.return_stmt(),
            _ if self.starts_decl() => Ok(Stmt::Decl(self.declaration(true)?)),
            _ => Ok(Stmt::Expr(self.expr_stmt(true)?)),
        }
    }

    fn declaration(&mut self, with_semi: bool) -> PResult<Decl> {
        let start = self.pos;
        let line = self.line();
        let base_type = self.base_type()?;
        let mut declarators = Vec::new();
        loop {
            let pointer_depth = self.pointer_stars();
            if self.at("(") {
                return Err(self.unsupported(line, "function pointer declaration"));
            }
            let name = self.ident()?;
            let mut array_dims = Vec::new();
            while self.eat("[") {
                if self.eat("]") {
                    array_dims.push(None);
                } else {
                    array_dims.push(Some(self.expr()?));
                    self.expect("]")?;
                }
            }
            let init = if self.eat("=") {
                if self.at("{") {
                    return Err(self.unsupported(line, "initializer list"));
                }
                Some(self.assignment()?)
            } else {
                None
            };
            declarators.push(Declarator {
                name,
                pointer_depth,
                array_dims,
                init,
            });
            if !self.eat(",") {
                break;
            }
        }
        if with_semi {
            self.expect(";")?;
        }
        Ok(Decl {
            line,
            text: self.text(start),
            base_type,
            declarators,
        })
    }

    fn expr_stmt(&mut self, with_semi: bool) -> PResult<ExprStmt> {
        let start = self.pos;
        let line = self.line();
        let expr = self.expr()?;
        if with_semi {
            self.expect(";")?;
        }
        Ok(ExprStmt {
            line,
            text: self.text(start),
            expr,
        })
    }

    fn paren_cond(&mut self, start: usize, line: u32) -> PResult<Cond> {
        self.expect("(")?;
        let expr = self.expr()?;
        self.expect(")")?;
        Ok(Cond {
            line,
            text: self.text(start),
            expr: Some(expr),
        })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let line = self.bump()?.line;
        let cond = self.paren_cond(start, line)?;
        let then_branch = Box::new(self.statement()?);
        let else_branch = if self.eat("else") {
            Some(Box::new(self.statement()?))
        } else {
            None
        };
        Ok(Stmt::If {
            cond,
            then_branch,
            else_branch,
        })
    }

    fn while_stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let line = self.bump()?.line;
        let cond = self.paren_cond(start, line)?;
        let body = Box::new(self.statement()?);
        Ok(Stmt::While { cond, body })
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let line = self.bump()?.line;
        self.expect("(")?;
        let init = if self.eat(";") {
            None
        } else if self.starts_decl() {
            Some(Box::new(Stmt::Decl(self.declaration(true)?)))
        } else {
            Some(Box::new(Stmt::Expr(self.expr_stmt(true)?)))
        };
        let cond_expr = if self.at(";") {
            None
        } else {
            Some(self.expr()?)
        };
        self.expect(";")?;
        let step = if self.at(")") {
            None
        } else {
            Some(self.expr_stmt(false)?)
        };
        self.expect(")")?;
        let cond = Cond {
            line,
            text: self.text(start),
            expr: cond_expr,
        };
        let body = Box::new(self.statement()?);
        Ok(Stmt::For {
            init,
            cond,
            step,
            body,
        })
    }

    fn return_stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let line = self.bump()?.line;
        let value = if self.at(";") {
            None
        } else {
            Some(self.expr()?)
        };
        self.expect(";")?;
        Ok(Stmt::Return {
            line,
            text: self.text(start),
            value,
        })
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        self.assignment()
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.ternary()?;
        const ASSIGN_OPS: &[&str] = &[
            "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
        ];
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && ASSIGN_OPS.contains(&t.text.as_str()) {
                self.pos += 1;
                let value = self.assignment()?;
                return Ok(Expr::Assign {
                    op: t.text.clone(),
                    target: Box::new(lhs),
                    value: Box::new(value),
                });
            }
        }
        Ok(lhs)
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat("?") {
            let then_expr = self.expr()?;
            self.expect(":")?;
            let else_expr = self.ternary()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then_expr: Box::new(then_expr),
                else_expr: Box::new(else_expr),
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, min_level: usize) -> PResult<Expr> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["|"],
            &["^"],
            &["&"],
            &["==", "!="],
            &["<", ">", "<=", ">="],
            &["<<", ">>"],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if min_level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(min_level + 1)?;
        while let Some(t) = self.peek() {
            if t.kind != TokenKind::Operator || !LEVELS[min_level].contains(&t.text.as_str()) {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(min_level + 1)?;
            lhs = Expr::Binary {
                op: t.text.clone(),
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let Some(t) = self.peek() else {
            return Err(self.error(self.line(), "expected expression".into()));
        };
        let op = match t.text.as_str() {
            "-" => Some(UnaryOp::Neg),
            "+" => Some(UnaryOp::Plus),
            "!" => Some(UnaryOp::Not),
            "~" => Some(UnaryOp::BitNot),
            "*" => Some(UnaryOp::Deref),
            "&" => Some(UnaryOp::AddrOf),
            "++" => Some(UnaryOp::PreInc),
            "--" => Some(UnaryOp::PreDec),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(Expr::Unary {
                op,
                operand: Box::new(operand),
            });
        }
        if t.is("sizeof") {
            self.pos += 1;
            if self.at("(") && self.starts_type(1) {
                self.pos += 1;
                let ty = self.type_name()?;
                self.expect(")")?;
                return Ok(Expr::SizeofType(ty));
            }
            let e = self.unary()?;
            return Ok(Expr::SizeofExpr(Box::new(e)));
        }
        if t.is("(") && self.starts_type(1) {
            self.pos += 1;
            let ty = self.type_name()?;
            self.expect(")")?;
            let e = self.unary()?;
            return Ok(Expr::Cast {
                ty,
                expr: Box::new(e),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            let Some(t) = self.peek() else { break };
            match t.text.as_str() {
                "(" => {
                    let Expr::Ident(callee) = e else {
                        return Err(self.unsupported(t.line, "indirect call"));
                    };
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.eat(")") {
                        loop {
                            args.push(self.assignment()?);
                            if self.eat(")") {
                                break;
                            }
                            self.expect(",")?;
                        }
                    }
                    e = Expr::Call { callee, args };
                }
                "[" => {
                    self.pos += 1;
                    let index = self.expr()?;
                    self.expect("]")?;
                    e = Expr::Index {
                        base: Box::new(e),
                        index: Box::new(index),
                    };
                }
                "." | "->" => {
                    self.pos += 1;
                    let field = self.ident()?;
                    e = Expr::Member {
                        base: Box::new(e),
                        field,
                        arrow: t.text == "->",
                    };
                }
                "++" | "--" => {
                    self.pos += 1;
                    let op = if t.text == "++" {
                        UnaryOp::PostInc
                    } else {
                        UnaryOp::PostDec
                    };
                    e = Expr::Unary {
                        op,
                        operand: Box::new(e),
                    };
                }
                _ => break,
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        self.check_supported()?;
        let t = self.bump()?;
        match t.kind {
            TokenKind::Identifier => Ok(Expr::Ident(t.text.clone())),
            TokenKind::Literal => {
                let mut text = t.text.clone();
                // adjacent string literals concatenate
                while text.starts_with('"') && self.peek().is_some_and(|n| n.text.starts_with('"'))
                {
                    text.push(' ');
                    text.push_str(&self.bump()?.text);
                }
                Ok(Expr::Literal(text))
            }
            _ if t.is("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(self.error(t.line, format!("unexpected token `{}`", t.text))),
        }
    }
}
