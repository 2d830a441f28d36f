//! Syntax tree for the C subset.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub functions: Vec<Function>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub line: u32,
    pub return_type: TypeName,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    /// Rendered signature, e.g. `void f(int len, char **out)`.
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: TypeName,
    pub is_pointer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeName {
    /// Base type words, e.g. `unsigned int` or `struct node`.
    pub base: String,
    pub pointer_depth: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Decl(Decl),
    Expr(ExprStmt),
    If {
        cond: Cond,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    While {
        cond: Cond,
        body: Box<Stmt>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Cond,
        step: Option<ExprStmt>,
        body: Box<Stmt>,
    },
    Return {
        line: u32,
        text: String,
        value: Option<Expr>,
    },
    Block(Vec<Stmt>),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decl {
    pub line: u32,
    pub text: String,
    pub base_type: String,
    pub declarators: Vec<Declarator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Declarator {
    pub name: String,
    pub pointer_depth: u8,
    pub array_dims: Vec<Option<Expr>>,
    pub init: Option<Expr>,
}

impl Declarator {
    pub fn is_pointer_like(&self) -> bool {
        self.pointer_depth > 0 || !self.array_dims.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprStmt {
    pub line: u32,
    pub text: String,
    pub expr: Expr,
}

/// A branch or loop condition. `expr` is `None` for `for (;;)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cond {
    pub line: u32,
    pub text: String,
    pub expr: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
    PostInc,
    PostDec,
}

impl UnaryOp {
    pub fn is_increment(self) -> bool {
        matches!(
            self,
            UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Ident(String),
    /// Numeric, string, character literal or `NULL`.
    Literal(String),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: String,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `op` is `=` or a compound operator such as `+=`.
    Assign {
        op: String,
        target: Box<Expr>,
        value: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
    },
    Call {
        callee: String,
        args: Vec<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    Cast {
        ty: TypeName,
        expr: Box<Expr>,
    },
    SizeofType(TypeName),
    SizeofExpr(Box<Expr>),
}

impl Expr {
    /// Visits this expression and every sub-expression in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Ident(_) | Expr::Literal(_) | Expr::SizeofType(_) => {}
            Expr::Unary { operand, .. } => operand.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Assign { target, value, .. } => {
                target.walk(f);
                value.walk(f);
            }
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                cond.walk(f);
                then_expr.walk(f);
                else_expr.walk(f);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            Expr::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            Expr::Member { base, .. } => base.walk(f),
            Expr::Cast { expr, .. } => expr.walk(f),
            Expr::SizeofExpr(e) => e.walk(f),
        }
    }

    /// Strips casts: `(char *)p` is `p` for dataflow purposes.
    pub fn peel_casts(&self) -> &Expr {
        match self {
            Expr::Cast { expr, .. } => expr.peel_casts(),
            e => e,
        }
    }

    /// The variable at the root of an lvalue path (`a` in `a[i].f`, `p` in `*p`).
    pub fn root_var(&self) -> Option<&str> {
        match self {
            Expr::Ident(name) => Some(name),
            Expr::Index { base, .. } | Expr::Member { base, .. } => base.root_var(),
            Expr::Unary {
                op: UnaryOp::Deref | UnaryOp::AddrOf,
                operand,
            } => operand.root_var(),
            Expr::Cast { expr, .. } => expr.root_var(),
            _ => None,
        }
    }
}
