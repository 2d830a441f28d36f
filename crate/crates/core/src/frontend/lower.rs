//! Lowering of the syntax tree into per-function statement IR.
//!
//! Every simple statement, branch condition and loop condition becomes one
//! [`StatementIR`] carrying its def/use sets. The structured control skeleton
//! is kept alongside as a [`Flow`] tree so the CFG builder does not have to
//! rediscover nesting from line numbers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;

/// Deallocation APIs and the argument position holding the released pointer.
pub const FREE_APIS: &[(&str, usize)] = &[
    ("free", 0),
    ("cfree", 0),
    ("kfree", 0),
    ("kfree_sensitive", 0),
    ("vfree", 0),
    ("mempool_free", 0),
    ("kmem_cache_free", 1),
];

pub const ALLOC_APIS: &[&str] = &[
    "malloc",
    "calloc",
    "realloc",
    "strdup",
    "kmalloc",
    "kzalloc",
    "kcalloc",
    "vmalloc",
    "kmem_cache_alloc",
    "mempool_alloc",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StmtKind {
    /// Function entry; defines the parameters.
    Entry,
    Decl,
    Assign,
    Call,
    IfCond,
    LoopCond,
    Return,
    FreeLike,
    AllocLike,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Vulnerable,
    NonVulnerable,
    #[default]
    Unlabeled,
}

impl Label {
    /// 1 for vulnerable, 0 for non-vulnerable.
    pub fn as_class(self) -> Option<usize> {
        match self {
            Label::Vulnerable => Some(1),
            Label::NonVulnerable => Some(0),
            Label::Unlabeled => None,
        }
    }

    pub fn from_class(class: Option<usize>) -> Label {
        match class {
            Some(1) => Label::Vulnerable,
            Some(_) => Label::NonVulnerable,
            None => Label::Unlabeled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementIR {
    pub id: NodeId,
    pub function: String,
    pub line: u32,
    pub kind: StmtKind,
    pub text: String,
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    /// Subset of `defs` the statement may, but need not, write (`&x` call arguments).
    pub may_defs: BTreeSet<String>,
    /// First call in pre-order, if any call appears in the statement.
    pub callee: Option<String>,
    /// Every called name in pre-order.
    pub calls: Vec<String>,
    pub is_pointer_op: bool,
    /// Pointer variables written through (`*p = e`, `p->f = e`, `p[i] = e`).
    pub deref_writes: BTreeSet<String>,
    pub label: Label,
}

impl StatementIR {
    /// Definitions that overwrite the variable on every execution.
    pub fn must_defs(&self) -> impl Iterator<Item = &String> {
        self.defs.iter().filter(|v| !self.may_defs.contains(*v))
    }
}

/// Structured control skeleton of a function body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flow {
    Simple(NodeId),
    Return(NodeId),
    If {
        cond: NodeId,
        then_branch: Vec<Flow>,
        else_branch: Vec<Flow>,
    },
    Loop {
        cond: NodeId,
        body: Vec<Flow>,
        step: Option<NodeId>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoweredFunction {
    pub name: String,
    pub line: u32,
    pub params: Vec<Param>,
    pub entry: NodeId,
    /// Statements in source order; the entry node comes first.
    pub statements: Vec<StatementIR>,
    pub flow: Vec<Flow>,
}

impl LoweredFunction {
    pub fn statement(&self, id: NodeId) -> Option<&StatementIR> {
        self.statements.iter().find(|s| s.id == id)
    }

    pub fn pointer_params(&self) -> impl Iterator<Item = &str> {
        self.params
            .iter()
            .filter(|p| p.is_pointer)
            .map(|p| p.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoweredProgram {
    pub functions: Vec<LoweredFunction>,
}

impl LoweredProgram {
    pub fn function(&self, name: &str) -> Option<&LoweredFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn statements(&self) -> impl Iterator<Item = &StatementIR> {
        self.functions.iter().flat_map(|f| f.statements.iter())
    }

    pub fn statements_mut(&mut self) -> impl Iterator<Item = &mut StatementIR> {
        self.functions
            .iter_mut()
            .flat_map(|f| f.statements.iter_mut())
    }

    pub fn statement(&self, id: NodeId) -> Option<&StatementIR> {
        self.statements().find(|s| s.id == id)
    }

    /// Statement-id → statement index over the whole program.
    pub fn index(&self) -> BTreeMap<NodeId, &StatementIR> {
        self.statements().map(|s| (s.id, s)).collect()
    }

    /// Ordered statement lists keyed by function name.
    pub fn by_function(&self) -> BTreeMap<&str, &[StatementIR]> {
        self.functions
            .iter()
            .map(|f| (f.name.as_str(), f.statements.as_slice()))
            .collect()
    }
}

pub fn lower(program: &Program) -> LoweredProgram {
    let frees = free_summaries(program);
    let mut next_id = 0u32;
    let functions = program
        .functions
        .iter()
        .map(|f| FnLowerer::new(f, &frees, &mut next_id).run())
        .collect();
    LoweredProgram { functions }
}

/// For each function, the parameter positions it (transitively) deallocates.
pub fn free_summaries(program: &Program) -> HashMap<String, BTreeSet<usize>> {
    let mut frees: HashMap<String, BTreeSet<usize>> = FREE_APIS
        .iter()
        .map(|(name, pos)| (name.to_string(), BTreeSet::from([*pos])))
        .collect();
    for f in &program.functions {
        frees.remove(&f.name);
    }
    loop {
        let mut changed = false;
        for f in &program.functions {
            let param_pos: HashMap<&str, usize> = f
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| (p.name.as_str(), i))
                .collect();
            let mut found = BTreeSet::new();
            for_each_expr(&f.body, &mut |e| {
                e.walk(&mut |sub| {
                    if let Expr::Call { callee, args } = sub {
                        if let Some(positions) = frees.get(callee) {
                            for &pos in positions {
                                if let Some(Expr::Ident(arg)) = args.get(pos).map(Expr::peel_casts)
                                {
                                    if let Some(&i) = param_pos.get(arg.as_str()) {
                                        found.insert(i);
                                    }
                                }
                            }
                        }
                    }
                })
            });
            if !found.is_empty() {
                let entry = frees.entry(f.name.clone()).or_default();
                let before = entry.len();
                entry.extend(found);
                changed |= entry.len() != before;
            }
        }
        if !changed {
            break;
        }
    }
    frees
}

fn for_each_expr<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Expr)) {
    for s in stmts {
        match s {
            Stmt::Decl(d) => {
                for decl in &d.declarators {
                    decl.array_dims.iter().flatten().for_each(&mut *f);
                    decl.init.iter().for_each(&mut *f);
                }
            }
            Stmt::Expr(e) => f(&e.expr),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                cond.expr.iter().for_each(&mut *f);
                for_each_expr(std::slice::from_ref(then_branch.as_ref()), f);
                if let Some(e) = else_branch {
                    for_each_expr(std::slice::from_ref(e.as_ref()), f);
                }
            }
            Stmt::While { cond, body } => {
                cond.expr.iter().for_each(&mut *f);
                for_each_expr(std::slice::from_ref(body.as_ref()), f);
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                if let Some(i) = init {
                    for_each_expr(std::slice::from_ref(i.as_ref()), f);
                }
                cond.expr.iter().for_each(&mut *f);
                if let Some(s) = step {
                    f(&s.expr);
                }
                for_each_expr(std::slice::from_ref(body.as_ref()), f);
            }
            Stmt::Return { value, .. } => value.iter().for_each(&mut *f),
            Stmt::Block(inner) => for_each_expr(inner, f),
            Stmt::Empty => {}
        }
    }
}

/// Def/use effects of one statement, accumulated while walking its expressions.
#[derive(Default)]
struct Effects {
    defs: BTreeSet<String>,
    may_defs: BTreeSet<String>,
    uses: BTreeSet<String>,
    calls: Vec<String>,
    deref_writes: BTreeSet<String>,
    /// `p` when the statement is `*p = e` with `p` a plain identifier.
    deref_target: Option<String>,
    /// `(p, x)` when the statement assigns `p = &x`.
    addr_assign: Option<(String, String)>,
    touches_memory: bool,
    declares_pointer: bool,
    frees: bool,
    allocs: bool,
}

struct Extra {
    deref_target: Option<String>,
    addr_assign: Option<(String, String)>,
    depth: usize,
}

struct FnLowerer<'a> {
    func: &'a Function,
    frees: &'a HashMap<String, BTreeSet<usize>>,
    next_id: &'a mut u32,
    pointer_vars: HashSet<String>,
    statements: Vec<StatementIR>,
    extras: Vec<Extra>,
    depth: usize,
}

impl<'a> FnLowerer<'a> {
    fn new(
        func: &'a Function,
        frees: &'a HashMap<String, BTreeSet<usize>>,
        next_id: &'a mut u32,
    ) -> Self {
        let mut pointer_vars: HashSet<String> = func
            .params
            .iter()
            .filter(|p| p.is_pointer)
            .map(|p| p.name.clone())
            .collect();
        collect_pointer_decls(&func.body, &mut pointer_vars);
        FnLowerer {
            func,
            frees,
            next_id,
            pointer_vars,
            statements: Vec::new(),
            extras: Vec::new(),
            depth: 0,
        }
    }

    fn run(mut self) -> LoweredFunction {
        let entry_effects = Effects {
            defs: self.func.params.iter().map(|p| p.name.clone()).collect(),
            ..Effects::default()
        };
        let entry = self.emit(
            self.func.line,
            StmtKind::Entry,
            self.func.signature.clone(),
            entry_effects,
        );
        let mut flow = vec![Flow::Simple(entry)];
        flow.extend(self.block(&self.func.body));
        self.resolve_pointees();
        LoweredFunction {
            name: self.func.name.clone(),
            line: self.func.line,
            params: self.func.params.clone(),
            entry,
            statements: self.statements,
            flow,
        }
    }

    fn emit(&mut self, line: u32, kind: StmtKind, text: String, fx: Effects) -> NodeId {
        let id = NodeId(*self.next_id);
        *self.next_id += 1;
        let kind = match kind {
            StmtKind::Entry | StmtKind::IfCond | StmtKind::LoopCond | StmtKind::Return => kind,
            _ if fx.frees => StmtKind::FreeLike,
            _ if fx.allocs => StmtKind::AllocLike,
            k => k,
        };
        let is_pointer_op = kind != StmtKind::Entry
            && (fx.touches_memory
                || fx.declares_pointer
                || fx
                    .defs
                    .iter()
                    .chain(fx.uses.iter())
                    .any(|v| self.pointer_vars.contains(v)));
        self.statements.push(StatementIR {
            id,
            function: self.func.name.clone(),
            line,
            kind,
            text,
            defs: fx.defs,
            uses: fx.uses,
            may_defs: fx.may_defs,
            callee: fx.calls.first().cloned(),
            calls: fx.calls,
            is_pointer_op,
            deref_writes: fx.deref_writes,
            label: Label::Unlabeled,
        });
        self.extras.push(Extra {
            deref_target: fx.deref_target,
            addr_assign: fx.addr_assign,
            depth: self.depth,
        });
        id
    }

    fn block(&mut self, stmts: &[Stmt]) -> Vec<Flow> {
        let mut flow = Vec::new();
        for s in stmts {
            self.stmt(s, &mut flow);
        }
        flow
    }

    fn nested(&mut self, s: &Stmt) -> Vec<Flow> {
        self.depth += 1;
        let mut flow = Vec::new();
        self.stmt(s, &mut flow);
        self.depth -= 1;
        flow
    }

    fn stmt(&mut self, s: &Stmt, flow: &mut Vec<Flow>) {
        match s {
            Stmt::Decl(d) => {
                let mut fx = Effects::default();
                for decl in &d.declarators {
                    for dim in decl.array_dims.iter().flatten() {
                        self.read(dim, &mut fx);
                    }
                    if let Some(init) = &decl.init {
                        self.read(init, &mut fx);
                        if let Expr::Unary {
                            op: UnaryOp::AddrOf,
                            operand,
                        } = init.peel_casts()
                        {
                            if let Expr::Ident(x) = operand.as_ref() {
                                fx.addr_assign = Some((decl.name.clone(), x.clone()));
                            }
                        }
                    }
                    fx.defs.insert(decl.name.clone());
                    fx.declares_pointer |= decl.is_pointer_like();
                }
                flow.push(Flow::Simple(self.emit(
                    d.line,
                    StmtKind::Decl,
                    d.text.clone(),
                    fx,
                )));
            }
            Stmt::Expr(e) => flow.push(Flow::Simple(self.expr_stmt(e))),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let cond_id = self.cond(cond, StmtKind::IfCond);
                let then_flow = self.nested(then_branch);
                let else_flow = else_branch
                    .as_ref()
                    .map(|e| self.nested(e))
                    .unwrap_or_default();
                flow.push(Flow::If {
                    cond: cond_id,
                    then_branch: then_flow,
                    else_branch: else_flow,
                });
            }
            Stmt::While { cond, body } => {
                let cond_id = self.cond(cond, StmtKind::LoopCond);
                let body = self.nested(body);
                flow.push(Flow::Loop {
                    cond: cond_id,
                    body,
                    step: None,
                });
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                if let Some(init) = init {
                    self.stmt(init, flow);
                }
                let cond_id = self.cond(cond, StmtKind::LoopCond);
                self.depth += 1;
                let step_id = step.as_ref().map(|s| self.expr_stmt(s));
                self.depth -= 1;
                let body = self.nested(body);
                flow.push(Flow::Loop {
                    cond: cond_id,
                    body,
                    step: step_id,
                });
            }
            Stmt::Return { line, text, value } => {
                let mut fx = Effects::default();
                if let Some(v) = value {
                    self.read(v, &mut fx);
                }
                flow.push(Flow::Return(self.emit(
                    *line,
                    StmtKind::Return,
                    text.clone(),
                    fx,
                )));
            }
            Stmt::Block(inner) => {
                for s in inner {
                    self.stmt(s, flow);
                }
            }
            Stmt::Empty => {}
        }
    }

    fn cond(&mut self, cond: &Cond, kind: StmtKind) -> NodeId {
        let mut fx = Effects::default();
        if let Some(e) = &cond.expr {
            self.read(e, &mut fx);
        }
        self.emit(cond.line, kind, cond.text.clone(), fx)
    }

    fn expr_stmt(&mut self, e: &ExprStmt) -> NodeId {
        let mut fx = Effects::default();
        self.read(&e.expr, &mut fx);
        let kind = match e.expr.peel_casts() {
            Expr::Call { .. } => StmtKind::Call,
            Expr::Assign { .. } => StmtKind::Assign,
            Expr::Unary { op, .. } if op.is_increment() => StmtKind::Assign,
            _ => StmtKind::Other,
        };
        self.emit(e.line, kind, e.text.clone(), fx)
    }

    /// Records the variables read by `e`, and the writes of any nested assignment.
    fn read(&self, e: &Expr, fx: &mut Effects) {
        match e {
            Expr::Ident(x) => {
                fx.uses.insert(x.clone());
            }
            Expr::Literal(_) | Expr::SizeofType(_) | Expr::SizeofExpr(_) => {}
            Expr::Unary { op, operand } => match op {
                UnaryOp::Deref => {
                    fx.touches_memory = true;
                    self.read(operand, fx);
                }
                UnaryOp::AddrOf => {
                    fx.touches_memory = true;
                    if let Some(root) = operand.root_var() {
                        fx.uses.insert(root.to_string());
                    }
                    self.read_path_indices(operand, fx);
                }
                op if op.is_increment() => self.write(operand, true, fx),
                _ => self.read(operand, fx),
            },
            Expr::Binary { lhs, rhs, .. } => {
                self.read(lhs, fx);
                self.read(rhs, fx);
            }
            Expr::Assign { op, target, value } => {
                self.read(value, fx);
                self.write(target, op != "=", fx);
                if let (
                    Expr::Ident(p),
                    Expr::Unary {
                        op: UnaryOp::AddrOf,
                        operand,
                    },
                ) = (target.peel_casts(), value.peel_casts())
                {
                    if let Expr::Ident(x) = operand.as_ref() {
                        fx.addr_assign = Some((p.clone(), x.clone()));
                    }
                }
            }
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                self.read(cond, fx);
                self.read(then_expr, fx);
                self.read(else_expr, fx);
            }
            Expr::Call { callee, args } => self.call(callee, args, fx),
            Expr::Index { base, index } => {
                fx.touches_memory = true;
                self.read(base, fx);
                self.read(index, fx);
            }
            Expr::Member { base, arrow, .. } => {
                fx.touches_memory |= *arrow;
                self.read(base, fx);
            }
            Expr::Cast { expr, .. } => self.read(expr, fx),
        }
    }

    fn read_path_indices(&self, e: &Expr, fx: &mut Effects) {
        match e {
            Expr::Index { base, index } => {
                self.read(index, fx);
                self.read_path_indices(base, fx);
            }
            Expr::Member { base, .. } | Expr::Cast { expr: base, .. } => {
                self.read_path_indices(base, fx)
            }
            Expr::Unary {
                op: UnaryOp::Deref,
                operand,
            } => self.read_path_indices(operand, fx),
            _ => {}
        }
    }

    fn write(&self, target: &Expr, compound: bool, fx: &mut Effects) {
        match target.peel_casts() {
            Expr::Ident(x) => {
                fx.defs.insert(x.clone());
                if compound {
                    fx.uses.insert(x.clone());
                }
            }
            Expr::Unary {
                op: UnaryOp::Deref,
                operand,
            } => {
                fx.touches_memory = true;
                if let Expr::Ident(p) = operand.peel_casts() {
                    fx.deref_target = Some(p.clone());
                }
                if let Some(root) = operand.root_var() {
                    fx.defs.insert(root.to_string());
                    fx.deref_writes.insert(root.to_string());
                }
                self.read(operand, fx);
            }
            Expr::Index { base, index } => {
                fx.touches_memory = true;
                if let Some(root) = base.root_var() {
                    fx.defs.insert(root.to_string());
                    fx.deref_writes.insert(root.to_string());
                }
                self.read(base, fx);
                self.read(index, fx);
            }
            Expr::Member { base, arrow, .. } => {
                if let Some(root) = base.root_var() {
                    fx.defs.insert(root.to_string());
                    if *arrow {
                        fx.deref_writes.insert(root.to_string());
                    }
                    if compound {
                        fx.uses.insert(root.to_string());
                    }
                }
                if *arrow {
                    fx.touches_memory = true;
                    self.read(base, fx);
                } else {
                    self.read_path_indices(base, fx);
                }
            }
            other => self.read(other, fx),
        }
    }

    fn call(&self, callee: &str, args: &[Expr], fx: &mut Effects) {
        fx.calls.push(callee.to_string());
        if ALLOC_APIS.contains(&callee) {
            fx.allocs = true;
        }
        for arg in args {
            match arg.peel_casts() {
                Expr::Unary {
                    op: UnaryOp::AddrOf,
                    operand,
                } => {
                    fx.touches_memory = true;
                    if let Some(root) = operand.root_var() {
                        fx.defs.insert(root.to_string());
                        fx.may_defs.insert(root.to_string());
                        fx.uses.insert(root.to_string());
                    }
                    self.read_path_indices(operand, fx);
                }
                other => self.read(other, fx),
            }
        }
        if let Some(positions) = self.frees.get(callee) {
            for &pos in positions {
                if let Some(Expr::Ident(p)) = args.get(pos).map(Expr::peel_casts) {
                    fx.frees = true;
                    fx.defs.insert(p.clone());
                    fx.may_defs.remove(p);
                }
            }
        }
    }

    /// Redirects `*p = e` to define `x` when the only assignment of `p` is a
    /// top-level `p = &x` that precedes the write.
    fn resolve_pointees(&mut self) {
        let params: HashSet<&str> = self.func.params.iter().map(|p| p.name.as_str()).collect();
        let mut assigns: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, (s, extra)) in self.statements.iter().zip(&self.extras).enumerate() {
            for v in &s.defs {
                if extra.deref_target.as_deref() != Some(v.as_str()) {
                    assigns.entry(v.as_str()).or_default().push(i);
                }
            }
        }
        let mut pointee: HashMap<String, (usize, String)> = HashMap::new();
        for (p, sites) in &assigns {
            if params.contains(p) || sites.len() != 1 {
                continue;
            }
            let site = sites[0];
            let extra = &self.extras[site];
            if extra.depth != 0 {
                continue;
            }
            if let Some((ap, x)) = &extra.addr_assign {
                if ap == p {
                    pointee.insert(p.to_string(), (site, x.clone()));
                }
            }
        }
        for (i, extra) in self.extras.iter().enumerate() {
            let Some(p) = &extra.deref_target else {
                continue;
            };
            if let Some((site, x)) = pointee.get(p) {
                if *site < i {
                    let s = &mut self.statements[i];
                    s.defs.remove(p);
                    s.defs.insert(x.clone());
                }
            }
        }
    }
}

fn collect_pointer_decls(stmts: &[Stmt], out: &mut HashSet<String>) {
    for s in stmts {
        match s {
            Stmt::Decl(d) => out.extend(
                d.declarators
                    .iter()
                    .filter(|dc| dc.is_pointer_like())
                    .map(|dc| dc.name.clone()),
            ),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_pointer_decls(std::slice::from_ref(then_branch.as_ref()), out);
                if let Some(e) = else_branch {
                    collect_pointer_decls(std::slice::from_ref(e.as_ref()), out);
                }
            }
            Stmt::While { body, .. } => {
                collect_pointer_decls(std::slice::from_ref(body.as_ref()), out)
            }
            Stmt::For { init, body, .. } => {
                if let Some(i) = init {
                    collect_pointer_decls(std::slice::from_ref(i.as_ref()), out);
                }
                collect_pointer_decls(std::slice::from_ref(body.as_ref()), out);
            }
            Stmt::Block(inner) => collect_pointer_decls(inner, out),
            _ => {}
        }
    }
}
