use crate::json::JsonValue;
use crate::pattern::Pattern;

use super::builtins::Builtin;
use super::timefmt::TimeFormat;

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    /// Byte offset of the expression in the program source.
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Eq => "==",
            BinaryOp::NotEq => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LetBinding {
    pub name: String,
    pub value: Expr,
}

/// The `* - a, b : expr` clause of an object constructor.
#[derive(Debug, Clone)]
pub struct Matcher {
    pub excluded: Vec<String>,
    pub value: Box<Expr>,
}

#[derive(Debug, Clone)]
pub enum Callee {
    /// Filled in by name resolution.
    Unresolved,
    Builtin(Builtin),
    User(usize),
}

/// Compile-time preparation of literal builtin arguments.
#[derive(Debug, Clone)]
pub enum Prepared {
    Pattern(Pattern),
    TimeFormat(TimeFormat),
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Literal(JsonValue),
    /// `.`
    Context,
    /// `target.key`; a leading `.key` has `Context` as its target.
    Access {
        target: Box<Expr>,
        key: String,
    },
    Index {
        target: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        target: Box<Expr>,
        from: Option<Box<Expr>>,
        to: Option<Box<Expr>>,
    },
    Object {
        lets: Vec<LetBinding>,
        entries: Vec<(Expr, Expr)>,
        matcher: Option<Matcher>,
    },
    ObjectFor {
        source: Box<Expr>,
        lets: Vec<LetBinding>,
        key: Box<Expr>,
        value: Box<Expr>,
        filter: Option<Box<Expr>>,
    },
    Array(Vec<Expr>),
    ArrayFor {
        source: Box<Expr>,
        lets: Vec<LetBinding>,
        value: Box<Expr>,
        filter: Option<Box<Expr>>,
    },
    If {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Option<Box<Expr>>,
    },
    Let {
        binding: Box<LetBinding>,
        body: Box<Expr>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
        callee: Callee,
        prepared: Option<Prepared>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Var(String),
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
    pub offset: usize,
}
