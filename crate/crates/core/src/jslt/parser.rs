use crate::json::JsonValue;

use super::ast::{BinaryOp, Callee, Expr, ExprKind, FunctionDef, LetBinding, Matcher};
use super::builtins::Builtin;
use super::error::{CompileError, CompileErrorKind};
use super::lexer::{tokenize, Tok, Token};

/// Recursion grows the stack in `STACK_CHUNK` steps once less than
/// `RED_ZONE` bytes remain.
pub(crate) const RED_ZONE: usize = 64 * 1024;
pub(crate) const STACK_CHUNK: usize = 1024 * 1024;

pub(crate) struct Parsed {
    pub body: Expr,
    pub functions: Vec<FunctionDef>,
}

pub(crate) fn parse_program(source: &str, max_depth: usize) -> Result<Parsed, CompileError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        source,
        tokens,
        pos: 0,
        depth: 0,
        max_depth,
    };
    let mut parsed = parser.program()?;
    Resolver {
        source,
        signatures: parsed.functions.iter().map(|f| (f.name.clone(), f.params.len())).collect(),
        scope: Vec::new(),
    }
    .resolve_program(&mut parsed)?;
    Ok(parsed)
}

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    max_depth: usize,
}

fn boxed(kind: ExprKind, offset: usize) -> Box<Expr> {
    Box::new(Expr { kind, offset })
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> CompileError {
        CompileError::new(CompileErrorKind::Parse, self.source, self.offset(), message)
    }

    fn unexpected(&self, wanted: &str) -> CompileError {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<usize, CompileError> {
        if *self.peek() == tok {
            Ok(self.advance().offset)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn ident(&mut self, wanted: &str) -> Result<String, CompileError> {
        match self.peek() {
            Tok::Ident(name) => {
                let name = name.clone();
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn program(&mut self) -> Result<Parsed, CompileError> {
        let mut lets = Vec::new();
        let mut functions = Vec::new();
        loop {
            if self.at_keyword("let") {
                if lets.len() >= self.max_depth {
                    return Err(self.error(format!("more than {} top-level lets", self.max_depth)));
                }
                lets.push(self.let_binding()?);
            } else if self.at_keyword("def") {
                functions.push(self.function()?);
            } else {
                break;
            }
        }
        let body = self.expr()?;
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(Parsed {
            body: wrap_lets(lets, body),
            functions,
        })
    }

    fn function(&mut self) -> Result<FunctionDef, CompileError> {
        let offset = self.advance().offset;
        let name = self.ident("function name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident("parameter name")?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "')'")?;
        let lets = self.lets()?;
        let body = wrap_lets(lets, self.expr()?);
        Ok(FunctionDef {
            name,
            params,
            body,
            offset,
        })
    }

    fn let_binding(&mut self) -> Result<LetBinding, CompileError> {
        self.advance();
        let name = self.ident("variable name")?;
        self.expect(Tok::Assign, "'='")?;
        let value = self.expr()?;
        Ok(LetBinding { name, value })
    }

    fn lets(&mut self) -> Result<Vec<LetBinding>, CompileError> {
        let mut lets = Vec::new();
        while self.at_keyword("let") {
            if lets.len() >= self.max_depth {
                return Err(self.error(format!("more than {} consecutive lets", self.max_depth)));
            }
            lets.push(self.let_binding()?);
        }
        Ok(lets)
    }

    /// Counts one level of tree depth, including the levels built by
    /// left-associative loops; callers undo it with `self.depth -= n`.
    fn enter(&mut self) -> Result<(), CompileError> {
        self.depth += 1;
        if self.depth > self.max_depth {
            return Err(self.error(format!("expression nesting exceeds {}", self.max_depth)));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, CompileError> {
        self.enter()?;
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || self.or_expr());
        self.depth -= 1;
        result
    }

    fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        let offset = lhs.offset;
        Expr {
            kind: ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            offset,
        }
    }

    fn or_expr(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.and_expr()?;
        let start = self.depth;
        while self.at_keyword("or") {
            self.enter()?;
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Self::binary(BinaryOp::Or, lhs, rhs);
        }
        self.depth = start;
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.comparison()?;
        let start = self.depth;
        while self.at_keyword("and") {
            self.enter()?;
            self.advance();
            let rhs = self.comparison()?;
            lhs = Self::binary(BinaryOp::And, lhs, rhs);
        }
        self.depth = start;
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.additive()?;
        let start = self.depth;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinaryOp::Eq,
                Tok::NotEq => BinaryOp::NotEq,
                Tok::Lt => BinaryOp::Lt,
                Tok::Le => BinaryOp::Le,
                Tok::Gt => BinaryOp::Gt,
                Tok::Ge => BinaryOp::Ge,
                _ => {
                    self.depth = start;
                    return Ok(lhs);
                }
            };
            self.enter()?;
            self.advance();
            let rhs = self.additive()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn additive(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.multiplicative()?;
        let start = self.depth;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => {
                    self.depth = start;
                    return Ok(lhs);
                }
            };
            self.enter()?;
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.unary()?;
        let start = self.depth;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                Tok::Percent => BinaryOp::Rem,
                _ => {
                    self.depth = start;
                    return Ok(lhs);
                }
            };
            self.enter()?;
            self.advance();
            let rhs = self.unary()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, CompileError> {
        if *self.peek() != Tok::Minus {
            return self.postfix();
        }
        self.enter()?;
        let offset = self.advance().offset;
        let result = self.unary().map(|operand| match operand.kind {
            ExprKind::Literal(JsonValue::Number(n)) => Expr {
                kind: ExprKind::Literal(JsonValue::number(-n.get())),
                offset,
            },
            _ => Expr {
                kind: ExprKind::Neg(Box::new(operand)),
                offset,
            },
        });
        self.depth -= 1;
        result
    }

    fn postfix(&mut self) -> Result<Expr, CompileError> {
        let mut expr = self.primary()?;
        let start = self.depth;
        loop {
            if matches!(self.peek(), Tok::DotKey(_) | Tok::LBracket) {
                self.enter()?;
            }
            match self.peek().clone() {
                Tok::DotKey(key) => {
                    let offset = self.advance().offset;
                    expr = Expr {
                        kind: ExprKind::Access {
                            target: Box::new(expr),
                            key,
                        },
                        offset,
                    };
                }
                Tok::LBracket => {
                    let offset = self.advance().offset;
                    expr = self.index_or_slice(expr, offset)?;
                }
                _ => {
                    self.depth = start;
                    return Ok(expr);
                }
            }
        }
    }

    fn index_or_slice(&mut self, target: Expr, offset: usize) -> Result<Expr, CompileError> {
        let target = Box::new(target);
        let from = if *self.peek() == Tok::Colon {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        if *self.peek() == Tok::Colon {
            self.advance();
            let to = if *self.peek() == Tok::RBracket {
                None
            } else {
                Some(Box::new(self.expr()?))
            };
            self.expect(Tok::RBracket, "']'")?;
            return Ok(Expr {
                kind: ExprKind::Slice { target, from, to },
                offset,
            });
        }
        self.expect(Tok::RBracket, "']' or ':'")?;
        let index = from.expect("index parsed when no colon");
        Ok(Expr {
            kind: ExprKind::Index { target, index },
            offset,
        })
    }

    fn primary(&mut self) -> Result<Expr, CompileError> {
        let offset = self.offset();
        let kind = match self.peek().clone() {
            Tok::Num(n) => {
                self.advance();
                ExprKind::Literal(JsonValue::number(n))
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Literal(JsonValue::String(s))
            }
            Tok::Dot => {
                self.advance();
                ExprKind::Context
            }
            Tok::DotKey(key) => {
                self.advance();
                ExprKind::Access {
                    target: boxed(ExprKind::Context, offset),
                    key,
                }
            }
            Tok::Var(name) => {
                self.advance();
                ExprKind::Var(name)
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                return Ok(inner);
            }
            Tok::LBracket => {
                self.advance();
                return self.array(offset);
            }
            Tok::LBrace => {
                self.advance();
                return self.object(offset);
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => {
                    self.advance();
                    ExprKind::Literal(JsonValue::Bool(true))
                }
                "false" => {
                    self.advance();
                    ExprKind::Literal(JsonValue::Bool(false))
                }
                "null" => {
                    self.advance();
                    ExprKind::Literal(JsonValue::Null)
                }
                "if" => return self.if_expr(),
                "let" | "def" | "for" | "else" | "and" | "or" => {
                    return Err(self.error(format!("unexpected keyword '{word}'")));
                }
                _ => {
                    self.advance();
                    if *self.peek() != Tok::LParen {
                        return Err(self.unexpected(&format!("'(' after function name '{word}'")));
                    }
                    self.advance();
                    let args = self.call_args()?;
                    ExprKind::Call {
                        name: word,
                        args,
                        callee: Callee::Unresolved,
                        prepared: None,
                    }
                }
            },
            _ => return Err(self.unexpected("expression")),
        };
        Ok(Expr { kind, offset })
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, CompileError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.advance();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                }
                Tok::RParen => {
                    self.advance();
                    return Ok(args);
                }
                _ => return Err(self.unexpected("',' or ')'")),
            }
        }
    }

    fn if_expr(&mut self) -> Result<Expr, CompileError> {
        let offset = self.advance().offset;
        self.expect(Tok::LParen, "'(' after 'if'")?;
        let cond = self.expr()?;
        self.expect(Tok::RParen, "')'")?;
        let then = self.expr()?;
        let otherwise = if self.at_keyword("else") {
            self.advance();
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        Ok(Expr {
            kind: ExprKind::If {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise,
            },
            offset,
        })
    }

    /// `for (source) lets*` shared by both comprehension forms.
    fn for_head(&mut self) -> Result<(Box<Expr>, Vec<LetBinding>), CompileError> {
        self.advance();
        self.expect(Tok::LParen, "'(' after 'for'")?;
        let source = self.expr()?;
        self.expect(Tok::RParen, "')'")?;
        let lets = self.lets()?;
        Ok((Box::new(source), lets))
    }

    fn comprehension_filter(&mut self) -> Result<Option<Box<Expr>>, CompileError> {
        if !self.at_keyword("if") {
            return Ok(None);
        }
        self.advance();
        self.expect(Tok::LParen, "'(' after 'if'")?;
        let cond = self.expr()?;
        self.expect(Tok::RParen, "')'")?;
        Ok(Some(Box::new(cond)))
    }

    fn array(&mut self, offset: usize) -> Result<Expr, CompileError> {
        if self.at_keyword("for") {
            let (source, lets) = self.for_head()?;
            let value = Box::new(self.expr()?);
            let filter = self.comprehension_filter()?;
            self.expect(Tok::RBracket, "']'")?;
            return Ok(Expr {
                kind: ExprKind::ArrayFor {
                    source,
                    lets,
                    value,
                    filter,
                },
                offset,
            });
        }
        let mut items = Vec::new();
        if *self.peek() == Tok::RBracket {
            self.advance();
        } else {
            loop {
                items.push(self.expr()?);
                match self.peek() {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::RBracket => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.unexpected("',' or ']'")),
                }
            }
        }
        Ok(Expr {
            kind: ExprKind::Array(items),
            offset,
        })
    }

    fn object(&mut self, offset: usize) -> Result<Expr, CompileError> {
        let lets = self.lets()?;
        if self.at_keyword("for") {
            let (source, for_lets) = self.for_head()?;
            let key = Box::new(self.expr()?);
            self.expect(Tok::Colon, "':'")?;
            let value = Box::new(self.expr()?);
            let filter = self.comprehension_filter()?;
            self.expect(Tok::RBrace, "'}'")?;
            let comprehension = Expr {
                kind: ExprKind::ObjectFor {
                    source,
                    lets: for_lets,
                    key,
                    value,
                    filter,
                },
                offset,
            };
            return Ok(wrap_lets(lets, comprehension));
        }
        let mut entries = Vec::new();
        let mut matcher = None;
        if *self.peek() == Tok::RBrace {
            self.advance();
        } else {
            loop {
                if *self.peek() == Tok::Star {
                    matcher = Some(self.matcher()?);
                    self.expect(Tok::RBrace, "'}' (the '*' matcher must come last)")?;
                    break;
                }
                let key = self.expr()?;
                self.expect(Tok::Colon, "':'")?;
                let value = self.expr()?;
                entries.push((key, value));
                match self.peek() {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::RBrace => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.unexpected("',' or '}'")),
                }
            }
        }
        Ok(Expr {
            kind: ExprKind::Object {
                lets,
                entries,
                matcher,
            },
            offset,
        })
    }

    fn matcher(&mut self) -> Result<Matcher, CompileError> {
        self.advance();
        let mut excluded = Vec::new();
        if *self.peek() == Tok::Minus {
            self.advance();
            loop {
                match self.peek().clone() {
                    Tok::Ident(k) | Tok::Str(k) => {
                        self.advance();
                        excluded.push(k);
                    }
                    _ => return Err(self.unexpected("key to exclude")),
                }
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Colon, "':'")?;
        let value = Box::new(self.expr()?);
        Ok(Matcher { excluded, value })
    }
}

fn wrap_lets(lets: Vec<LetBinding>, body: Expr) -> Expr {
    lets.into_iter().rev().fold(body, |body, binding| {
        let offset = binding.value.offset;
        Expr {
            kind: ExprKind::Let {
                binding: Box::new(binding),
                body: Box::new(body),
            },
            offset,
        }
    })
}

struct Resolver<'a> {
    source: &'a str,
    /// (name, parameter count) of every user function.
    signatures: Vec<(String, usize)>,
    scope: Vec<String>,
}

impl Resolver<'_> {
    fn error(&self, offset: usize, kind: CompileErrorKind, message: String) -> CompileError {
        CompileError::new(kind, self.source, offset, message)
    }

    fn resolve_program(mut self, parsed: &mut Parsed) -> Result<(), CompileError> {
        for (i, f) in parsed.functions.iter().enumerate() {
            if Builtin::lookup(&f.name).is_some() {
                return Err(self.error(
                    f.offset,
                    CompileErrorKind::Unresolved,
                    format!("function '{}' redefines a builtin", f.name),
                ));
            }
            if parsed.functions[..i].iter().any(|g| g.name == f.name) {
                return Err(self.error(
                    f.offset,
                    CompileErrorKind::Unresolved,
                    format!("function '{}' defined twice", f.name),
                ));
            }
            for (j, p) in f.params.iter().enumerate() {
                if f.params[..j].contains(p) {
                    return Err(self.error(
                        f.offset,
                        CompileErrorKind::Unresolved,
                        format!("parameter '{p}' repeated in '{}'", f.name),
                    ));
                }
            }
        }
        for f in parsed.functions.iter_mut() {
            // function bodies see their parameters only
            self.scope = f.params.clone();
            self.expr(&mut f.body)?;
        }
        self.scope.clear();
        self.expr(&mut parsed.body)?;
        Ok(())
    }

    fn lets(&mut self, lets: &mut [LetBinding]) -> Result<usize, CompileError> {
        for binding in lets.iter_mut() {
            self.expr(&mut binding.value)?;
            self.scope.push(binding.name.clone());
        }
        Ok(lets.len())
    }

    fn pop(&mut self, n: usize) {
        self.scope.truncate(self.scope.len() - n);
    }

    fn expr(&mut self, expr: &mut Expr) -> Result<(), CompileError> {
        stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || self.resolve(expr))
    }

    fn resolve(&mut self, expr: &mut Expr) -> Result<(), CompileError> {
        let offset = expr.offset;
        match &mut expr.kind {
            ExprKind::Literal(_) | ExprKind::Context => Ok(()),
            ExprKind::Var(name) => {
                if self.scope.iter().rev().any(|s| s == name) {
                    Ok(())
                } else {
                    Err(self.error(offset, CompileErrorKind::Unresolved, format!("unknown variable '${name}'")))
                }
            }
            ExprKind::Access { target, .. } => self.expr(target),
            ExprKind::Index { target, index } => {
                self.expr(target)?;
                self.expr(index)
            }
            ExprKind::Slice { target, from, to } => {
                self.expr(target)?;
                if let Some(f) = from {
                    self.expr(f)?;
                }
                if let Some(t) = to {
                    self.expr(t)?;
                }
                Ok(())
            }
            ExprKind::Object {
                lets,
                entries,
                matcher,
            } => {
                let n = self.lets(lets)?;
                for (k, v) in entries.iter_mut() {
                    self.expr(k)?;
                    self.expr(v)?;
                }
                if let Some(m) = matcher {
                    self.expr(&mut m.value)?;
                }
                self.pop(n);
                Ok(())
            }
            ExprKind::ObjectFor {
                source,
                lets,
                key,
                value,
                filter,
            } => {
                self.expr(source)?;
                let n = self.lets(lets)?;
                self.expr(key)?;
                self.expr(value)?;
                if let Some(f) = filter {
                    self.expr(f)?;
                }
                self.pop(n);
                Ok(())
            }
            ExprKind::Array(items) => items.iter_mut().try_for_each(|i| self.expr(i)),
            ExprKind::ArrayFor {
                source,
                lets,
                value,
                filter,
            } => {
                self.expr(source)?;
                let n = self.lets(lets)?;
                self.expr(value)?;
                if let Some(f) = filter {
                    self.expr(f)?;
                }
                self.pop(n);
                Ok(())
            }
            ExprKind::If { cond, then, otherwise } => {
                self.expr(cond)?;
                self.expr(then)?;
                if let Some(o) = otherwise {
                    self.expr(o)?;
                }
                Ok(())
            }
            ExprKind::Let { binding, body } => {
                self.expr(&mut binding.value)?;
                self.scope.push(binding.name.clone());
                self.expr(body)?;
                self.pop(1);
                Ok(())
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs)?;
                self.expr(rhs)
            }
            ExprKind::Not(inner) | ExprKind::Neg(inner) => self.expr(inner),
            ExprKind::Call {
                name,
                args,
                callee,
                prepared,
            } => {
                for a in args.iter_mut() {
                    self.expr(a)?;
                }
                let (resolved, (min, max)) = if let Some(i) = self.signatures.iter().position(|f| f.0 == *name) {
                    let n = self.signatures[i].1;
                    (Callee::User(i), (n, n))
                } else if let Some(b) = Builtin::lookup(name) {
                    (Callee::Builtin(b), b.arity())
                } else {
                    return Err(self.error(offset, CompileErrorKind::Unresolved, format!("unknown function '{name}'")));
                };
                if args.len() < min || args.len() > max {
                    let expected = if min == max {
                        min.to_string()
                    } else {
                        format!("{min} to {max}")
                    };
                    return Err(self.error(
                        offset,
                        CompileErrorKind::Unresolved,
                        format!("'{name}' takes {expected} argument(s), got {}", args.len()),
                    ));
                }
                if let Callee::Builtin(b) = resolved {
                    for (i, arg) in args.iter().enumerate() {
                        if let ExprKind::Literal(lit) = &arg.kind {
                            match b.prepare(i, lit) {
                                Some(Ok(p)) => *prepared = Some(p),
                                Some(Err(m)) => {
                                    return Err(self.error(arg.offset, CompileErrorKind::BadArgument, m));
                                }
                                None => {}
                            }
                        }
                    }
                    if b == Builtin::Not {
                        let inner = args.pop().expect("arity checked");
                        expr.kind = ExprKind::Not(Box::new(inner));
                        return Ok(());
                    }
                }
                *callee = resolved;
                Ok(())
            }
        }
    }
}
