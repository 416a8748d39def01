use std::cmp::Ordering;

use crate::json::{JsonValue, Map};

use super::ast::{BinaryOp, Callee, Expr, ExprKind, FunctionDef, LetBinding, Matcher};
use super::builtins::{self, truthy};
use super::error::{RawError, RuntimeErrorKind};
use super::parser::{RED_ZONE, STACK_CHUNK};

type EvalResult = Result<JsonValue, RawError>;

pub(crate) struct Evaluator<'p> {
    functions: &'p [FunctionDef],
    max_depth: usize,
    depth: usize,
    vars: Vec<(&'p str, JsonValue)>,
}

impl<'p> Evaluator<'p> {
    pub(crate) fn new(functions: &'p [FunctionDef], max_depth: usize) -> Self {
        Evaluator {
            functions,
            max_depth,
            depth: 0,
            vars: Vec::new(),
        }
    }

    fn var(&self, name: &str) -> Option<&JsonValue> {
        self.vars.iter().rev().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    pub(crate) fn eval(&mut self, expr: &'p Expr, ctx: &JsonValue) -> EvalResult {
        self.depth += 1;
        if self.depth > self.max_depth {
            return Err(RawError::new(
                RuntimeErrorKind::DepthExceeded,
                expr.offset,
                format!("evaluation depth exceeds {}", self.max_depth),
            ));
        }
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || self.dispatch(expr, ctx));
        self.depth -= 1;
        result
    }

    fn dispatch(&mut self, expr: &'p Expr, ctx: &JsonValue) -> EvalResult {
        match &expr.kind {
            ExprKind::Literal(v) => Ok(v.clone()),
            ExprKind::Context => Ok(ctx.clone()),
            ExprKind::Var(name) => Ok(self.var(name).cloned().unwrap_or_default()),
            ExprKind::Access { target, key } => self.access(expr, target, key, ctx),
            ExprKind::Index { target, index } => self.index(expr, target, index, ctx),
            ExprKind::Slice { target, from, to } => self.slice(expr, target, from.as_deref(), to.as_deref(), ctx),
            ExprKind::Object { .. } => self.object(expr, ctx, Some(ctx)),
            ExprKind::ObjectFor { .. } => self.object_for(expr, ctx),
            ExprKind::Array(items) => items.iter().map(|i| self.eval(i, ctx)).collect::<Result<Vec<_>, _>>().map(JsonValue::Array),
            ExprKind::ArrayFor { .. } => self.array_for(expr, ctx),
            ExprKind::If { cond, then, otherwise } => {
                if truthy(&self.eval(cond, ctx)?) {
                    self.eval(then, ctx)
                } else if let Some(o) = otherwise {
                    self.eval(o, ctx)
                } else {
                    Ok(JsonValue::Null)
                }
            }
            ExprKind::Let { binding, body } => {
                self.bind(binding, ctx)?;
                let result = self.eval(body, ctx);
                self.vars.pop();
                result
            }
            ExprKind::Call { .. } => self.call(expr, ctx),
            ExprKind::Binary { op, lhs, rhs } => self.binary(expr.offset, *op, lhs, rhs, ctx),
            ExprKind::Not(inner) => Ok(JsonValue::Bool(!truthy(&self.eval(inner, ctx)?))),
            ExprKind::Neg(inner) => match self.eval(inner, ctx)? {
                JsonValue::Null => Ok(JsonValue::Null),
                JsonValue::Number(n) => Ok(JsonValue::number(-n.get())),
                other => Err(RawError::type_error(expr.offset, format!("cannot negate {}", other.type_name()))),
            },
        }
    }

    fn bind(&mut self, binding: &'p LetBinding, ctx: &JsonValue) -> Result<(), RawError> {
        let value = self.eval(&binding.value, ctx)?;
        self.vars.push((binding.name.as_str(), value));
        Ok(())
    }

    fn bind_all(&mut self, lets: &'p [LetBinding], ctx: &JsonValue) -> Result<(), RawError> {
        for b in lets {
            self.bind(b, ctx)?;
        }
        Ok(())
    }

    /// Resolves a chain of key accesses rooted at `.` or a variable without
    /// cloning intermediate values. `None` means the chain has another shape.
    fn path_ref<'a>(&'a self, mut expr: &'p Expr, ctx: &'a JsonValue) -> Option<Option<&'a JsonValue>> {
        let mut keys = Vec::new();
        let root = loop {
            match &expr.kind {
                ExprKind::Access { target, key } => {
                    keys.push(key.as_str());
                    expr = target;
                }
                ExprKind::Context => break Some(ctx),
                ExprKind::Var(name) => break self.var(name),
                _ => return None,
            }
        };
        let mut cur = root;
        for key in keys.iter().rev() {
            cur = cur.and_then(|v| v.get(key));
        }
        Some(cur)
    }

    #[inline(never)]
    fn access(&mut self, expr: &'p Expr, target: &'p Expr, key: &str, ctx: &JsonValue) -> EvalResult {
        if let Some(found) = self.path_ref(expr, ctx) {
            return Ok(found.cloned().unwrap_or_default());
        }
        let base = self.eval(target, ctx)?;
        Ok(base.get(key).cloned().unwrap_or_default())
    }

    #[inline(never)]
    fn index(&mut self, expr: &'p Expr, target: &'p Expr, index: &'p Expr, ctx: &JsonValue) -> EvalResult {
        let base = self.eval(target, ctx)?;
        let idx = self.eval(index, ctx)?;
        let offset = expr.offset;
        match (&base, &idx) {
            (JsonValue::Null, _) => Ok(JsonValue::Null),
            (JsonValue::Object(map), JsonValue::String(key)) => Ok(map.get(key).cloned().unwrap_or_default()),
            (JsonValue::Array(items), JsonValue::Number(_)) => {
                let i = integer_arg(offset, &idx)?;
                Ok(resolve_index(i, items.len()).map(|i| items[i].clone()).unwrap_or_default())
            }
            (JsonValue::String(s), JsonValue::Number(_)) => {
                let i = integer_arg(offset, &idx)?;
                let chars: Vec<char> = s.chars().collect();
                Ok(resolve_index(i, chars.len())
                    .map(|i| JsonValue::String(chars[i].to_string()))
                    .unwrap_or_default())
            }
            _ => Err(RawError::type_error(
                offset,
                format!("cannot index {} with {}", base.type_name(), idx.type_name()),
            )),
        }
    }

    #[inline(never)]
    fn slice(
        &mut self,
        expr: &'p Expr,
        target: &'p Expr,
        from: Option<&'p Expr>,
        to: Option<&'p Expr>,
        ctx: &JsonValue,
    ) -> EvalResult {
        let base = self.eval(target, ctx)?;
        let from = match from {
            Some(e) => self.eval(e, ctx)?,
            None => JsonValue::Null,
        };
        let to = match to {
            Some(e) => self.eval(e, ctx)?,
            None => JsonValue::Null,
        };
        let offset = expr.offset;
        let bounds = |len: usize| -> Result<(usize, usize), RawError> {
            let clamp = |v: &JsonValue, default: usize| -> Result<usize, RawError> {
                if v.is_null() {
                    return Ok(default);
                }
                let i = integer_arg(offset, v)?;
                let i = if i < 0 { len as i64 + i } else { i };
                Ok(i.clamp(0, len as i64) as usize)
            };
            let start = clamp(&from, 0)?;
            let end = clamp(&to, len)?;
            Ok((start, end.max(start)))
        };
        match &base {
            JsonValue::Null => Ok(JsonValue::Null),
            JsonValue::Array(items) => {
                let (a, b) = bounds(items.len())?;
                Ok(JsonValue::Array(items[a..b].to_vec()))
            }
            JsonValue::String(s) => {
                let chars: Vec<char> = s.chars().collect();
                let (a, b) = bounds(chars.len())?;
                Ok(JsonValue::String(chars[a..b].iter().collect()))
            }
            other => Err(RawError::type_error(offset, format!("cannot slice {}", other.type_name()))),
        }
    }

    /// Object constructor. `source` is the object whose remaining keys the
    /// `*` matcher retains.
    #[inline(never)]
    fn object(&mut self, expr: &'p Expr, ctx: &JsonValue, source: Option<&JsonValue>) -> EvalResult {
        let ExprKind::Object { lets, entries, matcher } = &expr.kind else {
            unreachable!("object() called on a non-object node")
        };
        self.depth += 1;
        if self.depth > self.max_depth {
            return Err(RawError::new(
                RuntimeErrorKind::DepthExceeded,
                expr.offset,
                format!("evaluation depth exceeds {}", self.max_depth),
            ));
        }
        let bound = self.vars.len();
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || {
            self.object_body(lets, entries, matcher.as_ref(), ctx, source)
        });
        self.vars.truncate(bound);
        self.depth -= 1;
        result
    }

    fn object_body(
        &mut self,
        lets: &'p [LetBinding],
        entries: &'p [(Expr, Expr)],
        matcher: Option<&'p Matcher>,
        ctx: &JsonValue,
        source: Option<&JsonValue>,
    ) -> EvalResult {
        self.bind_all(lets, ctx)?;
        let mut out = Map::new();
        for (key_expr, value_expr) in entries {
            let key = match self.eval(key_expr, ctx)? {
                JsonValue::String(k) => k,
                other => {
                    return Err(RawError::type_error(
                        key_expr.offset,
                        format!("object key must be a string, not {}", other.type_name()),
                    ))
                }
            };
            let value = if matches!(value_expr.kind, ExprKind::Object { .. }) {
                let child = source.and_then(|s| s.get(&key));
                self.object(value_expr, ctx, child)?
            } else {
                self.eval(value_expr, ctx)?
            };
            if value.is_null() {
                out.shift_remove(&key);
            } else {
                out.insert(key, value);
            }
        }
        let Some(matcher) = matcher else {
            return Ok(JsonValue::Object(out));
        };
        let retained = match source {
            None | Some(JsonValue::Null) => return Ok(JsonValue::Object(out)),
            Some(JsonValue::Object(map)) => map,
            Some(other) => {
                return Err(RawError::type_error(
                    matcher.value.offset,
                    format!("'*' matcher needs an object to match against, not {}", other.type_name()),
                ))
            }
        };
        let explicit: Vec<&str> = entries
            .iter()
            .filter_map(|(k, _)| match &k.kind {
                ExprKind::Literal(JsonValue::String(s)) => Some(s.as_str()),
                _ => None,
            })
            .collect();
        for (key, value) in retained {
            if out.contains_key(key) || explicit.contains(&key.as_str()) || matcher.excluded.iter().any(|e| e == key) {
                continue;
            }
            let kept = match &matcher.value.kind {
                ExprKind::Context => value.clone(),
                _ => self.eval(&matcher.value, value)?,
            };
            out.insert(key.clone(), kept);
        }
        Ok(JsonValue::Object(out))
    }

    /// Items of a comprehension source; objects iterate as `{key, value}`.
    fn comprehension_items(&mut self, source: &'p Expr, ctx: &JsonValue) -> Result<Option<Vec<JsonValue>>, RawError> {
        match self.eval(source, ctx)? {
            JsonValue::Null => Ok(None),
            JsonValue::Array(items) => Ok(Some(items)),
            JsonValue::Object(map) => Ok(Some(
                map.into_iter()
                    .map(|(k, v)| {
                        let mut entry = Map::new();
                        entry.insert("key".to_string(), JsonValue::String(k));
                        entry.insert("value".to_string(), v);
                        JsonValue::Object(entry)
                    })
                    .collect(),
            )),
            other => Err(RawError::type_error(
                source.offset,
                format!("cannot iterate over {}", other.type_name()),
            )),
        }
    }

    #[inline(never)]
    fn array_for(&mut self, expr: &'p Expr, ctx: &JsonValue) -> EvalResult {
        let ExprKind::ArrayFor { source, lets, value, filter } = &expr.kind else {
            unreachable!("array_for() called on a non-comprehension node")
        };
        let Some(items) = self.comprehension_items(source, ctx)? else {
            return Ok(JsonValue::Null);
        };
        let mut out = Vec::with_capacity(items.len());
        for item in &items {
            let bound = self.vars.len();
            let step = self.array_step(lets, value, filter.as_deref(), item);
            self.vars.truncate(bound);
            if let Some(v) = step? {
                out.push(v);
            }
        }
        Ok(JsonValue::Array(out))
    }

    fn array_step(
        &mut self,
        lets: &'p [LetBinding],
        value: &'p Expr,
        filter: Option<&'p Expr>,
        item: &JsonValue,
    ) -> Result<Option<JsonValue>, RawError> {
        self.bind_all(lets, item)?;
        if let Some(f) = filter {
            if !truthy(&self.eval(f, item)?) {
                return Ok(None);
            }
        }
        self.eval(value, item).map(Some)
    }

    #[inline(never)]
    fn object_for(&mut self, expr: &'p Expr, ctx: &JsonValue) -> EvalResult {
        let ExprKind::ObjectFor {
            source,
            lets,
            key,
            value,
            filter,
        } = &expr.kind
        else {
            unreachable!("object_for() called on a non-comprehension node")
        };
        let Some(items) = self.comprehension_items(source, ctx)? else {
            return Ok(JsonValue::Null);
        };
        let mut out = Map::new();
        for item in &items {
            let bound = self.vars.len();
            let step = self.object_step(lets, key, value, filter.as_deref(), item);
            self.vars.truncate(bound);
            if let Some((k, v)) = step? {
                if v.is_null() {
                    out.shift_remove(&k);
                } else {
                    out.insert(k, v);
                }
            }
        }
        Ok(JsonValue::Object(out))
    }

    fn object_step(
        &mut self,
        lets: &'p [LetBinding],
        key: &'p Expr,
        value: &'p Expr,
        filter: Option<&'p Expr>,
        item: &JsonValue,
    ) -> Result<Option<(String, JsonValue)>, RawError> {
        self.bind_all(lets, item)?;
        if let Some(f) = filter {
            if !truthy(&self.eval(f, item)?) {
                return Ok(None);
            }
        }
        let k = match self.eval(key, item)? {
            JsonValue::String(k) => k,
            other => {
                return Err(RawError::type_error(
                    key.offset,
                    format!("object key must be a string, not {}", other.type_name()),
                ))
            }
        };
        Ok(Some((k, self.eval(value, item)?)))
    }

    #[inline(never)]
    fn call(&mut self, expr: &'p Expr, ctx: &JsonValue) -> EvalResult {
        let ExprKind::Call {
            args, callee, prepared, ..
        } = &expr.kind
        else {
            unreachable!("call() called on a non-call node")
        };
        let values = args.iter().map(|a| self.eval(a, ctx)).collect::<Result<Vec<_>, _>>()?;
        match callee {
            Callee::Builtin(b) => builtins::apply(*b, values, prepared.as_ref(), expr.offset),
            Callee::User(i) => {
                let f = &self.functions[*i];
                let frame: Vec<(&'p str, JsonValue)> = f.params.iter().map(String::as_str).zip(values).collect();
                let saved = std::mem::replace(&mut self.vars, frame);
                let result = self.eval(&f.body, ctx);
                self.vars = saved;
                result
            }
            Callee::Unresolved => unreachable!("name resolution runs before evaluation"),
        }
    }

    #[inline(never)]
    fn binary(&mut self, offset: usize, op: BinaryOp, lhs: &'p Expr, rhs: &'p Expr, ctx: &JsonValue) -> EvalResult {
        match op {
            BinaryOp::And => {
                let l = truthy(&self.eval(lhs, ctx)?);
                return Ok(JsonValue::Bool(l && truthy(&self.eval(rhs, ctx)?)));
            }
            BinaryOp::Or => {
                let l = truthy(&self.eval(lhs, ctx)?);
                return Ok(JsonValue::Bool(l || truthy(&self.eval(rhs, ctx)?)));
            }
            _ => {}
        }
        let l = self.eval(lhs, ctx)?;
        let r = self.eval(rhs, ctx)?;
        apply_binary(offset, op, l, r)
    }
}

fn integer_arg(offset: usize, v: &JsonValue) -> Result<i64, RawError> {
    match v {
        JsonValue::Number(n) if n.is_integral() => n
            .as_i64()
            .ok_or_else(|| RawError::new(RuntimeErrorKind::InvalidArgument, offset, "index out of range")),
        other => Err(RawError::type_error(offset, format!("index must be an integer, not {other}"))),
    }
}

fn resolve_index(i: i64, len: usize) -> Option<usize> {
    let i = if i < 0 { len as i64 + i } else { i };
    (0..len as i64).contains(&i).then_some(i as usize)
}

pub(crate) fn apply_binary(offset: usize, op: BinaryOp, l: JsonValue, r: JsonValue) -> EvalResult {
    use JsonValue as V;
    let type_err = |l: &V, r: &V| {
        RawError::type_error(
            offset,
            format!("'{}' cannot take {} and {}", op.symbol(), l.type_name(), r.type_name()),
        )
    };
    match op {
        BinaryOp::Eq => return Ok(V::Bool(l == r)),
        BinaryOp::NotEq => return Ok(V::Bool(l != r)),
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match (&l, &r) {
                (V::Null, _) | (_, V::Null) => return Ok(V::Bool(false)),
                (V::Number(a), V::Number(b)) => a.get().partial_cmp(&b.get()).expect("numbers are finite"),
                (V::String(a), V::String(b)) => a.cmp(b),
                _ => return Err(type_err(&l, &r)),
            };
            let holds = match op {
                BinaryOp::Lt => ord == Ordering::Less,
                BinaryOp::Le => ord != Ordering::Greater,
                BinaryOp::Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            };
            return Ok(V::Bool(holds));
        }
        _ => {}
    }
    if l.is_null() || r.is_null() {
        return Ok(V::Null);
    }
    let result = match (op, l, r) {
        (BinaryOp::Add, V::String(a), V::String(b)) => return Ok(V::String(a + &b)),
        (BinaryOp::Add, V::Array(mut a), V::Array(b)) => {
            a.extend(b);
            return Ok(V::Array(a));
        }
        (BinaryOp::Add, V::Object(mut a), V::Object(b)) => {
            a.extend(b);
            return Ok(V::Object(a));
        }
        (_, V::Number(a), V::Number(b)) => {
            let (a, b) = (a.get(), b.get());
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div | BinaryOp::Rem if b == 0.0 => {
                    return Err(RawError::new(RuntimeErrorKind::DivisionByZero, offset, "division by zero"))
                }
                BinaryOp::Div => a / b,
                BinaryOp::Rem => a % b,
                _ => unreachable!("logical and comparison operators handled above"),
            }
        }
        (_, l, r) => return Err(type_err(&l, &r)),
    };
    if result.is_finite() {
        Ok(V::number(result))
    } else {
        Err(RawError::new(
            RuntimeErrorKind::InvalidArgument,
            offset,
            format!("'{}' overflowed", op.symbol()),
        ))
    }
}
