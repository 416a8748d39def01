//! A JSLT interpreter: JSON templates with embedded queries.
//!
//! Programs compile once into an immutable [`JsltProgram`] and can then be
//! evaluated any number of times, from any number of threads.
//!
//! ```
//! use semschema_core::jslt::JsltProgram;
//! use semschema_core::json::parse_json;
//!
//! let program = JsltProgram::compile(r#"{"href": .url, * - url : .}"#).unwrap();
//! let out = program.evaluate(&parse_json(r#"{"url": "u", "id": 7}"#).unwrap()).unwrap();
//! assert_eq!(out.to_string(), r#"{"href":"u","id":7}"#);
//! ```
//!
//! Semantics worth knowing:
//! * `.key` on a missing key or a non-object yields `null`.
//! * Object constructors drop `null` entries; values kept by `*` are never dropped.
//! * `*` matches against `.` for a top-level constructor and against the
//!   parent's same-named member for a constructor nested as a value.
//! * Arithmetic with a `null` operand yields `null`.

mod ast;
mod builtins;
mod error;
mod eval;
mod lexer;
mod parser;
mod timefmt;

pub use ast::{BinaryOp, Expr, ExprKind, FunctionDef};
pub use builtins::{truthy, Builtin};
pub use error::{CompileError, CompileErrorKind, RuntimeError, RuntimeErrorKind};
pub use timefmt::TimeFormat;

use crate::json::JsonValue;

/// Default bound on expression nesting at compile time and on recursion at
/// run time.
pub const DEFAULT_MAX_DEPTH: usize = 500;

#[derive(Debug, Clone)]
pub struct JsltProgram {
    root: Expr,
    functions: Vec<FunctionDef>,
    source: String,
    max_depth: usize,
}

impl JsltProgram {
    pub fn compile(source: &str) -> Result<Self, CompileError> {
        Self::compile_with_depth(source, DEFAULT_MAX_DEPTH)
    }

    pub fn compile_with_depth(source: &str, max_depth: usize) -> Result<Self, CompileError> {
        let parsed = parser::parse_program(source, max_depth)?;
        Ok(JsltProgram {
            root: parsed.body,
            functions: parsed.functions,
            source: source.to_string(),
            max_depth,
        })
    }

    /// Evaluates the program with `.` bound to `input`.
    pub fn evaluate(&self, input: &JsonValue) -> Result<JsonValue, RuntimeError> {
        // every parsed level can take up to two evaluator frames
        eval::Evaluator::new(&self.functions, self.max_depth * 2)
            .eval(&self.root, input)
            .map_err(|e| e.locate(&self.source))
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn functions(&self) -> &[FunctionDef] {
        &self.functions
    }

    /// True when the program body is an object constructor with a `*` clause.
    pub fn is_template(&self) -> bool {
        let mut expr = &self.root;
        while let ExprKind::Let { body, .. } = &expr.kind {
            expr = body;
        }
        matches!(&expr.kind, ExprKind::Object { matcher: Some(_), .. })
    }
}

pub fn compile(source: &str) -> Result<JsltProgram, CompileError> {
    JsltProgram::compile(source)
}

pub fn evaluate(program: &JsltProgram, input: &JsonValue) -> Result<JsonValue, RuntimeError> {
    program.evaluate(input)
}

/// Evaluates a template program (see [`JsltProgram::is_template`]) against
/// an object, keeping every key the template neither redefines nor excludes.
pub fn apply_template_match(template: &JsltProgram, input: &JsonValue) -> Result<JsonValue, RuntimeError> {
    if !template.is_template() {
        return Err(RuntimeError {
            kind: RuntimeErrorKind::InvalidArgument,
            offset: 0,
            line: 1,
            column: 1,
            message: "program is not an object constructor with a '*' clause".into(),
        });
    }
    template.evaluate(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;
    use crate::json::parse_json;

    fn run(src: &str, input: &str) -> JsonValue {
        let p = JsltProgram::compile(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        p.evaluate(&parse_json(input).unwrap()).unwrap_or_else(|e| panic!("{src}: {e}"))
    }

    fn run_err(src: &str, input: &str) -> RuntimeError {
        JsltProgram::compile(src).unwrap().evaluate(&parse_json(input).unwrap()).unwrap_err()
    }

    fn compile_err(src: &str) -> CompileError {
        JsltProgram::compile(src).unwrap_err()
    }

    #[test]
    fn dot_access_chains() {
        assert_eq!(run(".device.model", r#"{"device":{"model":"x"}}"#), json!("x"));
        assert_eq!(run(".missing.key", "{}"), JsonValue::Null);
        assert_eq!(run(r#".actor."spt:userId""#, r#"{"actor":{"spt:userId":"u"}}"#), json!("u"));
        assert_eq!(run(".a.b", r#"{"a":[1]}"#), JsonValue::Null);
        assert_eq!(run("(.a).b", r#"{"a":{"b":1}}"#), json!(1));
    }

    #[test]
    fn index_and_slice() {
        assert_eq!(run(".[1]", "[1,2,3]"), json!(2));
        assert_eq!(run(".[-1]", "[1,2,3]"), json!(3));
        assert_eq!(run(".[5]", "[1,2,3]"), JsonValue::Null);
        assert_eq!(run(".[1:3]", "[1,2,3,4]"), json!([2, 3]));
        assert_eq!(run(".[:-1]", "[1,2,3]"), json!([1, 2]));
        assert_eq!(run(".[2:]", r#""hello""#), json!("llo"));
        assert_eq!(run(r#".["a"]"#, r#"{"a":1}"#), json!(1));
        assert_eq!(run_err(".[0.5]", "[1]").kind, RuntimeErrorKind::Type);
        assert_eq!(run_err(".[0]", "true").kind, RuntimeErrorKind::Type);
    }

    #[test]
    fn constructors_drop_nulls() {
        assert_eq!(run(r#"{"a": .x, "b": 1}"#, "{}"), json!({"b": 1}));
        assert_eq!(run("[.x, 1]", "{}"), json!([null, 1]));
        assert_eq!(run_err("{1: 2}", "{}").kind, RuntimeErrorKind::Type);
    }

    #[test]
    fn template_redefines_and_retains() {
        assert_eq!(run(r#"{"a": 10, *: .}"#, r#"{"a":1,"b":2}"#), json!({"a": 10, "b": 2}));
    }

    #[test]
    fn template_excludes() {
        assert_eq!(run(r#"{* - b : .}"#, r#"{"a":1,"b":2}"#), json!({"a": 1}));
        assert_eq!(run(r#"{* - b, "c" : .}"#, r#"{"a":1,"b":2,"c":3}"#), json!({"a": 1}));
    }

    #[test]
    fn template_on_array_is_type_error() {
        assert_eq!(run_err(r#"{"a": 1, *: .}"#, "[]").kind, RuntimeErrorKind::Type);
    }

    #[test]
    fn template_keeps_null_values_and_order() {
        assert_eq!(run("{*: .}", r#"{"a":null,"b":2}"#).to_string(), r#"{"a":null,"b":2}"#);
    }

    #[test]
    fn template_removal_of_explicit_null() {
        // an explicitly constructed key is never retained from the input
        assert_eq!(run(r#"{"a": null, *: .}"#, r#"{"a":1,"b":2}"#), json!({"b": 2}));
    }

    #[test]
    fn nested_template_matches_parent_member() {
        let out = run(
            r#"{"object": {"label": .object.name, * - name : .}, * : .}"#,
            r#"{"object":{"name":"n","kind":"k"},"x":1}"#,
        );
        assert_eq!(out, json!({"object": {"label": "n", "kind": "k"}, "x": 1}));
        // a missing member retains nothing
        assert_eq!(run(r#"{"o": {"a": 1, *: .}}"#, "{}"), json!({"o": {"a": 1}}));
    }

    #[test]
    fn matcher_value_applies_to_each_retained_value() {
        assert_eq!(run("{*: size(.)}", r#"{"a":"xyz","b":[1]}"#), json!({"a": 3, "b": 1}));
    }

    #[test]
    fn comprehensions() {
        assert_eq!(run("[for (.) . * 2]", "[1,2,3]"), json!([2, 4, 6]));
        assert_eq!(run("[for (.) . if (. > 1)]", "[1,2,3]"), json!([2, 3]));
        assert_eq!(
            run("[for (.) {\"k\": .key, \"v\": .value}]", r#"{"a":1,"b":2}"#),
            json!([{"k": "a", "v": 1}, {"k": "b", "v": 2}])
        );
        assert_eq!(run("{for (.) .key : .value + 1}", r#"{"a":1,"b":2}"#), json!({"a": 2, "b": 3}));
        assert_eq!(run("[for (.x) .]", "{}"), JsonValue::Null);
        assert_eq!(run("[for (.) let y = . * 10 $y]", "[1,2]"), json!([10, 20]));
        assert_eq!(run_err("[for (.) .]", "3").kind, RuntimeErrorKind::Type);
    }

    #[test]
    fn conditionals_and_lets() {
        assert_eq!(run("if (.a) 1 else 2", r#"{"a":true}"#), json!(1));
        assert_eq!(run("if (.a) 1 else 2", r#"{"a":""}"#), json!(2));
        assert_eq!(run("if (.a) 1", "{}"), JsonValue::Null);
        assert_eq!(run("let x = 2 let y = $x * 3 $x + $y", "{}"), json!(8));
        assert_eq!(run(r#"{let v = .a "b": $v}"#, r#"{"a":5}"#), json!({"b": 5}));
    }

    #[test]
    fn user_functions() {
        assert_eq!(run("def double(n) $n * 2  double(.a)", r#"{"a":4}"#), json!(8));
        assert_eq!(
            run("def fact(n) if ($n <= 1) 1 else $n * fact($n - 1)  fact(5)", "{}"),
            json!(120)
        );
        // bodies see their own parameters only
        assert_eq!(compile_err("let x = 1 def f(a) $x  f(1)").kind, CompileErrorKind::Unresolved);
    }

    #[test]
    fn arithmetic_and_comparison() {
        assert_eq!(run("1 + 2 * 3", "{}"), json!(7));
        assert_eq!(run("(1 + 2) * 3", "{}"), json!(9));
        assert_eq!(run("7 / 2", "{}"), json!(3.5));
        assert_eq!(run("7 % 4", "{}"), json!(3));
        assert_eq!(run("-.a", r#"{"a":2}"#), json!(-2));
        assert_eq!(run(r#""a" + "b""#, "{}"), json!("ab"));
        assert_eq!(run("[1] + [2]", "{}"), json!([1, 2]));
        assert_eq!(run(r#"{"a":1} + {"b":2}"#, "{}"), json!({"a": 1, "b": 2}));
        assert_eq!(run(".x + 1", "{}"), JsonValue::Null);
        assert_eq!(run("1 < 2 and 2 <= 2 and 3 > 2 and 3 >= 3", "{}"), json!(true));
        assert_eq!(run(r#""a" < "b""#, "{}"), json!(true));
        assert_eq!(run(".x < 1", "{}"), json!(false));
        assert_eq!(run("1 == 1.0 and [1] != [2]", "{}"), json!(true));
        assert_eq!(run("false or not(.x)", "{}"), json!(true));
        assert_eq!(run_err(r#""a" - 1"#, "{}").kind, RuntimeErrorKind::Type);
        assert_eq!(run_err("1 / 0", "{}").kind, RuntimeErrorKind::DivisionByZero);
        assert_eq!(run_err(r#"1 < "a""#, "{}").kind, RuntimeErrorKind::Type);
    }

    #[test]
    fn round_of_scaled_half() {
        assert_eq!(run("round(2.5 * 1000)", "{}"), json!(2500));
    }

    #[test]
    fn boolean_reflects_presence() {
        let p = r#"boolean(.actor."spt:userId")"#;
        assert_eq!(run(p, r#"{"actor":{"spt:userId":"sdrn:cp:user:1"}}"#), json!(true));
        assert_eq!(run(p, r#"{"actor":{}}"#), json!(false));
        assert_eq!(run(p, r#"{"actor":{"spt:userId":null}}"#), json!(false));
    }

    #[test]
    fn compile_errors_carry_positions() {
        let e = compile_err(r#"{"a": 1 +}"#);
        assert_eq!(e.kind, CompileErrorKind::Parse);
        assert_eq!((e.line, e.column), (1, 10));
        assert_eq!(compile_err("$nope").kind, CompileErrorKind::Unresolved);
        assert_eq!(compile_err("nope(1)").kind, CompileErrorKind::Unresolved);
        assert_eq!(compile_err("round(1, 2)").kind, CompileErrorKind::Unresolved);
        assert_eq!(compile_err(r#"test(., "(")"#).kind, CompileErrorKind::BadArgument);
        assert_eq!(compile_err(r#"parse-time(., "QQ")"#).kind, CompileErrorKind::BadArgument);
        assert_eq!(compile_err("\"abc").kind, CompileErrorKind::Lex);
        assert_eq!(compile_err("def round(x) $x  1").kind, CompileErrorKind::Unresolved);
        assert_eq!(compile_err("{*: ., \"a\": 1}").kind, CompileErrorKind::Parse);
    }

    #[test]
    fn runtime_errors_carry_positions() {
        let e = run_err("{\n  \"a\": .x - \"s\"\n}", r#"{"x":1}"#);
        assert_eq!(e.kind, RuntimeErrorKind::Type);
        assert_eq!(e.line, 2);
    }

    #[test]
    fn parse_time_mismatch_carries_input() {
        let e = run_err(r#"parse-time(.t, "yyyy-MM-dd")"#, r#"{"t":"garbage"}"#);
        assert_eq!(e.kind, RuntimeErrorKind::TimeFormat("garbage".into()));
    }

    #[test]
    fn nesting_beyond_limit_is_a_compile_error() {
        let deep = format!("{}1{}", "(".repeat(600), ")".repeat(600));
        assert_eq!(compile_err(&deep).kind, CompileErrorKind::Parse);
        let long = format!("1{}", " + 1".repeat(600));
        assert_eq!(compile_err(&long).kind, CompileErrorKind::Parse);
        let chain = format!(".{}", "a.".repeat(600)) + "b";
        assert_eq!(compile_err(&chain).kind, CompileErrorKind::Parse);
    }

    #[test]
    fn unbounded_recursion_is_a_runtime_error() {
        let e = run_err("def f(x) f($x)  f(1)", "{}");
        assert_eq!(e.kind, RuntimeErrorKind::DepthExceeded);
    }

    #[test]
    fn maximal_nesting_fits_default_test_stack() {
        // test threads get 2 MiB; build a program at the nesting limit
        let src = format!("{}.a{}", "[".repeat(490), "]".repeat(490));
        let p = JsltProgram::compile(&src).unwrap();
        let handle = std::thread::Builder::new()
            .stack_size(2 << 20)
            .spawn(move || p.evaluate(&json!({"a": 1})).map(|_| ()))
            .unwrap();
        handle.join().unwrap().unwrap();
        let src = format!("{}{}", "{\"k\": ".repeat(490), "1".to_string() + &"}".repeat(490));
        let p = JsltProgram::compile(&src).unwrap();
        std::thread::Builder::new()
            .stack_size(2 << 20)
            .spawn(move || p.evaluate(&json!({})).map(|_| ()))
            .unwrap()
            .join()
            .unwrap()
            .unwrap();
    }

    #[test]
    fn template_predicate() {
        assert!(JsltProgram::compile("let a = 1 {*: .}").unwrap().is_template());
        assert!(!JsltProgram::compile("{\"a\": 1}").unwrap().is_template());
        let p = JsltProgram::compile(".").unwrap();
        assert_eq!(apply_template_match(&p, &json!({})).unwrap_err().kind, RuntimeErrorKind::InvalidArgument);
    }
}
