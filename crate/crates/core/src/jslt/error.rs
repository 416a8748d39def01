use std::fmt;

/// 1-based line/column for a byte offset into `source`.
pub(crate) fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompileErrorKind {
    Lex,
    Parse,
    /// Unknown variable or function, or a call with the wrong arity.
    Unresolved,
    /// A literal argument that a builtin rejects (bad regex, bad time format).
    BadArgument,
}

impl fmt::Display for CompileErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompileErrorKind::Lex => "lex error",
            CompileErrorKind::Parse => "parse error",
            CompileErrorKind::Unresolved => "unresolved name",
            CompileErrorKind::BadArgument => "bad argument",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at line {line}, column {column}: {message}")]
pub struct CompileError {
    pub kind: CompileErrorKind,
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl CompileError {
    pub(crate) fn new(kind: CompileErrorKind, source: &str, offset: usize, message: impl Into<String>) -> Self {
        let (line, column) = line_col(source, offset);
        CompileError {
            kind,
            offset,
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    Type,
    DivisionByZero,
    /// `parse-time` input did not fit the format; carries the input string.
    TimeFormat(String),
    InvalidArgument,
    DepthExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("runtime error at line {line}, column {column}: {message}")]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Error raised inside the evaluator before positions are resolved.
#[derive(Debug)]
pub(crate) struct RawError {
    pub kind: RuntimeErrorKind,
    pub offset: usize,
    pub message: String,
}

impl RawError {
    pub(crate) fn new(kind: RuntimeErrorKind, offset: usize, message: impl Into<String>) -> Self {
        RawError {
            kind,
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn type_error(offset: usize, message: impl Into<String>) -> Self {
        Self::new(RuntimeErrorKind::Type, offset, message)
    }

    pub(crate) fn locate(self, source: &str) -> RuntimeError {
        let (line, column) = line_col(source, self.offset);
        RuntimeError {
            kind: self.kind,
            offset: self.offset,
            line,
            column,
            message: self.message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::line_col;

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("abc", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
        assert_eq!(line_col("ab\n", 3), (2, 1));
    }
}
