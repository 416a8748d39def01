use super::error::{CompileError, CompileErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Colon,
    /// A bare `.`, the current context.
    Dot,
    /// `.name` or `."quoted name"`, with no whitespace after the dot.
    DotKey(String),
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Assign,
    Str(String),
    Num(f64),
    Ident(String),
    Var(String),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Colon => "':'".into(),
            Tok::Dot => "'.'".into(),
            Tok::DotKey(k) => format!("'.{k}'"),
            Tok::Star => "'*'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Percent => "'%'".into(),
            Tok::EqEq => "'=='".into(),
            Tok::NotEq => "'!='".into(),
            Tok::Lt => "'<'".into(),
            Tok::Le => "'<='".into(),
            Tok::Gt => "'>'".into(),
            Tok::Ge => "'>='".into(),
            Tok::Assign => "'='".into(),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Ident(i) => format!("'{i}'"),
            Tok::Var(v) => format!("'${v}'"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, CompileError> {
    let mut lexer = Lexer {
        src: source,
        pos: 0,
        tokens: Vec::new(),
    };
    lexer.run()?;
    Ok(lexer.tokens)
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    tokens: Vec<Token>,
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> CompileError {
        CompileError::new(CompileErrorKind::Lex, self.src, offset, message)
    }

    fn push(&mut self, tok: Tok, offset: usize) {
        self.tokens.push(Token { tok, offset });
    }

    fn run(&mut self) -> Result<(), CompileError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            if c.is_whitespace() {
                self.pos += c.len_utf8();
                continue;
            }
            if c == '/' && self.peek_at(1) == Some('/') {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
                continue;
            }
            let single = match c {
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                ':' => Some(Tok::Colon),
                '*' => Some(Tok::Star),
                '+' => Some(Tok::Plus),
                '-' => Some(Tok::Minus),
                '/' => Some(Tok::Slash),
                '%' => Some(Tok::Percent),
                _ => None,
            };
            if let Some(tok) = single {
                self.pos += 1;
                self.push(tok, start);
                continue;
            }
            match c {
                '=' | '!' | '<' | '>' => self.operator(c, start)?,
                '"' => {
                    let s = self.string()?;
                    self.push(Tok::Str(s), start);
                }
                '.' => {
                    self.pos += 1;
                    match self.peek() {
                        Some(n) if is_ident_start(n) => {
                            let key = self.ident();
                            self.push(Tok::DotKey(key), start);
                        }
                        Some('"') => {
                            let key = self.string()?;
                            self.push(Tok::DotKey(key), start);
                        }
                        _ => self.push(Tok::Dot, start),
                    }
                }
                '$' => {
                    self.pos += 1;
                    match self.peek() {
                        Some(n) if is_ident_start(n) => {
                            let name = self.ident();
                            self.push(Tok::Var(name), start);
                        }
                        _ => return Err(self.error(start, "expected variable name after '$'")),
                    }
                }
                c if c.is_ascii_digit() => {
                    let n = self.number()?;
                    self.push(Tok::Num(n), start);
                }
                c if is_ident_start(c) => {
                    let name = self.ident();
                    self.push(Tok::Ident(name), start);
                }
                other => return Err(self.error(start, format!("unexpected character {other:?}"))),
            }
        }
        let end = self.src.len();
        self.push(Tok::Eof, end);
        Ok(())
    }

    fn operator(&mut self, c: char, start: usize) -> Result<(), CompileError> {
        let eq_follows = self.peek_at(1) == Some('=');
        let (tok, len) = match (c, eq_follows) {
            ('=', true) => (Tok::EqEq, 2),
            ('=', false) => (Tok::Assign, 1),
            ('!', true) => (Tok::NotEq, 2),
            ('!', false) => return Err(self.error(start, "'!' must be followed by '='; use not(...)")),
            ('<', true) => (Tok::Le, 2),
            ('<', false) => (Tok::Lt, 1),
            ('>', true) => (Tok::Ge, 2),
            _ => (Tok::Gt, 1),
        };
        self.pos += len;
        self.push(tok, start);
        Ok(())
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !is_ident_char(c) {
                break;
            }
            self.pos += 1;
        }
        self.src[start..self.pos].to_owned()
    }

    /// Lexes a JSON string literal and decodes it with the JSON rules.
    fn string(&mut self) -> Result<String, CompileError> {
        let start = self.pos;
        self.pos += 1;
        loop {
            match self.peek() {
                None => return Err(self.error(start, "unterminated string literal")),
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c) => self.pos += c.len_utf8(),
                        None => return Err(self.error(start, "unterminated string literal")),
                    }
                }
                Some('"') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => self.pos += c.len_utf8(),
            }
        }
        let literal = &self.src[start..self.pos];
        serde_json::from_str::<String>(literal)
            .map_err(|e| self.error(start, format!("invalid string literal: {e}")))
    }

    fn number(&mut self) -> Result<f64, CompileError> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            while matches!(lx.peek(), Some(c) if c.is_ascii_digit()) {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some('.') && matches!(self.peek_at(1), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        match text.parse::<f64>() {
            Ok(n) if n.is_finite() => Ok(n),
            _ => Err(self.error(start, format!("invalid number {text:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn dot_keys_bind_tightly() {
        assert_eq!(
            toks(r#".actor."spt:userId""#),
            vec![
                Tok::DotKey("actor".into()),
                Tok::DotKey("spt:userId".into()),
                Tok::Eof
            ]
        );
        assert_eq!(toks(". else"), vec![Tok::Dot, Tok::Ident("else".into()), Tok::Eof]);
    }

    #[test]
    fn identifiers_may_contain_dashes() {
        assert_eq!(
            toks("parse-time(1.5e3)"),
            vec![
                Tok::Ident("parse-time".into()),
                Tok::LParen,
                Tok::Num(1500.0),
                Tok::RParen,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn string_escapes_follow_json() {
        assert_eq!(toks(r#""a\"bé""#), vec![Tok::Str("a\"bé".into()), Tok::Eof]);
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(toks("1 // two\n+ 3"), vec![Tok::Num(1.0), Tok::Plus, Tok::Num(3.0), Tok::Eof]);
    }

    #[test]
    fn errors_carry_offsets() {
        let err = tokenize("1 + #").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("$ x").is_err());
    }
}
