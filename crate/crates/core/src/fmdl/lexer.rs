//! FMDL tokenizer.

use super::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Frame,
    Slot,
    Default,
    Integer,
    Boolean,
    String,
    Reference,
    List,
    Of,
    If,
    On,
    Constraint,
    Ask,
    Rules,
    From,
    Remote,
    At,
    Frameset,
    Table,
    Key,
    Extern,
    Function,
    And,
    Or,
    Not,
    In,
    Exists,
    Where,
    Specialize,
    Unknown,
    True,
    False,
}

impl Keyword {
    pub const ALL: &'static [(&'static str, Keyword)] = &[
        ("frame", Keyword::Frame),
        ("slot", Keyword::Slot),
        ("default", Keyword::Default),
        ("integer", Keyword::Integer),
        ("boolean", Keyword::Boolean),
        ("string", Keyword::String),
        ("reference", Keyword::Reference),
        ("list", Keyword::List),
        ("of", Keyword::Of),
        ("if", Keyword::If),
        ("on", Keyword::On),
        ("constraint", Keyword::Constraint),
        ("ask", Keyword::Ask),
        ("rules", Keyword::Rules),
        ("from", Keyword::From),
        ("remote", Keyword::Remote),
        ("at", Keyword::At),
        ("frameset", Keyword::Frameset),
        ("table", Keyword::Table),
        ("key", Keyword::Key),
        ("extern", Keyword::Extern),
        ("function", Keyword::Function),
        ("and", Keyword::And),
        ("or", Keyword::Or),
        ("not", Keyword::Not),
        ("in", Keyword::In),
        ("exists", Keyword::Exists),
        ("where", Keyword::Where),
        ("specialize", Keyword::Specialize),
        ("unknown", Keyword::Unknown),
        ("true", Keyword::True),
        ("false", Keyword::False),
    ];

    pub fn lookup(word: &str) -> Option<Keyword> {
        Self::ALL.iter().find(|(w, _)| *w == word).map(|(_, k)| *k)
    }

    pub fn text(self) -> &'static str {
        Self::ALL.iter().find(|(_, k)| *k == self).map(|(w, _)| *w).unwrap_or("?")
    }
}

pub fn is_keyword(word: &str) -> bool {
    Keyword::lookup(word).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    /// Magnitude only; a leading `-` is a separate token.
    Int(u64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Colon,
    Semi,
    Comma,
    Dot,
    Slash,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Keyword(k) => format!("`{}`", k.text()),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Int(i) => format!("integer {i}"),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::Eof => "end of input".into(),
            other => format!("`{}`", punct_text(other)),
        }
    }
}

pub fn punct_text(k: &TokenKind) -> &'static str {
    match k {
        TokenKind::LBrace => "{",
        TokenKind::RBrace => "}",
        TokenKind::LParen => "(",
        TokenKind::RParen => ")",
        TokenKind::LBracket => "[",
        TokenKind::RBracket => "]",
        TokenKind::Colon => ":",
        TokenKind::Semi => ";",
        TokenKind::Comma => ",",
        TokenKind::Dot => ".",
        TokenKind::Slash => "/",
        TokenKind::Assign => ":=",
        TokenKind::Eq => "=",
        TokenKind::Ne => "<>",
        TokenKind::Lt => "<",
        TokenKind::Le => "<=",
        TokenKind::Gt => ">",
        TokenKind::Ge => ">=",
        TokenKind::Plus => "+",
        TokenKind::Minus => "-",
        TokenKind::Star => "*",
        _ => "?",
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

/// Splits `text` into tokens. The stream always ends with `Eof`.
pub fn tokenize(file: &str, text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor { chars: text.chars().peekable(), line: 1, column: 1 };
    let mut out = Vec::new();
    let span = |line, column, length| SourceSpan { file: file.to_string(), line, column, length };
    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') => {
                    let mut ahead = cur.chars.clone();
                    ahead.next();
                    match ahead.next() {
                        Some('/') => {
                            while let Some(c) = cur.peek() {
                                if c == '\n' {
                                    break;
                                }
                                cur.bump();
                            }
                        }
                        Some('*') => {
                            let (line, column) = (cur.line, cur.column);
                            cur.bump();
                            cur.bump();
                            let mut closed = false;
                            while let Some(c) = cur.bump() {
                                if c == '*' && cur.peek() == Some('/') {
                                    cur.bump();
                                    closed = true;
                                    break;
                                }
                            }
                            if !closed {
                                return Err(Diagnostic::error(span(line, column, 2), "UnterminatedComment", "unterminated block comment"));
                            }
                        }
                        _ => break,
                    }
                }
                _ => break,
            }
        }
        let (line, column) = (cur.line, cur.column);
        let Some(c) = cur.bump() else {
            out.push(Token { kind: TokenKind::Eof, span: span(line, column, 0) });
            return Ok(out);
        };
        let single = |k| (k, 1usize);
        let (kind, length) = match c {
            '{' => single(TokenKind::LBrace),
            '}' => single(TokenKind::RBrace),
            '(' => single(TokenKind::LParen),
            ')' => single(TokenKind::RParen),
            '[' => single(TokenKind::LBracket),
            ']' => single(TokenKind::RBracket),
            ';' => single(TokenKind::Semi),
            ',' => single(TokenKind::Comma),
            '.' => single(TokenKind::Dot),
            '/' => single(TokenKind::Slash),
            '=' => single(TokenKind::Eq),
            '+' => single(TokenKind::Plus),
            '-' => single(TokenKind::Minus),
            '*' => single(TokenKind::Star),
            ':' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                    (TokenKind::Assign, 2)
                } else {
                    single(TokenKind::Colon)
                }
            }
            '<' => match cur.peek() {
                Some('=') => {
                    cur.bump();
                    (TokenKind::Le, 2)
                }
                Some('>') => {
                    cur.bump();
                    (TokenKind::Ne, 2)
                }
                _ => single(TokenKind::Lt),
            },
            '>' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                    (TokenKind::Ge, 2)
                } else {
                    single(TokenKind::Gt)
                }
            }
            '"' => {
                let mut s = String::new();
                let mut length = 1;
                loop {
                    match cur.bump() {
                        None | Some('\n') => {
                            return Err(Diagnostic::error(
                                span(line, column, length),
                                "UnterminatedString",
                                "unterminated string literal",
                            ))
                        }
                        Some('"') => {
                            length += 1;
                            break;
                        }
                        Some('\\') => {
                            length += 1;
                            match cur.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(other) => {
                                    return Err(Diagnostic::error(
                                        span(line, column, length + 1),
                                        "BadEscape",
                                        format!("unknown escape `\\{other}`"),
                                    ))
                                }
                                None => {
                                    return Err(Diagnostic::error(
                                        span(line, column, length),
                                        "UnterminatedString",
                                        "unterminated string literal",
                                    ))
                                }
                            }
                            length += 1;
                        }
                        Some(c) => {
                            length += 1;
                            s.push(c);
                        }
                    }
                }
                (TokenKind::Str(s), length)
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::from(c);
                while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    cur.bump();
                }
                let len = digits.len();
                match digits.parse::<u64>() {
                    Ok(v) => (TokenKind::Int(v), len),
                    Err(_) => {
                        return Err(Diagnostic::error(span(line, column, len), "IntegerOverflow", "integer literal out of range"))
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::from(c);
                while let Some(d) = cur.peek().filter(|d| d.is_ascii_alphanumeric() || *d == '_') {
                    word.push(d);
                    cur.bump();
                }
                let len = word.chars().count();
                match Keyword::lookup(&word) {
                    Some(k) => (TokenKind::Keyword(k), len),
                    None => (TokenKind::Ident(word), len),
                }
            }
            other => {
                return Err(Diagnostic::error(
                    span(line, column, 1),
                    "IllegalCharacter",
                    format!("illegal character `{other}`"),
                ))
            }
        };
        out.push(Token { kind, span: span(line, column, length) });
    }
}
