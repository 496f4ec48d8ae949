//! Tokenizer. Tracks 1-based line/column positions for error reporting.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Predicate,
    Routine,
    Req,
    Ens,
    If,
    Then,
    Else,
    While,
    Inv,
    Do,
    Open,
    Close,
    Skip,
    Message,
    Malloc,
    Free,
}

impl Keyword {
    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Predicate => "predicate",
            Keyword::Routine => "routine",
            Keyword::Req => "req",
            Keyword::Ens => "ens",
            Keyword::If => "if",
            Keyword::Then => "then",
            Keyword::Else => "else",
            Keyword::While => "while",
            Keyword::Inv => "inv",
            Keyword::Do => "do",
            Keyword::Open => "open",
            Keyword::Close => "close",
            Keyword::Skip => "skip",
            Keyword::Message => "message",
            Keyword::Malloc => "malloc",
            Keyword::Free => "free",
        }
    }

    fn from_str(s: &str) -> Option<Keyword> {
        Some(match s {
            "predicate" => Keyword::Predicate,
            "routine" => Keyword::Routine,
            "req" => Keyword::Req,
            "ens" => Keyword::Ens,
            "if" => Keyword::If,
            "then" => Keyword::Then,
            "else" => Keyword::Else,
            "while" => Keyword::While,
            "inv" => Keyword::Inv,
            "do" => Keyword::Do,
            "open" => Keyword::Open,
            "close" => Keyword::Close,
            "skip" => Keyword::Skip,
            "message" => Keyword::Message,
            "malloc" => Keyword::Malloc,
            "free" => Keyword::Free,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Kw(Keyword),
    Ident(String),
    Nat(i64),
    Str(String),
    Assign, // :=
    MapsTo, // |->
    Semi,   // ;
    Comma,  // ,
    LParen, // (
    RParen, // )
    LBrack, // [
    RBrack, // ]
    Eq,     // =
    Lt,     // <
    Bang,   // !
    Plus,   // +
    Minus,  // -
    Star,   // *
    Quest,  // ?
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Kw(k) => write!(f, "'{}'", k.as_str()),
            Token::Ident(s) => write!(f, "identifier '{s}'"),
            Token::Nat(n) => write!(f, "number {n}"),
            Token::Str(s) => write!(f, "string \"{s}\""),
            Token::Assign => write!(f, "':='"),
            Token::MapsTo => write!(f, "'|->'"),
            Token::Semi => write!(f, "';'"),
            Token::Comma => write!(f, "','"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::LBrack => write!(f, "'['"),
            Token::RBrack => write!(f, "']'"),
            Token::Eq => write!(f, "'='"),
            Token::Lt => write!(f, "'<'"),
            Token::Bang => write!(f, "'!'"),
            Token::Plus => write!(f, "'+'"),
            Token::Minus => write!(f, "'-'"),
            Token::Star => write!(f, "'*'"),
            Token::Quest => write!(f, "'?'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub token: Token,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

struct Lexer<'a> {
    src: &'a [u8],
    idx: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.idx).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.idx += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.src.get(self.idx + 1) == Some(&b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn error(&self, pos: Pos, message: impl Into<String>) -> LexError {
        LexError {
            pos,
            message: message.into(),
        }
    }

    fn next_token(&mut self) -> Result<Option<Spanned>, LexError> {
        self.skip_trivia();
        let pos = self.pos();
        let c = match self.peek() {
            Some(c) => c,
            None => return Ok(None),
        };
        let token = match c {
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = self.idx;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let word = std::str::from_utf8(&self.src[start..self.idx]).unwrap();
                match Keyword::from_str(word) {
                    Some(kw) => Token::Kw(kw),
                    None => Token::Ident(word.to_string()),
                }
            }
            b'0'..=b'9' => {
                let start = self.idx;
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let digits = std::str::from_utf8(&self.src[start..self.idx]).unwrap();
                let n: i64 = digits.parse().map_err(|_| {
                    self.error(pos, format!("integer literal out of range: {digits}"))
                })?;
                Token::Nat(n)
            }
            b'"' => {
                self.bump();
                let mut text = String::new();
                loop {
                    match self.bump() {
                        Some(b'"') => break,
                        Some(c) if (0x20..0x7f).contains(&c) => text.push(c as char),
                        Some(_) => {
                            return Err(self.error(pos, "string literals are printable ASCII only"))
                        }
                        None => return Err(self.error(pos, "unterminated string literal")),
                    }
                }
                Token::Str(text)
            }
            b':' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Token::Assign
                } else {
                    return Err(self.error(pos, "expected ':=' after ':'"));
                }
            }
            b'|' => {
                self.bump();
                if self.peek() == Some(b'-') {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Token::MapsTo
                    } else {
                        return Err(self.error(pos, "expected '|->'"));
                    }
                } else {
                    return Err(self.error(pos, "expected '|->'"));
                }
            }
            b';' => {
                self.bump();
                Token::Semi
            }
            b',' => {
                self.bump();
                Token::Comma
            }
            b'(' => {
                self.bump();
                Token::LParen
            }
            b')' => {
                self.bump();
                Token::RParen
            }
            b'[' => {
                self.bump();
                Token::LBrack
            }
            b']' => {
                self.bump();
                Token::RBrack
            }
            b'=' => {
                self.bump();
                Token::Eq
            }
            b'<' => {
                self.bump();
                Token::Lt
            }
            b'!' => {
                self.bump();
                Token::Bang
            }
            b'+' => {
                self.bump();
                Token::Plus
            }
            b'-' => {
                self.bump();
                Token::Minus
            }
            b'*' => {
                self.bump();
                Token::Star
            }
            b'?' => {
                self.bump();
                Token::Quest
            }
            other => {
                return Err(self.error(pos, format!("unexpected character '{}'", other as char)))
            }
        };
        Ok(Some(Spanned { token, pos }))
    }
}

pub fn lex(src: &str) -> Result<Vec<Spanned>, LexError> {
    let mut lexer = Lexer {
        src: src.as_bytes(),
        idx: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    while let Some(t) = lexer.next_token()? {
        tokens.push(t);
    }
    Ok(tokens)
}
