use crate::error::{Diagnostic, Error, Result, Span};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Names, numbers and annotations: anything built from word characters.
    Word(String),
    Punct(char),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '\'' | '.' | '@' | '-' | '+')
}

const PUNCT: &str = "{}(),;=:|";

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let span = Span { line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
        } else if PUNCT.contains(c) {
            chars.next();
            col += 1;
            out.push(Token { tok: Tok::Punct(c), span });
        } else if is_word_char(c) {
            let mut w = String::new();
            while let Some(&c) = chars.peek() {
                if !is_word_char(c) {
                    break;
                }
                w.push(c);
                chars.next();
                col += 1;
            }
            out.push(Token { tok: Tok::Word(w), span });
        } else {
            return Err(Error::Parse(Diagnostic {
                span,
                message: format!("unexpected character `{}`", c.escape_default()),
            }));
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}

/// Cursor over a token stream with span-carrying errors.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Self> {
        Ok(Cursor {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn span(&self) -> Span {
        self.peek().span
    }

    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    pub fn error<T>(&self, span: Span, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse(Diagnostic {
            span,
            message: message.into(),
        }))
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    pub fn is_punct(&self, c: char) -> bool {
        self.peek().tok == Tok::Punct(c)
    }

    pub fn eat_punct(&mut self, c: char) -> bool {
        if self.is_punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, c: char) -> Result<Span> {
        let t = self.peek().clone();
        if t.tok == Tok::Punct(c) {
            self.next();
            Ok(t.span)
        } else {
            self.error(t.span, format!("expected `{c}`, found {}", Self::describe(&t.tok)))
        }
    }

    pub fn is_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x == w)
    }

    pub fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.next();
            true
        } else {
            false
        }
    }

    /// Any word; `what` names the expectation in the error.
    pub fn word(&mut self, what: &str) -> Result<(String, Span)> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Word(w) => {
                self.next();
                Ok((w, t.span))
            }
            other => self.error(t.span, format!("expected {what}, found {}", Self::describe(&other))),
        }
    }

    /// Comma-separated words between `open` and `close`.
    pub fn word_list(&mut self, open: char, close: char, what: &str) -> Result<Vec<(String, Span)>> {
        self.expect_punct(open)?;
        let mut out = Vec::new();
        if self.eat_punct(close) {
            return Ok(out);
        }
        loop {
            out.push(self.word(what)?);
            if self.eat_punct(close) {
                return Ok(out);
            }
            self.expect_punct(',')?;
        }
    }
}
