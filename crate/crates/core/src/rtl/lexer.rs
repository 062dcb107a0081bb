//! Tokenizer for the supported Verilog subset.

use super::error::ParseError;
use super::source::Span;
use super::word::{Word, MAX_WIDTH};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(Literal),
    /// Operators and punctuation, stored verbatim (`<=`, `(`, `&&`, ...).
    Sym(&'static str),
    /// `$display` and friends; never valid in the subset.
    SystemName(String),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    pub line: usize,
}

/// A numeric literal as written.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Literal {
    /// Declared size; `None` for plain integers and unsized based literals.
    pub size: Option<u32>,
    pub value: u128,
    pub unknown: u128,
    /// Bits written as `z` or `?`; wildcards in `casez` labels.
    pub wildcard: u128,
    /// `'0`, `'1`, `'x` fill literals take the width of their context.
    pub fill: Option<char>,
    pub text: String,
}

impl Literal {
    /// Self-determined width: the declared size, or 32 for unsized integers.
    pub fn width(&self) -> u32 {
        match (self.fill, self.size) {
            (Some(_), _) => 1,
            (None, Some(s)) => s,
            (None, None) => 32,
        }
    }

    /// The literal's value at `width` bits.
    pub fn to_word(&self, width: u32) -> Word {
        match self.fill {
            Some('0') => Word::zero(width),
            Some('1') => Word::ones(width),
            Some(_) => Word::all_x(width),
            None => {
                let own = Word::from_parts(self.width(), self.value, self.unknown | self.wildcard);
                own.resize(width)
            }
        }
    }
}

const SYMBOLS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "~&", "~|", "~^",
    "^~", "+:", "-:", "(", ")", "[", "]", "{", "}", ";", ":", ",", "?", "=", ".", "@", "#", "+",
    "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    Lexer {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        line: 1,
    }
    .run()
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            if self.pos >= self.bytes.len() {
                out.push(Token {
                    kind: TokenKind::Eof,
                    span: Span::new(self.pos, self.pos),
                    line: self.line,
                });
                return Ok(out);
            }
            out.push(self.token()?);
        }
    }

    fn peek(&self, off: usize) -> u8 {
        *self.bytes.get(self.pos + off).unwrap_or(&0)
    }

    fn bump(&mut self) {
        if self.peek(0) == b'\n' {
            self.line += 1;
        }
        self.pos += 1;
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (c, _) if c.is_ascii_whitespace() => self.bump(),
                (b'/', b'/') => {
                    while self.pos < self.bytes.len() && self.peek(0) != b'\n' {
                        self.bump();
                    }
                }
                (b'/', b'*') => {
                    let line = self.line;
                    self.pos += 2;
                    loop {
                        if self.pos >= self.bytes.len() {
                            return Err(ParseError::Syntax {
                                line,
                                expected: "`*/` closing block comment".into(),
                            });
                        }
                        if self.peek(0) == b'*' && self.peek(1) == b'/' {
                            self.pos += 2;
                            break;
                        }
                        self.bump();
                    }
                }
                (b'`', _) => {
                    // `timescale and `default_nettype carry no meaning for the
                    // interpreter; any other directive is outside the subset.
                    let start = self.pos + 1;
                    let mut end = start;
                    while end < self.bytes.len() && is_ident_char(self.bytes[end]) {
                        end += 1;
                    }
                    let name = &self.text[start..end];
                    if name != "timescale" && name != "default_nettype" {
                        return Err(ParseError::Unsupported {
                            line: self.line,
                            construct: format!("compiler directive `{name}"),
                        });
                    }
                    while self.pos < self.bytes.len() && self.peek(0) != b'\n' {
                        self.bump();
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn token(&mut self) -> Result<Token, ParseError> {
        let start = self.pos;
        let line = self.line;
        let c = self.peek(0);
        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            while is_ident_char(self.peek(0)) {
                self.pos += 1;
            }
            TokenKind::Ident(self.text[start..self.pos].to_string())
        } else if c == b'\\' {
            return Err(ParseError::Unsupported {
                line,
                construct: "escaped identifier".into(),
            });
        } else if c == b'$' {
            self.pos += 1;
            while is_ident_char(self.peek(0)) {
                self.pos += 1;
            }
            TokenKind::SystemName(self.text[start..self.pos].to_string())
        } else if c.is_ascii_digit() || c == b'\'' {
            TokenKind::Number(self.number(line)?)
        } else {
            let rest = &self.text[self.pos..];
            let sym = SYMBOLS
                .iter()
                .find(|s| rest.starts_with(**s))
                .ok_or_else(|| ParseError::Syntax {
                    line,
                    expected: format!("a token, found `{}`", rest.chars().next().unwrap_or(' ')),
                })?;
            self.pos += sym.len();
            TokenKind::Sym(sym)
        };
        Ok(Token {
            kind,
            span: Span::new(start, self.pos),
            line,
        })
    }

    fn number(&mut self, line: usize) -> Result<Literal, ParseError> {
        let start = self.pos;
        let mut size = None;
        if self.peek(0).is_ascii_digit() {
            let digits = self.take_while(|c| c.is_ascii_digit() || c == b'_');
            // A plain decimal unless followed by a base (spaces allowed).
            let save = (self.pos, self.line);
            while self.peek(0) == b' ' || self.peek(0) == b'\t' {
                self.pos += 1;
            }
            if self.peek(0) != b'\'' {
                self.pos = save.0;
                self.line = save.1;
                let value = parse_radix(&digits, 10).ok_or_else(|| bad_number(line, &digits))?;
                return Ok(Literal {
                    size: None,
                    value,
                    unknown: 0,
                    wildcard: 0,
                    fill: None,
                    text: self.text[start..self.pos].to_string(),
                });
            }
            let n: u32 = digits
                .replace('_', "")
                .parse()
                .map_err(|_| bad_number(line, &digits))?;
            if n == 0 || n > MAX_WIDTH {
                return Err(ParseError::Unsupported {
                    line,
                    construct: format!("literal width {n}"),
                });
            }
            size = Some(n);
        }
        // at the apostrophe
        self.pos += 1;
        let base = self.peek(0).to_ascii_lowercase();
        if base == b's' {
            return Err(ParseError::Unsupported {
                line,
                construct: "signed literal".into(),
            });
        }
        if size.is_none() && matches!(base, b'0' | b'1' | b'x' | b'z') {
            self.pos += 1;
            let fill = match base {
                b'z' => 'x',
                other => other as char,
            };
            return Ok(Literal {
                size: None,
                value: 0,
                unknown: 0,
                wildcard: 0,
                fill: Some(fill),
                text: self.text[start..self.pos].to_string(),
            });
        }
        let radix = match base {
            b'b' => 2,
            b'o' => 8,
            b'd' => 10,
            b'h' => 16,
            _ => {
                return Err(ParseError::Syntax {
                    line,
                    expected: "literal base b, o, d or h".into(),
                })
            }
        };
        self.pos += 1;
        while self.peek(0) == b' ' || self.peek(0) == b'\t' {
            self.pos += 1;
        }
        let digits = self.take_while(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'?');
        if digits.is_empty() {
            return Err(bad_number(line, ""));
        }
        let (value, unknown, wildcard) =
            parse_based(&digits, radix).ok_or_else(|| bad_number(line, &digits))?;
        let width = size.unwrap_or(32);
        // An unknown most significant digit extends through the upper bits.
        let written_bits = digits.replace('_', "").len() as u32 * bits_per_digit(radix);
        let (mut unknown, mut wildcard) = (unknown, wildcard);
        if radix != 10 && written_bits < width {
            let top = written_bits - 1;
            let upper = width_mask(width) & !width_mask(written_bits);
            if (unknown >> top) & 1 == 1 {
                unknown |= upper;
            }
            if (wildcard >> top) & 1 == 1 {
                wildcard |= upper;
            }
        }
        let m = width_mask(width);
        Ok(Literal {
            size,
            value: value & m,
            unknown: unknown & m,
            wildcard: wildcard & m,
            fill: None,
            text: self.text[start..self.pos].to_string(),
        })
    }

    fn take_while(&mut self, f: impl Fn(u8) -> bool) -> String {
        let start = self.pos;
        while self.pos < self.bytes.len() && f(self.peek(0)) {
            self.pos += 1;
        }
        self.text[start..self.pos].to_string()
    }
}

fn width_mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

fn bad_number(line: usize, text: &str) -> ParseError {
    ParseError::Syntax {
        line,
        expected: format!("a well-formed number, found `{text}`"),
    }
}

fn bits_per_digit(radix: u32) -> u32 {
    match radix {
        2 => 1,
        8 => 3,
        16 => 4,
        _ => 0,
    }
}

fn parse_radix(digits: &str, radix: u32) -> Option<u128> {
    let clean: String = digits.chars().filter(|c| *c != '_').collect();
    u128::from_str_radix(&clean, radix).ok()
}

/// Returns `(value, unknown, wildcard)` masks.
fn parse_based(digits: &str, radix: u32) -> Option<(u128, u128, u128)> {
    let clean: Vec<char> = digits.chars().filter(|c| *c != '_').collect();
    if radix == 10 {
        if clean.len() == 1 && matches!(clean[0], 'x' | 'X') {
            return Some((0, u128::MAX, 0));
        }
        if clean.len() == 1 && matches!(clean[0], 'z' | 'Z' | '?') {
            return Some((0, 0, u128::MAX));
        }
        let s: String = clean.iter().collect();
        return u128::from_str_radix(&s, 10).ok().map(|v| (v, 0, 0));
    }
    let bpd = bits_per_digit(radix);
    let digit_mask = (1u128 << bpd) - 1;
    let (mut value, mut unknown, mut wildcard) = (0u128, 0u128, 0u128);
    for c in clean {
        value = value.checked_shl(bpd)?;
        unknown <<= bpd;
        wildcard <<= bpd;
        match c {
            'x' | 'X' => unknown |= digit_mask,
            'z' | 'Z' | '?' => wildcard |= digit_mask,
            _ => {
                let d = c.to_digit(radix)? as u128;
                value |= d;
            }
        }
    }
    Some((value, unknown, wildcard))
}
