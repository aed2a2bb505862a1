//! Recursive-descent parser for the expression text grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | base ("^" integer)?
//! base   := number | ident | fn "(" expr ")" | "(" expr ")"
//! ident  := "u" | "x"digit+ | "z"digit+ | "w"digit digit | "w"digit+"_"digit+ | name
//! fn     := sin | cos | exp | log | sqrt | tanh
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`. `pi` is the
//! float constant π; every other unrecognised name is a parameter.

use super::{Expr, Func, Number, Var};
use crate::Error;

pub fn parse(text: &str) -> Result<Expr, Error> {
    parse_at(text, 1, 1)
}

/// Parses `text` whose first character sits at `line`, `column` of some
/// enclosing file, so diagnostics point into that file.
pub(crate) fn parse_at(text: &str, line: usize, column: usize) -> Result<Expr, Error> {
    let tokens = lex(text, line, column)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        other => Err(p.error(format!("unexpected {}", other.describe()))),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Number),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(n) => format!("number {n}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str, line0: usize, col0: usize) -> Result<Vec<Spanned>, Error> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (line0, col0);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line: tl, column: tc });
            i += 1;
            col += 1;
            continue;
        }
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let mantissa: String = chars[start..i].iter().collect();
            if mantissa.matches('.').count() > 1 {
                return Err(parse_error(tl, tc, format!("malformed number '{mantissa}'")));
            }
            let mut exponent = 0i32;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                let digits_start = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j > digits_start {
                    let exp_text: String = chars[i + 1..j].iter().collect();
                    exponent = exp_text
                        .parse()
                        .map_err(|_| parse_error(tl, tc, format!("bad exponent '{exp_text}'")))?;
                    i = j;
                }
            }
            col += i - start;
            out.push(Spanned { tok: Tok::Num(Number::from_decimal(&mantissa, exponent)), line: tl, column: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, column: tc });
            continue;
        }
        return Err(parse_error(tl, tc, format!("unexpected character '{c}'")));
    }
    out.push(Spanned { tok: Tok::End, line, column: col });
    Ok(out)
}

fn parse_error(line: usize, column: usize, message: String) -> Error {
    Error::Parse { line, column, message }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> Error {
        let s = &self.tokens[self.pos];
        parse_error(s.line, s.column, message)
    }

    fn expect(&mut self, tok: Tok) -> Result<(), Error> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", tok.describe(), self.peek().describe())))
        }
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(-self.term()?);
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms) })
    }

    fn term(&mut self) -> Result<Expr, Error> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc * self.factor()?;
                }
                Tok::Slash => {
                    self.bump();
                    acc = acc / self.factor()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, Error> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.factor()? {
                Expr::Const(c) => Expr::Const(c.neg()),
                other => -other,
            });
        }
        let base = self.base()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let n = self.exponent()?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64, Error> {
        let parens = *self.peek() == Tok::LParen;
        if parens {
            self.bump();
        }
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        let n = match self.peek() {
            Tok::Num(n) => match n.as_integer() {
                Some(k) => k,
                None => return Err(self.error("exponent must be an integer".into())),
            },
            other => return Err(self.error(format!("expected integer exponent, found {}", other.describe()))),
        };
        self.bump();
        if parens {
            self.expect(Tok::RParen)?;
        }
        Ok(if negative { -n } else { n })
    }

    fn base(&mut self) -> Result<Expr, Error> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Const(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(arg.apply(f));
                }
                let var = classify(&name).map_err(|m| self.error(m))?;
                self.bump();
                Ok(var)
            }
            other => Err(self.error(format!("unexpected {}", other.describe()))),
        }
    }
}

fn index(digits: &str, name: &str) -> Result<usize, String> {
    match digits.parse::<usize>() {
        Ok(0) => Err(format!("index of '{name}' must be at least 1")),
        Ok(i) => Ok(i),
        Err(_) => Err(format!("bad index in '{name}'")),
    }
}

fn classify(name: &str) -> Result<Expr, String> {
    let all_digits = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    if name == "u" {
        return Ok(Expr::u());
    }
    if name == "pi" {
        return Ok(Expr::float(std::f64::consts::PI));
    }
    if let Some(rest) = name.strip_prefix('x').filter(|r| all_digits(r)) {
        return Ok(Expr::x(index(rest, name)?));
    }
    if let Some(rest) = name.strip_prefix('z').filter(|r| all_digits(r)) {
        return Ok(Expr::z(index(rest, name)?));
    }
    if let Some(rest) = name.strip_prefix('w') {
        if let Some((a, b)) = rest.split_once('_').filter(|(a, b)| all_digits(a) && all_digits(b)) {
            return Ok(Expr::w(index(a, name)?, index(b, name)?));
        }
        if rest.len() == 2 && all_digits(rest) {
            return Ok(Expr::w(index(&rest[..1], name)?, index(&rest[1..], name)?));
        }
    }
    Ok(Expr::Var(Var::Param(name.to_string())))
}
