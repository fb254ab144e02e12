//! Infix expression parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' int)?
//! int    := '-'? digits | '(' '-'? digits ')'
//! atom   := number | name | func '(' expr ')' | '(' expr ')'
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use super::{Expr, Func};

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{message} at column {column}")]
pub struct ParseError {
    pub message: String,
    /// 1-based character column.
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Name(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int: String = chars[start..i].iter().collect();
            let mut value = BigRational::from_integer(int.parse::<BigInt>().unwrap_or_else(|_| BigInt::zero()));
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                let fs = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let frac: String = chars[fs..i].iter().collect();
                if !frac.is_empty() {
                    let num: BigInt = frac.parse().expect("digits");
                    let den = num_traits::pow::pow(BigInt::from(10), frac.len());
                    value += BigRational::new(num, den);
                }
            }
            out.push((Tok::Num(value), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Name(chars[start..i].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else {
            return Err(ParseError { message: format!("unexpected character '{c}'"), column: col });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { message: message.into(), column: self.column() })
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if self.eat(op) {
            Ok(())
        } else {
            self.err(format!("expected '{op}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc + self.term()?;
            } else if self.eat('-') {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc * self.unary()?;
            } else if self.eat('/') {
                let col = self.column();
                let d = self.unary()?;
                if d.is_zero() {
                    return Err(ParseError { message: "division by zero".into(), column: col });
                }
                acc = acc / d;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let paren = self.eat('(');
        let neg = self.eat('-');
        let n = match self.peek() {
            Some(Tok::Num(q)) if q.is_integer() => {
                let q = q.clone();
                self.pos += 1;
                i64::try_from(q.to_integer()).or_else(|_| self.err("exponent too large"))?
            }
            _ => return self.err("exponent must be an integer literal"),
        };
        if paren {
            self.expect(')')?;
        }
        let n = if neg { -n } else { n };
        if n < 0 && base.is_zero() {
            return self.err("division by zero");
        }
        Ok(base.pow(n))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(q)) => {
                self.pos += 1;
                Ok(Expr::rational(q))
            }
            Some(Tok::Name(name)) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::apply(f, arg));
                }
                if self.peek() == Some(&Tok::Op('(')) {
                    return self.err(format!("unknown function '{name}'"));
                }
                Ok(Expr::var(&name))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of input"),
        }
    }
}

pub fn parse(s: &str) -> Result<Expr, ParseError> {
    let toks = lex(s)?;
    let end = s.chars().count() + 1;
    let mut p = Parser { toks, pos: 0, end };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("1 - 2 - 3").unwrap(), Expr::int(-4));
        assert_eq!(parse("2*3^2").unwrap(), Expr::int(18));
        assert_eq!(parse("-x^2").unwrap(), -(Expr::var("x").pow(2)));
        assert_eq!(parse("12/4/3").unwrap(), Expr::int(1));
        assert_eq!(parse("x^-2").unwrap(), Expr::var("x").pow(-2));
        assert_eq!(parse("x^(-2)").unwrap(), Expr::var("x").pow(-2));
        assert_eq!(parse("1.25").unwrap(), Expr::frac(5, 4));
    }

    #[test]
    fn errors_carry_columns() {
        assert_eq!(parse("x + $").unwrap_err().column, 5);
        assert_eq!(parse("sin x").unwrap_err().column, 5);
        assert!(parse("foo(x)").unwrap_err().message.contains("unknown function"));
        assert!(parse("x^y").is_err());
        assert!(parse("x/0").is_err());
        assert!(parse("(x + 1").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5i64..6).prop_map(Expr::int),
            (1i64..5, 1i64..5).prop_map(|(a, b)| Expr::frac(a, b)),
            prop::sample::select(vec!["x", "y", "z"]).prop_map(Expr::var),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), -2i64..4).prop_map(|(a, n)| if a.is_zero() { a } else { a.pow(n) }),
                inner.clone().prop_map(|a| a.sin()),
                inner.clone().prop_map(|a| a.cos()),
                inner.prop_map(|a| a.exp()),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(e in arb_expr()) {
            let text = e.to_string();
            let back = parse(&text).unwrap();
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
