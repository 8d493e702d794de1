//! Line-oriented lexer and recursive-descent parser for loop programs.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::FrontendError;
use crate::distributions::DistKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(BigRational),
    Plus,
    Minus,
    Star,
    StarStar,
    Slash,
    At,
    Semi,
    Comma,
    LParen,
    RParen,
    Assign,
    Colon,
    Gt,
    Lt,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Num(q) => return write!(f, "`{q}`"),
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::StarStar => "**",
            Tok::Slash => "/",
            Tok::At => "@",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Assign => "=",
            Tok::Colon => ":",
            Tok::Gt => ">",
            Tok::Lt => "<",
        };
        write!(f, "`{s}`")
    }
}

fn lex_line(line: &str, line_no: usize) -> Result<Vec<(Tok, Pos)>, FrontendError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos {
            line: line_no,
            col: i + 1,
        };
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int_part: String = chars[start..i].iter().collect();
            let mut frac = String::new();
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    frac.push(chars[i]);
                    i += 1;
                }
            }
            out.push((Tok::Num(decimal(&int_part, &frac)), pos));
            continue;
        }
        let (tok, len) = match (c, chars.get(i + 1)) {
            ('*', Some('*')) => (Tok::StarStar, 2),
            ('*', _) => (Tok::Star, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('/', _) => (Tok::Slash, 1),
            ('@', _) => (Tok::At, 1),
            (';', _) => (Tok::Semi, 1),
            (',', _) => (Tok::Comma, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('=', _) => (Tok::Assign, 1),
            (':', _) => (Tok::Colon, 1),
            ('>', _) => (Tok::Gt, 1),
            ('<', _) => (Tok::Lt, 1),
            _ => {
                return Err(FrontendError::Syntax {
                    pos,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, pos));
        i += len;
    }
    Ok(out)
}

fn decimal(int_part: &str, frac: &str) -> BigRational {
    let digits = format!("{int_part}{frac}");
    let digits = if digits.is_empty() { "0".to_string() } else { digits };
    let n: BigInt = digits.parse().expect("ascii digits");
    let d = num_traits::pow(BigInt::from(10), frac.len());
    BigRational::new(n, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree; names are resolved to variables or symbols later.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(BigRational),
    Name(String, Pos),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn names(&self, out: &mut Vec<(String, Pos)>) {
        match self {
            Expr::Num(_) => {}
            Expr::Name(n, p) => out.push((n.clone(), *p)),
            Expr::Neg(e) => e.names(out),
            Expr::Bin(_, a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cop {
    Gt,
    Lt,
}

impl fmt::Display for Cop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cop::Gt => ">",
            Cop::Lt => "<",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistCall {
    pub kind: DistKind,
    pub params: Vec<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub expr: Expr,
    pub prob: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rhs {
    Draw(DistCall),
    Branches(Vec<Branch>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assign {
    pub target: String,
    pub pos: Pos,
    pub rhs: Rhs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuardSyntax {
    pub lhs: Expr,
    pub cop: Cop,
    pub rhs: Expr,
    pub pos: Pos,
}

/// Raw syntax tree of one program.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntaxTree {
    pub init: Vec<Assign>,
    pub guard: GuardSyntax,
    pub body: Vec<Assign>,
}

struct LineParser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    end: Pos,
}

impl LineParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.i).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|(t, _)| t.clone());
        self.i += 1;
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, FrontendError> {
        let found = match self.peek() {
            Some(t) => t.to_string(),
            None => "end of line".to_string(),
        };
        Err(FrontendError::Syntax {
            pos: self.pos(),
            message: format!("expected {expected}, found {found}"),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), FrontendError> {
        if self.peek() == Some(&tok) {
            self.i += 1;
            Ok(())
        } else {
            self.error(&tok.to_string())
        }
    }

    fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    fn expect_end(&self) -> Result<(), FrontendError> {
        if self.at_end() {
            Ok(())
        } else {
            self.error("end of line")
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), FrontendError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.i += 1;
                Ok((s, pos))
            }
            _ => self.error("identifier"),
        }
    }

    fn sum(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.i += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.i += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.i += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.i += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, FrontendError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::StarStar) {
            self.i += 1;
            // right-associative, binds tighter than unary minus on its left
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, FrontendError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(q)) => Ok(Expr::Num(q)),
            Some(Tok::Ident(s)) => Ok(Expr::Name(s, pos)),
            Some(Tok::LParen) => {
                let e = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => {
                self.i -= 1;
                self.error("expression")
            }
        }
    }

    fn dist_call(&mut self) -> Result<DistCall, FrontendError> {
        let pos = self.pos();
        self.expect(Tok::LParen)?;
        let (mut name, name_pos) = self.ident()?;
        // `chi-squared` lexes as three tokens
        if name == "chi" && self.peek() == Some(&Tok::Minus) {
            if let Some((Tok::Ident(rest), _)) = self.toks.get(self.i + 1) {
                name = format!("chi-{rest}");
                self.i += 2;
            }
        }
        let kind = DistKind::from_name(&name).ok_or(FrontendError::UnknownDistribution {
            pos: name_pos,
            name: name.clone(),
        })?;
        let mut params = Vec::new();
        while self.peek() == Some(&Tok::Comma) {
            self.i += 1;
            params.push(self.sum()?);
        }
        self.expect(Tok::RParen)?;
        Ok(DistCall { kind, params, pos })
    }

    fn rhs(&mut self) -> Result<Rhs, FrontendError> {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "RV")
            && self.toks.get(self.i + 1).map(|(t, _)| t) == Some(&Tok::LParen)
        {
            self.i += 1;
            return Ok(Rhs::Draw(self.dist_call()?));
        }
        let mut branches = Vec::new();
        loop {
            let expr = self.sum()?;
            let prob = if self.peek() == Some(&Tok::At) {
                self.i += 1;
                Some(self.sum()?)
            } else {
                None
            };
            branches.push(Branch { expr, prob });
            if self.peek() == Some(&Tok::Semi) {
                self.i += 1;
                continue;
            }
            break;
        }
        Ok(Rhs::Branches(branches))
    }

    fn assign(&mut self) -> Result<Assign, FrontendError> {
        let (target, pos) = self.ident()?;
        self.expect(Tok::Assign)?;
        let rhs = self.rhs()?;
        self.expect_end()?;
        Ok(Assign { target, pos, rhs })
    }
}

/// Parses program text into a syntax tree. Statements are one per line;
/// the loop body runs from the `while` line to the end of the file.
pub fn parse(text: &str) -> Result<SyntaxTree, FrontendError> {
    let mut init = Vec::new();
    let mut guard = None;
    let mut body = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let toks = lex_line(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let end = Pos {
            line: line_no,
            col: raw.chars().count() + 1,
        };
        let mut p = LineParser { toks, i: 0, end };
        if matches!(p.peek(), Some(Tok::Ident(s)) if s == "while") {
            if guard.is_some() {
                return Err(FrontendError::Syntax {
                    pos: p.pos(),
                    message: "only a single loop is supported".into(),
                });
            }
            let pos = p.pos();
            p.i += 1;
            let lhs = p.sum()?;
            let cop = match p.bump() {
                Some(Tok::Gt) => Cop::Gt,
                Some(Tok::Lt) => Cop::Lt,
                _ => {
                    p.i -= 1;
                    return p.error("`>` or `<`");
                }
            };
            let rhs = p.sum()?;
            p.expect(Tok::Colon)?;
            p.expect_end()?;
            guard = Some(GuardSyntax { lhs, cop, rhs, pos });
            continue;
        }
        let a = p.assign()?;
        if guard.is_some() {
            body.push(a);
        } else {
            init.push(a);
        }
    }
    let guard = guard.ok_or(FrontendError::Syntax {
        pos: Pos {
            line: last_line.max(1),
            col: 1,
        },
        message: "missing `while` loop".into(),
    })?;
    if body.is_empty() {
        return Err(FrontendError::Syntax {
            pos: guard.pos,
            message: "loop body is empty".into(),
        });
    }
    Ok(SyntaxTree { init, guard, body })
}

/// Evaluates a name-free expression to a rational, if possible.
pub(crate) fn rational_value(e: &Expr) -> Option<BigRational> {
    match e {
        Expr::Num(q) => Some(q.clone()),
        Expr::Name(..) => None,
        Expr::Neg(a) => Some(-rational_value(a)?),
        Expr::Bin(op, a, b) => {
            let (a, b) = (rational_value(a)?, rational_value(b)?);
            match op {
                BinOp::Add => Some(a + b),
                BinOp::Sub => Some(a - b),
                BinOp::Mul => Some(a * b),
                BinOp::Div => (!b.is_zero()).then(|| a / b),
                BinOp::Pow => {
                    if !b.is_integer() {
                        return None;
                    }
                    let k: i64 = b.to_integer().try_into().ok()?;
                    if k >= 0 {
                        Some(num_traits::pow(a, k as usize))
                    } else if a.is_zero() {
                        None
                    } else {
                        Some(num_traits::pow(BigRational::one() / a, k.unsigned_abs() as usize))
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        let toks = lex_line("x = 0.25", 1).unwrap();
        assert_eq!(toks[2].0, Tok::Num(BigRational::new(1.into(), 4.into())));
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        let t = parse("x = 1\nwhile x > 0:\n x = -x**2").unwrap();
        let Rhs::Branches(b) = &t.body[0].rhs else {
            panic!()
        };
        assert!(matches!(&b[0].expr, Expr::Neg(inner) if matches!(**inner, Expr::Bin(BinOp::Pow, ..))));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse("x = 1\nwhile x >> 0:\n x = x").unwrap_err();
        match err {
            FrontendError::Syntax { pos, .. } => assert_eq!(pos, Pos { line: 2, col: 10 }),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_distribution() {
        let err = parse("x = RV(poisson, 1)\nwhile x > 0:\n x = x - 1").unwrap_err();
        assert!(matches!(err, FrontendError::UnknownDistribution { ref name, .. } if name == "poisson"));
    }

    #[test]
    fn chi_squared_name() {
        let t = parse("x = 1\nwhile x > 0:\n s = RV(chi-squared, 3)\n x = x - s").unwrap();
        assert!(matches!(&t.body[0].rhs, Rhs::Draw(d) if d.kind == DistKind::ChiSquared));
    }
}
