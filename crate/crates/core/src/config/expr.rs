//! Arithmetic expressions over `x, y, z, t`.
//!
//! ```text
//! expr    := add [("<" | "<=" | ">" | ">=" | "==" | "!=") add]
//! add     := mul (("+" | "-") mul)*
//! mul     := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := atom ["^" unary]
//! atom    := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Names: `x y z t pi`. Functions: `sin cos tan asin acos atan sinh cosh tanh
//! exp ln log sqrt abs sign floor ceil` (one argument), `atan2 min max pow`
//! (two), `if(c, a, b)` (`a` where `c ≠ 0`). Comparisons yield 1 or 0. All
//! numbers are `f64`.

use crate::error::{Error, Result};

const MAX_LEN: usize = 4096;
const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy)]
enum Func {
    Unary(fn(f64) -> f64),
    Binary(fn(f64, f64) -> f64),
    If,
}

fn lookup(name: &str) -> Option<(Func, usize)> {
    use Func::*;
    Some(match name {
        "sin" => (Unary(f64::sin), 1),
        "cos" => (Unary(f64::cos), 1),
        "tan" => (Unary(f64::tan), 1),
        "asin" => (Unary(f64::asin), 1),
        "acos" => (Unary(f64::acos), 1),
        "atan" => (Unary(f64::atan), 1),
        "sinh" => (Unary(f64::sinh), 1),
        "cosh" => (Unary(f64::cosh), 1),
        "tanh" => (Unary(f64::tanh), 1),
        "exp" => (Unary(f64::exp), 1),
        "ln" | "log" => (Unary(f64::ln), 1),
        "sqrt" => (Unary(f64::sqrt), 1),
        "abs" => (Unary(f64::abs), 1),
        "sign" => (Unary(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }), 1),
        "floor" => (Unary(f64::floor), 1),
        "ceil" => (Unary(f64::ceil), 1),
        "atan2" => (Binary(f64::atan2), 2),
        "min" => (Binary(f64::min), 2),
        "max" => (Binary(f64::max), 2),
        "pow" => (Binary(f64::powf), 2),
        "if" => (If, 3),
        _ => return None,
    })
}

/// Parsed expression; evaluation is allocation-free.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    uses_time: bool,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        if src.len() > MAX_LEN {
            return Err(Error::Config(format!("expression longer than {MAX_LEN} characters")));
        }
        let mut p = Parser { s: src.as_bytes(), pos: 0, depth: 0, uses_time: false };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr { root, uses_time: p.uses_time })
    }

    pub fn eval(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        eval(&self.root, &[x, y, z, t])
    }

    /// `true` if `t` occurs in the expression.
    pub fn uses_time(&self) -> bool {
        self.uses_time
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

fn truth(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn eval(n: &Node, v: &[f64; 4]) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(i) => v[*i],
        Node::Neg(a) => -eval(a, v),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => a.powf(b),
                Op::Lt => truth(a < b),
                Op::Le => truth(a <= b),
                Op::Gt => truth(a > b),
                Op::Ge => truth(a >= b),
                Op::Eq => truth(a == b),
                Op::Ne => truth(a != b),
            }
        }
        Node::Call(f, args) => match f {
            Func::Unary(g) => g(eval(&args[0], v)),
            Func::Binary(g) => g(eval(&args[0], v), eval(&args[1], v)),
            Func::If => {
                if eval(&args[0], v) != 0.0 {
                    eval(&args[1], v)
                } else {
                    eval(&args[2], v)
                }
            }
        },
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    depth: usize,
    uses_time: bool,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Config(format!("expression: {msg} at column {}", self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.s[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn expr(&mut self) -> Result<Node> {
        self.nested(|p| {
            let a = p.add()?;
            for (tok, op) in [("<=", Op::Le), (">=", Op::Ge), ("==", Op::Eq), ("!=", Op::Ne), ("<", Op::Lt), (">", Op::Gt)] {
                if p.eat(tok) {
                    let b = p.add()?;
                    return Ok(Node::Bin(op, Box::new(a), Box::new(b)));
                }
            }
            Ok(a)
        })
    }

    fn add(&mut self) -> Result<Node> {
        let mut a = self.mul()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(a),
            };
            self.pos += 1;
            a = Node::Bin(op, Box::new(a), Box::new(self.mul()?));
        }
    }

    fn mul(&mut self) -> Result<Node> {
        let mut a = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(a),
            };
            self.pos += 1;
            a = Node::Bin(op, Box::new(a), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        self.nested(|p| match p.peek() {
            Some(b'-') => {
                p.pos += 1;
                Ok(Node::Neg(Box::new(p.unary()?)))
            }
            Some(b'+') => {
                p.pos += 1;
                p.unary()
            }
            _ => p.power(),
        })
    }

    fn power(&mut self) -> Result<Node> {
        let a = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let b = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(a), Box::new(b)));
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(")") {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.s.len() && matches!(self.s[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && matches!(self.s[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.err(&format!("invalid number '{text}'"))
        })
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        if self.peek() == Some(b'(') {
            let (f, arity) = lookup(name).ok_or_else(|| {
                self.pos = start;
                self.err(&format!("unknown function '{name}'"))
            })?;
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(",") {
                args.push(self.expr()?);
            }
            if !self.eat(")") {
                return Err(self.err("expected ')'"));
            }
            if args.len() != arity {
                return Err(self.err(&format!("'{name}' takes {arity} argument(s), got {}", args.len())));
            }
            return Ok(Node::Call(f, args));
        }
        match name {
            "x" => Ok(Node::Var(0)),
            "y" => Ok(Node::Var(1)),
            "z" => Ok(Node::Var(2)),
            "t" => {
                self.uses_time = true;
                Ok(Node::Var(3))
            }
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            _ => {
                self.pos = start;
                Err(self.err(&format!("unknown name '{name}'")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval(0.5, -2.0, 3.0, 0.25)
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("1/2"), 0.5);
        assert_eq!(ev("x * y + z"), 2.0);
        assert_eq!(ev("t"), 0.25);
        assert_eq!(ev("x < 40"), 1.0);
        assert_eq!(ev("y >= 0"), 0.0);
        assert_eq!(ev("if(x < 1, 7, 8)"), 7.0);
        assert_eq!(ev("max(x, y) + min(x, y)"), -1.5);
        assert!((ev("sin(pi / 2)") - 1.0).abs() < 1e-15);
        assert!((ev("atan2(1, 1)") - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(ev("1e-3 * 2E2"), 0.2);
        assert_eq!(ev("4e-4*0.1"), 4e-4 * 0.1);
    }

    #[test]
    fn time_dependence_is_detected() {
        assert!(Expr::parse("sin(t) * x").unwrap().uses_time());
        assert!(!Expr::parse("sin(x)").unwrap().uses_time());
    }

    #[test]
    fn errors_are_reported() {
        for bad in ["", "1 +", "(1", "foo", "sin(1, 2)", "bar(1)", "1 2", "3 $ 4", "..", "1e"] {
            let e = Expr::parse(bad);
            assert!(matches!(e, Err(Error::Config(_))), "{bad}: {e:?}");
        }
        let deep = "(".repeat(200) + "1" + &")".repeat(200);
        assert!(Expr::parse(&deep).is_err());
        assert!(Expr::parse(&"-".repeat(500)).is_err());
    }

    proptest! {
        #[test]
        fn never_panics(s in "[-+*/^()<>=!,.0-9a-z ]{0,64}") {
            if let Ok(e) = Expr::parse(&s) {
                let _ = e.eval(0.1, 0.2, 0.3, 0.4);
            }
        }

        #[test]
        fn linear_forms(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let e = Expr::parse(&format!("{a} * x + {b} * y")).unwrap();
            prop_assert!((e.eval(1.5, -0.5, 0.0, 0.0) - (1.5 * a - 0.5 * b)).abs() < 1e-12);
        }
    }
}
