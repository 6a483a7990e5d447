//! Exponent expressions over `x` (and `y` in 2D).
//!
//! Grammar, all arithmetic in `f64`:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'y' | 'pi' | 'e' | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `abs`, `min`, `max`, `log` (natural), `exp`, `sin`.

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
}

#[derive(Debug, Clone, PartialEq)]
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
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Min,
    Max,
    Log,
    Exp,
    Sin,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| format!("bad number '{text}'"))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(format!("unexpected character '{c}'"));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, String> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node, String> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, String> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, String> {
        let tok = self.peek().cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err("missing ')'".into());
                }
                Ok(inner)
            }
            Tok::Sym(c) => Err(format!("unexpected '{c}'")),
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::Var(0)),
                "y" if self.dim == 2 => Ok(Node::Var(1)),
                "y" => Err("'y' is only available on two-dimensional grids".into()),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                _ => self.call(&name),
            },
        }
    }

    fn call(&mut self, name: &str) -> Result<Node, String> {
        let (func, arity) = match name {
            "abs" => (Func::Abs, Some(1)),
            "log" => (Func::Log, Some(1)),
            "exp" => (Func::Exp, Some(1)),
            "sin" => (Func::Sin, Some(1)),
            "min" => (Func::Min, None),
            "max" => (Func::Max, None),
            _ => return Err(format!("unknown name '{name}'")),
        };
        if !self.eat('(') {
            return Err(format!("'{name}' must be called with parentheses"));
        }
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(format!("missing ')' after arguments of '{name}'"));
        }
        match arity {
            Some(n) if args.len() != n => Err(format!(
                "'{name}' takes {n} argument(s), got {}",
                args.len()
            )),
            None if args.len() < 2 => Err(format!("'{name}' takes at least 2 arguments")),
            _ => Ok(Node::Call(func, args)),
        }
    }
}

impl Expr {
    /// Parses `src` for a grid of dimension `dim`.
    pub fn parse(src: &str, dim: usize) -> Result<Expr, String> {
        let toks = lex(src)?;
        if toks.is_empty() {
            return Err("empty expression".into());
        }
        let mut p = Parser { toks, pos: 0, dim };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(format!("trailing input after position {}", p.pos));
        }
        Ok(Expr { root })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        eval(&self.root, [x, y])
    }
}

fn eval(n: &Node, v: [f64; 2]) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(k) => v[*k],
        Node::Neg(a) => -eval(a, v),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let mut it = args.iter().map(|a| eval(a, v));
            match f {
                Func::Abs => it.next().unwrap().abs(),
                Func::Log => it.next().unwrap().ln(),
                Func::Exp => it.next().unwrap().exp(),
                Func::Sin => it.next().unwrap().sin(),
                Func::Min => it.fold(f64::INFINITY, f64::min),
                Func::Max => it.fold(f64::NEG_INFINITY, f64::max),
            }
        }
    }
}
