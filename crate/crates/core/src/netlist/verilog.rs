//! Restricted structural Verilog: one module, scalar `input`/`output`/`wire` declarations and
//! continuous `assign` statements over `&`, `|`, `^`, `~` and parentheses.

use std::collections::HashSet;

use super::{Circuit, CircuitBuilder, GateKind, NetlistError};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn unsupported(line: usize, construct: impl Into<String>) -> NetlistError {
    NetlistError::Unsupported {
        line,
        construct: construct.into(),
    }
}

fn syntax(line: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax {
        line,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, NetlistError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut line = 1;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(line, "unterminated block comment")),
                    Some('*') if chars.get(i + 1) == Some(&'/') => {
                        i += 2;
                        break;
                    }
                    Some('\n') => line += 1,
                    _ => {}
                }
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '$')) {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line,
            });
        } else if "();,=&|^~".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                line,
            });
            i += 1;
        } else if c == '[' {
            return Err(unsupported(line, "vector range"));
        } else if c.is_ascii_digit() || c == '\'' {
            return Err(unsupported(line, "numeric literal"));
        } else if c == '@' || c == '<' {
            return Err(unsupported(line, "procedural statement"));
        } else {
            return Err(syntax(line, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum Expr {
    Var(String),
    Not(Box<Expr>),
    Bin(GateKind, Box<Expr>, Box<Expr>),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const RESERVED: &[&str] = &[
    "always",
    "initial",
    "reg",
    "integer",
    "generate",
    "parameter",
    "localparam",
    "function",
    "task",
    "supply0",
    "supply1",
    "tri",
    "inout",
    "module",
];

impl Parser {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |t| t.line)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Result<Tok, NetlistError> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| syntax(self.line(), "unexpected end of input"))?;
        self.pos += 1;
        Ok(t.tok.clone())
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), NetlistError> {
        let line = self.line();
        match self.next()? {
            Tok::Sym(s) if s == c => Ok(()),
            other => Err(syntax(line, format!("expected `{c}`, found {other:?}"))),
        }
    }

    fn ident(&mut self) -> Result<String, NetlistError> {
        let line = self.line();
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            other => Err(syntax(line, format!("expected identifier, found {other:?}"))),
        }
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    // or := xor ('|' xor)* ; xor := and ('^' and)* ; and := unary ('&' unary)*
    fn expr(&mut self) -> Result<Expr, NetlistError> {
        let mut lhs = self.xor_expr()?;
        while self.eat_sym('|') {
            lhs = Expr::Bin(GateKind::Or, Box::new(lhs), Box::new(self.xor_expr()?));
        }
        Ok(lhs)
    }

    fn xor_expr(&mut self) -> Result<Expr, NetlistError> {
        let mut lhs = self.and_expr()?;
        while self.eat_sym('^') {
            lhs = Expr::Bin(GateKind::Xor, Box::new(lhs), Box::new(self.and_expr()?));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, NetlistError> {
        let mut lhs = self.unary()?;
        while self.eat_sym('&') {
            lhs = Expr::Bin(GateKind::And, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, NetlistError> {
        if self.eat_sym('~') {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat_sym('(') {
            let e = self.expr()?;
            self.expect_sym(')')?;
            return Ok(e);
        }
        Ok(Expr::Var(self.ident()?))
    }

    fn name_list(&mut self) -> Result<Vec<String>, NetlistError> {
        let mut names = vec![self.ident()?];
        while self.eat_sym(',') {
            names.push(self.ident()?);
        }
        Ok(names)
    }
}

#[derive(Default)]
struct Module {
    name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    wires: HashSet<String>,
    assigns: Vec<(usize, String, Expr)>,
}

fn parse_module(text: &str) -> Result<Module, NetlistError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let mut m = Module::default();
    if p.ident()? != "module" {
        return Err(syntax(1, "expected `module`"));
    }
    m.name = p.ident()?;

    if p.eat_sym('(') && !p.eat_sym(')') {
        // Plain port names, or ANSI-style ports where a direction keyword carries forward.
        let mut direction: Option<String> = None;
        loop {
            let mut word = p.ident()?;
            if matches!(word.as_str(), "input" | "output") {
                direction = Some(word);
                word = p.ident()?;
                if word == "wire" {
                    word = p.ident()?;
                }
            } else if matches!(word.as_str(), "inout" | "reg") {
                return Err(unsupported(p.line(), format!("`{word}` port")));
            }
            match direction.as_deref() {
                Some("input") => m.inputs.push(word),
                Some("output") => m.outputs.push(word),
                _ => {}
            }
            if p.eat_sym(')') {
                break;
            }
            p.expect_sym(',')?;
        }
    }
    p.expect_sym(';')?;

    loop {
        let line = p.line();
        let word = p.ident()?;
        match word.as_str() {
            "endmodule" => break,
            "input" | "output" | "wire" => {
                if p.peek_ident() == Some("wire") {
                    p.pos += 1;
                }
                if p.peek_ident() == Some("reg") {
                    return Err(unsupported(line, "reg declaration"));
                }
                let names = p.name_list()?;
                if word == "wire" && names.len() == 1 && p.eat_sym('=') {
                    let e = p.expr()?;
                    m.assigns.push((line, names[0].clone(), e));
                }
                p.expect_sym(';')?;
                match word.as_str() {
                    "input" => m.inputs.extend(names),
                    "output" => m.outputs.extend(names),
                    _ => m.wires.extend(names),
                }
            }
            "assign" => loop {
                let line = p.line();
                let target = p.ident()?;
                p.expect_sym('=')?;
                let e = p.expr()?;
                m.assigns.push((line, target, e));
                if p.eat_sym(';') {
                    break;
                }
                p.expect_sym(',')?;
            },
            w if RESERVED.contains(&w) => {
                return Err(unsupported(line, format!("`{w}`")));
            }
            w => {
                if p.peek_ident().is_some() {
                    return Err(unsupported(line, format!("module instance of `{w}`")));
                }
                return Err(syntax(line, format!("unexpected `{w}`")));
            }
        }
    }
    if p.peek().is_some() {
        return Err(unsupported(p.line(), "more than one module"));
    }
    Ok(m)
}

struct Lowering<'a> {
    b: CircuitBuilder,
    used: HashSet<String>,
    declared: &'a HashSet<String>,
    fresh: usize,
}

impl Lowering<'_> {
    fn temp(&mut self, target: &str) -> String {
        loop {
            self.fresh += 1;
            let t = format!("{target}_t{}", self.fresh);
            if !self.declared.contains(&t) && !self.used.contains(&t) {
                self.used.insert(t.clone());
                return t;
            }
        }
    }

    fn check(&self, line: usize, name: &str) -> Result<(), NetlistError> {
        if self.declared.contains(name) {
            Ok(())
        } else {
            Err(syntax(line, format!("undeclared identifier `{name}`")))
        }
    }

    /// Lowers `e` and returns the wire holding its value. When `dest` is given, the top gate
    /// drives it directly.
    fn lower(
        &mut self,
        line: usize,
        e: &Expr,
        target: &str,
        dest: Option<&str>,
    ) -> Result<String, NetlistError> {
        let out = |me: &mut Self| dest.map_or_else(|| me.temp(target), str::to_string);
        match e {
            Expr::Var(v) => {
                self.check(line, v)?;
                match dest {
                    Some(d) => {
                        self.b.gate(GateKind::Buf, &[v], d);
                        Ok(d.to_string())
                    }
                    None => Ok(v.clone()),
                }
            }
            Expr::Not(inner) => {
                let a = self.lower(line, inner, target, None)?;
                let o = out(self);
                self.b.gate(GateKind::Not, &[&a], &o);
                Ok(o)
            }
            Expr::Bin(kind, l, r) => {
                let a = self.lower(line, l, target, None)?;
                let c = self.lower(line, r, target, None)?;
                let o = out(self);
                self.b.gate(*kind, &[&a, &c], &o);
                Ok(o)
            }
        }
    }
}

/// Parses the restricted Verilog subset and lowers every assignment to a gate tree. `~(a & b)`
/// lowers to AND followed by NOT; no gate fusion is attempted.
pub fn parse_verilog_subset(text: &str) -> Result<Circuit, NetlistError> {
    let m = parse_module(text)?;
    let declared: HashSet<String> = m
        .inputs
        .iter()
        .chain(&m.outputs)
        .chain(&m.wires)
        .cloned()
        .collect();
    let mut lw = Lowering {
        b: CircuitBuilder::new(m.name.clone()),
        used: HashSet::new(),
        declared: &declared,
        fresh: 0,
    };
    for i in &m.inputs {
        lw.b.evaluator_input(i);
    }
    for (line, target, e) in &m.assigns {
        lw.check(*line, target)?;
        lw.lower(*line, e, target, Some(target))?;
    }
    for o in &m.outputs {
        lw.b.output(o);
    }
    lw.b.build()
}
