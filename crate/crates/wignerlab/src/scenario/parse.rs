//! The `.scn` scenario text format.
//!
//! Line comments start with `#`. Directives begin on their own line; brace
//! blocks may span lines. The directives are:
//!
//! ```text
//! register <name> labels=<l1,l2,...>            # system register
//! agent <name> ready=<label> labels=<l1,...>    # agent-record register
//! prepare <reg> : <amp>, <amp>, ...             # amplitudes in label order
//! cprepare <reg> on <record> { <outcome>: <amps...> ; ... }
//! ameasure <agent> on <reg,...> basis { <label>: <amps...> ; ... } record <record>
//! xmeasure on <reg,...> basis { ... } record <record>
//! xmeasure on <reg,...> blocks { ... } record <record>
//! unitary on <reg,...> matrix { row ; row ; ... }
//! ```
//!
//! In a `blocks { ... }` spec an outcome may span several vectors, separated
//! by `|`. Amplitudes follow the expression grammar
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := decimal | 'sqrt(' decimal ')' | 'i' | '(' expr ')' | '-' factor
//! ```
//!
//! where `i` is the imaginary unit and `decimal` allows an optional exponent
//! (`1.5e-3`). Names and labels are identifiers (`[A-Za-z_][A-Za-z0-9_]*`).

use num_complex::Complex64;

use super::{
    RegisterDecl, RegisterKind, ScnResult, Scenario, ScenarioError, SpecDecl, SpecKind, Step,
};
use crate::qcore::DEFAULT_DIM_CAP;

/// Knobs for parsing; today only the layout dimension cap.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub dim_cap: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { dim_cap: DEFAULT_DIM_CAP }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> ScnResult<Scenario> {
    parse_scenario_with(text, &ParseOptions::default())
}

pub fn parse_scenario_with(text: &str, options: &ParseOptions) -> ScnResult<Scenario> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut scenario = parser.document()?;
    scenario.dim_cap = options.dim_cap;
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err_at(line: usize, col: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, col, message: message.into() }
}

fn lex(text: &str) -> ScnResult<Vec<Token>> {
    let mut tokens = Vec::new();
    for (line_idx, raw_line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = match raw_line.find('#') {
            Some(cut) => &raw_line[..cut],
            None => raw_line,
        };
        let bytes: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                    i += 1;
                }
                // Optional exponent.
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| err_at(line_no, col, format!("bad number `{text}`")))?;
                tokens.push(Token { tok: Tok::Number(value), line: line_no, col });
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                tokens.push(Token { tok: Tok::Ident(text), line: line_no, col });
            } else if "={}():,;|*/+-".contains(c) {
                tokens.push(Token { tok: Tok::Punct(c), line: line_no, col });
                i += 1;
            } else {
                return Err(err_at(line_no, col, format!("unexpected character `{c}`")));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.col),
            None => self
                .tokens
                .last()
                .map(|t| (t.line, t.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn fail<T>(&self, message: impl Into<String>) -> ScnResult<T> {
        let (line, col) = self.here();
        Err(err_at(line, col, message))
    }

    fn expect_ident(&mut self, what: &str) -> ScnResult<String> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> ScnResult<()> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected `{kw}`")),
        }
    }

    fn expect_punct(&mut self, p: char) -> ScnResult<()> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Punct(c)) if c == p => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected `{p}`")),
        }
    }

    fn eat_punct(&mut self, p: char) -> bool {
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Punct(c)) if *c == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn document(&mut self) -> ScnResult<Scenario> {
        let mut registers = Vec::new();
        let mut steps = Vec::new();
        while let Some(token) = self.peek() {
            let (line, col) = (token.line, token.col);
            let word = match &token.tok {
                Tok::Ident(s) => s.clone(),
                _ => return Err(err_at(line, col, "expected a directive")),
            };
            self.pos += 1;
            match word.as_str() {
                "register" => registers.push(self.register_decl(false)?),
                "agent" => registers.push(self.register_decl(true)?),
                "prepare" => steps.push(self.prepare()?),
                "cprepare" => steps.push(self.cprepare()?),
                "ameasure" => steps.push(self.ameasure()?),
                "xmeasure" => steps.push(self.xmeasure()?),
                "unitary" => steps.push(self.unitary()?),
                other => {
                    return Err(err_at(line, col, format!("unknown directive `{other}`")))
                }
            }
        }
        Ok(Scenario::new(registers, steps))
    }

    fn ident_list(&mut self) -> ScnResult<Vec<String>> {
        let mut names = vec![self.expect_ident("a name")?];
        while self.eat_punct(',') {
            names.push(self.expect_ident("a name")?);
        }
        Ok(names)
    }

    fn register_decl(&mut self, agent: bool) -> ScnResult<RegisterDecl> {
        let name = self.expect_ident("a register name")?;
        let mut ready = None;
        if agent {
            self.expect_keyword("ready")?;
            self.expect_punct('=')?;
            ready = Some(self.expect_ident("the ready label")?);
        }
        self.expect_keyword("labels")?;
        self.expect_punct('=')?;
        let labels = self.ident_list()?;
        let kind = match ready {
            Some(ready) => RegisterKind::Agent { ready },
            None => RegisterKind::System,
        };
        Ok(RegisterDecl { name, labels, kind })
    }

    fn prepare(&mut self) -> ScnResult<Step> {
        let register = self.expect_ident("a register name")?;
        self.expect_punct(':')?;
        let amplitudes = self.amp_list()?;
        Ok(Step::Prepare { register, amplitudes })
    }

    fn cprepare(&mut self) -> ScnResult<Step> {
        let target = self.expect_ident("a register name")?;
        self.expect_keyword("on")?;
        let control = self.expect_ident("a record name")?;
        self.expect_punct('{')?;
        let mut cases = Vec::new();
        loop {
            let label = self.expect_ident("an outcome label")?;
            self.expect_punct(':')?;
            cases.push((label, self.amp_list()?));
            if !self.eat_punct(';') {
                break;
            }
            if matches!(self.peek().map(|t| &t.tok), Some(Tok::Punct('}'))) {
                break;
            }
        }
        self.expect_punct('}')?;
        Ok(Step::ControlledPrepare { control, cases, target })
    }

    fn ameasure(&mut self) -> ScnResult<Step> {
        let agent = self.expect_ident("an agent register name")?;
        self.expect_keyword("on")?;
        let targets = self.ident_list()?;
        self.expect_keyword("basis")?;
        let spec = self.spec_block(SpecKind::Basis)?;
        self.expect_keyword("record")?;
        let record = self.expect_ident("a record name")?;
        Ok(Step::AgentMeasure { agent, targets, spec, record })
    }

    fn xmeasure(&mut self) -> ScnResult<Step> {
        self.expect_keyword("on")?;
        let targets = self.ident_list()?;
        let kind = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Ident(s)) if s == "basis" => {
                self.pos += 1;
                SpecKind::Basis
            }
            Some(Tok::Ident(s)) if s == "blocks" => {
                self.pos += 1;
                SpecKind::Blocks
            }
            _ => return self.fail("expected `basis` or `blocks`"),
        };
        let spec = self.spec_block(kind)?;
        self.expect_keyword("record")?;
        let record = self.expect_ident("a record name")?;
        Ok(Step::ExternalMeasure { targets, spec, record })
    }

    fn unitary(&mut self) -> ScnResult<Step> {
        self.expect_keyword("on")?;
        let registers = self.ident_list()?;
        self.expect_keyword("matrix")?;
        self.expect_punct('{')?;
        let mut matrix = Vec::new();
        let mut rows = 0usize;
        loop {
            let row = self.amp_list()?;
            rows += 1;
            matrix.extend(row);
            if !self.eat_punct(';') {
                break;
            }
            if matches!(self.peek().map(|t| &t.tok), Some(Tok::Punct('}'))) {
                break;
            }
        }
        self.expect_punct('}')?;
        if rows * rows != matrix.len() {
            return self.fail(format!(
                "matrix has {rows} rows but {} entries in total",
                matrix.len()
            ));
        }
        Ok(Step::ApplyUnitary { registers, matrix })
    }

    fn spec_block(&mut self, kind: SpecKind) -> ScnResult<SpecDecl> {
        self.expect_punct('{')?;
        let mut outcomes = Vec::new();
        loop {
            let label = self.expect_ident("an outcome label")?;
            self.expect_punct(':')?;
            let mut vectors = vec![self.amp_list()?];
            while self.eat_punct('|') {
                vectors.push(self.amp_list()?);
            }
            if kind == SpecKind::Basis && vectors.len() > 1 {
                return self.fail("a basis outcome has exactly one vector; use `blocks`");
            }
            outcomes.push((label, vectors));
            if !self.eat_punct(';') {
                break;
            }
            if matches!(self.peek().map(|t| &t.tok), Some(Tok::Punct('}'))) {
                break;
            }
        }
        self.expect_punct('}')?;
        Ok(SpecDecl { kind, outcomes })
    }

    fn amp_list(&mut self) -> ScnResult<Vec<Complex64>> {
        let mut amps = vec![self.expr()?];
        while self.eat_punct(',') {
            amps.push(self.expr()?);
        }
        Ok(amps)
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> ScnResult<Complex64> {
        let mut value = self.term()?;
        loop {
            if self.eat_punct('+') {
                value += self.term()?;
            } else if self.eat_punct('-') {
                value -= self.term()?;
            } else {
                return Ok(value);
            }
        }
    }

    // term := factor (('*'|'/') factor)*
    // Pure-real operands use real arithmetic so that e.g. sqrt(2)/sqrt(3)
    // equals the corresponding f64 division bit-for-bit.
    fn term(&mut self) -> ScnResult<Complex64> {
        let mut value = self.factor()?;
        loop {
            if self.eat_punct('*') {
                let f = self.factor()?;
                value = if value.im == 0.0 && f.im == 0.0 {
                    Complex64::new(value.re * f.re, 0.0)
                } else {
                    value * f
                };
            } else if self.eat_punct('/') {
                let d = self.factor()?;
                if d.norm_sqr() == 0.0 {
                    return self.fail("division by zero");
                }
                value = if value.im == 0.0 && d.im == 0.0 {
                    Complex64::new(value.re / d.re, 0.0)
                } else {
                    value / d
                };
            } else {
                return Ok(value);
            }
        }
    }

    // factor := decimal | 'sqrt(' decimal ')' | 'i' | '(' expr ')' | '-' factor
    fn factor(&mut self) -> ScnResult<Complex64> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Number(x)) => {
                self.pos += 1;
                Ok(Complex64::new(x, 0.0))
            }
            Some(Tok::Ident(s)) if s == "i" => {
                self.pos += 1;
                Ok(Complex64::new(0.0, 1.0))
            }
            Some(Tok::Ident(s)) if s == "sqrt" => {
                self.pos += 1;
                self.expect_punct('(')?;
                let x = match self.peek().map(|t| t.tok.clone()) {
                    Some(Tok::Number(x)) => {
                        self.pos += 1;
                        x
                    }
                    _ => return self.fail("sqrt takes a decimal"),
                };
                self.expect_punct(')')?;
                if x < 0.0 {
                    return self.fail("sqrt of a negative number");
                }
                Ok(Complex64::new(x.sqrt(), 0.0))
            }
            Some(Tok::Punct('(')) => {
                self.pos += 1;
                let value = self.expr()?;
                self.expect_punct(')')?;
                Ok(value)
            }
            Some(Tok::Punct('-')) => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            _ => self.fail("expected an amplitude"),
        }
    }
}
