use super::{EdgePattern, NodePattern, Predicate, Projection, QueryAst, QueryError};
use crate::chronicle::Literal;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Colon,
    Dot,
    Comma,
    Eq,
    Dash,
    Arrow,
    Ident(String),
    Str(String),
    Num(f64),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Dash => "`-`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, expected: &[&str], found: impl Into<String>) -> QueryError {
    QueryError::Syntax {
        line,
        column,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.into(),
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, QueryError> {
        let mut out = Vec::new();
        loop {
            while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
                self.bump();
            }
            let (line, column) = (self.line, self.column);
            let Some(&c) = self.chars.peek() else {
                out.push(Spanned {
                    tok: Tok::Eof,
                    line,
                    column,
                });
                return Ok(out);
            };
            let tok = match c {
                '(' | ')' | '[' | ']' | ':' | '.' | ',' | '=' => {
                    self.bump();
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        ':' => Tok::Colon,
                        '.' => Tok::Dot,
                        ',' => Tok::Comma,
                        _ => Tok::Eq,
                    }
                }
                '-' => {
                    self.bump();
                    match self.chars.peek() {
                        Some('>') => {
                            self.bump();
                            Tok::Arrow
                        }
                        Some(d) if d.is_ascii_digit() => self.number(line, column, true)?,
                        _ => Tok::Dash,
                    }
                }
                '"' => {
                    self.bump();
                    self.string(line, column)?
                }
                c if c.is_ascii_digit() => self.number(line, column, false)?,
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut ident = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            ident.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(ident)
                }
                other => {
                    return Err(syntax(
                        line,
                        column,
                        &["token"],
                        format!("character {other:?}"),
                    ))
                }
            };
            out.push(Spanned { tok, line, column });
        }
    }

    fn string(&mut self, line: usize, column: usize) -> Result<Tok, QueryError> {
        let mut s = String::new();
        loop {
            let (el, ec) = (self.line, self.column);
            match self.bump() {
                None => return Err(syntax(line, column, &["`\"`"], "unterminated string")),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    Some(other) => {
                        return Err(syntax(
                            el,
                            ec,
                            &["`\\\"`", "`\\\\`", "`\\n`", "`\\t`", "`\\r`"],
                            format!("escape \\{other}"),
                        ))
                    }
                    None => return Err(syntax(line, column, &["`\"`"], "unterminated string")),
                },
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self, line: usize, column: usize, negative: bool) -> Result<Tok, QueryError> {
        let mut text = String::new();
        if negative {
            text.push('-');
        }
        let digits = |lexer: &mut Self, text: &mut String| {
            let mut any = false;
            while let Some(&c) = lexer.chars.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    lexer.bump();
                    any = true;
                } else {
                    break;
                }
            }
            any
        };
        digits(self, &mut text);
        if self.chars.peek() == Some(&'.') {
            text.push('.');
            self.bump();
            if !digits(self, &mut text) {
                return Err(syntax(self.line, self.column, &["digit"], "end of number"));
            }
        }
        if matches!(self.chars.peek(), Some('e' | 'E')) {
            text.push('e');
            self.bump();
            if let Some(&sign @ ('+' | '-')) = self.chars.peek() {
                text.push(sign);
                self.bump();
            }
            if !digits(self, &mut text) {
                return Err(syntax(self.line, self.column, &["digit"], "end of exponent"));
            }
        }
        match text.parse::<f64>() {
            Ok(n) if n.is_finite() => Ok(Tok::Num(n)),
            _ => Err(syntax(line, column, &["finite number"], text)),
        }
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, QueryError> {
        let t = self.peek();
        Err(syntax(t.line, t.column, expected, t.tok.describe()))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str, expected: &[&str]) -> Result<(), QueryError> {
        if self.at_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            self.fail(expected)
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryError> {
        if self.peek().tok == tok {
            self.advance();
            Ok(())
        } else {
            self.fail(&[&tok.describe()])
        }
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => self.fail(&["identifier"]),
        }
    }

    fn node(&mut self) -> Result<NodePattern, QueryError> {
        self.expect(Tok::LParen)?;
        let var = self.ident()?;
        let label = if self.peek().tok == Tok::Colon {
            self.advance();
            Some(self.ident()?)
        } else {
            None
        };
        if self.peek().tok != Tok::RParen {
            return self.fail(if label.is_some() {
                &["`)`"]
            } else {
                &["`:`", "`)`"]
            });
        }
        self.advance();
        Ok(NodePattern { var, label })
    }

    fn edge(&mut self) -> Result<EdgePattern, QueryError> {
        self.expect(Tok::Dash)?;
        self.expect(Tok::LBracket)?;
        self.expect(Tok::Colon)?;
        let rel = self.ident()?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Arrow)?;
        Ok(EdgePattern { rel })
    }

    fn property_ref(&mut self) -> Result<(String, String), QueryError> {
        let var = self.ident()?;
        self.expect(Tok::Dot)?;
        let property = self.ident()?;
        Ok((var, property))
    }

    fn literal(&mut self) -> Result<Literal, QueryError> {
        let lit = match &self.peek().tok {
            Tok::Str(s) => Literal::Str(s.clone()),
            Tok::Num(n) => Literal::Num(*n),
            Tok::Ident(s) if s == "true" => Literal::Bool(true),
            Tok::Ident(s) if s == "false" => Literal::Bool(false),
            _ => return self.fail(&["string", "number", "`true`", "`false`"]),
        };
        self.advance();
        Ok(lit)
    }

    fn query(&mut self) -> Result<QueryAst, QueryError> {
        self.keyword("MATCH", &["`MATCH`"])?;
        let start = self.node()?;
        let mut hops = Vec::new();
        while self.peek().tok == Tok::Dash {
            let edge = self.edge()?;
            let node = self.node()?;
            hops.push((edge, node));
        }

        let mut filters = Vec::new();
        if self.at_keyword("WHERE") {
            self.advance();
            loop {
                let (var, property) = self.property_ref()?;
                self.expect(Tok::Eq)?;
                let value = self.literal()?;
                filters.push(Predicate {
                    var,
                    property,
                    value,
                });
                if self.at_keyword("AND") {
                    self.advance();
                } else {
                    break;
                }
            }
            if !self.at_keyword("RETURN") {
                return self.fail(&["`AND`", "`RETURN`"]);
            }
        } else if !self.at_keyword("RETURN") {
            return self.fail(&["`-`", "`WHERE`", "`RETURN`"]);
        }
        self.keyword("RETURN", &["`RETURN`"])?;

        let mut returns = Vec::new();
        loop {
            let (var, property) = self.property_ref()?;
            returns.push(Projection { var, property });
            if self.peek().tok == Tok::Comma {
                self.advance();
            } else {
                break;
            }
        }
        if self.peek().tok != Tok::Eof {
            return self.fail(&["`,`", "end of input"]);
        }
        Ok(QueryAst {
            start,
            hops,
            filters,
            returns,
        })
    }
}

/// Parses query text. Whitespace (including newlines) between tokens is
/// insignificant; keywords are case-insensitive, identifiers are not.
pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    let tokens = Lexer::new(text).tokens()?;
    let ast = Parser { tokens, pos: 0 }.query()?;
    ast.validate()?;
    Ok(ast)
}
