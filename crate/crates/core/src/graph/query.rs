//! Filter expressions over entity attributes.
//!
//! Grammar:
//!
//! ```text
//! q     := term (';' term)*
//! term  := path op literal
//! path  := name ('.' name)*
//! op    := '==' | '!=' | '~='
//! literal := '"' chars '"' | number | 'true' | 'false'
//! ```
//!
//! `;` is conjunction. A path walks from an entity attribute into its
//! sub-attributes. Multi-instance attributes match if any instance matches;
//! a path that does not resolve never matches.

use std::fmt;

use regex::Regex;
use serde_json::Value;

use super::{Attribute, AttributeValue, Entity, GraphError};

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    String(String),
    Number(f64),
    Bool(bool),
}

#[derive(Clone, Debug)]
pub enum Comparison {
    Equal(Literal),
    NotEqual(Literal),
    Matches(Regex),
}

#[derive(Clone, Debug)]
pub struct Term {
    pub path: Vec<String>,
    pub comparison: Comparison,
}

/// A parsed `q` expression: a conjunction of terms.
#[derive(Clone, Debug)]
pub struct Filter {
    source: String,
    terms: Vec<Term>,
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Filter {
    pub fn parse(source: &str) -> Result<Self, GraphError> {
        let mut parser = Parser { src: source, pos: 0 };
        let mut terms = vec![parser.term()?];
        loop {
            parser.skip_ws();
            if parser.eof() {
                break;
            }
            parser.expect(";")?;
            terms.push(parser.term()?);
        }
        Ok(Filter { source: source.to_string(), terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn matches(&self, entity: &Entity) -> bool {
        self.terms.iter().all(|t| t.matches(entity))
    }
}

/// Evaluates `q` against an entity.
pub fn eval_q(filter: &Filter, entity: &Entity) -> bool {
    filter.matches(entity)
}

impl Term {
    pub fn matches(&self, entity: &Entity) -> bool {
        let (head, rest) = self.path.split_first().expect("paths are non-empty");
        entity
            .attributes
            .get(head)
            .iter()
            .any(|attr| self.matches_at(attr, rest))
    }

    fn matches_at(&self, attr: &Attribute, rest: &[String]) -> bool {
        match rest.split_first() {
            Some((next, tail)) => attr
                .sub_attributes
                .get(next)
                .iter()
                .any(|sub| self.matches_at(sub, tail)),
            None => self.matches_value(attr),
        }
    }

    fn matches_value(&self, attr: &Attribute) -> bool {
        let object;
        let value = match &attr.value {
            AttributeValue::Property(v) => v,
            AttributeValue::Relationship(o) => {
                object = Value::String(o.to_string());
                &object
            }
        };
        match &self.comparison {
            Comparison::Equal(lit) => equals(value, lit),
            Comparison::NotEqual(lit) => !equals(value, lit),
            Comparison::Matches(re) => match value {
                Value::String(s) => re.is_match(s),
                Value::Array(items) => items.iter().any(|i| i.as_str().is_some_and(|s| re.is_match(s))),
                _ => false,
            },
        }
    }
}

/// Scalar equality; list-valued properties are equal if any element is.
fn equals(value: &Value, lit: &Literal) -> bool {
    match (value, lit) {
        (Value::String(s), Literal::String(l)) => s == l,
        (Value::Number(n), Literal::Number(l)) => n.as_f64() == Some(*l),
        (Value::Bool(b), Literal::Bool(l)) => b == l,
        (Value::Array(items), _) => items.iter().any(|i| !i.is_array() && equals(i, lit)),
        _ => false,
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> GraphError {
        GraphError::Syntax { position: self.pos, message: message.into() }
    }

    fn eof(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn expect(&mut self, token: &str) -> Result<(), GraphError> {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.err(format!("expected {token:?}")))
        }
    }

    fn term(&mut self) -> Result<Term, GraphError> {
        self.skip_ws();
        let path = self.path()?;
        self.skip_ws();
        let op_pos = self.pos;
        let op = ["==", "!=", "~="]
            .into_iter()
            .find(|op| self.rest().starts_with(op))
            .ok_or_else(|| self.err("expected one of ==, !=, ~="))?;
        self.pos += 2;
        self.skip_ws();
        let lit_pos = self.pos;
        let literal = self.literal()?;
        let comparison = match op {
            "==" => Comparison::Equal(literal),
            "!=" => Comparison::NotEqual(literal),
            _ => {
                let Literal::String(pattern) = literal else {
                    return Err(GraphError::Syntax { position: op_pos, message: "~= needs a quoted pattern".into() });
                };
                let re = Regex::new(&pattern).map_err(|e| GraphError::Syntax {
                    position: lit_pos,
                    message: format!("invalid regex: {e}"),
                })?;
                Comparison::Matches(re)
            }
        };
        Ok(Term { path, comparison })
    }

    fn path(&mut self) -> Result<Vec<String>, GraphError> {
        let mut segments = vec![self.name()?];
        while self.rest().starts_with('.') {
            self.pos += 1;
            segments.push(self.name()?);
        }
        Ok(segments)
    }

    fn name(&mut self) -> Result<String, GraphError> {
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '@'))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.err("expected attribute name"));
        }
        let name = self.rest()[..len].to_string();
        self.pos += len;
        Ok(name)
    }

    fn literal(&mut self) -> Result<Literal, GraphError> {
        if self.rest().starts_with('"') {
            let start = self.pos;
            self.pos += 1;
            let mut out = String::new();
            let mut chars = self.rest().char_indices();
            while let Some((i, c)) = chars.next() {
                match c {
                    '"' => {
                        self.pos += i + 1;
                        return Ok(Literal::String(out));
                    }
                    '\\' => match chars.next() {
                        Some((_, e @ ('"' | '\\'))) => out.push(e),
                        Some((_, other)) => {
                            out.push('\\');
                            out.push(other);
                        }
                        None => break,
                    },
                    c => out.push(c),
                }
            }
            self.pos = start;
            return Err(self.err("unterminated string"));
        }
        for (word, value) in [("true", true), ("false", false)] {
            if self.rest().starts_with(word) {
                self.pos += word.len();
                return Ok(Literal::Bool(value));
            }
        }
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let number = self.rest()[..len].parse::<f64>().map_err(|_| self.err("expected literal"))?;
        self.pos += len;
        Ok(Literal::Number(number))
    }
}
