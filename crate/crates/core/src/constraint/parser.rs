use super::ast::{CompareOp, ConstraintExpr, Literal};
use super::ConstraintError;
use crate::model::{FieldKind, Schema};
use crate::time::parse_timestamp;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Text(String),
    Number(f64, String),
    Op(CompareOp),
    LParen,
    RParen,
    Comma,
    And,
    Or,
    Not,
    In,
    Between,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn syntax(pos: usize, message: impl Into<String>) -> ConstraintError {
    ConstraintError::Syntax {
        position: pos,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ConstraintError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let offset = |i: usize| chars.get(i).map_or(src.len(), |&(p, _)| p);
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            '=' => {
                i += 1;
                Tok::Op(CompareOp::Eq)
            }
            '!' if at(i + 1) == Some('=') => {
                i += 2;
                Tok::Op(CompareOp::Ne)
            }
            '<' => match at(i + 1) {
                Some('=') => {
                    i += 2;
                    Tok::Op(CompareOp::Le)
                }
                Some('>') => {
                    i += 2;
                    Tok::Op(CompareOp::Ne)
                }
                _ => {
                    i += 1;
                    Tok::Op(CompareOp::Lt)
                }
            },
            '>' => {
                if at(i + 1) == Some('=') {
                    i += 2;
                    Tok::Op(CompareOp::Ge)
                } else {
                    i += 1;
                    Tok::Op(CompareOp::Gt)
                }
            }
            '\'' | '"' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match at(i) {
                        None => return Err(syntax(pos, "unterminated string")),
                        Some('\\') => match at(i + 1) {
                            Some(e) => {
                                s.push(e);
                                i += 2;
                            }
                            None => return Err(syntax(pos, "unterminated string")),
                        },
                        Some(q) if q == quote => {
                            i += 1;
                            break;
                        }
                        Some(other) => {
                            s.push(other);
                            i += 1;
                        }
                    }
                }
                Tok::Text(s)
            }
            '`' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match at(i) {
                        None => return Err(syntax(pos, "unterminated quoted field name")),
                        Some('`') if at(i + 1) == Some('`') => {
                            s.push('`');
                            i += 2;
                        }
                        Some('`') => {
                            i += 1;
                            break;
                        }
                        Some(other) => {
                            s.push(other);
                            i += 1;
                        }
                    }
                }
                Tok::Ident(s)
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                i += 1;
                while let Some(d) = at(i) {
                    let exp_sign = (d == '-' || d == '+') && matches!(at(i - 1), Some('e' | 'E'));
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text = &src[pos..offset(i)];
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Number(v, text.to_string()),
                    _ => return Err(syntax(chars[start].0, format!("invalid number `{text}`"))),
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                while matches!(at(i), Some(d) if d.is_alphanumeric() || d == '_' || d == '.') {
                    i += 1;
                }
                let word = &src[pos..offset(i)];
                match word.to_ascii_lowercase().as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "in" => Tok::In,
                    "between" => Tok::Between,
                    _ => Tok::Ident(word.to_string()),
                }
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, pos });
    }
    out.push(Token {
        tok: Tok::End,
        pos: src.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    next: usize,
    schema: &'a Schema,
}

/// Parses the textual constraint grammar against `schema`.
///
/// Comparisons on the time field or a measure with `=`, `>=`, `<=` or
/// `BETWEEN` become closed ranges; the strict operators and `!=` stay
/// comparisons.
pub fn parse(src: &str, schema: &Schema) -> Result<ConstraintExpr, ConstraintError> {
    let mut p = Parser {
        tokens: lex(src)?,
        next: 0,
        schema,
    };
    let expr = p.or_expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(syntax(t.pos, "unexpected trailing input"));
    }
    Ok(expr)
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.next]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.next].clone();
        if t.tok != Tok::End {
            self.next += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ConstraintError> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            Err(syntax(t.pos, format!("expected {what}")))
        }
    }

    fn or_expr(&mut self) -> Result<ConstraintExpr, ConstraintError> {
        let mut left = self.and_expr()?;
        while self.peek().tok == Tok::Or {
            self.bump();
            left = left.or(self.and_expr()?);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<ConstraintExpr, ConstraintError> {
        let mut left = self.unary()?;
        while self.peek().tok == Tok::And {
            self.bump();
            left = left.and(self.unary()?);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<ConstraintExpr, ConstraintError> {
        match self.peek().tok {
            Tok::Not => {
                self.bump();
                Ok(self.unary()?.negate())
            }
            Tok::LParen => {
                self.bump();
                let e = self.or_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.predicate(),
        }
    }

    fn predicate(&mut self) -> Result<ConstraintExpr, ConstraintError> {
        let t = self.bump();
        let Tok::Ident(field) = t.tok else {
            return Err(syntax(t.pos, "expected a field name"));
        };
        let kind = self
            .schema
            .field_kind(&field)
            .ok_or_else(|| ConstraintError::UnknownField(field.clone()))?;
        let op = self.bump();
        match op.tok {
            Tok::Op(cmp) => {
                let v = self.literal(&field, kind)?;
                Ok(build_compare(field, kind, cmp, v))
            }
            Tok::In => {
                if kind != FieldKind::Categorical {
                    return Err(mismatch(&field, "IN applies to categorical fields only"));
                }
                self.expect(Tok::LParen, "`(`")?;
                let mut values = Vec::new();
                loop {
                    match self.literal(&field, kind)? {
                        Literal::Text(s) => values.push(s),
                        _ => unreachable!("categorical literals are text"),
                    }
                    let t = self.bump();
                    match t.tok {
                        Tok::Comma => continue,
                        Tok::RParen => break,
                        _ => return Err(syntax(t.pos, "expected `,` or `)`")),
                    }
                }
                Ok(ConstraintExpr::In { field, values })
            }
            Tok::Between => {
                if kind == FieldKind::Categorical {
                    return Err(mismatch(&field, "BETWEEN applies to the time field and measures"));
                }
                let lo = self.literal(&field, kind)?;
                self.expect(Tok::And, "AND")?;
                let hi = self.literal(&field, kind)?;
                let (lo, hi) = (scalar(&lo), scalar(&hi));
                if lo > hi {
                    return Err(ConstraintError::InvalidRange {
                        field,
                        message: "lower bound exceeds upper bound".into(),
                    });
                }
                Ok(range(field, kind, Some(lo), Some(hi)))
            }
            _ => Err(syntax(op.pos, "expected a comparison operator, IN or BETWEEN")),
        }
    }

    fn literal(&mut self, field: &str, kind: FieldKind) -> Result<Literal, ConstraintError> {
        let t = self.bump();
        match (kind, t.tok) {
            (FieldKind::Categorical, Tok::Text(s)) => Ok(Literal::Text(s)),
            // keep the spelling so `code = 007` matches "007"
            (FieldKind::Categorical, Tok::Number(_, raw)) => Ok(Literal::Text(raw)),
            (FieldKind::Categorical, Tok::Ident(s)) => Ok(Literal::Text(s)),
            (FieldKind::Measure(_), Tok::Number(v, _)) => Ok(Literal::Number(v)),
            (FieldKind::Measure(_), Tok::Text(_) | Tok::Ident(_)) => {
                Err(mismatch(field, "measures compare against numbers"))
            }
            (FieldKind::Time, Tok::Number(_, raw)) => {
                if !raw.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(mismatch(field, "a bare number on the time field must be a year"));
                }
                year_or_date(field, &raw)
            }
            (FieldKind::Time, Tok::Text(s)) => year_or_date(field, &s),
            (FieldKind::Time, Tok::Ident(_)) => Err(mismatch(field, "expected a date or year")),
            _ => Err(syntax(t.pos, "expected a value")),
        }
    }
}

fn year_or_date(field: &str, s: &str) -> Result<Literal, ConstraintError> {
    parse_timestamp(s)
        .map(Literal::Time)
        .ok_or_else(|| mismatch(field, &format!("`{s}` is not a year or ISO-8601 timestamp")))
}

fn mismatch(field: &str, message: &str) -> ConstraintError {
    ConstraintError::TypeMismatch {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn scalar(l: &Literal) -> f64 {
    match l {
        Literal::Number(v) | Literal::Time(v) => *v,
        Literal::Text(_) => f64::NAN,
    }
}

fn range(field: String, kind: FieldKind, lo: Option<f64>, hi: Option<f64>) -> ConstraintExpr {
    match kind {
        FieldKind::Time => ConstraintExpr::TimeRange { start: lo, end: hi },
        _ => ConstraintExpr::ValueRange {
            measure: field,
            lo,
            hi,
        },
    }
}

fn build_compare(field: String, kind: FieldKind, op: CompareOp, value: Literal) -> ConstraintExpr {
    if kind == FieldKind::Categorical {
        return ConstraintExpr::Compare { field, op, value };
    }
    let v = scalar(&value);
    match op {
        CompareOp::Eq => range(field, kind, Some(v), Some(v)),
        CompareOp::Ge => range(field, kind, Some(v), None),
        CompareOp::Le => range(field, kind, None, Some(v)),
        _ => ConstraintExpr::Compare { field, op, value },
    }
}
