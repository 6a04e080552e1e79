use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ConstraintError;
use crate::model::{FieldKind, Schema};
use crate::time::format_timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub fn holds<T: PartialOrd>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ne => lhs != rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Text(String),
    Number(f64),
    /// Seconds since the epoch.
    Time(f64),
}

/// Structured constraint over signal metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintExpr {
    Compare {
        field: String,
        op: CompareOp,
        value: Literal,
    },
    In {
        field: String,
        values: Vec<String>,
    },
    /// Closed time interval; `None` is unbounded.
    TimeRange {
        start: Option<f64>,
        end: Option<f64>,
    },
    /// Closed value interval on one measure; `None` is unbounded.
    ValueRange {
        measure: String,
        lo: Option<f64>,
        hi: Option<f64>,
    },
    And {
        left: Box<ConstraintExpr>,
        right: Box<ConstraintExpr>,
    },
    Or {
        left: Box<ConstraintExpr>,
        right: Box<ConstraintExpr>,
    },
    Not {
        inner: Box<ConstraintExpr>,
    },
}

impl ConstraintExpr {
    pub fn and(self, other: ConstraintExpr) -> ConstraintExpr {
        ConstraintExpr::And {
            left: Box::new(self),
            right: Box::new(other),
        }
    }

    pub fn or(self, other: ConstraintExpr) -> ConstraintExpr {
        ConstraintExpr::Or {
            left: Box::new(self),
            right: Box::new(other),
        }
    }

    pub fn negate(self) -> ConstraintExpr {
        ConstraintExpr::Not {
            inner: Box::new(self),
        }
    }

    /// Checks field names, literal types and range bounds against `schema`.
    pub fn validate(&self, schema: &Schema) -> Result<(), ConstraintError> {
        let kind_of = |field: &str| {
            schema
                .field_kind(field)
                .ok_or_else(|| ConstraintError::UnknownField(field.to_string()))
        };
        let mismatch = |field: &str, message: &str| ConstraintError::TypeMismatch {
            field: field.to_string(),
            message: message.to_string(),
        };
        match self {
            ConstraintExpr::Compare { field, value, .. } => match (kind_of(field)?, value) {
                (FieldKind::Categorical, Literal::Text(_)) => Ok(()),
                (FieldKind::Categorical, _) => {
                    Err(mismatch(field, "categorical fields compare against text"))
                }
                (FieldKind::Measure(_), Literal::Number(v)) if v.is_finite() => Ok(()),
                (FieldKind::Measure(_), _) => Err(mismatch(field, "measures compare against finite numbers")),
                (FieldKind::Time, Literal::Time(v)) if v.is_finite() => Ok(()),
                (FieldKind::Time, _) => Err(mismatch(field, "the time field compares against timestamps")),
            },
            ConstraintExpr::In { field, values } => match kind_of(field)? {
                FieldKind::Categorical if !values.is_empty() => Ok(()),
                FieldKind::Categorical => Err(mismatch(field, "IN needs at least one value")),
                _ => Err(mismatch(field, "IN applies to categorical fields only")),
            },
            ConstraintExpr::TimeRange { start, end } => check_range("time", *start, *end),
            ConstraintExpr::ValueRange { measure, lo, hi } => match kind_of(measure)? {
                FieldKind::Measure(_) => check_range(measure, *lo, *hi),
                _ => Err(mismatch(measure, "value ranges apply to measures only")),
            },
            ConstraintExpr::And { left, right } | ConstraintExpr::Or { left, right } => {
                left.validate(schema)?;
                right.validate(schema)
            }
            ConstraintExpr::Not { inner } => inner.validate(schema),
        }
    }

    /// Renders the expression in the textual grammar; parsing the result
    /// with the same schema yields an equal expression.
    pub fn to_text(&self, schema: &Schema) -> String {
        let mut out = String::new();
        write_expr(&mut out, self, schema, Prec::Or);
        out
    }
}

fn check_range(field: &str, lo: Option<f64>, hi: Option<f64>) -> Result<(), ConstraintError> {
    let invalid = |message: &str| ConstraintError::InvalidRange {
        field: field.to_string(),
        message: message.to_string(),
    };
    if lo.is_none() && hi.is_none() {
        return Err(invalid("at least one bound is required"));
    }
    if lo.into_iter().chain(hi).any(|v| !v.is_finite()) {
        return Err(invalid("bounds must be finite"));
    }
    if let (Some(a), Some(b)) = (lo, hi) {
        if a > b {
            return Err(invalid("lower bound exceeds upper bound"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Or,
    And,
    Unary,
}

fn prec(e: &ConstraintExpr) -> Prec {
    match e {
        ConstraintExpr::Or { .. } => Prec::Or,
        ConstraintExpr::And { .. } => Prec::And,
        _ => Prec::Unary,
    }
}

const KEYWORDS: [&str; 5] = ["and", "or", "not", "in", "between"];

pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !KEYWORDS.contains(&s.to_ascii_lowercase().as_str())
}

fn write_field(out: &mut String, name: &str) {
    if is_plain_ident(name) {
        out.push_str(name);
    } else {
        out.push('`');
        out.push_str(&name.replace('`', "``"));
        out.push('`');
    }
}

fn write_text(out: &mut String, s: &str) {
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
}

fn write_number(out: &mut String, v: f64) {
    let _ = write!(out, "{v}");
}

fn write_literal(out: &mut String, lit: &Literal) {
    match lit {
        Literal::Text(s) => write_text(out, s),
        Literal::Number(v) => write_number(out, *v),
        Literal::Time(t) => write_text(out, &format_timestamp(*t)),
    }
}

fn write_range(
    out: &mut String,
    field: &str,
    lo: Option<f64>,
    hi: Option<f64>,
    value: impl Fn(&mut String, f64),
) {
    write_field(out, field);
    match (lo, hi) {
        (Some(a), Some(b)) if a == b => {
            out.push_str(" = ");
            value(out, a);
        }
        (Some(a), Some(b)) => {
            out.push_str(" BETWEEN ");
            value(out, a);
            out.push_str(" AND ");
            value(out, b);
        }
        (Some(a), None) => {
            out.push_str(" >= ");
            value(out, a);
        }
        (None, Some(b)) => {
            out.push_str(" <= ");
            value(out, b);
        }
        // Not a valid range; emit something the parser rejects loudly.
        (None, None) => out.push_str(" BETWEEN"),
    }
}

fn write_expr(out: &mut String, e: &ConstraintExpr, schema: &Schema, ctx: Prec) {
    let wrap = prec(e) < ctx;
    if wrap {
        out.push('(');
    }
    match e {
        ConstraintExpr::Compare { field, op, value } => {
            write_field(out, field);
            let _ = write!(out, " {} ", op.symbol());
            write_literal(out, value);
        }
        ConstraintExpr::In { field, values } => {
            write_field(out, field);
            out.push_str(" IN (");
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_text(out, v);
            }
            out.push(')');
        }
        ConstraintExpr::TimeRange { start, end } => {
            write_range(out, &schema.time_field, *start, *end, |o, v| {
                write_text(o, &format_timestamp(v))
            });
        }
        ConstraintExpr::ValueRange { measure, lo, hi } => {
            write_range(out, measure, *lo, *hi, write_number);
        }
        ConstraintExpr::And { left, right } => {
            write_expr(out, left, schema, Prec::And);
            out.push_str(" AND ");
            // right operand of a left-associative operator binds tighter
            write_expr(out, right, schema, Prec::Unary);
        }
        ConstraintExpr::Or { left, right } => {
            write_expr(out, left, schema, Prec::Or);
            out.push_str(" OR ");
            write_expr(out, right, schema, Prec::And);
        }
        ConstraintExpr::Not { inner } => {
            out.push_str("NOT ");
            write_expr(out, inner, schema, Prec::Unary);
        }
    }
    if wrap {
        out.push(')');
    }
}
