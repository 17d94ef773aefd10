use std::fmt::{self, Write};

use num_rational::BigRational;
use num_traits::{One, Signed};

use super::{Expr, ExprKind};

fn write_rational(f: &mut fmt::Formatter<'_>, c: &BigRational) -> fmt::Result {
    if c.is_integer() {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "{}/{}", c.numer(), c.denom())
    }
}

/// Prints in the same language the parser accepts; the output always parses
/// back to an equivalent expression.
pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e.kind() {
        ExprKind::Const(c) => write_rational(f, c),
        ExprKind::Var(v) => f.write_str(v.name()),
        ExprKind::Sum(ts) => {
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    write_term(f, t, false)?;
                } else if t.has_negative_coeff() {
                    f.write_str(" - ")?;
                    write_term(f, t, true)?;
                } else {
                    f.write_str(" + ")?;
                    write_term(f, t, false)?;
                }
            }
            Ok(())
        }
        ExprKind::Product(_) => write_term(f, e, false),
        ExprKind::Power(b, r) => {
            write_base(f, b)?;
            if r.is_integer() && *r.numer() >= 0 {
                write!(f, "^{}", r.numer())
            } else if r.is_integer() {
                write!(f, "^({})", r.numer())
            } else {
                write!(f, "^({}/{})", r.numer(), r.denom())
            }
        }
    }
}

/// Writes a sum term; with `negated` the leading coefficient's sign is dropped
/// because the caller already wrote " - ".
fn write_term(f: &mut fmt::Formatter<'_>, t: &Expr, negated: bool) -> fmt::Result {
    let (c, rest) = t.split_coeff();
    let c = if negated { -c } else { c };
    let Some(rest) = rest else {
        return write_rational(f, &c);
    };
    if let ExprKind::Sum(_) = t.kind() {
        return write_expr(f, t);
    }
    let mut wrote = false;
    if c == -BigRational::one() {
        f.write_char('-')?;
    } else if !c.is_one() {
        write_rational(f, &c)?;
        wrote = true;
    }
    let factors: Vec<Expr> = match rest.kind() {
        ExprKind::Product(fs) => fs.clone(),
        _ => vec![rest.clone()],
    };
    for factor in &factors {
        if wrote {
            f.write_char('*')?;
        }
        match factor.kind() {
            ExprKind::Sum(_) => write!(f, "({factor})")?,
            ExprKind::Const(c) if c.is_negative() || !c.is_integer() => {
                f.write_char('(')?;
                write_rational(f, c)?;
                f.write_char(')')?;
            }
            ExprKind::Product(_) => write!(f, "({factor})")?,
            _ => write_expr(f, factor)?,
        }
        wrote = true;
    }
    Ok(())
}

fn write_base(f: &mut fmt::Formatter<'_>, b: &Expr) -> fmt::Result {
    match b.kind() {
        ExprKind::Var(_) => write_expr(f, b),
        ExprKind::Const(c) if c.is_integer() && !c.is_negative() => write_expr(f, b),
        _ => {
            f.write_char('(')?;
            write_expr(f, b)?;
            f.write_char(')')
        }
    }
}
