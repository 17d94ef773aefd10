use std::collections::HashMap;

use num_rational::BigRational;

use super::{Exponent, Expr, ExprKind, Var};

#[derive(Clone, PartialEq, Eq, Hash)]
enum Shallow {
    Const(BigRational),
    Var(Var),
    Sum(Vec<usize>),
    Product(Vec<usize>),
    Power(usize, Exponent),
}

/// Rebuilds `e` so that structurally equal subtrees are one allocation.
///
/// Pointer-keyed memo tables then see every repeated subtree as a hit.
pub(crate) fn share(e: &Expr) -> Expr {
    let mut ctx = Sharing::default();
    ctx.visit(e)
}

#[derive(Default)]
struct Sharing {
    by_ptr: HashMap<usize, Expr>,
    by_shape: HashMap<Shallow, Expr>,
}

impl Sharing {
    fn visit(&mut self, e: &Expr) -> Expr {
        if let Some(done) = self.by_ptr.get(&e.ptr()) {
            return done.clone();
        }
        let (shape, rebuilt) = match e.kind() {
            ExprKind::Const(c) => (Shallow::Const(c.clone()), None),
            ExprKind::Var(v) => (Shallow::Var(*v), None),
            ExprKind::Sum(ts) | ExprKind::Product(ts) => {
                let kids: Vec<Expr> = ts.iter().map(|t| self.visit(t)).collect();
                let ids = kids.iter().map(Expr::ptr).collect();
                let changed = kids.iter().zip(ts).any(|(a, b)| a.ptr() != b.ptr());
                if matches!(e.kind(), ExprKind::Sum(_)) {
                    (Shallow::Sum(ids), changed.then_some(ExprKind::Sum(kids)))
                } else {
                    (Shallow::Product(ids), changed.then_some(ExprKind::Product(kids)))
                }
            }
            ExprKind::Power(b, r) => {
                let nb = self.visit(b);
                let changed = nb.ptr() != b.ptr();
                (Shallow::Power(nb.ptr(), *r), changed.then_some(ExprKind::Power(nb, *r)))
            }
        };
        let out = match self.by_shape.get(&shape) {
            Some(existing) => existing.clone(),
            None => {
                let node = rebuilt.map_or_else(|| e.clone(), Expr::raw);
                self.by_shape.insert(shape, node.clone());
                node
            }
        };
        self.by_ptr.insert(e.ptr(), out.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn equal_subtrees_share_storage() {
        let e = parse("(x + y)^2 * (x + y)^3").unwrap();
        let s = share(&e);
        assert_eq!(s, e);
        let ExprKind::Product(fs) = s.kind() else { panic!() };
        let bases: Vec<usize> = fs
            .iter()
            .map(|f| match f.kind() {
                ExprKind::Power(b, _) => b.ptr(),
                _ => panic!(),
            })
            .collect();
        assert_eq!(bases[0], bases[1]);
    }
}
