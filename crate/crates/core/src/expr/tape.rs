//! Flat evaluation tape for repeated numeric evaluation of several expressions.
//!
//! Structurally equal subtrees are stored once, so derivative families such as
//! `I, ∂I/∂x, ∂²I/∂x∂y` share every common subexpression.

use std::collections::HashMap;

use num_traits::ToPrimitive;

use super::eval::{real_pow, EvalError};
use super::{Exponent, Expr, ExprKind, Point2, Var};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(Var),
    Sum(Vec<u32>),
    Product(Vec<u32>),
    Power(u32, i64, i64),
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    X,
    Y,
    Sum(u32, u32),
    Product(u32, u32),
    Power(u32, Exponent),
}

#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    args: Vec<u32>,
    roots: Vec<u32>,
}

struct Builder {
    ops: Vec<Op>,
    args: Vec<u32>,
    by_key: HashMap<Key, u32>,
    by_ptr: HashMap<usize, u32>,
}

impl Builder {
    fn push(&mut self, key: Key, op: Op) -> u32 {
        if let Some(&i) = self.by_key.get(&key) {
            return i;
        }
        let i = self.ops.len() as u32;
        self.ops.push(op);
        self.by_key.insert(key, i);
        i
    }

    fn children(&mut self, cs: &[Expr]) -> Vec<u32> {
        cs.iter().map(|c| self.node(c)).collect()
    }

    fn node(&mut self, e: &Expr) -> u32 {
        if let Some(&i) = self.by_ptr.get(&e.ptr()) {
            return i;
        }
        let i = match e.kind() {
            ExprKind::Const(c) => {
                let v = c.to_f64().unwrap_or(f64::NAN);
                self.push(Key::Const(v.to_bits()), Op::Const(v))
            }
            ExprKind::Var(v) => self.push(Key::Var(*v), if *v == Var::X { Op::X } else { Op::Y }),
            ExprKind::Sum(cs) => {
                let ids = self.children(cs);
                let start = self.args.len() as u32;
                let key = Key::Sum(ids.clone());
                if let Some(&i) = self.by_key.get(&key) {
                    i
                } else {
                    self.args.extend(&ids);
                    self.push(key, Op::Sum(start, ids.len() as u32))
                }
            }
            ExprKind::Product(cs) => {
                let ids = self.children(cs);
                let start = self.args.len() as u32;
                let key = Key::Product(ids.clone());
                if let Some(&i) = self.by_key.get(&key) {
                    i
                } else {
                    self.args.extend(&ids);
                    self.push(key, Op::Product(start, ids.len() as u32))
                }
            }
            ExprKind::Power(b, r) => {
                let bi = self.node(b);
                self.push(Key::Power(bi, *r.numer(), *r.denom()), Op::Power(bi, *r))
            }
        };
        self.by_ptr.insert(e.ptr(), i);
        i
    }
}

impl Tape {
    pub fn new(exprs: &[Expr]) -> Tape {
        let mut b = Builder {
            ops: Vec::new(),
            args: Vec::new(),
            by_key: HashMap::new(),
            by_ptr: HashMap::new(),
        };
        let roots = exprs.iter().map(|e| b.node(e)).collect();
        Tape { ops: b.ops, args: b.args, roots }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.roots.len()
    }

    /// Values of all root expressions at `p`.
    pub fn eval(&self, p: Point2) -> Result<Vec<f64>, EvalError> {
        self.eval_guarded(p, 0.0)
    }

    /// As [`Tape::eval`], but any negative power of a base with magnitude at
    /// most `min_base` is reported as a division by zero.
    pub fn eval_guarded(&self, p: Point2, min_base: f64) -> Result<Vec<f64>, EvalError> {
        let mut vals = vec![0.0f64; self.ops.len()];
        for (i, op) in self.ops.iter().enumerate() {
            let v = match op {
                Op::Const(c) => *c,
                Op::X => p.x,
                Op::Y => p.y,
                Op::Sum(s, n) => {
                    let args = &self.args[*s as usize..(*s + *n) as usize];
                    args.iter().map(|a| vals[*a as usize]).sum()
                }
                Op::Product(s, n) => {
                    let args = &self.args[*s as usize..(*s + *n) as usize];
                    args.iter().map(|a| vals[*a as usize]).product()
                }
                Op::Power(b, r) => real_pow(vals[*b as usize], *r, min_base)?,
            };
            if !v.is_finite() {
                return Err(EvalError::Overflow);
            }
            vals[i] = v;
        }
        Ok(self.roots.iter().map(|r| vals[*r as usize]).collect())
    }
}
