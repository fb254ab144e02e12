use std::collections::HashMap;

use super::{Expr, Func, Node, Symbol};

impl Expr {
    /// Partial derivative with respect to `x`.
    pub fn diff(&self, x: &Symbol) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(x, &mut memo)
    }

    fn diff_memo(&self, x: &Symbol, memo: &mut HashMap<Expr, Expr>) -> Expr {
        if !self.may_depend_on(x) {
            return Expr::zero();
        }
        let cacheable = matches!(self.node(), Node::Apply(..) | Node::Power(..));
        if cacheable {
            if let Some(d) = memo.get(self) {
                return d.clone();
            }
        }
        let d = match self.node() {
            Node::Rational(_) => Expr::zero(),
            Node::Var(v) => {
                if v == x {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum(xs) => Expr::sum(xs.iter().map(|t| t.diff_memo(x, memo))),
            Node::Product(xs) => {
                let mut parts = Vec::new();
                for (i, f) in xs.iter().enumerate() {
                    let df = f.diff_memo(x, memo);
                    if df.is_zero() {
                        continue;
                    }
                    let rest = xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, g)| g.clone());
                    parts.push(Expr::product(std::iter::once(df).chain(rest)));
                }
                Expr::sum(parts)
            }
            Node::Power(b, n) => {
                let db = b.diff_memo(x, memo);
                Expr::int(*n) * b.pow(n - 1) * db
            }
            Node::Apply(f, a) => {
                let da = a.diff_memo(x, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    let outer = match f {
                        Func::Sin => a.cos(),
                        Func::Cos => -a.sin(),
                        Func::Tan => Expr::one() + self.pow(2),
                        Func::Cot => -(Expr::one() + self.pow(2)),
                        Func::Exp => self.clone(),
                        Func::Ln => a.recip(),
                    };
                    outer * da
                }
            }
        };
        if cacheable {
            memo.insert(self.clone(), d.clone());
        }
        d
    }
}
