//! Linear algebra over sampled values and fraction-free symbolic kernels.
//!
//! Numerical routines work in double-double with a per-entry scale that
//! tracks the size of the quantities cancelled so far; an entry is zero when
//! it is below `tolerance * scale`. Generic ranks are maxima over sample
//! points, and symbolic kernels are assembled from Cramer-rule minors whose
//! rows and columns are chosen at the best sample point.

use std::collections::HashMap;

use crate::error::Result;
use crate::expr::{Evaluator, Expr, Sampler, Value};

pub type Row = Vec<Value>;

fn reduce_against(row: &mut Row, basis: &[(usize, Row)]) {
    for (pc, b) in basis {
        let r = row[*pc];
        if r.v.is_zero() {
            continue;
        }
        let factor = r.v / b[*pc].v;
        let fmag = factor.mag();
        for (j, bj) in b.iter().enumerate() {
            if j == *pc || bj.v.is_zero() && bj.scale == 0.0 {
                continue;
            }
            let v = row[j].v - factor * bj.v;
            let scale = row[j].scale.max(fmag * bj.scale).max(v.mag());
            row[j] = Value { v, scale };
        }
        row[*pc] = Value { v: crate::numeric::Real::ZERO, scale: row[*pc].scale.max(r.scale) };
    }
}

fn pick_pivot(row: &Row, tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, x) in row.iter().enumerate() {
        if x.is_negligible(tol) {
            continue;
        }
        let m = x.v.mag();
        if best.is_none_or(|(_, bm)| m > bm) {
            best = Some((j, m));
        }
    }
    best.map(|(j, _)| j)
}

/// Row echelon data for greedy, order-respecting elimination.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    basis: Vec<(usize, Row)>,
    tol: f64,
}

impl Echelon {
    pub fn new(tol: f64) -> Echelon {
        Echelon { basis: Vec::new(), tol }
    }

    /// Add a row; returns whether it was independent of the rows so far.
    pub fn push(&mut self, mut row: Row) -> bool {
        reduce_against(&mut row, &self.basis);
        match pick_pivot(&row, self.tol) {
            Some(pc) => {
                self.basis.push((pc, row));
                true
            }
            None => false,
        }
    }

    /// Whether `row` lies in the span without modifying the echelon form.
    pub fn contains(&self, row: &Row) -> bool {
        let mut row = row.clone();
        reduce_against(&mut row, &self.basis);
        pick_pivot(&row, self.tol).is_none()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// What is left of `row` after eliminating every pivot column.
    pub fn residual(&self, row: &Row) -> Row {
        let mut row = row.clone();
        reduce_against(&mut row, &self.basis);
        row
    }

    /// Product of pivot magnitudes: the absolute determinant of the
    /// selected minor.
    pub fn pivot_product(&self) -> f64 {
        self.basis.iter().map(|(p, r)| r[*p].v.mag()).product()
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.basis.iter().map(|(p, _)| *p).collect()
    }
}

/// Indices of rows independent of all earlier rows.
pub fn independent_rows(rows: &[Row], tol: f64) -> Vec<usize> {
    let mut ech = Echelon::new(tol);
    rows.iter().enumerate().filter(|(_, r)| ech.push((*r).clone())).map(|(i, _)| i).collect()
}

pub fn rank(rows: &[Row], tol: f64) -> usize {
    independent_rows(rows, tol).len()
}

/// Basis of the right kernel `{x : rows . x = 0}`. Each vector has a one at
/// its free column.
pub fn nullspace(rows: &[Row], ncols: usize, tol: f64) -> Vec<Row> {
    let mut ech = Echelon::new(tol);
    for r in rows {
        ech.push(r.clone());
    }
    // Gauss-Jordan: clear every pivot column from the other basis rows.
    let mut basis = ech.basis;
    for i in 0..basis.len() {
        let (pc, pivot_row) = basis[i].clone();
        for (k, (_, other)) in basis.iter_mut().enumerate() {
            if k != i {
                reduce_against(other, std::slice::from_ref(&(pc, pivot_row.clone())));
            }
        }
    }
    let pivots: Vec<usize> = basis.iter().map(|(p, _)| *p).collect();
    let mut out = Vec::new();
    for f in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut x = vec![Value::ZERO; ncols];
        x[f] = Value::exact(crate::numeric::Real::ONE);
        for (pc, r) in &basis {
            let q = r[f].v / r[*pc].v;
            let rel = if r[*pc].v.is_zero() { 0.0 } else { r[*pc].scale / r[*pc].v.mag() };
            x[*pc] = Value { v: -q, scale: q.mag() + (r[f].scale / r[*pc].v.mag()) * rel.max(1.0) };
        }
        out.push(x);
    }
    out
}

/// Dot product with scale accounting.
pub fn dot(a: &[Value], b: &[Value]) -> Value {
    a.iter().zip(b).fold(Value::ZERO, |acc, (x, y)| acc.add(x.mul(*y)))
}

/// Evaluate a matrix of expressions at a point.
pub fn eval_rows(ev: &mut Evaluator, rows: &[Vec<Expr>]) -> std::result::Result<Vec<Row>, crate::expr::DomainError> {
    rows.iter().map(|r| r.iter().map(|e| ev.eval(e)).collect()).collect()
}

/// Generic rank of a symbolic matrix together with a generically
/// independent subset of its rows (greedy in row order at the best point).
pub fn generic_rank(rows: &[Vec<Expr>], sampler: &Sampler) -> Result<(usize, Vec<usize>)> {
    if rows.is_empty() {
        return Ok((0, Vec::new()));
    }
    let tol = sampler.tolerance();
    let per_point = sampler.sample(|p| {
        let mut ev = Evaluator::new(p, tol);
        let m = eval_rows(&mut ev, rows)?;
        Ok(independent_rows(&m, tol))
    })?;
    Ok(best_selection(per_point))
}

/// Pick the largest selection, first in point order on ties.
pub fn best_selection(per_point: Vec<Vec<usize>>) -> (usize, Vec<usize>) {
    let mut best: Vec<usize> = Vec::new();
    for sel in per_point {
        if sel.len() > best.len() {
            best = sel;
        }
    }
    (best.len(), best)
}

/// Determinant by Laplace expansion along rows with memoization on the set
/// of remaining columns. Zero entries are skipped, so sparse matrices of
/// moderate size are cheap.
pub fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 0 {
        return Expr::one();
    }
    assert!(n <= 63, "determinant too large");
    let mut memo: HashMap<u64, Expr> = HashMap::new();
    det_rec(m, 0, (1u64 << n) - 1, &mut memo)
}

fn det_rec(m: &[Vec<Expr>], row: usize, cols: u64, memo: &mut HashMap<u64, Expr>) -> Expr {
    if row == m.len() {
        return Expr::one();
    }
    if let Some(d) = memo.get(&cols) {
        return d.clone();
    }
    let mut terms = Vec::new();
    let mut sign_pos = 0;
    for c in 0..m.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        let entry = &m[row][c];
        if !entry.is_zero() {
            let minor = det_rec(m, row + 1, cols & !(1 << c), memo);
            if !minor.is_zero() {
                let t = entry * &minor;
                terms.push(if sign_pos % 2 == 1 { -t } else { t });
            }
        }
        sign_pos += 1;
    }
    let d = Expr::sum(terms);
    memo.insert(cols, d.clone());
    d
}

/// Fraction-free basis of the right kernel of a symbolic matrix. Rows and
/// pivot columns of a generically nonsingular minor are chosen at the best
/// sample point (columns greedily in `col_order`), and each kernel vector
/// is written with Cramer-rule minors so no division is needed.
pub fn symbolic_nullspace(rows: &[Vec<Expr>], ncols: usize, col_order: &[usize], sampler: &Sampler) -> Result<Vec<Vec<Expr>>> {
    let tol = sampler.tolerance();
    let (r, sel_rows) = generic_rank(rows, sampler)?;
    if r == 0 {
        return Ok(col_order
            .iter()
            .map(|&c| {
                let mut v = vec![Expr::zero(); ncols];
                v[c] = Expr::one();
                v
            })
            .collect());
    }
    let sub: Vec<Vec<Expr>> = sel_rows.iter().map(|&i| rows[i].clone()).collect();
    // Columns of the selected rows, in preference order.
    let cols: Vec<Vec<Expr>> = col_order.iter().map(|&c| sub.iter().map(|row| row[c].clone()).collect()).collect();
    let per_point = sampler.sample(|p| {
        let mut ev = Evaluator::new(p, tol);
        let m = eval_rows(&mut ev, &cols)?;
        Ok(independent_rows(&m, tol))
    })?;
    let (rc, pivot_pos) = best_selection(per_point);
    debug_assert_eq!(rc, r);
    let pivots: Vec<usize> = pivot_pos.iter().map(|&k| col_order[k]).collect();
    let minor: Vec<Vec<Expr>> = sub.iter().map(|row| pivots.iter().map(|&c| row[c].clone()).collect()).collect();
    let det = determinant(&minor);
    let mut out = Vec::new();
    for &q in col_order.iter().filter(|c| !pivots.contains(c)) {
        let mut v = vec![Expr::zero(); ncols];
        v[q] = det.clone();
        for (j, &pc) in pivots.iter().enumerate() {
            let replaced: Vec<Vec<Expr>> = sub
                .iter()
                .map(|row| {
                    let mut rr: Vec<Expr> = pivots.iter().map(|&c| row[c].clone()).collect();
                    rr[j] = row[q].clone();
                    rr
                })
                .collect();
            v[pc] = -determinant(&replaced);
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::numeric::Real;

    fn row(xs: &[f64]) -> Row {
        xs.iter().map(|&x| Value::exact(Real::from_f64(x))).collect()
    }

    #[test]
    fn greedy_rank_and_kernel() {
        let m = vec![row(&[1.0, 2.0, 3.0]), row(&[2.0, 4.0, 6.0]), row(&[0.0, 1.0, 1.0])];
        assert_eq!(independent_rows(&m, 1e-20), vec![0, 2]);
        let k = nullspace(&m, 3, 1e-20);
        assert_eq!(k.len(), 1);
        for r in &m {
            assert!(dot(r, &k[0]).is_negligible(1e-20));
        }
    }

    #[test]
    fn symbolic_determinant() {
        let m: Vec<Vec<Expr>> = [["a", "b"], ["c", "d"]]
            .iter()
            .map(|r| r.iter().map(|s| parse(s).unwrap()).collect())
            .collect();
        assert_eq!(determinant(&m), parse("a*d - b*c").unwrap());
        let v: Vec<Vec<Expr>> = [["1", "x", "x^2"], ["1", "y", "y^2"], ["1", "z", "z^2"]]
            .iter()
            .map(|r| r.iter().map(|s| parse(s).unwrap()).collect())
            .collect();
        assert_eq!(determinant(&v), parse("(y - x)*(z - x)*(z - y)").unwrap());
    }

    #[test]
    fn symbolic_kernel_annihilates() {
        let s = Sampler::default();
        let rows: Vec<Vec<Expr>> = [["1", "0", "-cos(t)", "0"], ["0", "1", "-sin(t)", "x"]]
            .iter()
            .map(|r| r.iter().map(|e| parse(e).unwrap()).collect())
            .collect();
        let k = symbolic_nullspace(&rows, 4, &[0, 1, 2, 3], &s).unwrap();
        assert_eq!(k.len(), 2);
        for v in &k {
            for r in &rows {
                let dot = Expr::sum(r.iter().zip(v).map(|(a, b)| a * b));
                assert!(s.is_zero(&dot).unwrap());
            }
        }
        let (rank, _) = generic_rank(&k, &s).unwrap();
        assert_eq!(rank, 2);
    }
}
