//! Exact rational matrices.
//!
//! Rank and determinant use fraction-free (Bareiss) elimination on an
//! integer matrix obtained by clearing the denominators of each row; row
//! scaling does not change the rank and rescales the determinant by a known
//! factor. Pivots are the first nonzero entry found scanning down a column.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"7"`, `"-3"` or `"p/q"`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rat::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(Rat::from_integer),
    }
}

/// Square root of a nonnegative rational when it is itself rational.
pub fn sqrt_exact(x: &Rat) -> Option<Rat> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer();
    let d = x.denom();
    let rn = n.sqrt();
    let rd = d.sqrt();
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        Some(Rat::new(rn, rd))
    } else {
        None
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rat::one());
        }
        m
    }

    pub fn diagonal(values: &[Rat]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, v.clone());
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Rat>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(RatMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.into_iter().flatten().collect())
    }

    /// Convenience constructor from integer rows; panics on ragged input.
    pub fn from_ints<R: AsRef<[i64]>>(rows: &[R]) -> Self {
        let rows: Vec<Vec<Rat>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| rat(x)).collect())
            .collect();
        Self::from_rows(rows).expect("ragged integer rows")
    }

    /// Symmetric constructor; rejects input with `M[i][j] != M[j][i]`.
    pub fn symmetric(rows: Vec<Vec<Rat>>) -> Result<Self> {
        let m = Self::from_rows(rows)?;
        if !m.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        Ok(m)
    }

    /// Column vector `v vᵀ`.
    pub fn outer(v: &[Rat]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, &v[i] * &v[j]);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[Rat] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, k: &Rat) -> Self {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * k).collect(),
        }
    }

    pub fn checked_mul(&self, rhs: &RatMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        out.data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &RatMatrix, op: impl Fn(&Rat, &Rat) -> Rat) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| op(a, b))
                .collect(),
        })
    }

    pub fn checked_add(&self, rhs: &RatMatrix) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn checked_sub(&self, rhs: &RatMatrix) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn mul_vec(&self, v: &[Rat]) -> Result<Vec<Rat>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Submatrix with the given row and column indices, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn principal(&self, idx: &[usize]) -> Self {
        self.select(idx, idx)
    }

    /// Rows cleared of denominators: each row is multiplied by the lcm of its
    /// denominators. Returns the integer rows and the per-row multipliers.
    fn integer_rows(&self) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
        let mut rows = Vec::with_capacity(self.rows);
        let mut scales = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let l = self
                .row(i)
                .iter()
                .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            rows.push(
                self.row(i)
                    .iter()
                    .map(|x| x.numer() * (&l / x.denom()))
                    .collect(),
            );
            scales.push(l);
        }
        (rows, scales)
    }

    /// Exact rank over the rationals.
    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        let (mut a, _) = self.integer_rows();
        bareiss(&mut a, self.cols).rank
    }

    /// Exact determinant.
    pub fn det(&self) -> Result<Rat> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Rat::one());
        }
        let (mut a, scales) = self.integer_rows();
        let elim = bareiss(&mut a, n);
        if elim.rank < n {
            return Ok(Rat::zero());
        }
        let mut d = a[n - 1][n - 1].clone();
        if elim.swaps % 2 == 1 {
            d = -d;
        }
        let s = scales.iter().fold(BigInt::one(), |acc, x| acc * x);
        Ok(Rat::new(d, s))
    }

    /// Exact inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for c in 0..n {
            let p = (c..n)
                .find(|&r| !a.get(r, c).is_zero())
                .ok_or(Error::SingularMatrix)?;
            if p != c {
                a.swap_rows(p, c);
                inv.swap_rows(p, c);
            }
            let piv = a.get(c, c).recip();
            for j in 0..n {
                let x = a.get(c, j) * &piv;
                a.set(c, j, x);
                let y = inv.get(c, j) * &piv;
                inv.set(c, j, y);
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a.get(r, c).clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let x = a.get(r, j) - &f * a.get(c, j);
                    a.set(r, j, x);
                    let y = inv.get(r, j) - &f * inv.get(c, j);
                    inv.set(r, j, y);
                }
            }
        }
        Ok(inv)
    }

    /// Unique solution of `self · x = b` when `self` has full column rank and
    /// the system is consistent; `None` otherwise.
    pub fn solve_unique(&self, b: &[Rat]) -> Result<Option<Vec<Rat>>> {
        if b.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for {} rows",
                b.len(),
                self.rows
            )));
        }
        if self.rank() < self.cols {
            return Ok(None);
        }
        let t = self.transpose();
        let normal = t.checked_mul(self)?;
        let rhs = t.mul_vec(b)?;
        let x = normal.inverse()?.mul_vec(&rhs)?;
        if self.mul_vec(&x)? == b {
            Ok(Some(x))
        } else {
            Ok(None)
        }
    }

    /// Positive definiteness of a symmetric matrix via its leading principal
    /// minors.
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_symmetric() {
            return false;
        }
        (1..=self.rows).all(|k| {
            let idx: Vec<usize> = (0..k).collect();
            self.principal(&idx)
                .det()
                .map(|d| d.is_positive())
                .unwrap_or(false)
        })
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Parses the text format: a `rows cols` header followed by the entries
    /// row by row. Entries are integers or `p/q`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut data = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            if header.is_none() {
                let parse_dim = |t: Option<&str>| -> Result<usize> {
                    t.and_then(|s| s.parse().ok()).ok_or(Error::Parse {
                        line: lineno + 1,
                        message: "expected header `rows cols`".into(),
                    })
                };
                let r = parse_dim(toks.next())?;
                let c = parse_dim(toks.next())?;
                if toks.next().is_some() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: "trailing tokens after header".into(),
                    });
                }
                header = Some((r, c));
                continue;
            }
            for tok in toks {
                let x = parse_rat(tok).ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("invalid entry `{tok}`"),
                })?;
                data.push(x);
            }
        }
        let (r, c) = header.ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        if data.len() != r * c {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected {} entries, found {}", r * c, data.len()),
            });
        }
        Self::from_vec(r, c, data)
    }

    /// Writes the text format understood by [`RatMatrix::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

struct Elimination {
    rank: usize,
    swaps: usize,
}

/// In-place fraction-free row echelon reduction. After step `k` every
/// remaining entry is a `(k+1)`-minor of the input, so the division by the
/// previous pivot is exact.
fn bareiss(a: &mut [Vec<BigInt>], cols: usize) -> Elimination {
    let rows = a.len();
    let mut prev = BigInt::one();
    let mut r = 0;
    let mut swaps = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        if p != r {
            a.swap(p, r);
            swaps += 1;
        }
        let (top, rest) = a.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let pivot = &pivot_row[c];
        for row in rest.iter_mut() {
            let f = row[c].clone();
            for j in c + 1..cols {
                let num = pivot * &row[j] - &f * &pivot_row[j];
                debug_assert!((&num % &prev).is_zero());
                row[j] = num / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = pivot.clone();
        r += 1;
    }
    Elimination { rank: r, swaps }
}

impl Add for &RatMatrix {
    type Output = RatMatrix;
    fn add(self, rhs: &RatMatrix) -> RatMatrix {
        self.checked_add(rhs).expect("matrix dimensions must agree")
    }
}

impl Sub for &RatMatrix {
    type Output = RatMatrix;
    fn sub(self, rhs: &RatMatrix) -> RatMatrix {
        self.checked_sub(rhs).expect("matrix dimensions must agree")
    }
}

impl Mul for &RatMatrix {
    type Output = RatMatrix;
    fn mul(self, rhs: &RatMatrix) -> RatMatrix {
        self.checked_mul(rhs).expect("inner dimensions must agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(RatMatrix::identity(3).rank(), 3);
        assert_eq!(RatMatrix::from_ints(&[[1, 2], [2, 4]]).rank(), 1);
        assert_eq!(RatMatrix::zeros(0, 4).rank(), 0);
        assert_eq!(RatMatrix::zeros(4, 0).rank(), 0);
        assert_eq!(RatMatrix::zeros(3, 3).rank(), 0);
    }

    #[test]
    fn rank_with_fractions() {
        let m = RatMatrix::from_rows(vec![
            vec![ratio(1, 2), ratio(1, 3)],
            vec![ratio(3, 2), rat(1)],
        ])
        .unwrap();
        assert_eq!(m.rank(), 1);
        assert_eq!(m.det().unwrap(), rat(0));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(
            RatMatrix::identity(4).inverse().unwrap(),
            RatMatrix::identity(4)
        );
        let m = RatMatrix::from_ints(&[[1, 0], [2, 1]]);
        assert_eq!(
            m.inverse().unwrap(),
            RatMatrix::from_ints(&[[1, 0], [-2, 1]])
        );
        assert_eq!(
            RatMatrix::from_ints(&[[1, 2], [2, 4]]).inverse(),
            Err(Error::SingularMatrix)
        );
    }

    #[test]
    fn det_examples() {
        assert_eq!(RatMatrix::identity(5).det().unwrap(), rat(1));
        assert_eq!(
            RatMatrix::from_ints(&[[2, 1], [1, 2]]).det().unwrap(),
            rat(3)
        );
        let ones = RatMatrix::outer(&[rat(1), rat(1), rat(1)]);
        assert_eq!((&RatMatrix::identity(3) + &ones).det().unwrap(), rat(4));
        // a row swap flips the sign
        assert_eq!(
            RatMatrix::from_ints(&[[0, 1], [1, 0]]).det().unwrap(),
            rat(-1)
        );
        assert!(matches!(
            RatMatrix::zeros(2, 3).det(),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn text_format_round_trip() {
        let m = RatMatrix::from_rows(vec![vec![rat(1), ratio(-3, 4)], vec![rat(0), ratio(7, 2)]])
            .unwrap();
        assert_eq!(RatMatrix::parse(&m.to_text()).unwrap(), m);
        let parsed = RatMatrix::parse("# comment\n2 2\n1 2/4\n\n3 -4\n").unwrap();
        assert_eq!(parsed.get(0, 1), &ratio(1, 2));
        assert!(matches!(
            RatMatrix::parse("2 2\n1 2 3\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            RatMatrix::parse("1 1\n1/0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn sqrt_exact_cases() {
        assert_eq!(sqrt_exact(&ratio(9, 4)), Some(ratio(3, 2)));
        assert_eq!(sqrt_exact(&rat(2)), None);
        assert_eq!(sqrt_exact(&rat(-4)), None);
    }

    #[test]
    fn positive_definite_by_minors() {
        assert!(RatMatrix::from_ints(&[[2, 1], [1, 2]]).is_positive_definite());
        assert!(!RatMatrix::from_ints(&[[1, 2], [2, 1]]).is_positive_definite());
    }

    #[test]
    fn symmetric_constructor_rejects_asymmetry() {
        let rows = vec![vec![rat(1), rat(2)], vec![rat(3), rat(1)]];
        assert_eq!(RatMatrix::symmetric(rows), Err(Error::NotSymmetric));
    }

    #[test]
    fn solve_unique_overdetermined() {
        let a = RatMatrix::from_ints(&[[1, 0], [0, 1], [1, 1]]);
        let x = a.solve_unique(&[rat(2), rat(3), rat(5)]).unwrap();
        assert_eq!(x, Some(vec![rat(2), rat(3)]));
        assert_eq!(a.solve_unique(&[rat(2), rat(3), rat(6)]).unwrap(), None);
    }

    fn int_matrix(rows: usize, cols: usize) -> impl Strategy<Value = RatMatrix> {
        proptest::collection::vec(-9i64..=9, rows * cols).prop_map(move |v| {
            RatMatrix::from_vec(rows, cols, v.into_iter().map(rat).collect()).unwrap()
        })
    }

    fn rat_matrix(n: usize) -> impl Strategy<Value = RatMatrix> {
        proptest::collection::vec((-9i64..=9, 1i64..=5), n * n).prop_map(move |v| {
            RatMatrix::from_vec(n, n, v.into_iter().map(|(a, b)| ratio(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn rank_of_transpose(m in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| int_matrix(r, c))) {
            prop_assert_eq!(m.rank(), m.transpose().rank());
        }

        #[test]
        fn rank_of_low_rank_product(
            (a, b, r) in (1usize..4)
                .prop_flat_map(|r| (Just(r), r..7, r..7))
                .prop_flat_map(|(r, m, n)| (int_matrix(m, r), int_matrix(r, n), Just(r)))
        ) {
            // identity blocks pin the factors to full rank r
            let mut a = a;
            let mut b = b;
            for i in 0..r {
                for j in 0..r {
                    let v = if i == j { rat(1) } else { rat(0) };
                    a.set(i, j, v.clone());
                    b.set(i, j, v);
                }
            }
            let p = &a * &b;
            prop_assert_eq!(p.rank(), r);
        }

        #[test]
        fn det_is_multiplicative((a, b) in (1usize..5).prop_flat_map(|n| (rat_matrix(n), rat_matrix(n)))) {
            let ab = &a * &b;
            prop_assert_eq!(ab.det().unwrap(), a.det().unwrap() * b.det().unwrap());
        }

        #[test]
        fn inverse_is_exact(a in (1usize..5).prop_flat_map(rat_matrix)) {
            if let Ok(inv) = a.inverse() {
                prop_assert_eq!(&a * &inv, RatMatrix::identity(a.rows()));
            } else {
                prop_assert!(a.rank() < a.rows());
            }
        }

        #[test]
        fn addition_is_exact(a in (1usize..4).prop_flat_map(rat_matrix), b in rat_matrix(3)) {
            if a.rows() == 3 {
                prop_assert_eq!(&(&a + &b) - &b, a);
            }
        }
    }
}
