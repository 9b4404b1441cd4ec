//! Exact rational scalars, dense vectors, and dense matrices.
//!
//! Everything downstream (the simplex kernel, vertex enumeration, the
//! reformulations) works over arbitrary-precision rationals so that optima,
//! duals, and certificates compare with `==` instead of a tolerance. Scalars
//! are [`num_rational::BigRational`], which keeps itself reduced with a
//! positive denominator. Matrices are dense row-major; every problem this
//! toolkit targets is desk scale, so no sparsity is attempted.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

/// Exact scalar used throughout the crate. Always reduced, denominator > 0.
pub type Rational = BigRational;

/// Dense column vector of rationals.
pub type RatVector = Vec<Rational>;

/// Shorthand constructor: `rat(3, 4)` is 3/4.
///
/// Panics if `den == 0`; use [`parse_rational`] for untrusted input.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Integer-valued rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parse the textual rational grammar used by instance files:
/// `-?[0-9]+(/[1-9][0-9]*)?`. Whole numbers have no slash; denominators are
/// written without sign or leading zeros, so `1/0`, `+3`, `1/-2`, `3/04`,
/// and `1.5` are all rejected.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    fn digits_ok(part: &str) -> bool {
        !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit())
    }
    let (num_part, den_part) = match s.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (s, None),
    };
    let unsigned = num_part.strip_prefix('-').unwrap_or(num_part);
    if !digits_ok(unsigned) {
        return Err(format!("invalid rational {s:?}: bad numerator"));
    }
    let numer: BigInt = num_part.parse().expect("validated digits");
    let denom = match den_part {
        None => BigInt::one(),
        Some(d) => {
            if !digits_ok(d) || d.starts_with('0') {
                return Err(format!(
                    "invalid rational {s:?}: denominator must match [1-9][0-9]*"
                ));
            }
            d.parse().expect("validated digits")
        }
    };
    Ok(Rational::new(numer, denom))
}

/// Render a rational in the same grammar `parse_rational` accepts.
/// (`BigRational`'s `Display` already prints `n` or `n/d` in reduced form.)
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// Exact dot product. Panics on length mismatch (internal misuse).
pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    let mut acc = Rational::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

/// `a - b` componentwise.
pub fn vec_sub(a: &[Rational], b: &[Rational]) -> RatVector {
    assert_eq!(a.len(), b.len(), "vec_sub: length mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// All-zero vector.
pub fn zeros(n: usize) -> RatVector {
    vec![Rational::zero(); n]
}

/// Scale every entry.
pub fn vec_scale(a: &[Rational], s: &Rational) -> RatVector {
    a.iter().map(|x| x * s).collect()
}

/// Concatenate vectors.
pub fn vec_concat(parts: &[&[Rational]]) -> RatVector {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

/// Dense row-major rational matrix. `rows × cols` with `cols` possibly 0
/// (a matrix acting on a 0-dimensional space) and `rows` possibly 0.
#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    /// Build from explicit rows; all rows must share one length.
    /// `cols` disambiguates the zero-row case.
    pub fn from_rows(cols: usize, rows: Vec<RatVector>) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        let nrows = rows.len();
        for r in rows {
            assert_eq!(r.len(), cols, "from_rows: ragged row");
            data.extend(r);
        }
        RatMatrix { rows: nrows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[Rational]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn to_rows(&self) -> Vec<RatVector> {
        self.rows_iter().map(|r| r.to_vec()).collect()
    }

    pub fn push_row(&mut self, row: RatVector) {
        assert_eq!(row.len(), self.cols, "push_row: width mismatch");
        self.data.extend(row);
        self.rows += 1;
    }

    pub fn transpose(&self) -> RatMatrix {
        let mut t = RatMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Rational]) -> RatVector {
        assert_eq!(v.len(), self.cols, "mul_vec: width mismatch");
        self.rows_iter().map(|r| dot(r, v)).collect()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.rows, other.rows, "hstack: row mismatch");
        let mut rows = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut r = self.row(i).to_vec();
            r.extend_from_slice(other.row(i));
            rows.push(r);
        }
        RatMatrix::from_rows(self.cols + other.cols, rows)
    }

    /// Vertical concatenation `[self; other]`.
    pub fn vstack(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.cols, "vstack: col mismatch");
        let mut m = self.clone();
        for r in other.rows_iter() {
            m.push_row(r.to_vec());
        }
        m
    }

    /// Select a subset of rows (in the given order).
    pub fn select_rows(&self, idx: &[usize]) -> RatMatrix {
        RatMatrix::from_rows(self.cols, idx.iter().map(|&i| self.row(i).to_vec()).collect())
    }

    /// Negate every entry.
    pub fn neg(&self) -> RatMatrix {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| -x).collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMatrix {}x{} [", self.rows, self.cols)?;
        for r in self.rows_iter() {
            let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Outcome of solving a general linear system exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearSolve {
    /// No solution exists.
    Inconsistent,
    /// Exactly one solution.
    Unique(RatVector),
    /// Solvable but with free variables; one particular solution is returned
    /// (free variables set to zero).
    Underdetermined(RatVector),
}

/// Solve `A x = b` by fraction-exact Gauss-Jordan elimination.
pub fn solve_linear(a: &RatMatrix, b: &[Rational]) -> LinearSolve {
    assert_eq!(a.nrows(), b.len(), "solve_linear: rhs length mismatch");
    let (m, n) = (a.nrows(), a.ncols());
    // Augmented matrix.
    let mut aug: Vec<RatVector> = (0..m)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.push(b[i].clone());
            r
        })
        .collect();

    let mut pivot_col_of_row = Vec::new();
    let mut r = 0;
    for c in 0..n {
        // Find a pivot in column c at or below row r.
        let Some(p) = (r..m).find(|&i| !aug[i][c].is_zero()) else { continue };
        aug.swap(r, p);
        let inv = aug[r][c].clone();
        for x in aug[r].iter_mut() {
            *x = &*x / &inv;
        }
        for i in 0..m {
            if i != r && !aug[i][c].is_zero() {
                let factor = aug[i][c].clone();
                for j in 0..=n {
                    let delta = &factor * &aug[r][j];
                    aug[i][j] = &aug[i][j] - delta;
                }
            }
        }
        pivot_col_of_row.push(c);
        r += 1;
        if r == m {
            break;
        }
    }

    // Inconsistent if any zero row has nonzero rhs.
    for i in r..m {
        if !aug[i][n].is_zero() {
            return LinearSolve::Inconsistent;
        }
    }

    let mut x = zeros(n);
    for (row, &col) in pivot_col_of_row.iter().enumerate() {
        x[col] = aug[row][n].clone();
    }
    if pivot_col_of_row.len() == n {
        LinearSolve::Unique(x)
    } else {
        LinearSolve::Underdetermined(x)
    }
}

/// Rank of a matrix (exact).
pub fn rank(a: &RatMatrix) -> usize {
    let (m, n) = (a.nrows(), a.ncols());
    let mut rows: Vec<RatVector> = a.to_rows();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..m).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = rows[r][c].clone();
        for x in rows[r].iter_mut() {
            *x = &*x / &inv;
        }
        for i in 0..m {
            if i != r && !rows[i][c].is_zero() {
                let factor = rows[i][c].clone();
                for j in 0..n {
                    let delta = &factor * &rows[r][j];
                    rows[i][j] = &rows[i][j] - delta;
                }
            }
        }
        r += 1;
        if r == m {
            break;
        }
    }
    r
}

/// Compare two vectors lexicographically (exact).
pub fn lex_cmp(a: &[Rational], b: &[Rational]) -> std::cmp::Ordering {
    a.cmp(b)
}

/// Sum of absolute values (used for generator widening margins).
pub fn abs_sum(v: &[Rational]) -> Rational {
    v.iter().fold(Rational::zero(), |acc, x| acc + x.abs())
}
