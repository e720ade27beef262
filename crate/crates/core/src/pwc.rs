//! Max-of-affine representation of convex functions.
//!
//! A [`FunctionMatrix`] `F` with `k` rows and `d` columns stands for the
//! convex function `f(z) = max_r <F_r, z>`. Together with a finite [`Grid`]
//! of anchor points, the operators in this module (row rearrangement,
//! subgradient envelope, row-aligned sum, row binding, linear composition)
//! keep every intermediate result of a backward induction inside the class
//! of such matrices with exactly one row per grid point.
//!
//! Grid coordinates follow the linear state embedding: the first component
//! is the constant coordinate (equal to 1 on the state process), so affine
//! functions of the remaining components are linear functionals of `z`.

use std::cmp::Ordering;

use crate::error::{check_dim, invalid, Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("matrix must have at least one row and one column"));
        }
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self {
            rows: dim,
            cols: dim,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix> {
        check_dim(self.cols, rhs.rows)?;
        let mut data = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let a = self.row(i);
            let out = &mut data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &aik) in a.iter().enumerate() {
                for (o, &b) in out.iter_mut().zip(rhs.row(k)) {
                    *o += aik * b;
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: rhs.cols,
            data,
        })
    }

    /// `self · z`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, z.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), z)).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Finite set of distinct anchor points `g¹ … gᵐ` in `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Matrix,
    /// Second coordinates when every point is `(1, s)` with strictly
    /// increasing `s`.
    line: Option<Vec<f64>>,
}

impl Grid {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(&points)?)
    }

    pub fn from_matrix(points: Matrix) -> Result<Self> {
        if points.rows() < 2 {
            return Err(invalid("grid needs at least two points"));
        }
        if points.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(invalid("grid points must be finite"));
        }
        let mut order: Vec<usize> = (0..points.rows()).collect();
        let lex = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        };
        order.sort_by(|&i, &j| lex(points.row(i), points.row(j)));
        if order
            .windows(2)
            .any(|w| lex(points.row(w[0]), points.row(w[1])) == Ordering::Equal)
        {
            return Err(invalid("grid points must be distinct"));
        }
        let line = if points.cols() == 2 {
            let s: Vec<f64> = (0..points.rows()).map(|i| points.get(i, 1)).collect();
            let anchored = (0..points.rows()).all(|i| points.get(i, 0) == 1.0);
            (anchored && s.windows(2).all(|w| w[0] < w[1])).then_some(s)
        } else {
            None
        };
        Ok(Self { points, line })
    }

    /// `count` points equally spaced on the segment `(1, lo)`–`(1, hi)`.
    pub fn line(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count < 2 {
            return Err(invalid("grid needs at least two points"));
        }
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(invalid(format!("grid range [{lo}, {hi}] is empty")));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let mut data = Vec::with_capacity(2 * count);
        for i in 0..count {
            let s = if i + 1 == count {
                hi
            } else {
                lo + step * i as f64
            };
            data.extend_from_slice(&[1.0, s]);
        }
        Self::from_matrix(Matrix::new(count, 2, data)?)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Second coordinates of a grid on the line `z₁ = 1`, if it is one.
    pub fn line_abscissae(&self) -> Option<&[f64]> {
        self.line.as_deref()
    }

    /// Evaluates `max(F z)` for a matrix whose row `i` attains the maximum
    /// at grid point `i` (any output of [`row_rearrange`], and row-aligned
    /// sums of such outputs).
    ///
    /// On a line grid the maximum is attained by one of the two rows whose
    /// anchors bracket `z`, so only those are inspected; otherwise every row
    /// is scanned. Both routes return the same value.
    pub fn eval_anchored(&self, f: &FunctionMatrix, z: &[f64]) -> f64 {
        match (&self.line, z) {
            (Some(s), [z1, z2]) if *z1 == 1.0 && f.rows() == s.len() => {
                let (lo, hi) = bracket(s, *z2);
                let a = dot(f.row(lo), z);
                if hi == lo {
                    a
                } else {
                    let b = dot(f.row(hi), z);
                    if b > a {
                        b
                    } else {
                        a
                    }
                }
            }
            _ => f.eval_unchecked(z),
        }
    }

    /// The two anchor rows that can attain the maximum at `z` for every
    /// matrix accepted by [`Grid::eval_anchored`], when the grid is a line.
    #[inline]
    pub(crate) fn anchor_pair(&self, z: &[f64]) -> Option<(usize, usize)> {
        match (&self.line, z) {
            (Some(s), [z1, z2]) if *z1 == 1.0 => Some(bracket(s, *z2)),
            _ => None,
        }
    }

    /// Index of the grid point closest to `z` in Euclidean distance; ties go
    /// to the lower index.
    pub fn nearest(&self, z: &[f64]) -> usize {
        if let (Some(s), [1.0, z2]) = (&self.line, z) {
            let (lo, hi) = bracket(s, *z2);
            return if (s[hi] - z2).abs() < (z2 - s[lo]).abs() {
                hi
            } else {
                lo
            };
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, g) in self.points().enumerate() {
            let d: f64 = g.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Indices of the abscissae enclosing `y`; both equal the end index when
/// `y` lies outside the range.
#[inline]
pub(crate) fn bracket(s: &[f64], y: f64) -> (usize, usize) {
    let hi = s.partition_point(|&x| x <= y);
    if hi == 0 {
        (0, 0)
    } else if hi == s.len() {
        (hi - 1, hi - 1)
    } else {
        (hi - 1, hi)
    }
}

/// Matrix representative `F` of the convex function `f(z) = max(F z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionMatrix(Matrix);

impl FunctionMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Matrix::new(rows, cols, data).map(Self)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Matrix::from_rows(rows).map(Self)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        })
    }

    /// The linear functional `coeffs` repeated on `rows` rows: the grid
    /// representative of an affine function.
    pub fn affine(coeffs: &[f64], rows: usize) -> Self {
        let mut data = Vec::with_capacity(rows * coeffs.len());
        for _ in 0..rows {
            data.extend_from_slice(coeffs);
        }
        Self(Matrix {
            rows,
            cols: coeffs.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0.data
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.cols(), z.len())?;
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.rows() {
            let v = dot(self.row(i), z);
            if v > best {
                best = v;
            }
        }
        best
    }

    /// First row attaining `max(F z)`.
    pub fn argmax(&self, z: &[f64]) -> Result<usize> {
        check_dim(self.cols(), z.len())?;
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..self.rows() {
            let v = dot(self.row(i), z);
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        Ok(best)
    }

    /// `F · W`, the representative of `z ↦ f(W z)` (before rearrangement).
    pub fn compose(&self, w: &Matrix) -> Result<FunctionMatrix> {
        self.0.mul(w).map(Self)
    }

    /// Row binding `F₁ ⊔ F₂`: all rows of `self` followed by all rows of
    /// `other`.
    pub fn bind(&self, other: &FunctionMatrix) -> Result<FunctionMatrix> {
        check_dim(self.cols(), other.cols())?;
        let mut data = self.0.data.clone();
        data.extend_from_slice(&other.0.data);
        Self::new(self.rows() + other.rows(), self.cols(), data)
    }
}

/// `Υ_G F`: row `i` of the result is the first row of `F` attaining
/// `max(F gⁱ)`.
pub fn row_rearrange(f: &FunctionMatrix, grid: &Grid) -> Result<FunctionMatrix> {
    check_dim(grid.dim(), f.cols())?;
    let d = f.cols();
    let mut data = Vec::with_capacity(grid.len() * d);
    for g in grid.points() {
        let r = f.argmax(g)?;
        data.extend_from_slice(f.row(r));
    }
    FunctionMatrix::new(grid.len(), d, data)
}

/// `S_G f`: the maximum of tangents of a convex `f` at the grid points.
///
/// `gradient(g)` must return a subgradient of `f` at `g` with respect to the
/// full vector `z`. The constant term of each tangent is carried by the
/// first coordinate, so every row matches `f` at its anchor:
/// `<row_i, gⁱ> = f(gⁱ)`. Grid points need a nonzero first coordinate.
pub fn subgradient_envelope<F, D>(f: F, gradient: D, grid: &Grid) -> Result<FunctionMatrix>
where
    F: Fn(&[f64]) -> f64,
    D: Fn(&[f64]) -> Vec<f64>,
{
    let d = grid.dim();
    let mut data = Vec::with_capacity(grid.len() * d);
    for g in grid.points() {
        if g[0] == 0.0 {
            return Err(invalid(
                "subgradient envelope needs grid points with z₁ ≠ 0",
            ));
        }
        let mut row = gradient(g);
        check_dim(d, row.len())?;
        let gap = f(g) - dot(&row, g);
        row[0] += gap / g[0];
        data.extend_from_slice(&row);
    }
    FunctionMatrix::new(grid.len(), d, data)
}

/// Row-aligned sum of two grid representatives.
pub fn add(a: &FunctionMatrix, b: &FunctionMatrix) -> Result<FunctionMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    check_dim(a.cols(), b.cols())?;
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x + y)
        .collect();
    FunctionMatrix::new(a.rows(), a.cols(), data)
}

/// `Υ_G(F₁ ⊔ F₂)`, the representative of `S_G(f₁ ∨ f₂)`.
pub fn max_bind(a: &FunctionMatrix, b: &FunctionMatrix, grid: &Grid) -> Result<FunctionMatrix> {
    row_rearrange(&a.bind(b)?, grid)
}

/// `Υ_G(F W)`, the representative of `S_G(f(W ·))`.
pub fn compose_linear(f: &FunctionMatrix, w: &Matrix, grid: &Grid) -> Result<FunctionMatrix> {
    if w.rows() != w.cols() {
        return Err(invalid("linear map must be square"));
    }
    row_rearrange(&f.compose(w)?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f64]]) -> FunctionMatrix {
        FunctionMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(fm(&[&[1.0, 0.0]]).evaluate(&[1.0, 5.0]).unwrap(), 1.0);
        assert_eq!(
            fm(&[&[0.0, 1.0], &[0.0, -1.0]])
                .evaluate(&[1.0, 3.0])
                .unwrap(),
            3.0
        );
        assert_eq!(
            fm(&[&[2.0, -1.0], &[0.0, 1.0]])
                .evaluate(&[1.0, 2.0])
                .unwrap(),
            2.0
        );
        assert!(matches!(
            fm(&[&[1.0, 0.0]]).evaluate(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rearrange_picks_first_maximizer() {
        let grid = Grid::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let f = fm(&[&[0.0, 1.0], &[2.0, -1.0]]);
        let r = row_rearrange(&f, &grid).unwrap();
        assert_eq!(r, fm(&[&[2.0, -1.0], &[0.0, 1.0]]));

        let one = fm(&[&[3.0, 4.0]]);
        let r = row_rearrange(&one, &grid).unwrap();
        assert_eq!(r, fm(&[&[3.0, 4.0], &[3.0, 4.0]]));
    }

    #[test]
    fn envelope_of_square() {
        let grid = Grid::line(3, -1.0, 1.0).unwrap();
        let env = subgradient_envelope(|z| z[1] * z[1], |z| vec![0.0, 2.0 * z[1]], &grid).unwrap();
        assert_eq!(env, fm(&[&[-1.0, -2.0], &[0.0, 0.0], &[-1.0, 2.0]]));
    }

    #[test]
    fn envelope_of_affine_is_itself() {
        let grid = Grid::line(4, -2.0, 5.0).unwrap();
        let c = [3.0, -0.5];
        let env = subgradient_envelope(|z| dot(&c, z), |_| c.to_vec(), &grid).unwrap();
        assert_eq!(env, FunctionMatrix::affine(&c, 4));
    }

    #[test]
    fn add_and_bind() {
        let f = fm(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(add(&f, &FunctionMatrix::zeros(2, 2)).unwrap(), f);
        assert_eq!(
            add(&fm(&[&[1.0, 0.0]]), &fm(&[&[0.0, 1.0]])).unwrap(),
            fm(&[&[1.0, 1.0]])
        );
        assert!(add(&f, &fm(&[&[1.0, 0.0]])).is_err());

        let grid = Grid::new(vec![vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        let m = max_bind(&fm(&[&[0.0, 1.0]]), &fm(&[&[0.0, -1.0]]), &grid).unwrap();
        assert_eq!(m, fm(&[&[0.0, -1.0], &[0.0, 1.0]]));
    }

    #[test]
    fn compose_with_ar_matrix() {
        let (a, b, mu, sigma, n, phi) = (1.5, -2.0, 0.3, 0.5, 0.7, 0.9);
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![mu + sigma * n, phi]]).unwrap();
        let grid = Grid::line(5, -1.0, 1.0).unwrap();
        let r = compose_linear(&fm(&[&[a, b]]), &w, &grid).unwrap();
        for i in 0..5 {
            assert_eq!(r.row(i), &[a + b * (mu + sigma * n), b * phi]);
        }
        let id = compose_linear(
            &fm(&[&[0.0, 1.0], &[1.0, -1.0]]),
            &Matrix::identity(2),
            &grid,
        );
        assert_eq!(
            id.unwrap(),
            row_rearrange(&fm(&[&[0.0, 1.0], &[1.0, -1.0]]), &grid).unwrap()
        );
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(Grid::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
        let g = Grid::line(501, -15.0, 15.0).unwrap();
        assert_eq!(g.len(), 501);
        assert_eq!(g.point(500), &[1.0, 15.0]);
        assert!(g.line_abscissae().is_some());
        let g = Grid::new(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(g.line_abscissae().is_none());
    }

    #[test]
    fn nearest_on_line() {
        let g = Grid::line(5, 0.0, 4.0).unwrap();
        assert_eq!(g.nearest(&[1.0, 1.4]), 1);
        assert_eq!(g.nearest(&[1.0, 1.6]), 2);
        assert_eq!(g.nearest(&[1.0, -3.0]), 0);
        assert_eq!(g.nearest(&[1.0, 9.0]), 4);
        assert_eq!(g.nearest(&[1.0, 1.5]), 1);
    }
}
