use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NeuralError> {
        if data.len() != rows * cols {
            return Err(NeuralError::ShapeMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NeuralError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NeuralError::ShapeMismatch {
                    what: "matrix row",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out = W · [a, b]` where `a` and `b` are read as one concatenated column.
    pub(crate) fn matvec2(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        debug_assert_eq!(a.len() + b.len(), self.cols);
        let na = a.len();
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(&row[..na], a) + dot(&row[na..], b);
        }
    }

    /// `W += g ⊗ [a, b]`
    pub(crate) fn outer2_acc(&mut self, g: &[f64], a: &[f64], b: &[f64]) {
        let na = a.len();
        for (gi, row) in g.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if *gi == 0.0 {
                continue;
            }
            axpy(*gi, a, &mut row[..na]);
            axpy(*gi, b, &mut row[na..]);
        }
    }

    /// `da += W[:, :|a|]ᵀ g`, `db += W[:, |a|:]ᵀ g`
    pub(crate) fn tmatvec2_acc(&self, g: &[f64], da: &mut [f64], db: &mut [f64]) {
        let na = da.len();
        for (gi, row) in g.iter().zip(self.data.chunks_exact(self.cols)) {
            if *gi == 0.0 {
                continue;
            }
            axpy(*gi, &row[..na], da);
            axpy(*gi, &row[na..], db);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += s·x`
#[inline]
pub(crate) fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_products() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let mut out = [0.0; 2];
        w.matvec2(&[1.0], &[1.0, 1.0], &mut out);
        assert_eq!(out, [6.0, 15.0]);

        let (mut da, mut db) = ([0.0], [0.0, 0.0]);
        w.tmatvec2_acc(&[1.0, -1.0], &mut da, &mut db);
        assert_eq!((da, db), ([-3.0], [-3.0, -3.0]));

        let mut g = Matrix::zeros(2, 3);
        g.outer2_acc(&[1.0, 2.0], &[1.0], &[0.5, -1.0]);
        assert_eq!(g.as_slice(), &[1.0, 0.5, -1.0, 2.0, 1.0, -2.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }
}
