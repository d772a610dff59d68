//! Dense row-major matrices and the few vector helpers the network needs.
//! Shapes are asserted at every product so a mis-wired layer fails loudly.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    /// Rebuilds a matrix from its serialized parts, validating the shape.
    pub fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Option<Mat> {
        (rows * cols == data.len()).then_some(Mat { rows, cols, data })
    }

    /// Whether the buffer length matches the declared shape. Deserialized
    /// matrices must be checked before use.
    pub fn is_consistent(&self) -> bool {
        self.data.len() == self.rows * self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec: {}x{} * {}", self.rows, self.cols, x.len());
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[r] = acc;
        }
        y
    }

    /// `acc += self^T * y`.
    pub fn t_matvec_acc(&self, y: &[f64], acc: &mut [f64]) {
        assert_eq!(self.rows, y.len(), "t_matvec: {}x{}^T * {}", self.rows, self.cols, y.len());
        assert_eq!(self.cols, acc.len());
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let yr = y[r];
            for (slot, a) in acc.iter_mut().zip(row) {
                *slot += a * yr;
            }
        }
    }

    /// `acc += H * x` where `H` is the left (`half = 0`) or right (`half = 1`)
    /// column block of a matrix with `cols == 2 * x.len()`.
    pub fn matvec_half_acc(&self, half: usize, x: &[f64], acc: &mut [f64]) {
        assert!(half < 2);
        assert_eq!(self.cols, 2 * x.len(), "matvec_half: {}x{} on {}", self.rows, self.cols, x.len());
        assert_eq!(self.rows, acc.len());
        let w = x.len();
        let off = half * w;
        for r in 0..self.rows {
            let row = &self.data[r * self.cols + off..r * self.cols + off + w];
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            acc[r] += s;
        }
    }

    /// `acc += H^T * y` for the chosen column block.
    pub fn t_matvec_half_acc(&self, half: usize, y: &[f64], acc: &mut [f64]) {
        assert!(half < 2);
        assert_eq!(self.rows, y.len());
        assert_eq!(self.cols, 2 * acc.len(), "t_matvec_half: {}x{} into {}", self.rows, self.cols, acc.len());
        let w = acc.len();
        let off = half * w;
        for r in 0..self.rows {
            let row = &self.data[r * self.cols + off..r * self.cols + off + w];
            let yr = y[r];
            for (slot, a) in acc.iter_mut().zip(row) {
                *slot += a * yr;
            }
        }
    }

    /// `self += u * v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        assert_eq!(self.rows, u.len());
        assert_eq!(self.cols, v.len());
        for r in 0..self.rows {
            let ur = u[r];
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (slot, b) in row.iter_mut().zip(v) {
                *slot += ur * b;
            }
        }
    }

    /// `H += u * v^T` into the chosen column block.
    pub fn add_outer_half(&mut self, half: usize, u: &[f64], v: &[f64]) {
        assert!(half < 2);
        assert_eq!(self.rows, u.len());
        assert_eq!(self.cols, 2 * v.len());
        let w = v.len();
        let off = half * w;
        for r in 0..self.rows {
            let ur = u[r];
            let row = &mut self.data[r * self.cols + off..r * self.cols + off + w];
            for (slot, b) in row.iter_mut().zip(v) {
                *slot += ur * b;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn add_assign(a: &mut [f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Mat::from_fn(2, 3, |r, c| (r * 3 + c) as f64); // [[0,1,2],[3,4,5]]
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 12.0]);
        let mut acc = vec![0.0; 3];
        m.t_matvec_acc(&[1.0, 1.0], &mut acc);
        assert_eq!(acc, vec![3.0, 5.0, 7.0]);
    }

    #[test]
    fn half_blocks_partition_the_columns() {
        let m = Mat::from_fn(2, 4, |r, c| (r * 4 + c) as f64);
        let x = [1.0, 2.0];
        let mut left = vec![0.0; 2];
        let mut right = vec![0.0; 2];
        m.matvec_half_acc(0, &x, &mut left);
        m.matvec_half_acc(1, &x, &mut right);
        let full = m.matvec(&[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(left[0] + right[0], full[0]);
        assert_eq!(left[1] + right[1], full[1]);
    }

    #[test]
    fn outer_products_accumulate() {
        let mut m = Mat::zeros(2, 2);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(m.at(0, 0), 3.0);
        assert_eq!(m.at(1, 1), 8.0);
        let mut m = Mat::zeros(2, 4);
        m.add_outer_half(1, &[1.0, 1.0], &[5.0, 6.0]);
        assert_eq!(m.at(0, 2), 5.0);
        assert_eq!(m.at(1, 3), 6.0);
        assert_eq!(m.at(0, 0), 0.0);
    }

    #[test]
    #[should_panic(expected = "matvec")]
    fn shape_mismatch_panics() {
        Mat::zeros(2, 3).matvec(&[1.0, 2.0]);
    }
}
