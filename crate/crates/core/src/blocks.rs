//! Column-block bookkeeping for class-partitioned matrices.
//!
//! Every data matrix in this crate is Q x N with columns grouped by class in
//! canonical order. `Partition` owns the class sizes and provides the
//! block-structured reductions (means, deviations, extensions) that the
//! geometry and readout layers share.

use nalgebra::{DMatrix, DVector};

/// Class sizes N_1..N_Q of a column-blocked Q x N matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    sizes: Vec<usize>,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(!sizes.is_empty() && sizes.iter().all(|&n| n > 0));
        Partition { sizes }
    }

    pub fn num_classes(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Column range of class `j`.
    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.sizes[..j].iter().sum();
        start..start + self.sizes[j]
    }

    /// Class index of column `i`.
    pub fn class_of(&self, i: usize) -> usize {
        let mut acc = 0;
        for (j, &n) in self.sizes.iter().enumerate() {
            acc += n;
            if i < acc {
                return j;
            }
        }
        panic!("column {i} out of range");
    }

    /// Per-class column means as a Q x Q matrix (column j = mean of block j).
    pub fn block_means(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.ncols(), self.total());
        let q = self.num_classes();
        let mut m = DMatrix::zeros(x.nrows(), q);
        for j in 0..q {
            let r = self.range(j);
            let mut col = DVector::zeros(x.nrows());
            for i in r.clone() {
                col += x.column(i);
            }
            col /= self.sizes[j] as f64;
            m.set_column(j, &col);
        }
        m
    }

    /// Deviations from block means, same shape as `x`.
    pub fn deviations(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let means = self.block_means(x);
        let mut d = x.clone();
        for j in 0..self.num_classes() {
            for i in self.range(j) {
                let col = d.column(i) - means.column(j);
                d.set_column(i, &col);
            }
        }
        d
    }

    /// Extends a Q x Q column set to Q x N by repeating column j over block j.
    pub fn extend(&self, reduced: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(reduced.ncols(), self.num_classes());
        let mut out = DMatrix::zeros(reduced.nrows(), self.total());
        for j in 0..self.num_classes() {
            for i in self.range(j) {
                out.set_column(i, &reduced.column(j).into_owned());
            }
        }
        out
    }

    /// Weight 1/N_j attached to every column of block j.
    pub fn column_weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.total());
        for &n in &self.sizes {
            w.extend(std::iter::repeat_n(1.0 / n as f64, n));
        }
        w
    }
}
