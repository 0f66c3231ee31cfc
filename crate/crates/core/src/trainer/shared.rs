//! Parameter storage shared by training workers without locks.
//!
//! Each entry is an `f64` stored in an `AtomicU64`. Reads and writes are
//! relaxed and a row update is a plain load-modify-store per element, so
//! concurrent writers may lose updates but never tear a value.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;

use crate::model::Model;

pub struct SharedMatrix {
    data: Vec<AtomicU64>,
    rows: usize,
    cols: usize,
}

impl SharedMatrix {
    pub fn from_array(a: &Array2<f64>) -> Self {
        let (rows, cols) = a.dim();
        SharedMatrix {
            data: a.iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
            rows,
            cols,
        }
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec(
            (self.rows, self.cols),
            self.data.iter().map(|v| f64::from_bits(v.load(Ordering::Relaxed))).collect(),
        )
        .expect("shape preserved")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn row_cells(&self, row: usize) -> &[AtomicU64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn read_row(&self, row: usize, out: &mut [f64]) {
        for (o, cell) in out.iter_mut().zip(self.row_cells(row)) {
            *o = f64::from_bits(cell.load(Ordering::Relaxed));
        }
    }

    /// `row += scale * x`
    #[inline]
    pub fn add_scaled(&self, row: usize, scale: f64, x: &[f64]) {
        for (cell, xi) in self.row_cells(row).iter().zip(x) {
            let v = f64::from_bits(cell.load(Ordering::Relaxed)) + scale * xi;
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    /// `row += x`
    #[inline]
    pub fn add_row(&self, row: usize, x: &[f64]) {
        for (cell, xi) in self.row_cells(row).iter().zip(x) {
            let v = f64::from_bits(cell.load(Ordering::Relaxed)) + xi;
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| f64::from_bits(v.load(Ordering::Relaxed)).is_finite())
    }
}

/// The three parameter matrices of a [`Model`] in shared form.
pub struct SharedModel {
    pub words: SharedMatrix,
    pub context: SharedMatrix,
    pub categories: SharedMatrix,
}

impl SharedModel {
    pub fn new(model: &Model) -> Self {
        SharedModel {
            words: SharedMatrix::from_array(&model.words),
            context: SharedMatrix::from_array(&model.context),
            categories: SharedMatrix::from_array(&model.categories),
        }
    }

    pub fn dim(&self) -> usize {
        self.words.cols()
    }

    pub fn to_model(&self) -> Model {
        Model {
            words: self.words.to_array(),
            context: self.context.to_array(),
            categories: self.categories.to_array(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.words.all_finite() && self.context.all_finite() && self.categories.all_finite()
    }
}
