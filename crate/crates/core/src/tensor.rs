//! Shared mutable matrices used for all trainable parameters.
//!
//! Cells are `f64` values stored as relaxed atomics so the same storage
//! serves both training contracts: a single writer in deterministic mode,
//! and unsynchronized concurrent writers (lost updates accepted) in
//! throughput mode. Relaxed load/store compiles to plain moves, so the
//! deterministic path pays nothing for the flexibility.

use std::sync::atomic::{AtomicU64, Ordering};

/// An `f64` cell with interior mutability, shared across workers.
#[derive(Default)]
#[repr(transparent)]
pub struct Cell(AtomicU64);

impl Cell {
    #[inline]
    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, value: f64) {
        self.0.store(value.to_bits(), Ordering::Relaxed);
    }

    #[inline]
    pub fn add(&self, delta: f64) {
        self.set(self.get() + delta);
    }
}

impl Clone for Cell {
    fn clone(&self) -> Self {
        let cell = Cell::default();
        cell.set(self.get());
        cell
    }
}

impl std::fmt::Debug for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.get().fmt(f)
    }
}

/// Dense row-major matrix of [`Cell`]s.
#[derive(Debug, Clone)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Cell>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let mut data = Vec::new();
        data.resize_with(rows * cols, Cell::default);
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col].get()
    }

    #[inline]
    pub fn set(&self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col].set(value);
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[Cell] {
        debug_assert!(row < self.rows, "row {row} out of range ({})", self.rows);
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Copies a row into `out`.
    pub fn load_row(&self, row: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        for (dst, cell) in out.iter_mut().zip(self.row(row)) {
            *dst = cell.get();
        }
    }

    pub fn row_vec(&self, row: usize) -> Vec<f64> {
        self.row(row).iter().map(Cell::get).collect()
    }

    /// Dot product of a row with a dense vector.
    pub fn row_dot(&self, row: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.cols);
        self.row(row)
            .iter()
            .zip(v)
            .map(|(cell, x)| cell.get() * x)
            .sum()
    }

    /// Adds `scale * v` into a row.
    pub fn row_axpy(&self, row: usize, scale: f64, v: &[f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (cell, x) in self.row(row).iter().zip(v) {
            cell.add(scale * x);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().map(Cell::get)
    }

    /// True when every entry is a finite number.
    pub fn all_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn fill_from(&self, values: &[f64]) {
        assert_eq!(values.len(), self.data.len());
        for (cell, v) in self.data.iter().zip(values) {
            cell.set(*v);
        }
    }
}
