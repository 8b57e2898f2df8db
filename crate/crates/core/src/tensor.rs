//! Small dense arrays for signal data.
//!
//! `Array2` is channel-major `[n_rows x n_cols]` (rows are channels, columns
//! are samples); `Array3` stacks windows as `[n x rows x cols]`. Both are
//! plain contiguous `f32` buffers; slicing always copies, so callers can
//! never alias a recording by accident.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct Array2 {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Array2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Array2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "array size mismatch");
        Array2 { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Copy of columns `start..start + len` across all rows.
    pub fn slice_cols(&self, start: usize, len: usize) -> Array2 {
        assert!(start + len <= self.cols, "column slice out of range");
        let mut out = Array2::zeros(self.rows, len);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[start..start + len]);
        }
        out
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &Array2) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    /// Adds `block` into `self` with its column 0 aligned at `col_offset`.
    /// The block must fit; callers clamp placements beforehand.
    pub fn add_block(&mut self, block: &Array2, col_offset: usize) {
        assert_eq!(self.rows, block.rows);
        assert!(col_offset + block.cols <= self.cols, "block overruns array");
        for r in 0..self.rows {
            let dst = &mut self.row_mut(r)[col_offset..col_offset + block.cols];
            let src = block.row(r);
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += s;
            }
        }
    }

    /// Maximum value together with its (row, col) position; first occurrence
    /// wins on ties. Empty arrays return None.
    pub fn argmax(&self) -> Option<(f32, usize, usize)> {
        let mut best: Option<(f32, usize, usize)> = None;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.get(r, c);
                if best.map_or(true, |(bv, _, _)| v > bv) {
                    best = Some((v, r, c));
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Array3 {
    n: usize,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Array3 {
    pub fn zeros(n: usize, rows: usize, cols: usize) -> Self {
        Array3 {
            n,
            rows,
            cols,
            data: vec![0.0; n * rows * cols],
        }
    }

    pub fn from_slices(slices: &[Array2]) -> Self {
        assert!(!slices.is_empty(), "cannot stack zero arrays");
        let rows = slices[0].rows();
        let cols = slices[0].cols();
        let mut data = Vec::with_capacity(slices.len() * rows * cols);
        for s in slices {
            assert_eq!(s.rows(), rows);
            assert_eq!(s.cols(), cols);
            data.extend_from_slice(s.data());
        }
        Array3 {
            n: slices.len(),
            rows,
            cols,
            data,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn slice(&self, i: usize) -> &[f32] {
        let stride = self.rows * self.cols;
        &self.data[i * stride..(i + 1) * stride]
    }

    pub fn to_array2(&self, i: usize) -> Array2 {
        Array2::from_vec(self.rows, self.cols, self.slice(i).to_vec())
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_cols_copies() {
        let mut a = Array2::from_vec(2, 4, vec![0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0]);
        let mut s = a.slice_cols(1, 2);
        assert_eq!(s.row(0), &[1.0, 2.0]);
        assert_eq!(s.row(1), &[11.0, 12.0]);
        s.set(0, 0, 99.0);
        assert_eq!(a.get(0, 1), 1.0);
        a.set(0, 1, -5.0);
        assert_eq!(s.get(0, 0), 99.0);
    }

    #[test]
    fn argmax_first_tie() {
        let a = Array2::from_vec(1, 4, vec![1.0, 3.0, 3.0, 0.0]);
        assert_eq!(a.argmax(), Some((3.0, 0, 1)));
    }

    #[test]
    fn add_block_offsets() {
        let mut a = Array2::zeros(1, 5);
        let b = Array2::from_vec(1, 2, vec![1.0, 2.0]);
        a.add_block(&b, 3);
        assert_eq!(a.row(0), &[0.0, 0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn stack_and_read_back() {
        let a = Array2::from_vec(1, 2, vec![1.0, 2.0]);
        let b = Array2::from_vec(1, 2, vec![3.0, 4.0]);
        let s = Array3::from_slices(&[a.clone(), b]);
        assert_eq!(s.n(), 2);
        assert_eq!(s.to_array2(0), a);
        assert_eq!(s.slice(1), &[3.0, 4.0]);
    }
}
