use serde::{Deserialize, Serialize};

/// Dense column-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone + Default> ColMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Keep only the listed columns, in the given order.
    pub fn select_cols(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * keep.len());
        for &c in keep {
            data.extend_from_slice(self.col(c));
        }
        Self {
            rows: self.rows,
            cols: keep.len(),
            data,
        }
    }

    /// Keep only the listed rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(keep.len() * self.cols);
        for c in 0..self.cols {
            let col = self.col(c);
            data.extend(keep.iter().map(|&r| col[r].clone()));
        }
        Self {
            rows: keep.len(),
            cols: self.cols,
            data,
        }
    }
}

impl<T> ColMatrix<T> {
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<T>>) -> Option<Self> {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            if c.len() != rows {
                return None;
            }
            data.extend(c);
        }
        Some(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        (0..self.cols).map(move |c| self.col(c))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T> std::ops::Index<(usize, usize)> for ColMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for ColMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }
}

/// Latent count matrix.
pub type CountMatrix = ColMatrix<u32>;

impl CountMatrix {
    pub fn col_sums(&self) -> Vec<u64> {
        self.columns()
            .map(|c| c.iter().map(|&x| x as u64).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.rows()];
        for c in self.columns() {
            for (o, &x) in out.iter_mut().zip(c) {
                *o += x as u64;
            }
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.as_slice().iter().map(|&x| x as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let m = ColMatrix::from_col_major(2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(m[(1, 0)], 2);
        assert_eq!(m[(0, 2)], 5);
        assert_eq!(m.col(1), &[3, 4]);
        assert_eq!(m.row_sums(), vec![9, 12]);
        assert_eq!(m.col_sums(), vec![3, 7, 11]);
    }

    #[test]
    fn select() {
        let m = ColMatrix::from_col_major(2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let c = m.select_cols(&[2, 0]);
        assert_eq!(c.as_slice(), &[5, 6, 1, 2]);
        let r = m.select_rows(&[1]);
        assert_eq!(r.as_slice(), &[2, 4, 6]);
    }
}
