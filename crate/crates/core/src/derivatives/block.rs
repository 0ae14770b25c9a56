use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2};

/// A `block_rows × block_cols` grid of 2×2 blocks. Absent blocks are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix2 {
    block_rows: usize,
    block_cols: usize,
    blocks: BTreeMap<(usize, usize), Matrix2<f64>>,
}

impl BlockMatrix2 {
    pub fn zeros(block_rows: usize, block_cols: usize) -> Self {
        Self {
            block_rows,
            block_cols,
            blocks: BTreeMap::new(),
        }
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    /// Adds `value` into block `(row, col)`, storing it if absent.
    pub fn add_block(&mut self, row: usize, col: usize, value: Matrix2<f64>) {
        assert!(
            row < self.block_rows && col < self.block_cols,
            "block ({row}, {col}) outside {}x{} grid",
            self.block_rows,
            self.block_cols
        );
        *self.blocks.entry((row, col)).or_insert_with(Matrix2::zeros) += value;
    }

    /// The stored block, if any.
    pub fn get(&self, row: usize, col: usize) -> Option<&Matrix2<f64>> {
        self.blocks.get(&(row, col))
    }

    /// The block value, zero when absent.
    pub fn block(&self, row: usize, col: usize) -> Matrix2<f64> {
        self.get(row, col).copied().unwrap_or_else(Matrix2::zeros)
    }

    /// Stored blocks in row-major order.
    pub fn stored(&self) -> impl Iterator<Item = ((usize, usize), &Matrix2<f64>)> {
        self.blocks.iter().map(|(&idx, m)| (idx, m))
    }

    pub fn stored_count(&self) -> usize {
        self.blocks.len()
    }

    /// Number of stored blocks in block row `row`.
    pub fn stored_in_row(&self, row: usize) -> usize {
        self.blocks
            .range((row, 0)..(row + 1, 0))
            .count()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(2 * self.block_rows, 2 * self.block_cols);
        for (&(r, c), m) in &self.blocks {
            dense.fixed_view_mut::<2, 2>(2 * r, 2 * c).copy_from(m);
        }
        dense
    }

    /// Sparse matrix–vector product.
    pub fn mul_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), 2 * self.block_cols, "vector length mismatch");
        let mut out = DVector::zeros(2 * self.block_rows);
        for (&(r, c), m) in &self.blocks {
            let seg = m * v.fixed_rows::<2>(2 * c);
            let mut dst = out.fixed_rows_mut::<2>(2 * r);
            dst += seg;
        }
        out
    }

    /// True when block `(i, j)` equals the transpose of block `(j, i)` to
    /// within `tol` entrywise.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.block_rows == self.block_cols
            && self.blocks.iter().all(|(&(r, c), m)| {
                let other = self.block(c, r).transpose();
                (m - other).amax() <= tol
            })
    }
}

impl std::ops::Add for &BlockMatrix2 {
    type Output = BlockMatrix2;

    fn add(self, rhs: &BlockMatrix2) -> BlockMatrix2 {
        assert_eq!(
            (self.block_rows, self.block_cols),
            (rhs.block_rows, rhs.block_cols),
            "shape mismatch"
        );
        let mut out = self.clone();
        for (&(r, c), m) in &rhs.blocks {
            out.add_block(r, c, *m);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_layout_and_product() {
        let mut m = BlockMatrix2::zeros(2, 3);
        m.add_block(0, 2, Matrix2::new(1.0, 2.0, 3.0, 4.0));
        m.add_block(1, 0, Matrix2::identity());
        m.add_block(1, 0, Matrix2::identity());
        let dense = m.to_dense();
        assert_eq!(dense.shape(), (4, 6));
        assert_eq!(dense[(0, 4)], 1.0);
        assert_eq!(dense[(1, 5)], 4.0);
        assert_eq!(dense[(3, 1)], 2.0);
        assert_eq!(m.stored_in_row(1), 1);
        assert_eq!(m.block(0, 0), Matrix2::zeros());

        let v = DVector::from_iterator(6, (0..6).map(|i| i as f64));
        assert_eq!(m.mul_vector(&v), &dense * &v);
    }
}
