//! The abstract block matrix that gets signed, and crop rectangles over it.
//!
//! Indices are 1-based: `i` is the row in `1..=height`, `j` the column in
//! `1..=width`. Cells are stored row-major.

use crate::error::SchemeError;

/// Inclusive, 1-based rectangle of signature cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub i1: u32,
    pub i2: u32,
    pub j1: u32,
    pub j2: u32,
}

impl CropRect {
    pub fn new(i1: u32, i2: u32, j1: u32, j2: u32) -> Self {
        CropRect { i1, i2, j1, j2 }
    }

    /// The rectangle covering a whole `width` x `height` grid.
    pub fn whole(width: u32, height: u32) -> Self {
        CropRect::new(1, height, 1, width)
    }

    /// Top-left quarter: half the rows and half the columns, at least one of each.
    pub fn top_left_quarter(width: u32, height: u32) -> Self {
        CropRect::new(1, (height / 2).max(1), 1, (width / 2).max(1))
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        1 <= self.i1
            && self.i1 <= self.i2
            && self.i2 <= height
            && 1 <= self.j1
            && self.j1 <= self.j2
            && self.j2 <= width
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<(), SchemeError> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(SchemeError::RectOutOfRange {
                i1: self.i1,
                i2: self.i2,
                j1: self.j1,
                j2: self.j2,
                width,
                height,
            })
        }
    }

    pub fn rows(&self) -> u32 {
        self.i2 + 1 - self.i1
    }

    pub fn cols(&self) -> u32 {
        self.j2 + 1 - self.j1
    }

    pub fn cell_count(&self) -> usize {
        self.rows() as usize * self.cols() as usize
    }

    /// Covered `(i, j)` pairs in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32)> + Clone {
        let (j1, j2) = (self.j1, self.j2);
        (self.i1..=self.i2).flat_map(move |i| (j1..=j2).map(move |j| (i, j)))
    }

    pub fn to_bytes(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        for (k, v) in [self.i1, self.i2, self.j1, self.j2].into_iter().enumerate() {
            out[4 * k..4 * k + 4].copy_from_slice(&v.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8; 16]) -> Self {
        let f = |k: usize| u32::from_be_bytes(b[4 * k..4 * k + 4].try_into().unwrap());
        CropRect::new(f(0), f(1), f(2), f(3))
    }
}

impl std::fmt::Display for CropRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.i1, self.i2, self.j1, self.j2)
    }
}

impl std::str::FromStr for CropRect {
    type Err = String;

    /// Parses `i1,i2,j1,j2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [i1, i2, j1, j2] => Ok(CropRect::new(i1, i2, j1, j2)),
            _ => Err(format!("expected i1,i2,j1,j2, got {s:?}")),
        }
    }
}

/// A rectangular window of signature cells with their serialized block data.
///
/// A grid produced from a whole image has origin `(1, 1)`. A grid produced
/// from a cropped image is re-based with [`BlockGrid::with_origin`] so that
/// cells keep the indices they had in the full image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    width: u32,
    height: u32,
    origin_row: u32,
    origin_col: u32,
    cells: Vec<Vec<u8>>,
    context_digest: [u8; 32],
}

impl BlockGrid {
    pub fn new(
        width: u32,
        height: u32,
        cells: Vec<Vec<u8>>,
        context_digest: [u8; 32],
    ) -> Result<Self, SchemeError> {
        if width == 0 || height == 0 {
            return Err(SchemeError::EmptyGrid);
        }
        if cells.len() != width as usize * height as usize {
            return Err(SchemeError::Malformed(
                "cell count does not match grid size",
            ));
        }
        Ok(BlockGrid {
            width,
            height,
            origin_row: 1,
            origin_col: 1,
            cells,
            context_digest,
        })
    }

    /// Builds a grid by calling `f(i, j)` for every cell in row-major order.
    pub fn from_fn(
        width: u32,
        height: u32,
        context_digest: [u8; 32],
        mut f: impl FnMut(u32, u32) -> Vec<u8>,
    ) -> Result<Self, SchemeError> {
        let cells = CropRect::whole(width, height)
            .cells()
            .map(|(i, j)| f(i, j))
            .collect();
        BlockGrid::new(width, height, cells, context_digest)
    }

    pub fn with_origin(mut self, row: u32, col: u32) -> Self {
        self.origin_row = row;
        self.origin_col = col;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn origin(&self) -> (u32, u32) {
        (self.origin_row, self.origin_col)
    }

    pub fn is_full(&self) -> bool {
        self.origin() == (1, 1)
    }

    /// The cells this grid covers, in original indices.
    pub fn covered_rect(&self) -> CropRect {
        CropRect::new(
            self.origin_row,
            self.origin_row + self.height - 1,
            self.origin_col,
            self.origin_col + self.width - 1,
        )
    }

    pub fn context_digest(&self) -> &[u8; 32] {
        &self.context_digest
    }

    fn index(&self, i: u32, j: u32) -> Option<usize> {
        let r = i.checked_sub(self.origin_row)?;
        let c = j.checked_sub(self.origin_col)?;
        (r < self.height && c < self.width).then(|| r as usize * self.width as usize + c as usize)
    }

    /// Block data of cell `(i, j)` in original indices.
    pub fn block(&self, i: u32, j: u32) -> Option<&[u8]> {
        self.index(i, j).map(|k| self.cells[k].as_slice())
    }

    pub fn block_mut(&mut self, i: u32, j: u32) -> Option<&mut Vec<u8>> {
        self.index(i, j).map(move |k| &mut self.cells[k])
    }

    /// Copies out the cells of `rect` (original indices) as a re-based grid.
    pub fn sub_grid(&self, rect: &CropRect) -> Result<BlockGrid, SchemeError> {
        let cover = self.covered_rect();
        let inside = rect.i1 >= cover.i1
            && rect.i2 <= cover.i2
            && rect.j1 >= cover.j1
            && rect.j2 <= cover.j2;
        if !inside || !rect.fits(u32::MAX, u32::MAX) {
            return Err(SchemeError::RectOutOfRange {
                i1: rect.i1,
                i2: rect.i2,
                j1: rect.j1,
                j2: rect.j2,
                width: self.width,
                height: self.height,
            });
        }
        let cells = rect
            .cells()
            .map(|(i, j)| self.block(i, j).unwrap().to_vec())
            .collect();
        Ok(
            BlockGrid::new(rect.cols(), rect.rows(), cells, self.context_digest)?
                .with_origin(rect.i1, rect.j1),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_cells_row_major() {
        let r = CropRect::new(2, 3, 1, 2);
        let cells: Vec<_> = r.cells().collect();
        assert_eq!(cells, vec![(2, 1), (2, 2), (3, 1), (3, 2)]);
        assert_eq!(r.cell_count(), 4);
    }

    #[test]
    fn rect_bounds() {
        assert!(CropRect::whole(3, 2).fits(3, 2));
        assert!(!CropRect::new(0, 1, 1, 1).fits(3, 3));
        assert!(!CropRect::new(2, 1, 1, 1).fits(3, 3));
        assert!(!CropRect::new(1, 4, 1, 1).fits(3, 3));
        assert!(!CropRect::new(1, 1, 1, 4).fits(3, 3));
        assert!(CropRect::new(1, 1, 1, 4).check_within(3, 3).is_err());
    }

    #[test]
    fn rect_parse() {
        assert_eq!(
            "1,2,3,4".parse::<CropRect>().unwrap(),
            CropRect::new(1, 2, 3, 4)
        );
        assert!("1,2,3".parse::<CropRect>().is_err());
        assert!("a,2,3,4".parse::<CropRect>().is_err());
        let r = CropRect::new(5, 6, 7, 8);
        assert_eq!(CropRect::from_bytes(&r.to_bytes()), r);
    }

    #[test]
    fn quarter_of_odd_grid() {
        assert_eq!(CropRect::top_left_quarter(5, 1), CropRect::new(1, 1, 1, 2));
    }

    #[test]
    fn sub_grid_keeps_indices() {
        let g = BlockGrid::from_fn(4, 3, [0; 32], |i, j| vec![i as u8, j as u8]).unwrap();
        let rect = CropRect::new(2, 3, 2, 4);
        let sub = g.sub_grid(&rect).unwrap();
        assert_eq!(sub.covered_rect(), rect);
        assert_eq!(sub.block(3, 4), Some(&[3u8, 4][..]));
        assert_eq!(sub.block(1, 1), None);
        assert!(g.sub_grid(&CropRect::new(1, 4, 1, 1)).is_err());
        assert!(sub.sub_grid(&CropRect::new(1, 2, 2, 2)).is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(
            BlockGrid::new(0, 1, vec![], [0; 32]),
            Err(SchemeError::EmptyGrid)
        );
        assert!(BlockGrid::new(1, 2, vec![vec![]], [0; 32]).is_err());
    }
}
