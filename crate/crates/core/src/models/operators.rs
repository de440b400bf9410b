//! Linear transforms applied to flattened row-major patches.

use alloc::vec::Vec;

use crate::linalg::SparseOp;

/// Radius of the CSAD neighbourhood (5×5).
pub const CSAD_RADIUS: usize = 2;

/// Stacked horizontal then vertical forward differences inside a
/// `p × p` patch: `2p(p-1)` rows.
pub fn gradient_operator(p: usize) -> SparseOp {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(2 * p * p.saturating_sub(1));
    for y in 0..p {
        for x in 0..p.saturating_sub(1) {
            rows.push(alloc::vec![(y * p + x + 1, 1.0), (y * p + x, -1.0)]);
        }
    }
    for y in 0..p.saturating_sub(1) {
        for x in 0..p {
            rows.push(alloc::vec![((y + 1) * p + x, 1.0), (y * p + x, -1.0)]);
        }
    }
    SparseOp::from_rows(p * p, rows)
}

/// One row `d(q) - d(c)` for every centre `c` and every other pixel `q` of
/// the 5×5 neighbourhood of `c` that lies inside the patch.
pub fn centralized_operator(p: usize) -> SparseOp {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for cy in 0..p {
        for cx in 0..p {
            for qy in cy.saturating_sub(CSAD_RADIUS)..(cy + CSAD_RADIUS + 1).min(p) {
                for qx in cx.saturating_sub(CSAD_RADIUS)..(cx + CSAD_RADIUS + 1).min(p) {
                    if qx == cx && qy == cy {
                        continue;
                    }
                    rows.push(alloc::vec![(qy * p + qx, 1.0), (cy * p + cx, -1.0)]);
                }
            }
        }
    }
    SparseOp::from_rows(p * p, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let g = gradient_operator(8);
        assert_eq!((g.nrows(), g.ncols()), (112, 64));
        let g = gradient_operator(2);
        assert_eq!(g.nrows(), 4);
        assert_eq!(centralized_operator(2).nrows(), 12);
        // Interior pixels of a large patch see all 24 neighbours.
        let c = centralized_operator(5);
        let full: usize = (0..5)
            .flat_map(|y: usize| (0..5usize).map(move |x| (x, y)))
            .map(|(x, y)| {
                let nx = (x + 3usize).min(5) - x.saturating_sub(2);
                let ny = (y + 3usize).min(5) - y.saturating_sub(2);
                nx * ny - 1
            })
            .sum();
        assert_eq!(c.nrows(), full);
    }

    #[test]
    fn constants_are_in_the_null_space() {
        let ones = [1.0; 16];
        let mut out = alloc::vec![0.0; 48];
        gradient_operator(4).apply(&ones, &mut out[..24]);
        assert!(out[..24].iter().all(|&v| v == 0.0));
        let c = centralized_operator(4);
        let mut out = alloc::vec![0.0; c.nrows()];
        c.apply(&ones, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }
}
