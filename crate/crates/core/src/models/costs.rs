//! Census and centralized-SAD matching costs on square neighbourhoods.

use crate::error::{bail, Result};
use crate::math::sign;

fn check(p1: &[f64], p2: &[f64], size: usize) -> Result<()> {
    if p1.len() != size * size || p2.len() != size * size {
        bail!(
            DimensionMismatch,
            "neighbourhoods have {} and {} values, expected {}",
            p1.len(),
            p2.len(),
            size * size
        );
    }
    Ok(())
}

/// Number of pixels `q` whose order relation to the centre pixel differs
/// between the two neighbourhoods. `size` must be odd.
pub fn census_cost(p1: &[f64], p2: &[f64], size: usize) -> Result<usize> {
    check(p1, p2, size)?;
    if size % 2 == 0 {
        bail!(InvalidArgument, "census neighbourhood needs an odd size, got {size}");
    }
    let c = (size / 2) * size + size / 2;
    Ok((0..size * size)
        .filter(|&q| q != c && sign(p1[q] - p1[c]) != sign(p2[q] - p2[c]))
        .count())
}

/// `Σ_p Σ_q |(p1(q) - p1(p)) - (p2(q) - p2(p))|` with `q` ranging over the
/// 5×5 neighbourhood of `p` clipped to the patch.
pub fn csad_cost(p1: &[f64], p2: &[f64], size: usize) -> Result<f64> {
    check(p1, p2, size)?;
    let r = super::operators::CSAD_RADIUS;
    let mut total = 0.0;
    for py in 0..size {
        for px in 0..size {
            let pi = py * size + px;
            for qy in py.saturating_sub(r)..(py + r + 1).min(size) {
                for qx in px.saturating_sub(r)..(px + r + 1).min(size) {
                    let qi = qy * size + qx;
                    total += ((p1[qi] - p1[pi]) - (p2[qi] - p2[pi])).abs();
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn hood() -> Vec<f64> {
        // Distinct values, none equal to the centre.
        (0..25).map(|i| ((i * 7) % 25) as f64 / 25.0 + if i == 12 { 0.013 } else { 0.0 }).collect()
    }

    #[test]
    fn census_examples() {
        let a = hood();
        assert_eq!(census_cost(&a, &a, 5).unwrap(), 0);
        let shifted: Vec<f64> = a.iter().map(|v| v + 0.3).collect();
        assert_eq!(census_cost(&a, &shifted, 5).unwrap(), 0);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_eq!(census_cost(&a, &neg, 5).unwrap(), 24);
        assert!(census_cost(&a, &a[..24], 5).is_err());
    }

    #[test]
    fn csad_examples() {
        let a = hood();
        assert_eq!(csad_cost(&a, &a, 5).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + 0.25).collect();
        assert!(csad_cost(&a, &shifted, 5).unwrap() < 1e-12);

        // Constant p1, one non-centre pixel of p2 offset by δ: each ordered
        // pair involving that pixel contributes |δ|, found by enumeration.
        let delta = 0.2;
        let p1 = [0.5; 25];
        let mut p2 = [0.5; 25];
        let (tx, ty) = (0usize, 1usize);
        p2[ty * 5 + tx] += delta;
        let mut pairs = 0;
        for py in 0..5i32 {
            for px in 0..5i32 {
                for qy in 0..5i32 {
                    for qx in 0..5i32 {
                        if (qx - px).abs() > 2 || (qy - py).abs() > 2 {
                            continue;
                        }
                        let p_is = (px as usize, py as usize) == (tx, ty);
                        let q_is = (qx as usize, qy as usize) == (tx, ty);
                        if p_is != q_is {
                            pairs += 1;
                        }
                    }
                }
            }
        }
        let c = csad_cost(&p1, &p2, 5).unwrap();
        assert!((c - pairs as f64 * delta).abs() < 1e-12);
        // Every unordered pair appears twice.
        assert_eq!(pairs % 2, 0);
    }
}
