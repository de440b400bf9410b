#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// `log ∫ exp(f(x)) dx` by the midpoint rule on a box aligned with the
/// eigenvectors of `shape`, with half widths `half[i]` along eigenvector `i`.
pub fn log_integral(f: impl Fn(&[f64]) -> f64, shape: &DMatrix<f64>, half: impl Fn(f64, &[f64]) -> f64, n: usize) -> f64 {
    let dim = shape.nrows();
    let eig = SymmetricEigen::new(shape.clone());
    let axes: Vec<Vec<f64>> = (0..dim).map(|i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    let widths: Vec<f64> = (0..dim).map(|i| half(eig.eigenvalues[i], &axes[i])).collect();
    let steps: Vec<f64> = widths.iter().map(|w| 2.0 * w / n as f64).collect();
    let log_cell: f64 = steps.iter().map(|s| s.ln()).sum();
    let total = n.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut vals = Vec::with_capacity(total);
    for idx in 0..total {
        x.iter_mut().for_each(|v| *v = 0.0);
        let mut rem = idx;
        for a in 0..dim {
            let t = -widths[a] + (rem % n) as f64 * steps[a] + 0.5 * steps[a];
            rem /= n;
            for (xi, e) in x.iter_mut().zip(&axes[a]) {
                *xi += t * e;
            }
        }
        vals.push(f(&x));
    }
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + log_cell
}

/// `∫ exp(-‖B y‖₁ - ε‖y‖₁) dy` over R⁴ for rows `B` that annihilate
/// constant vectors. Substituting `y = z₀·1 + (0, z₁, z₂, z₃)` (unit
/// Jacobian) leaves `B` depending on `z₁..z₃` only, so the `z₀` integral of the
/// piecewise-linear `ε Σ|z₀ + z_i|` is done exactly and the outer three
/// coordinates use a midpoint rule with `n` cells per axis (`n` even, so the
/// kinks at `z_i = 0` fall on cell faces), refined once by Richardson.
pub fn l1_integral_4(b: &DMatrix<f64>, eps: f64, level: f64, n: usize) -> f64 {
    let coarse = l1_midpoint_4(b, eps, level, n / 2);
    let fine = l1_midpoint_4(b, eps, level, n);
    (4.0 * fine - coarse) / 3.0
}

fn l1_midpoint_4(b: &DMatrix<f64>, eps: f64, level: f64, n: usize) -> f64 {
    assert_eq!(b.ncols(), 4);
    assert!(n % 2 == 0);
    let rates: Vec<f64> = (1..4).map(|i| b.column(i).iter().map(|v| v.abs()).sum::<f64>() + eps).collect();
    let half: Vec<f64> = rates.iter().map(|r| level / r).collect();
    let h: Vec<f64> = half.iter().map(|l| 2.0 * l / n as f64).collect();
    let rows: Vec<[f64; 3]> = b.row_iter().map(|r| [r[1], r[2], r[3]]).collect();
    let mut total = 0.0;
    for i in 0..n {
        let z1 = -half[0] + (i as f64 + 0.5) * h[0];
        for j in 0..n {
            let z2 = -half[1] + (j as f64 + 0.5) * h[1];
            for k in 0..n {
                let z3 = -half[2] + (k as f64 + 0.5) * h[2];
                let t: f64 = rows.iter().map(|r| (r[0] * z1 + r[1] * z2 + r[2] * z3).abs()).sum();
                total += (-t).exp() * inner_exact(eps, [0.0, -z1, -z2, -z3]);
            }
        }
    }
    total * h.iter().product::<f64>()
}

/// `∫ exp(-ε Σ_j |x - p_j|) dx` over the real line.
fn inner_exact(eps: f64, mut p: [f64; 4]) -> f64 {
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let f = |x: f64| eps * p.iter().map(|q| (x - q).abs()).sum::<f64>();
    let fv: Vec<f64> = p.iter().map(|&x| f(x)).collect();
    let m = p.len();
    let mut s = (-fv[0]).exp() / (m as f64 * eps) + (-fv[m - 1]).exp() / (m as f64 * eps);
    for i in 0..m - 1 {
        let slope = eps * (2.0 * (i + 1) as f64 - m as f64);
        s += if slope == 0.0 {
            (p[i + 1] - p[i]) * (-fv[i]).exp()
        } else {
            ((-fv[i]).exp() - (-fv[i + 1]).exp()) / slope
        };
    }
    s
}
