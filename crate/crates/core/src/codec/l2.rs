use rayon::prelude::*;

use crate::error::Result;

use super::{Block, Encoder, Matrix};

const CG_REL_TOL: f64 = 1e-13;

/// Minimum-norm solution `Aᵀ(AAᵀ)⁻¹y` by conjugate gradients on `AAᵀ`.
fn min_norm(a: &Matrix, y: &[f64]) -> Vec<f64> {
    let m = a.rows();
    let mut z = vec![0.0; m];
    let mut res = y.to_vec();
    let mut p = res.clone();
    let mut rr: f64 = res.iter().map(|v| v * v).sum();
    let stop = CG_REL_TOL * CG_REL_TOL * rr;
    for _ in 0..(10 * m).max(50) {
        if rr <= stop || rr == 0.0 {
            break;
        }
        let ap = a.apply(&a.apply_t(&p));
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        z.iter_mut().zip(&p).for_each(|(zi, pi)| *zi += alpha * pi);
        res.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        let next: f64 = res.iter().map(|v| v * v).sum();
        let beta = next / rr;
        p.iter_mut().zip(&res).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = next;
    }
    a.apply_t(&z)
}

/// Bandwise pseudo-inverse decoder `θ̂ = Φ⁺y`; zero blocks and zeroed
/// columns decode to 0.
pub fn l2_decode(encoder: &Encoder, y: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    encoder.check_measurements(y)?;
    Ok(encoder
        .blocks
        .par_iter()
        .zip(y)
        .map(|(block, yb)| match block {
            Block::Identity(_) => yb.clone(),
            Block::Zero(n) => vec![0.0; *n],
            Block::Gaussian { n, matrix } => {
                let mut x = min_norm(matrix, yb);
                x.resize(*n, 0.0);
                x
            }
        })
        .collect())
}
