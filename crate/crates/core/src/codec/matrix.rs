use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::stream_rng;

/// Dense row-major matrix stored in single precision; products accumulate
/// in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

const CHUNK_ROWS: usize = 64;

impl Matrix {
    /// `rows × cols` with i.i.d. `N(0, 1/rows)` entries drawn from `seed`.
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let scale = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * cols).map(|_| (scale * rng.sample::<f64, _>(StandardNormal)) as f32).collect();
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data does not match its shape");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c] as f64
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let cols = self.cols.max(1);
        let blocks: Vec<[f64; 4]> = self
            .data
            .par_chunks(4 * cols)
            .map(|rows| {
                let mut d = [0.0; 4];
                dot_rows(rows, x, &mut d);
                d
            })
            .collect();
        blocks.into_iter().flatten().take(self.rows).collect()
    }

    /// Updates `r ← y − A x + c r` and returns `Aᵀ r` of the new residual,
    /// reading each row of `A` once.
    pub fn residual_and_back(&self, x: &[f64], y: &[f64], c: f64, r: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        let cols = self.cols;
        let partials: Vec<Vec<f64>> = self
            .data
            .par_chunks((CHUNK_ROWS * cols).max(1))
            .zip(r.par_chunks_mut(CHUNK_ROWS))
            .zip(y.par_chunks(CHUNK_ROWS))
            .map(|((block, rs), ys)| {
                let mut acc = vec![0.0; cols];
                for ((rows, ri), yi) in block.chunks(4 * cols).zip(rs.chunks_mut(4)).zip(ys.chunks(4)) {
                    let mut d = [0.0; 4];
                    dot_rows(rows, x, &mut d);
                    for k in 0..ri.len() {
                        ri[k] = yi[k] - d[k] + c * ri[k];
                    }
                    axpy_rows(&mut acc, ri, rows);
                }
                acc
            })
            .collect();
        sum_in_order(partials, cols)
    }

    /// `Aᵀ r`. Partial sums over fixed row chunks are combined in order, so
    /// the result does not depend on the thread schedule.
    pub fn apply_t(&self, r: &[f64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.rows);
        let cols = self.cols;
        let partials: Vec<Vec<f64>> = self
            .data
            .par_chunks((CHUNK_ROWS * cols).max(1))
            .zip(r.par_chunks(CHUNK_ROWS))
            .map(|(block, rs)| {
                let mut acc = vec![0.0; cols];
                for (rows, ri) in block.chunks(4 * cols).zip(rs.chunks(4)) {
                    axpy_rows(&mut acc, ri, rows);
                }
                acc
            })
            .collect();
        sum_in_order(partials, cols)
    }
}

/// Row dot product with eight independent accumulators so it vectorizes.
#[inline(always)]
fn dot_generic(row: &[f32], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (a, b) = (row.chunks_exact(8), x.chunks_exact(8));
    let tail: f64 = a.remainder().iter().zip(b.remainder()).map(|(&p, &q)| p as f64 * q).sum();
    for (p, q) in a.zip(b) {
        for k in 0..8 {
            acc[k] += p[k] as f64 * q[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Dot products of up to four consecutive rows with `x`, each summed as in
/// [`dot_generic`].
#[inline(always)]
fn dot_rows_generic(rows: &[f32], x: &[f64], out: &mut [f64; 4]) {
    let cols = x.len();
    if rows.len() != 4 * cols {
        for (o, row) in out.iter_mut().zip(rows.chunks(cols)) {
            *o = dot_generic(row, x);
        }
        return;
    }
    let mut acc = [[0.0f64; 8]; 4];
    let full = cols / 8 * 8;
    for j in (0..full).step_by(8) {
        let xs = &x[j..j + 8];
        for (k, a) in acc.iter_mut().enumerate() {
            let r = &rows[k * cols + j..k * cols + j + 8];
            for l in 0..8 {
                a[l] += r[l] as f64 * xs[l];
            }
        }
    }
    for (k, o) in out.iter_mut().enumerate() {
        let tail: f64 = rows[k * cols + full..(k + 1) * cols].iter().zip(&x[full..]).map(|(&p, &q)| p as f64 * q).sum();
        *o = acc[k].iter().sum::<f64>() + tail;
    }
}

/// `acc += Σₖ a[k] · rows[k]` for up to four consecutive rows.
#[inline(always)]
fn axpy_generic(acc: &mut [f64], a: &[f64], rows: &[f32]) {
    let cols = acc.len();
    if let [a0, a1, a2, a3] = *a {
        let (r0, rest) = rows.split_at(cols);
        let (r1, rest) = rest.split_at(cols);
        let (r2, r3) = rest.split_at(cols);
        for j in 0..cols {
            acc[j] += (a0 * r0[j] as f64 + a1 * r1[j] as f64) + (a2 * r2[j] as f64 + a3 * r3[j] as f64);
        }
    } else {
        for (&ak, row) in a.iter().zip(rows.chunks(cols)) {
            for (s, &v) in acc.iter_mut().zip(row) {
                *s += ak * v as f64;
            }
        }
    }
}

// AVX2 builds of the kernels, chosen at run time. FMA stays off so both
// builds round identically.
#[cfg(target_arch = "x86_64")]
mod avx2 {
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn dot_rows(rows: &[f32], x: &[f64], out: &mut [f64; 4]) {
        super::dot_rows_generic(rows, x, out)
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn axpy_rows(acc: &mut [f64], a: &[f64], rows: &[f32]) {
        super::axpy_generic(acc, a, rows)
    }
}

#[cfg(target_arch = "x86_64")]
fn has_avx2() -> bool {
    std::arch::is_x86_feature_detected!("avx2")
}

fn dot_rows(rows: &[f32], x: &[f64], out: &mut [f64; 4]) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::dot_rows(rows, x, out) };
    }
    dot_rows_generic(rows, x, out)
}

fn axpy_rows(acc: &mut [f64], a: &[f64], rows: &[f32]) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::axpy_rows(acc, a, rows) };
    }
    axpy_generic(acc, a, rows)
}

fn sum_in_order(partials: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for p in partials {
        out.iter_mut().zip(&p).for_each(|(x, y)| *x += y);
    }
    out
}
