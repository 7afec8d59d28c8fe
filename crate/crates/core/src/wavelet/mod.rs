//! Orthonormal 2-D Daubechies-2 transform with periodic boundaries, band
//! grouping, quad-tree indexing, per-band statistics and PGM images.

mod estimate;
mod pgm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use estimate::{estimate_ggd, estimate_gmd, estimate_gmd_trace, EmFit, EM_MAX_ITER, EM_TOL, EM_VARIANCE_FLOOR, MIN_SAMPLES};
pub use pgm::{read_pgm, write_pgm, Image};

/// Daubechies-2 (four-tap) lowpass analysis filter.
pub fn db2_lowpass() -> [f64; 4] {
    let s3 = 3f64.sqrt();
    let k = 4.0 * std::f64::consts::SQRT_2;
    [(1.0 + s3) / k, (3.0 + s3) / k, (3.0 - s3) / k, (1.0 - s3) / k]
}

fn db2_highpass() -> [f64; 4] {
    let h = db2_lowpass();
    [h[3], -h[2], h[1], -h[0]]
}

/// One periodic analysis step: `x` (even length) → `[approx | detail]`.
fn analyze(x: &[f64], out: &mut [f64]) {
    let (h, g) = (db2_lowpass(), db2_highpass());
    let n = x.len();
    let half = n / 2;
    for i in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for k in 0..4 {
            let v = x[(2 * i + k) % n];
            a += h[k] * v;
            d += g[k] * v;
        }
        out[i] = a;
        out[half + i] = d;
    }
}

/// Inverse of [`analyze`].
fn synthesize(c: &[f64], out: &mut [f64]) {
    let (h, g) = (db2_lowpass(), db2_highpass());
    let n = c.len();
    let half = n / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..half {
        let (a, d) = (c[i], c[half + i]);
        for k in 0..4 {
            out[(2 * i + k) % n] += h[k] * a + g[k] * d;
        }
    }
}

/// Applies `step` to every row, then every column, of the top-left
/// `h × w` corner of a row-major buffer with row stride `stride`.
fn separable(buf: &mut [f64], stride: usize, h: usize, w: usize, step: fn(&[f64], &mut [f64]), rows_first: bool) {
    let mut line = vec![0.0; h.max(w)];
    let mut out = vec![0.0; h.max(w)];
    let do_rows = |buf: &mut [f64], line: &mut Vec<f64>, out: &mut Vec<f64>| {
        for r in 0..h {
            line[..w].copy_from_slice(&buf[r * stride..r * stride + w]);
            step(&line[..w], &mut out[..w]);
            buf[r * stride..r * stride + w].copy_from_slice(&out[..w]);
        }
    };
    let do_cols = |buf: &mut [f64], line: &mut Vec<f64>, out: &mut Vec<f64>| {
        for c in 0..w {
            for r in 0..h {
                line[r] = buf[r * stride + c];
            }
            step(&line[..h], &mut out[..h]);
            for r in 0..h {
                buf[r * stride + c] = out[r];
            }
        }
    };
    if rows_first {
        do_rows(buf, &mut line, &mut out);
        do_cols(buf, &mut line, &mut out);
    } else {
        do_cols(buf, &mut line, &mut out);
        do_rows(buf, &mut line, &mut out);
    }
}

/// Wavelet coefficients of an image.
///
/// `details[j - 1]` holds scale `j` (1 = coarsest) as three row-major
/// blocks: horizontal-highpass (`LH`), vertical-highpass (`HL`) and
/// diagonal (`HH`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletPyramid {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub scaling: Vec<f64>,
    pub details: Vec<[Vec<f64>; 3]>,
}

fn check_geometry(width: usize, height: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::invalid("at least one decomposition level is required"));
    }
    let unit = 1usize.checked_shl(levels as u32).filter(|u| *u > 0).ok_or_else(|| Error::invalid("too many levels"))?;
    if width == 0 || height == 0 || !width.is_multiple_of(unit) || !height.is_multiple_of(unit) {
        return Err(Error::Dimension(format!("{width}×{height} image is not divisible by 2^{levels}")));
    }
    Ok(())
}

impl WaveletPyramid {
    /// `(rows, cols)` of each block at scale `j` (1 = coarsest).
    pub fn block_shape(&self, scale: usize) -> (usize, usize) {
        let shift = self.levels - scale + 1;
        (self.height >> shift, self.width >> shift)
    }

    pub fn scaling_shape(&self) -> (usize, usize) {
        (self.height >> self.levels, self.width >> self.levels)
    }

    /// All-zero pyramid of the given geometry.
    pub fn zeros(width: usize, height: usize, levels: usize) -> Result<Self> {
        check_geometry(width, height, levels)?;
        let mut p = WaveletPyramid { width, height, levels, scaling: Vec::new(), details: Vec::new() };
        let (sh, sw) = p.scaling_shape();
        p.scaling = vec![0.0; sh * sw];
        for j in 1..=levels {
            let (h, w) = p.block_shape(j);
            p.details.push([vec![0.0; h * w], vec![0.0; h * w], vec![0.0; h * w]]);
        }
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        check_geometry(self.width, self.height, self.levels)?;
        let (sh, sw) = self.scaling_shape();
        let ok = self.scaling.len() == sh * sw
            && self.details.len() == self.levels
            && (1..=self.levels).all(|j| {
                let (h, w) = self.block_shape(j);
                self.details[j - 1].iter().all(|b| b.len() == h * w)
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("pyramid blocks do not match its geometry".into()))
        }
    }

    /// Sizes of the grouped bands: scaling first, then one per scale.
    pub fn band_sizes(&self) -> Vec<usize> {
        band_sizes(self.width, self.height, self.levels)
    }

    pub fn energy(&self) -> f64 {
        let sq = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
        sq(&self.scaling) + self.details.iter().flat_map(|d| d.iter()).map(sq).sum::<f64>()
    }
}

/// Band sizes `[n₀, n₁, …, n_L]` of a `levels`-deep decomposition.
pub fn band_sizes(width: usize, height: usize, levels: usize) -> Vec<usize> {
    let mut sizes = vec![(width >> levels) * (height >> levels)];
    for j in 1..=levels {
        let shift = levels - j + 1;
        sizes.push(3 * (width >> shift) * (height >> shift));
    }
    sizes
}

/// Forward transform of a row-major `height × width` image.
pub fn dwt2(image: &[f64], width: usize, height: usize, levels: usize) -> Result<WaveletPyramid> {
    check_geometry(width, height, levels)?;
    if image.len() != width * height {
        return Err(Error::Dimension(format!("{} pixels for a {width}×{height} image", image.len())));
    }
    let mut buf = image.to_vec();
    for l in 0..levels {
        separable(&mut buf, width, height >> l, width >> l, analyze, true);
    }
    let mut p = WaveletPyramid::zeros(width, height, levels)?;
    let (sh, sw) = p.scaling_shape();
    extract(&buf, width, (0, 0), (sh, sw), &mut p.scaling);
    for j in 1..=levels {
        let (h, w) = p.block_shape(j);
        let [lh, hl, hh] = &mut p.details[j - 1];
        extract(&buf, width, (0, w), (h, w), lh);
        extract(&buf, width, (h, 0), (h, w), hl);
        extract(&buf, width, (h, w), (h, w), hh);
    }
    Ok(p)
}

/// Inverse transform; returns the row-major image.
pub fn idwt2(p: &WaveletPyramid) -> Result<Vec<f64>> {
    p.validate()?;
    let width = p.width;
    let mut buf = vec![0.0; p.width * p.height];
    let (sh, sw) = p.scaling_shape();
    insert(&mut buf, width, (0, 0), (sh, sw), &p.scaling);
    for j in 1..=p.levels {
        let (h, w) = p.block_shape(j);
        let [lh, hl, hh] = &p.details[j - 1];
        insert(&mut buf, width, (0, w), (h, w), lh);
        insert(&mut buf, width, (h, 0), (h, w), hl);
        insert(&mut buf, width, (h, w), (h, w), hh);
    }
    for l in (0..p.levels).rev() {
        separable(&mut buf, width, p.height >> l, p.width >> l, synthesize, false);
    }
    Ok(buf)
}

fn extract(buf: &[f64], stride: usize, (r0, c0): (usize, usize), (h, w): (usize, usize), block: &mut [f64]) {
    for r in 0..h {
        let row = (r0 + r) * stride + c0;
        block[r * w..(r + 1) * w].copy_from_slice(&buf[row..row + w]);
    }
}

fn insert(buf: &mut [f64], stride: usize, (r0, c0): (usize, usize), (h, w): (usize, usize), block: &[f64]) {
    for r in 0..h {
        let row = (r0 + r) * stride + c0;
        buf[row..row + w].copy_from_slice(&block[r * w..(r + 1) * w]);
    }
}

/// Groups coefficients into bands: scaling, then per scale (coarsest first)
/// the `LH`, `HL`, `HH` blocks concatenated.
pub fn band_vectorize(p: &WaveletPyramid) -> Vec<Vec<f64>> {
    let mut bands = vec![p.scaling.clone()];
    for d in &p.details {
        bands.push(d.iter().flatten().copied().collect());
    }
    bands
}

/// Inverse of [`band_vectorize`].
pub fn band_devectorize(bands: &[Vec<f64>], width: usize, height: usize, levels: usize) -> Result<WaveletPyramid> {
    let sizes = band_sizes(width, height, levels);
    check_geometry(width, height, levels)?;
    if bands.len() != sizes.len() || bands.iter().zip(&sizes).any(|(b, &n)| b.len() != n) {
        return Err(Error::Dimension(format!("band vectors do not match sizes {sizes:?}")));
    }
    let mut p = WaveletPyramid::zeros(width, height, levels)?;
    p.scaling.copy_from_slice(&bands[0]);
    for j in 1..=levels {
        let n = sizes[j] / 3;
        for o in 0..3 {
            p.details[j - 1][o].copy_from_slice(&bands[j][o * n..(o + 1) * n]);
        }
    }
    Ok(p)
}

/// Parent/child links between detail coefficients of adjacent scales.
///
/// Nodes are numbered in band-vector order over bands `1..=L`
/// (coarsest first), so every parent precedes its children.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadTree {
    /// First node of each detail band; `offsets[L]` is the node count.
    pub offsets: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
}

impl QuadTree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Detail band (1-based scale) of a node.
    pub fn scale(&self, node: usize) -> usize {
        self.offsets.partition_point(|&o| o <= node)
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.parent[i].is_none())
    }
}

/// Quad-tree over the detail coefficients of a `levels`-deep pyramid.
pub fn quad_tree_index(width: usize, height: usize, levels: usize) -> Result<QuadTree> {
    check_geometry(width, height, levels)?;
    if levels < 2 {
        return Err(Error::invalid("a quad-tree needs at least two levels"));
    }
    let sizes = band_sizes(width, height, levels);
    let mut offsets = vec![0];
    for n in &sizes[1..] {
        offsets.push(offsets.last().unwrap() + n);
    }
    let total = offsets[levels];
    let mut parent = vec![None; total];
    let mut children = vec![Vec::new(); total];
    for j in 2..=levels {
        let shift = levels - j + 1;
        let (h, w) = (height >> shift, width >> shift);
        let pw = w / 2;
        let (block, pblock) = (h * w, (h / 2) * pw);
        for o in 0..3 {
            for r in 0..h {
                for c in 0..w {
                    let node = offsets[j - 1] + o * block + r * w + c;
                    let par = offsets[j - 2] + o * pblock + (r / 2) * pw + c / 2;
                    parent[node] = Some(par);
                    children[par].push(node);
                }
            }
        }
    }
    Ok(QuadTree { offsets, parent, children })
}
