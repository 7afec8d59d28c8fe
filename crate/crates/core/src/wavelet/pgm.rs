use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Greyscale image, row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Dimension(format!("{} pixels for a {width}×{height} image", pixels.len())));
        }
        Ok(Image { width, height, pixels })
    }
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    loop {
        let mut byte = [0u8];
        if r.read(&mut byte)? == 0 {
            return if tok.is_empty() { Err(Error::Format("truncated PGM header".into())) } else { Ok(tok) };
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    return Ok(tok);
                }
            }
            c => tok.push(c as char),
        }
    }
}

fn header_number<R: BufRead>(r: &mut R, what: &str) -> Result<usize> {
    let tok = header_token(r)?;
    tok.parse().map_err(|_| Error::Format(format!("bad PGM {what} {tok:?}")))
}

/// Reads a binary (P5) PGM with 8- or 16-bit samples, scaled by `1/maxval`.
pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Image> {
    if header_token(&mut r)? != "P5" {
        return Err(Error::Format("only binary PGM (P5) is supported".into()));
    }
    let width = header_number(&mut r, "width")?;
    let height = header_number(&mut r, "height")?;
    let maxval = header_number(&mut r, "maxval")?;
    if width == 0 || height == 0 || !(1..=65535).contains(&maxval) {
        return Err(Error::Format(format!("bad PGM geometry {width}×{height}, maxval {maxval}")));
    }
    let bytes = if maxval < 256 { 1 } else { 2 };
    let mut raw = vec![0u8; width * height * bytes];
    r.read_exact(&mut raw).map_err(|_| Error::Format("PGM pixel data is truncated".into()))?;
    let scale = 1.0 / maxval as f64;
    let pixels = if bytes == 1 {
        raw.iter().map(|&b| b as f64 * scale).collect()
    } else {
        raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale).collect()
    };
    Image::new(width, height, pixels)
}

/// Writes an 8-bit P5 PGM, clamping to `[0, 1]` and rounding.
pub fn write_pgm<W: Write>(mut w: W, img: &Image) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
    let data: Vec<u8> = img.pixels.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    w.write_all(&data)?;
    Ok(())
}
