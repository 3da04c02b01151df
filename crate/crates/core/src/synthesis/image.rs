//! Row-major image buffers, Netpbm/PFM file I/O and the crop/resize
//! postprocessing applied before images reach a network.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// Meters along the optical axis; `f32::INFINITY` where nothing was hit.
    pub data: Vec<f32>,
}

/// `true` marks a valid pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoidMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

impl DepthImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![f32::INFINITY; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Pixels with finite positive depth.
    pub fn valid_mask(&self) -> VoidMask {
        VoidMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|d| d.is_finite() && *d > 0.0).collect(),
        }
    }
}

impl VoidMask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }
}

pub const CROP_WIDTH: usize = 600;
pub const CROP_HEIGHT: usize = 350;
pub const OUTPUT_SIZE: usize = 128;
pub const SOURCE_WIDTH: usize = 1200;
pub const SOURCE_HEIGHT: usize = 352;

pub fn crop(img: &RgbImage, x0: usize, y0: usize, w: usize, h: usize) -> Result<RgbImage> {
    if x0 + w > img.width || y0 + h > img.height {
        return Err(Error::Dimensions {
            got: (img.width, img.height),
            expected: (x0 + w, y0 + h),
        });
    }
    let mut out = RgbImage::new(w, h);
    for y in 0..h {
        let src = 3 * ((y0 + y) * img.width + x0);
        out.data[3 * y * w..3 * (y + 1) * w].copy_from_slice(&img.data[src..src + 3 * w]);
    }
    Ok(out)
}

/// Bilinear resize with pixel centers aligned (`src = (dst + 0.5)·s − 0.5`).
pub fn resize_bilinear(img: &RgbImage, w: usize, h: usize) -> RgbImage {
    let sx = img.width as f64 / w as f64;
    let sy = img.height as f64 / h as f64;
    let mut out = RgbImage::new(w, h);
    let axis = |dst: usize, s: f64, n: usize| {
        let p = ((dst as f64 + 0.5) * s - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    for y in 0..h {
        let (y0, y1, fy) = axis(y, sy, img.height);
        for x in 0..w {
            let (x0, x1, fx) = axis(x, sx, img.width);
            let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
                let bot = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
                px[ch] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.set(x, y, px);
        }
    }
    out
}

/// Central 600×350 crop of a 1200×352 image, resized to 128×128.
pub fn postprocess(img: &RgbImage) -> Result<RgbImage> {
    if (img.width, img.height) != (SOURCE_WIDTH, SOURCE_HEIGHT) {
        return Err(Error::Dimensions {
            got: (img.width, img.height),
            expected: (SOURCE_WIDTH, SOURCE_HEIGHT),
        });
    }
    let x0 = (SOURCE_WIDTH - CROP_WIDTH) / 2;
    let y0 = (SOURCE_HEIGHT - CROP_HEIGHT) / 2;
    let c = crop(img, x0, y0, CROP_WIDTH, CROP_HEIGHT)?;
    Ok(resize_bilinear(&c, OUTPUT_SIZE, OUTPUT_SIZE))
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            c => tok.push(c),
        }
    }
    String::from_utf8(tok).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

fn header_usize<R: BufRead>(r: &mut R, what: &str) -> Result<usize> {
    let t = header_token(r)?;
    t.parse().map_err(|_| Error::Parse {
        line: 0,
        msg: format!("bad {what} {t:?}"),
    })
}

fn expect_magic<R: BufRead>(r: &mut R, magic: &'static str) -> Result<()> {
    let m = header_token(r)?;
    if m != magic {
        return Err(Error::Header { found: m, expected: magic });
    }
    Ok(())
}

pub fn write_ppm<W: Write>(mut w: W, img: &RgbImage) -> Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.data)?;
    Ok(())
}

pub fn read_ppm<R: BufRead>(mut r: R) -> Result<RgbImage> {
    expect_magic(&mut r, "P6")?;
    let width = header_usize(&mut r, "width")?;
    let height = header_usize(&mut r, "height")?;
    if header_usize(&mut r, "maxval")? != 255 {
        return Err(Error::Parse {
            line: 0,
            msg: "only 8-bit pixmaps are supported".into(),
        });
    }
    let mut data = vec![0; width * height * 3];
    r.read_exact(&mut data)?;
    Ok(RgbImage { width, height, data })
}

pub fn write_pgm_mask<W: Write>(mut w: W, mask: &VoidMask) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", mask.width, mask.height)?;
    let bytes: Vec<u8> = mask.data.iter().map(|v| if *v { 255 } else { 0 }).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_pgm_mask<R: BufRead>(mut r: R) -> Result<VoidMask> {
    expect_magic(&mut r, "P5")?;
    let width = header_usize(&mut r, "width")?;
    let height = header_usize(&mut r, "height")?;
    header_usize(&mut r, "maxval")?;
    let mut bytes = vec![0; width * height];
    r.read_exact(&mut bytes)?;
    Ok(VoidMask {
        width,
        height,
        data: bytes.into_iter().map(|b| b >= 128).collect(),
    })
}

/// Little-endian greyscale PFM (scale −1.0); rows are stored bottom to top.
pub fn write_pfm<W: Write>(mut w: W, depth: &DepthImage) -> Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", depth.width, depth.height)?;
    for y in (0..depth.height).rev() {
        for v in &depth.data[y * depth.width..(y + 1) * depth.width] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_pfm<R: BufRead>(mut r: R) -> Result<DepthImage> {
    expect_magic(&mut r, "Pf")?;
    let width = header_usize(&mut r, "width")?;
    let height = header_usize(&mut r, "height")?;
    let scale: f64 = header_token(&mut r)?.parse().map_err(|_| Error::Parse {
        line: 0,
        msg: "bad scale".into(),
    })?;
    let little = scale < 0.0;
    let mut bytes = vec![0; width * height * 4];
    r.read_exact(&mut bytes)?;
    let mut data = vec![0f32; width * height];
    for (i, ch) in bytes.chunks_exact(4).enumerate() {
        let b = [ch[0], ch[1], ch[2], ch[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, col) = (height - 1 - i / width, i % width);
        data[row * width + col] = v;
    }
    Ok(DepthImage { width, height, data })
}
