use crate::error::{Error, Result};
use std::path::Path;

/// A soft coverage map: `H x W` values in `[0, 1]`, row-major.
///
/// Pixel `(col, row)` covers the screen square centered at
/// `x = (col + 0.5) / W * 2 - 1`, `y = (row + 0.5) / H * 2 - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl SilhouetteImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        SilhouetteImage { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        SilhouetteImage { width, height, data }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bounding box of pixels with value >= 0.5 as `(col0, row0, col1, row1)`
    /// inclusive, or `None` if the mask is empty.
    pub fn foreground_bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(col, row) >= 0.5 {
                    bbox = Some(match bbox {
                        None => (col, row, col, row),
                        Some((c0, r0, c1, r1)) => (c0.min(col), r0.min(row), c1.max(col), r1.max(row)),
                    });
                }
            }
        }
        bbox
    }

    /// Centroid of the >= 0.5 foreground in pixel coordinates.
    pub fn foreground_centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(col, row) >= 0.5 {
                    sx += col as f64 + 0.5;
                    sy += row as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        if n == 0.0 {
            None
        } else {
            Some((sx / n, sy / n))
        }
    }

    /// Resamples by exact box (area) averaging to `w x h`.
    pub fn resample_area(&self, w: usize, h: usize) -> SilhouetteImage {
        if w == self.width && h == self.height {
            return self.clone();
        }
        let data = resample_plane(&self.data, self.width, self.height, w, h);
        SilhouetteImage { width: w, height: h, data }
    }

    /// Writes an 8-bit grayscale PNG (value * 255, rounded).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut img = image::GrayImage::new(self.width as u32, self.height as u32);
        for row in 0..self.height {
            for col in 0..self.width {
                let v = (self.get(col, row).clamp(0.0, 1.0) * 255.0).round() as u8;
                img.put_pixel(col as u32, row as u32, image::Luma([v]));
            }
        }
        img.save(path)?;
        Ok(())
    }

    /// Reads an 8-bit grayscale PNG as value / 255.
    pub fn load_png(path: &Path) -> Result<SilhouetteImage> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path)?.into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut out = SilhouetteImage::zeros(w, h);
        for row in 0..h {
            for col in 0..w {
                out.set(col, row, img.get_pixel(col as u32, row as u32)[0] as f64 / 255.0);
            }
        }
        Ok(out)
    }
}

/// A per-pixel class distribution: `K` planes of `H x W` values >= 0.
///
/// Per pixel, the class vector sums to at most 1; the remainder is the
/// implicit "no class" mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticImage {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    /// Layout: `data[(k * height + row) * width + col]`.
    pub data: Vec<f64>,
}

impl SemanticImage {
    pub fn zeros(width: usize, height: usize, classes: usize) -> Self {
        SemanticImage { width, height, classes, data: vec![0.0; width * height * classes] }
    }

    #[inline]
    pub fn get(&self, k: usize, col: usize, row: usize) -> f64 {
        self.data[(k * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, k: usize, col: usize, row: usize, v: f64) {
        self.data[(k * self.height + row) * self.width + col] = v;
    }

    #[inline]
    pub fn plane(&self, k: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn same_shape(&self, o: &SemanticImage) -> bool {
        self.width == o.width && self.height == o.height && self.classes == o.classes
    }

    /// Rescales pixels whose class mass exceeds 1 back onto the simplex.
    /// 8-bit quantization can push sums slightly above 1.
    pub fn renormalize_overflow(&mut self) {
        let n = self.width * self.height;
        for p in 0..n {
            let mut sum = 0.0;
            for k in 0..self.classes {
                sum += self.data[k * n + p];
            }
            if sum > 1.0 {
                for k in 0..self.classes {
                    self.data[k * n + p] /= sum;
                }
            }
        }
    }

    /// Writes one grayscale PNG per class: `<stem>.class<k>.png`.
    pub fn save_pngs(&self, dir: &Path, stem: &str) -> Result<()> {
        for k in 0..self.classes {
            let plane = SilhouetteImage::from_data(self.width, self.height, self.plane(k).to_vec());
            plane.save_png(&dir.join(format!("{stem}.class{k}.png")))?;
        }
        Ok(())
    }

    /// Loads `<stem>.class<k>.png` for `k` in `0..classes`.
    pub fn load_pngs(dir: &Path, stem: &str, classes: usize) -> Result<SemanticImage> {
        let mut out: Option<SemanticImage> = None;
        for k in 0..classes {
            let plane = SilhouetteImage::load_png(&dir.join(format!("{stem}.class{k}.png")))?;
            let img = out.get_or_insert_with(|| SemanticImage::zeros(plane.width, plane.height, classes));
            if plane.width != img.width || plane.height != img.height {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}x{}", img.width, img.height),
                    got: format!("{}x{}", plane.width, plane.height),
                });
            }
            let n = img.width * img.height;
            img.data[k * n..(k + 1) * n].copy_from_slice(&plane.data);
        }
        let mut img = out.unwrap_or_else(|| SemanticImage::zeros(0, 0, 0));
        img.renormalize_overflow();
        Ok(img)
    }
}

/// Exact separable box-filter resampling of a single plane.
fn resample_plane(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    // Horizontal pass: sw x sh -> dw x sh.
    let mut mid = vec![0.0; dw * sh];
    for row in 0..sh {
        resample_line(&src[row * sw..(row + 1) * sw], 1, &mut mid[row * dw..(row + 1) * dw], 1, sw, dw);
    }
    // Vertical pass: dw x sh -> dw x dh.
    let mut dst = vec![0.0; dw * dh];
    let mut col_src = vec![0.0; sh];
    let mut col_dst = vec![0.0; dh];
    for col in 0..dw {
        for row in 0..sh {
            col_src[row] = mid[row * dw + col];
        }
        resample_line(&col_src, 1, &mut col_dst, 1, sh, dh);
        for row in 0..dh {
            dst[row * dw + col] = col_dst[row];
        }
    }
    dst
}

/// Box-filter resampling along one axis: destination cell `i` averages source
/// coverage over `[i * n / m, (i + 1) * n / m)`.
fn resample_line(src: &[f64], s_stride: usize, dst: &mut [f64], d_stride: usize, n: usize, m: usize) {
    let scale = n as f64 / m as f64;
    for i in 0..m {
        let lo = i as f64 * scale;
        let hi = (i as f64 + 1.0) * scale;
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(n);
        let mut acc = 0.0;
        for j in first..last {
            let cover = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
            acc += src[j * s_stride] * cover;
        }
        dst[i * d_stride] = acc / scale;
    }
}
