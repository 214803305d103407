//! Pixel-space comparison metrics for silhouettes.

use super::image::SilhouetteImage;
use crate::error::{Error, Result};

fn check_shapes(a: &SilhouetteImage, b: &SilhouetteImage) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", a.width, a.height),
            got: format!("{}x{}", b.width, b.height),
        });
    }
    Ok(())
}

/// Mean squared error between two silhouettes, plus the per-pixel gradient
/// `2 (r - x) / N` with respect to the rendered image.
pub fn silhouette_mse(
    rendered: &SilhouetteImage,
    target: &SilhouetteImage,
) -> Result<(f64, SilhouetteImage)> {
    check_shapes(rendered, target)?;
    let n = rendered.data.len() as f64;
    let mut loss = 0.0;
    let mut grad = SilhouetteImage::zeros(rendered.width, rendered.height);
    for i in 0..rendered.data.len() {
        let r = rendered.data[i] - target.data[i];
        loss += r * r;
        grad.data[i] = 2.0 * r / n;
    }
    Ok((loss / n, grad))
}

/// Intersection-over-union of the two masks binarized at `bin_threshold`.
/// Two empty masks count as identical (IoU 1).
pub fn iou(rendered: &SilhouetteImage, target: &SilhouetteImage, bin_threshold: f64) -> Result<f64> {
    check_shapes(rendered, target)?;
    let (mut inter, mut uni) = (0u64, 0u64);
    for i in 0..rendered.data.len() {
        let r = rendered.data[i] >= bin_threshold;
        let x = target.data[i] >= bin_threshold;
        inter += (r && x) as u64;
        uni += (r || x) as u64;
    }
    if uni == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / uni as f64)
    }
}
