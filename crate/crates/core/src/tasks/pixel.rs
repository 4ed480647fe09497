use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::tensor::{Real, Tensor};

use super::dataset::{Sample, TaskDataset};

/// Normalized coordinate of index `i` along an axis of length `n`.
fn coord(i: usize, n: usize) -> Real {
    if n > 1 {
        i as Real / (n - 1) as Real
    } else {
        0.0
    }
}

/// One regression task per grayscale `[h, w]` image. Every pixel is a
/// training sample with input `(x, y)` in `[0, 1]^2` (x along columns) and
/// target the pixel value. Samples are in row-major order.
pub fn make_pixel_tasks(images: &[Tensor]) -> Result<Vec<TaskDataset>> {
    images
        .iter()
        .enumerate()
        .map(|(t, img)| {
            if img.rank() != 2 {
                return Err(Error::dim(
                    "make_pixel_tasks",
                    format!("image {t} has shape {:?}", img.shape()),
                ));
            }
            let (h, w) = (img.shape()[0], img.shape()[1]);
            let train = (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .map(|(r, c)| Sample {
                    input: Tensor::from_vec(vec![coord(c, w), coord(r, h)]),
                    target: Tensor::from_vec(vec![img.at(&[r, c])]),
                })
                .collect();
            Ok(TaskDataset {
                name: format!("image-{t}"),
                train,
                validation: Vec::new(),
                test: Vec::new(),
                loss: LossKind::Mse,
                input_shape: vec![2],
                output_size: 1,
            })
        })
        .collect()
}

/// Rebuilds an `[h, w]` image from per-pixel values in row-major order.
pub fn image_from_values(h: usize, w: usize, values: &[Real]) -> Result<Tensor> {
    Tensor::new(vec![h, w], values.to_vec())
}

/// Inputs for every pixel of an `[h, w]` grid as one `[h * w, 2]` batch.
pub fn pixel_grid(h: usize, w: usize) -> Tensor {
    let mut data = Vec::with_capacity(h * w * 2);
    for r in 0..h {
        for c in 0..w {
            data.push(coord(c, w));
            data.push(coord(r, h));
        }
    }
    Tensor::new(vec![h * w, 2], data).expect("grid shape")
}

/// A blocky "4" drawn on an `[size, size]` canvas, values in {0, 1}.
pub fn synthetic_four(size: usize) -> Tensor {
    synthetic_four_styled(size, 0)
}

/// Handwriting-like variations of [`synthetic_four`]: `style` 0 is the
/// upright four, higher styles slant the left arm and move the bar and stem.
pub fn synthetic_four_styled(size: usize, style: usize) -> Tensor {
    let mut img = Tensor::zeros(&[size, size]);
    let s = size as Real;
    let k = style as Real;
    let slant = 0.12 * (k * 0.7).sin();
    let bar_y = 0.5 + 0.08 * (k * 1.3).sin();
    let stem_x = 0.6 + 0.07 * (k * 0.9).cos() - 0.07;
    let width = 0.1 + 0.02 * (style % 2) as Real;
    for r in 0..size {
        for c in 0..size {
            let (y, x) = ((r as Real + 0.5) / s, (c as Real + 0.5) / s);
            let arm_x = 0.25 + slant * (0.55 - y);
            let left_arm = (arm_x..arm_x + width).contains(&x) && (0.15..bar_y + width).contains(&y);
            let bar = (arm_x..stem_x + 0.15).contains(&x) && (bar_y..bar_y + width).contains(&y);
            let stem = (stem_x..stem_x + width).contains(&x) && (0.15..0.85).contains(&y);
            if left_arm || bar || stem {
                img.set(&[r, c], 1.0);
            }
        }
    }
    img
}
