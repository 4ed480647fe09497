//! Synthetic stroke glyphs for exercising convolutional cores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

use super::dataset::{class_target, Sample, TaskDataset};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Stroke {
    /// Segment between two points of the unit square.
    Line([Real; 2], [Real; 2]),
    /// Arc around a center with radius and an angle interval in radians.
    Arc {
        center: [Real; 2],
        radius: Real,
        from: Real,
        to: Real,
    },
}

/// The stroke library shared by every task.
fn stroke_library() -> Vec<Stroke> {
    use std::f64::consts::PI;
    let pi = PI as Real;
    let mut lib = Vec::new();
    for v in [0.2, 0.5, 0.8] {
        lib.push(Stroke::Line([0.15, v], [0.85, v]));
        lib.push(Stroke::Line([v, 0.15], [v, 0.85]));
    }
    lib.push(Stroke::Line([0.15, 0.15], [0.85, 0.85]));
    lib.push(Stroke::Line([0.15, 0.85], [0.85, 0.15]));
    for q in 0..4 {
        let from = q as Real * pi / 2.0;
        lib.push(Stroke::Arc {
            center: [0.5, 0.5],
            radius: 0.3,
            from,
            to: from + pi / 2.0,
        });
    }
    lib
}

/// Strokes drawn per class template.
const STROKES_PER_GLYPH: usize = 3;
const FLIP_PROBABILITY: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlyphSpec {
    pub tasks: usize,
    pub classes: usize,
    pub image_size: usize,
    /// Input channels; the glyph occupies channel 0 and the rest are zero.
    #[serde(default = "GlyphSpec::one")]
    pub channels: usize,
    #[serde(default = "GlyphSpec::default_train")]
    pub train_per_class: usize,
    #[serde(default = "GlyphSpec::default_test")]
    pub test_per_class: usize,
    pub seed: u64,
}

impl GlyphSpec {
    fn one() -> usize {
        1
    }
    fn default_train() -> usize {
        20
    }
    fn default_test() -> usize {
        10
    }

    pub fn new(tasks: usize, classes: usize, image_size: usize, seed: u64) -> Self {
        Self {
            tasks,
            classes,
            image_size,
            channels: 1,
            train_per_class: Self::default_train(),
            test_per_class: Self::default_test(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 {
            return Err(Error::contract(format!("image_size {} is below 8", self.image_size)));
        }
        if self.tasks == 0 || self.classes < 2 || self.channels == 0 || self.train_per_class == 0 {
            return Err(Error::contract(
                "glyph tasks need tasks >= 1, classes >= 2, channels >= 1, and training samples",
            ));
        }
        let n = stroke_library().len() as u64;
        let templates = n * (n - 1) * (n - 2) / 6;
        if self.classes as u64 > templates {
            return Err(Error::contract(format!("at most {templates} distinct glyph classes")));
        }
        Ok(())
    }
}

fn draw(stroke: Stroke, size: usize, shift: (isize, isize), canvas: &mut [Real]) {
    let s = size as Real;
    let steps = 4 * size;
    let mut plot = |x: Real, y: Real| {
        let c = (x * (s - 1.0)).round() as isize + shift.0;
        let r = (y * (s - 1.0)).round() as isize + shift.1;
        if (0..size as isize).contains(&c) && (0..size as isize).contains(&r) {
            canvas[r as usize * size + c as usize] = 1.0;
        }
    };
    for i in 0..=steps {
        let t = i as Real / steps as Real;
        match stroke {
            Stroke::Line(a, b) => plot(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])),
            Stroke::Arc {
                center,
                radius,
                from,
                to,
            } => {
                let ang = from + t * (to - from);
                plot(center[0] + radius * ang.cos(), center[1] + radius * ang.sin());
            }
        }
    }
}

/// Classification tasks over small binary images. Each class is a distinct
/// combination of strokes from a library shared across tasks; samples are
/// the class template with each stroke shifted by up to one pixel and a
/// little pixel-flip noise. Inputs have shape `[channels, size, size]`.
pub fn gen_synthetic_glyph_tasks(spec: &GlyphSpec) -> Result<Vec<TaskDataset>> {
    spec.validate()?;
    let lib = stroke_library();
    let root = Rng::seed_from(spec.seed);
    let size = spec.image_size;
    let plane = size * size;
    (0..spec.tasks)
        .map(|t| {
            let mut rng = root.fork(t as u64);
            let mut templates: Vec<Vec<usize>> = Vec::with_capacity(spec.classes);
            while templates.len() < spec.classes {
                let mut pick = rng.permutation(lib.len())[..STROKES_PER_GLYPH].to_vec();
                pick.sort_unstable();
                if !templates.contains(&pick) {
                    templates.push(pick);
                }
            }
            let sample = |class: usize, rng: &mut Rng| {
                let mut data = vec![0.0; spec.channels * plane];
                for &k in &templates[class] {
                    let shift = (rng.below(3) as isize - 1, rng.below(3) as isize - 1);
                    draw(lib[k], size, shift, &mut data[..plane]);
                }
                for v in &mut data[..plane] {
                    if rng.bernoulli(FLIP_PROBABILITY) {
                        *v = 1.0 - *v;
                    }
                }
                Sample {
                    input: Tensor::new(vec![spec.channels, size, size], data).expect("glyph shape"),
                    target: class_target(class),
                }
            };
            let split = |per_class: usize, rng: &mut Rng| -> Vec<Sample> {
                (0..per_class)
                    .flat_map(|_| 0..spec.classes)
                    .map(|c| sample(c, rng))
                    .collect()
            };
            let train = split(spec.train_per_class, &mut rng);
            let test = split(spec.test_per_class, &mut rng);
            Ok(TaskDataset {
                name: format!("glyphs-{t}"),
                train,
                validation: Vec::new(),
                test,
                loss: LossKind::Ce,
                input_shape: vec![spec.channels, size, size],
                output_size: spec.classes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::Split;

    #[test]
    fn shape_contract_with_padding() {
        let spec = GlyphSpec {
            channels: 8,
            ..GlyphSpec::new(2, 4, 16, 3)
        };
        let ds = gen_synthetic_glyph_tasks(&spec).unwrap();
        assert_eq!(ds.len(), 2);
        for d in &ds {
            assert_eq!(d.input_shape, vec![8, 16, 16]);
            d.validate().unwrap();
            for s in &d.train {
                assert!(s.input.data()[256..].iter().all(|&v| v == 0.0));
                assert!(s.input.data().iter().all(|&v| v == 0.0 || v == 1.0));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic_glyph_tasks(&GlyphSpec::new(2, 4, 12, 5)).unwrap();
        let b = gen_synthetic_glyph_tasks(&GlyphSpec::new(2, 4, 12, 5)).unwrap();
        let c = gen_synthetic_glyph_tasks(&GlyphSpec::new(2, 4, 12, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_small_images() {
        assert!(gen_synthetic_glyph_tasks(&GlyphSpec::new(1, 2, 7, 0)).is_err());
    }

    #[test]
    fn nearest_centroid_beats_chance() {
        let spec = GlyphSpec::new(2, 4, 16, 11);
        for d in gen_synthetic_glyph_tasks(&spec).unwrap() {
            let dim = d.train[0].input.len();
            let mut centroids = vec![vec![0.0; dim]; d.output_size];
            let mut counts = vec![0.0; d.output_size];
            for s in &d.train {
                let c = s.target.data()[0] as usize;
                counts[c] += 1.0;
                for (a, &v) in centroids[c].iter_mut().zip(s.input.data()) {
                    *a += v;
                }
            }
            for (c, n) in centroids.iter_mut().zip(&counts) {
                c.iter_mut().for_each(|v| *v /= n);
            }
            let test = d.split(Split::Test);
            let correct = test
                .iter()
                .filter(|s| {
                    let dist =
                        |c: &Vec<Real>| -> Real { c.iter().zip(s.input.data()).map(|(a, b)| (a - b) * (a - b)).sum() };
                    let best = (0..centroids.len())
                        .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                        .unwrap();
                    best == s.target.data()[0] as usize
                })
                .count();
            let acc = correct as f64 / test.len() as f64;
            assert!(acc > 0.25 + 0.2, "nearest-centroid accuracy {acc}");
        }
    }
}
