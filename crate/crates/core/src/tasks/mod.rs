//! Task construction and ingestion.
//!
//! Every generator is pure given its inputs and seed.

mod csv_task;
mod dataset;
mod glyph;
mod idx;
mod jsonl;
mod mnist;
mod pixel;
mod random;

pub use csv_task::{load_csv_task, parse_csv_task, DEFAULT_TRAIN_FRACTION};
pub use dataset::{Sample, Split, TaskDataset};
pub use glyph::{gen_synthetic_glyph_tasks, GlyphSpec};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, IdxImages, IMAGE_MAGIC,
    LABEL_MAGIC,
};
pub use jsonl::{export_jsonl, write_jsonl};
pub use mnist::{make_mnist_pair_tasks, MnistPairTasks, MNIST_ENCODER_UNITS};
pub use pixel::{image_from_values, make_pixel_tasks, pixel_grid, synthetic_four, synthetic_four_styled};
pub use random::{gen_random_tasks, RandomTaskSpec};
