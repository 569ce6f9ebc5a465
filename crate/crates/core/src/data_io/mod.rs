//! Files, resizing, augmentation, phantoms and manifests.

mod image_io;
mod manifest;
mod phantom;
mod transform;

pub use image_io::{
    decode_raw, encode_raw, is_kspace_file, load_image, load_kspace, save_image, save_kspace, write_atomic, KSPACE_MAGIC, RAW_MAGIC,
};
pub use manifest::{read_manifest, write_manifest, write_manifest_to, ManifestReader, ManifestRecord, Split, MAX_LINE};
pub use phantom::{generate_phantom, phantom_corpus, random_phantom_spec, Ellipse, PhantomSpec, Ventricle, PHANTOM_NOISE};
pub use transform::{
    augment, flip_horizontal, flip_vertical, normalize_minmax, resize_bilinear, rotate, AugmentDraw, AugmentOps,
};
