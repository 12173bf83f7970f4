//! Dataset ingestion: netpbm decoding, resizing, directory loading with
//! image/mask pairing, deterministic splitting, and synthetic data.

mod netpbm;
mod resize;
mod synth;

pub use netpbm::{read_image, write_image};
pub use resize::{resize_bilinear, resize_nearest};
pub use synth::{generate_synthetic, sample_scene, Ellipse, Scene, SynthConfig};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

/// Mask pixels at or above this load threshold become foreground (128/255).
const MASK_THRESHOLD: f32 = 128.0 / 255.0;

/// One image/mask pair. The image is 3xHxW in [0, 1]; the mask is 1xHxW and
/// strictly binary.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Tensor,
    pub mask: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Real,
    Synthetic,
}

/// Ordered collection of samples sharing one spatial size.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
    pub size: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn list_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut stems = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !matches!(ext.as_deref(), Some("ppm") | Some("pgm")) {
            continue;
        }
        let stem = match path.file_stem().and_then(|s| s.to_str()) {
            Some(s) => s.to_string(),
            None => continue,
        };
        if stems.insert(stem.clone(), path).is_some() {
            return Err(Error::Pairing {
                stem,
                reason: format!("duplicate stem in {}", dir.display()),
            });
        }
    }
    Ok(stems)
}

/// Collapses an RGB mask to one gray channel (mean) before thresholding.
fn to_gray(t: &Tensor) -> Result<Tensor> {
    let [c, h, w] = t.dims3()?;
    if c == 1 {
        return Ok(t.clone());
    }
    let plane = h * w;
    let mut data = vec![0.0f32; plane];
    for (k, v) in data.iter_mut().enumerate() {
        let mut acc = 0.0f32;
        for ci in 0..c {
            acc += t.data()[ci * plane + k];
        }
        *v = acc / c as f32;
    }
    Tensor::from_vec(&[1, h, w], data)
}

fn to_rgb(t: &Tensor) -> Result<Tensor> {
    let [c, h, w] = t.dims3()?;
    if c == 3 {
        return Ok(t.clone());
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(3 * plane);
    for _ in 0..3 {
        data.extend_from_slice(&t.data()[..plane]);
    }
    Tensor::from_vec(&[3, h, w], data)
}

/// Loads `<root>/images` and `<root>/masks` pairs matched by file stem,
/// ordered by sorted stem. Images are resized bilinearly to `size x size`;
/// masks are resized nearest-neighbor and binarized at >= 128/255.
pub fn load_dataset(root: impl AsRef<Path>, size: usize) -> Result<Dataset> {
    let root = root.as_ref();
    let images = list_stems(&root.join("images"))?;
    let masks = list_stems(&root.join("masks"))?;
    if images.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} contains no .ppm/.pgm files",
            root.join("images").display()
        )));
    }
    for stem in images.keys() {
        if !masks.contains_key(stem) {
            return Err(Error::Pairing {
                stem: stem.clone(),
                reason: "image has no matching mask".into(),
            });
        }
    }
    for stem in masks.keys() {
        if !images.contains_key(stem) {
            return Err(Error::Pairing {
                stem: stem.clone(),
                reason: "mask has no matching image".into(),
            });
        }
    }
    let mut samples = Vec::with_capacity(images.len());
    for (stem, image_path) in &images {
        let image = to_rgb(&read_image(image_path)?)?;
        let image = resize_bilinear(&image, size, size)?;
        let mask = to_gray(&read_image(&masks[stem])?)?;
        let mask = resize_nearest(&mask, size, size)?
            .map(|v| if v >= MASK_THRESHOLD { 1.0 } else { 0.0 });
        samples.push(Sample {
            id: stem.clone(),
            image,
            mask,
        });
    }
    Ok(Dataset {
        samples,
        provenance: Provenance::Real,
        size,
    })
}

/// Deterministic seeded shuffle, then split: round(fraction * n) samples go
/// to the first side, the rest to the second. Errors if either side would be
/// empty.
pub fn split_dataset(dataset: Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let train_n = (train_fraction * n as f64).round() as usize;
    if train_n == 0 || train_n == n {
        return Err(Error::InvalidArgument(format!(
            "fraction {train_fraction} of {n} samples leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::with_stream(seed, stream::SPLIT).shuffle(&mut order);
    let mut flags = vec![false; n];
    for &i in &order[..train_n] {
        flags[i] = true;
    }
    let (provenance, size) = (dataset.provenance, dataset.size);
    let mut train = Vec::with_capacity(train_n);
    let mut test = Vec::with_capacity(n - train_n);
    for (sample, keep) in dataset.samples.into_iter().zip(flags) {
        if keep {
            train.push(sample);
        } else {
            test.push(sample);
        }
    }
    Ok((
        Dataset {
            samples: train,
            provenance,
            size,
        },
        Dataset {
            samples: test,
            provenance,
            size,
        },
    ))
}

/// Writes a dataset to `<root>/images/<id>.ppm` + `<root>/masks/<id>.pgm`,
/// the layout `load_dataset` consumes.
pub fn write_dataset(dataset: &Dataset, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let images = root.join("images");
    let masks = root.join("masks");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    std::fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
    for s in &dataset.samples {
        write_image(&s.image, images.join(format!("{}.ppm", s.id)))?;
        write_image(&s.mask, masks.join(format!("{}.pgm", s.id)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_dataset(n: usize, size: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| Sample {
                id: format!("s{i:04}"),
                image: Tensor::new(&[3, size, size], (i % 7) as f32 / 10.0).unwrap(),
                mask: Tensor::new(&[1, size, size], (i % 2) as f32).unwrap(),
            })
            .collect();
        Dataset {
            samples,
            provenance: Provenance::Synthetic,
            size,
        }
    }

    #[test]
    fn load_pairs_sorted_by_stem() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset(3, 8);
        write_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path(), 8).unwrap();
        assert_eq!(loaded.len(), 3);
        let ids: Vec<&str> = loaded.samples.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["s0000", "s0001", "s0002"]);
    }

    #[test]
    fn unpaired_image_reported_by_stem() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset(2, 8);
        write_dataset(&ds, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("masks/s0001.pgm")).unwrap();
        match load_dataset(dir.path(), 8) {
            Err(Error::Pairing { stem, .. }) => assert_eq!(stem, "s0001"),
            other => panic!("expected pairing error, got {other:?}"),
        }
    }

    #[test]
    fn empty_dirs_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("images")).unwrap();
        std::fs::create_dir_all(dir.path().join("masks")).unwrap();
        assert!(matches!(
            load_dataset(dir.path(), 8),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn mask_threshold_boundary() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("images")).unwrap();
        std::fs::create_dir_all(dir.path().join("masks")).unwrap();
        let img = Tensor::new(&[3, 2, 2], 0.5).unwrap();
        write_image(&img, dir.path().join("images/a.ppm")).unwrap();
        // gray bytes 127 and 128 straddle the threshold
        let mask_bytes: Vec<f32> = vec![127.0 / 255.0, 128.0 / 255.0, 0.0, 1.0];
        let mask = Tensor::from_vec(&[1, 2, 2], mask_bytes).unwrap();
        write_image(&mask, dir.path().join("masks/a.pgm")).unwrap();
        let ds = load_dataset(dir.path(), 2).unwrap();
        assert_eq!(ds.samples[0].mask.data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn split_880_120() {
        let ds = toy_dataset(1000, 8);
        let (train, test) = split_dataset(ds, 0.88, 7).unwrap();
        assert_eq!(train.len(), 880);
        assert_eq!(test.len(), 120);
    }

    #[test]
    fn split_same_seed_same_membership() {
        let a = split_dataset(toy_dataset(50, 8), 0.8, 3).unwrap();
        let b = split_dataset(toy_dataset(50, 8), 0.8, 3).unwrap();
        let ids = |d: &Dataset| d.samples.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.0), ids(&b.0));
        assert_eq!(ids(&a.1), ids(&b.1));
    }

    #[test]
    fn split_empty_side_rejected() {
        assert!(split_dataset(toy_dataset(3, 8), 0.01, 0).is_err());
        assert!(split_dataset(toy_dataset(3, 8), 0.99, 0).is_err());
        assert!(split_dataset(toy_dataset(10, 8), 1.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 4usize..60, seed in 0u64..500, frac in 0.2f64..0.8) {
            let ds = toy_dataset(n, 8);
            let all: std::collections::BTreeSet<String> =
                ds.samples.iter().map(|s| s.id.clone()).collect();
            let (train, test) = split_dataset(ds, frac, seed).unwrap();
            let train_ids: std::collections::BTreeSet<String> =
                train.samples.iter().map(|s| s.id.clone()).collect();
            let test_ids: std::collections::BTreeSet<String> =
                test.samples.iter().map(|s| s.id.clone()).collect();
            prop_assert!(train_ids.is_disjoint(&test_ids));
            let union: std::collections::BTreeSet<String> =
                train_ids.union(&test_ids).cloned().collect();
            prop_assert_eq!(union, all);
            prop_assert_eq!(train.len(), (frac * n as f64).round() as usize);
        }
    }
}
