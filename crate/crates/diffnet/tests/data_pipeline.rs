//! Dataset ingestion against the canonical MNIST files shipped in data/,
//! plus synthetic CIFAR-10 fixtures for the binary reader.

use std::path::PathBuf;

use diffnet::data::{
    cifar, load_cifar10, load_idx, to_grayscale, Dataset, DatasetId, DatasetSplits, RgbImage,
};

fn data_root() -> PathBuf {
    std::env::var_os(diffnet::data::DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../..")
                .join("data")
        })
}

#[test]
fn canonical_mnist_loads_with_exact_splits() {
    let dataset = Dataset::load(Some(&data_root()), DatasetId::Mnist, 7).unwrap();
    assert_eq!(dataset.pool.len(), 60_000);
    assert_eq!(dataset.test.len(), 10_000);
    assert_eq!(dataset.splits.train.len(), 55_000);
    assert_eq!(dataset.splits.validation.len(), 5_000);

    // canonical first test labels
    let first: Vec<u8> = dataset.test[..10].iter().map(|i| i.label).collect();
    assert_eq!(first, vec![7, 2, 1, 0, 4, 1, 4, 9, 5, 9]);

    // pixels normalized into [0, 1] with 255 → 1.0 exactly
    let mut saw_one = false;
    for image in &dataset.pool[..100] {
        for &p in &image.pixels {
            assert!((0.0..=1.0).contains(&p));
            if p == 1.0 {
                saw_one = true;
            }
        }
        assert_eq!(image.width, 28);
        assert_eq!(image.height, 28);
        assert!(image.label <= 9);
    }
    assert!(saw_one, "MNIST strokes saturate somewhere");

    // split determinism and disjointness
    let again = DatasetSplits::new(60_000, 5_000, 7).unwrap();
    assert_eq!(again, dataset.splits);
    let mut all: Vec<usize> = dataset
        .splits
        .train
        .iter()
        .chain(&dataset.splits.validation)
        .copied()
        .collect();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 60_000);
}

#[test]
fn idx_loader_counts_must_match() {
    let root = data_root().join("mnist");
    let images = root.join("train-images-idx3-ubyte.gz");
    let wrong_labels = root.join("t10k-labels-idx1-ubyte.gz");
    // 60000 images vs 10000 labels
    assert!(load_idx(&images, &wrong_labels).is_err());
}

#[test]
fn cifar_reader_on_synthetic_batches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data_batch_1.bin");
    let mut bytes = Vec::new();
    for label in 0..4u8 {
        bytes.push(label);
        bytes.extend(std::iter::repeat_n(label * 60, 3072));
    }
    std::fs::write(&path, &bytes).unwrap();
    let records = load_cifar10(std::slice::from_ref(&path)).unwrap();
    assert_eq!(records.len(), 4);
    assert_eq!(records[3].record.label, 3);
    assert_eq!(records[3].record.pixel(0, 0), (180, 180, 180));

    let gray = to_grayscale(&records[3]);
    let expected = (0.2989 + 0.5870 + 0.1140) * 180.0 / 255.0;
    assert!((gray.pixel(5, 5) as f64 - expected).abs() < 1e-6);

    // corrupt length → format error
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(load_cifar10(&[path]).is_err());
}

#[test]
fn one_record_per_3073_bytes() {
    let record = {
        let mut b = vec![5u8];
        b.extend(std::iter::repeat_n(0u8, 3072));
        b
    };
    assert_eq!(cifar::parse_batch(&record).unwrap().len(), 1);
    assert!(cifar::parse_batch(&record[..3072]).is_err());
}

#[test]
fn grayscale_stays_in_unit_range() {
    let mut rgb = vec![0u8; cifar::RECORD_BYTES - 1];
    for (i, v) in rgb.iter_mut().enumerate() {
        *v = (i * 37 % 256) as u8;
    }
    let img = to_grayscale(&RgbImage {
        record: cifar::CifarRecord { label: 0, rgb },
    });
    for &p in &img.pixels {
        assert!((0.0..=1.0).contains(&p));
    }
}
