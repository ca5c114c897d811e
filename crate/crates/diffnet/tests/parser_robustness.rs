//! Replays the fuzz corpora (and cheap deterministic mutations of them)
//! through the parser entry points, mirroring what the libFuzzer targets
//! under fuzz/ assert. Keeps the corpus files honest even on toolchains
//! without a fuzzer.

use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn corpus_dir(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target)
}

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = corpus_dir(target);
    let mut seeds: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("corpus {} missing: {e}", dir.display()))
        .filter_map(|entry| entry.ok())
        .map(|entry| {
            let path = entry.path();
            let bytes = std::fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();
    assert!(!seeds.is_empty(), "no seeds in {}", dir.display());
    seeds.sort_by(|a, b| a.0.cmp(&b.0));
    seeds.into_iter().map(|(_, bytes)| bytes).collect()
}

/// The seed plus a few hundred byte-level mutants of it.
fn with_mutants(seeds: Vec<Vec<u8>>) -> impl Iterator<Item = Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF00D);
    let mut out = Vec::new();
    for seed in seeds {
        out.push(seed.clone());
        for _ in 0..200 {
            let mut mutant = seed.clone();
            if mutant.is_empty() {
                continue;
            }
            match rng.random_range(0..3) {
                0 => {
                    let i = rng.random_range(0..mutant.len());
                    mutant[i] = rng.random();
                }
                1 => {
                    let i = rng.random_range(0..mutant.len());
                    mutant.truncate(i);
                }
                _ => {
                    let i = rng.random_range(0..=mutant.len());
                    mutant.insert(i, rng.random());
                }
            }
            out.push(mutant);
        }
    }
    out.into_iter()
}

#[test]
fn notation_corpus_replay() {
    for bytes in with_mutants(corpus("fuzz_notation")) {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(spec) = diffnet::parse_notation(text, 10) {
            let again = diffnet::parse_notation(&spec.render(), 10).unwrap();
            assert_eq!(again, spec);
        }
    }
}

#[test]
fn idx_corpus_replay() {
    for bytes in with_mutants(corpus("fuzz_idx")) {
        if let Ok(plain) = diffnet::data::idx::decompress(&bytes) {
            if let Ok(images) = diffnet::data::idx::parse_images(&plain) {
                assert_eq!(images.pixels.len(), images.count * images.rows * images.cols);
            }
            let _ = diffnet::data::idx::parse_labels(&plain);
        }
    }
}

#[test]
fn cifar_corpus_replay() {
    for bytes in with_mutants(corpus("fuzz_cifar")) {
        if let Ok(records) = diffnet::data::cifar::parse_batch(&bytes) {
            assert_eq!(records.len(), bytes.len() / diffnet::data::cifar::RECORD_BYTES);
        }
    }
}

#[test]
fn layout_corpus_replay() {
    for bytes in with_mutants(corpus("fuzz_layout")) {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(layouts) = diffnet::detector::parse_layouts(text, 100, 0.5) {
            let rendered = diffnet::detector::render_layouts(&layouts);
            assert_eq!(
                diffnet::detector::parse_layouts(&rendered, 100, 0.5).unwrap(),
                layouts
            );
        }
    }
}

#[test]
fn checkpoint_corpus_replay() {
    for bytes in with_mutants(corpus("fuzz_checkpoint")) {
        if let Ok(ckpt) = diffnet::checkpoint::decode(&bytes) {
            let encoded = diffnet::checkpoint::encode(&ckpt);
            assert_eq!(diffnet::checkpoint::decode(&encoded).unwrap(), ckpt);
        }
    }
}

#[test]
fn config_corpus_replay() {
    for bytes in with_mutants(corpus("fuzz_config")) {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(config) = diffnet::config::ExperimentConfig::from_toml(text) {
            let again = diffnet::config::ExperimentConfig::from_toml(&config.to_toml()).unwrap();
            assert_eq!(again, config);
        }
    }
}

#[test]
fn metrics_corpus_replay() {
    for bytes in with_mutants(corpus("fuzz_metrics")) {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        for line in text.lines() {
            if let Ok(record) = diffnet::metrics::MetricRecord::parse_line(line) {
                let again = diffnet::metrics::MetricRecord::parse_line(&record.to_line()).unwrap();
                assert_eq!(again, record);
            }
        }
    }
}

/// The canonical seeds themselves must be valid inputs (not just survive).
#[test]
fn canonical_seeds_parse() {
    let notation_ok = corpus("fuzz_notation")
        .iter()
        .filter(|b| {
            std::str::from_utf8(b)
                .is_ok_and(|t| diffnet::parse_notation(t, 10).is_ok())
        })
        .count();
    assert!(notation_ok >= 12, "the table strings must all parse");

    let ckpt = corpus("fuzz_checkpoint");
    assert!(diffnet::checkpoint::decode(&ckpt[0]).is_ok());

    let layouts_ok = corpus("fuzz_layout")
        .iter()
        .filter(|b| {
            std::str::from_utf8(b)
                .is_ok_and(|t| diffnet::detector::parse_layouts(t, 100, 0.5).is_ok())
        })
        .count();
    assert!(layouts_ok >= 2);
}
