#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // gzip sniffing runs first on real loads, so fuzz that path too
    if let Ok(plain) = diffnet::data::idx::decompress(data) {
        if let Ok(images) = diffnet::data::idx::parse_images(&plain) {
            assert_eq!(images.pixels.len(), images.count * images.rows * images.cols);
        }
        if let Ok(labels) = diffnet::data::idx::parse_labels(&plain) {
            let _ = labels.len();
        }
    }
});
