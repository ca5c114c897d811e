#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = diffnet::data::cifar::parse_batch(data) {
        assert_eq!(records.len(), data.len() / diffnet::data::cifar::RECORD_BYTES);
        for r in &records {
            assert!(r.label <= 9);
        }
    }
});
