#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for line in text.lines() {
        if let Ok(record) = diffnet::metrics::MetricRecord::parse_line(line) {
            let again = diffnet::metrics::MetricRecord::parse_line(&record.to_line())
                .expect("rendered metrics line must parse");
            assert_eq!(again.epoch, record.epoch);
            assert_eq!(again.split, record.split);
        }
    }
});
