#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // any class count the first byte suggests, plus the standard 10
    for classes in [10usize, (data.first().copied().unwrap_or(1) as usize).max(1)] {
        if let Ok(spec) = diffnet::parse_notation(text, classes) {
            // round-trip invariant: the canonical rendering reparses to
            // the same spec
            let rendered = spec.render();
            let again = diffnet::parse_notation(&rendered, classes)
                .expect("canonical rendering must parse");
            assert_eq!(again, spec);
        }
    }
});
