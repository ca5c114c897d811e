#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(layouts) = diffnet::detector::parse_layouts(text, 100, 0.5) {
        // accepted layouts re-render and reparse identically
        let rendered = diffnet::detector::render_layouts(&layouts);
        let again = diffnet::detector::parse_layouts(&rendered, 100, 0.5)
            .expect("rendered layout must parse");
        assert_eq!(again, layouts);
    }
});
