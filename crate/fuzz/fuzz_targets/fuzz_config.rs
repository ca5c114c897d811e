#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = diffnet::config::ExperimentConfig::from_toml(text) {
        // accepted configs survive a serialize/parse round trip
        let rendered = config.to_toml();
        let again = diffnet::config::ExperimentConfig::from_toml(&rendered)
            .expect("serialized config must parse");
        assert_eq!(again, config);
    }
});
