#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = diffnet::checkpoint::decode(data) {
        // decoded checkpoints re-encode and decode to the same value
        let bytes = diffnet::checkpoint::encode(&ckpt);
        let again = diffnet::checkpoint::decode(&bytes).expect("re-encoded checkpoint decodes");
        assert_eq!(again, ckpt);
    }
});
