#![no_main]
use libfuzzer_sys::fuzz_target;

use twoscale::cell::{decode_correctors, encode_correctors};

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = decode_correctors(data) {
        let bytes = encode_correctors(&set);
        let again = decode_correctors(&bytes).expect("encoded dump decodes");
        assert_eq!(encode_correctors(&again), bytes);
    }
});
