#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault::key_tree::NumberPath;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<NumberPath>() {
        assert_eq!(p.to_string().parse::<NumberPath>().unwrap(), p);
        assert_eq!(p.encoded_bits(), 32 * p.depth() as u64);
    }
});
