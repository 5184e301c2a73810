#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault::bloom::{bf_query, BloomFilter};
use treevault::key_tree::NumberPath;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = BloomFilter::from_bytes(data) {
        assert_eq!(f.to_bytes(), data);
        assert!(f.popcount() <= f.m());
        let path = NumberPath::new(vec![1, 2]).unwrap();
        let _ = bf_query(&f, &path, b"probe");
    }
});
