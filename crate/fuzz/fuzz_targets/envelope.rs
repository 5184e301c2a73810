#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault::crypto::{KeyRole, SymKey};
use treevault::protocol::{open_bytes, Envelope};

fuzz_target!(|data: &[u8]| {
    if let Ok(env) = Envelope::from_bytes(data) {
        assert_eq!(env.to_bytes(), data);
        assert_eq!(env.wire_len(), data.len());
    }
    for len in [16, 32] {
        let key = SymKey::from_bytes(vec![7; len], KeyRole::Pairwise).unwrap();
        let _ = open_bytes(&key, data);
    }
});
