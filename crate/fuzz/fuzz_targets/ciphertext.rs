#![no_main]

use libfuzzer_sys::fuzz_target;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use treevault::crypto::{det_pub_decrypt, gen_keypair, sym_decrypt, KeyRole, SymKey};

fuzz_target!(|data: &[u8]| {
    for len in [16, 32] {
        let key = SymKey::from_bytes(vec![9; len], KeyRole::Derived).unwrap();
        let _ = sym_decrypt(&key, data, b"aad");
    }
    let keys = gen_keypair(&mut ChaCha20Rng::seed_from_u64(1));
    let _ = det_pub_decrypt(&keys, data);
});
