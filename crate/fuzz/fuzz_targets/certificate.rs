#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault::crypto::{KeyRole, SymKey};
use treevault::protocol::{open_certificate, Certificate, CertificateFields};

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = CertificateFields::decode(data) {
        assert_eq!(f.encode(), data);
    }
    let key = SymKey::from_bytes(vec![3; 16], KeyRole::Pairwise).unwrap();
    let _ = open_certificate(&key, &Certificate::from_sealed(data.to_vec()));
});
