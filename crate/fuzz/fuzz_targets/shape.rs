#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault_sim::Shape;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Shape::parse(text) {
        let again = Shape::parse(&s.to_string()).expect("printed shape parses");
        assert_eq!(again, s);
    }
});
