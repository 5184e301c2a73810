#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault_sim::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = ScenarioConfig::from_toml(text) {
        c.profile().expect("validated profile");
        c.parsed_shape().expect("validated shape");
    }
});
