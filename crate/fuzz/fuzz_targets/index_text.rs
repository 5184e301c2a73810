#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault::key_tree::{tree_from_text, tree_to_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tree) = tree_from_text(text) {
        let once = tree_to_text(&tree);
        let twice = tree_to_text(&tree_from_text(&once).expect("printed tree parses"));
        assert_eq!(once, twice);
    }
});
