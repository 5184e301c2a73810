#![no_main]

use libfuzzer_sys::fuzz_target;
use treevault::protocol::{Message, MessageKind};

// First byte picks the kind, the rest is the payload.
fuzz_target!(|data: &[u8]| {
    let Some((&tag, payload)) = data.split_first() else { return };
    let Ok(kind) = MessageKind::from_tag(tag) else { return };
    if let Ok(msg) = Message::decode_payload(kind, payload) {
        assert_eq!(msg.kind(), kind);
        let again = Message::decode_payload(kind, &msg.encode_payload()).expect("re-encoded payload decodes");
        assert_eq!(again, msg);
    }
});
