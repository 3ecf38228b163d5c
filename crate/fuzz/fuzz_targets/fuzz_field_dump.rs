#![no_main]

use fracsemi::io::{decode_field, encode_field, parse_sidecar};
use libfuzzer_sys::fuzz_target;

// Input layout: u16 little-endian sidecar length, sidecar JSON, raw payload.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if n > rest.len() {
        return;
    }
    let (side, payload) = rest.split_at(n);
    let Ok(text) = std::str::from_utf8(side) else { return };
    let Ok(sidecar) = parse_sidecar(text) else { return };
    if let Ok(u) = decode_field(&sidecar, payload) {
        assert_eq!(encode_field(&u), payload);
    }
});
