//! Fuzz the binary state-dump decoder: must never panic or over-allocate,
//! only return structured errors.

#![no_main]

use libfuzzer_sys::fuzz_target;
use relboltz::io::decode_state;

fuzz_target!(|data: &[u8]| {
    let _ = decode_state(data);
});
