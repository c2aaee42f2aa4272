//! Fuzz the scenario configuration parser: must never panic, only return
//! structured errors.

#![no_main]

use libfuzzer_sys::fuzz_target;
use relboltz::scenario::{parse_scenario_str, parse_scenario_with_overrides};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_scenario_str(text);
        // Also drive the override path: split the input on the first
        // newline into (override, body).
        if let Some((first, rest)) = text.split_once('\n') {
            let _ = parse_scenario_with_overrides(rest, &[first.to_string()]);
        }
    }
});
