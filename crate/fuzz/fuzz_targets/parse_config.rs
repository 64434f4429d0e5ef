#![no_main]

use libfuzzer_sys::fuzz_target;
use perfforge::config::{effective_params, parse_config, validate_params, SECTION_NAMES};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = parse_config(text) else { return };

    let params = effective_params(&config);
    // Cross-key validation may reject the values but must never panic.
    let _ = validate_params(&params);

    // Rendering every section and parsing the result must reproduce the
    // exact same effective parameters.
    let mut rendered = String::new();
    for section in SECTION_NAMES {
        rendered.push_str(&format!("[{section}]\n"));
        rendered.push_str(&params.section_text(section));
    }
    let reparsed = parse_config(&rendered).expect("rendered config must parse");
    assert_eq!(effective_params(&reparsed), params);
});
