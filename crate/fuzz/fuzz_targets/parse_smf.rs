#![no_main]

use libfuzzer_sys::fuzz_target;
use perfforge::midi::{extract_notes, extract_pedal, parse_smf, SUSTAIN_CONTROLLER};

fuzz_target!(|data: &[u8]| {
    let Ok(file) = parse_smf(data) else { return };

    let (notes, _) = extract_notes(&file);
    for note in &notes {
        assert!(note.onset_s.is_finite());
        assert!(note.duration_s >= 0.0);
        assert!(note.pitch < 128 && note.velocity < 128);
    }
    for pair in notes.windows(2) {
        let a = (pair[0].onset_s, pair[0].pitch);
        let b = (pair[1].onset_s, pair[1].pitch);
        assert!(a <= b, "notes must come out sorted");
    }

    let pedal = extract_pedal(&file, SUSTAIN_CONTROLLER);
    for pair in pedal.windows(2) {
        assert!(pair[0].time_s <= pair[1].time_s);
    }
});
