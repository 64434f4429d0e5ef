#![no_main]

use libfuzzer_sys::fuzz_target;
use perfforge::audio::read_wav;

fuzz_target!(|data: &[u8]| {
    let Ok(audio) = read_wav(data) else { return };

    assert!((8000..=192_000).contains(&audio.sample_rate));
    for s in &audio.samples {
        assert!(s.is_finite(), "decoded samples must be finite");
        assert!(s.abs() <= 1.0, "decoded samples must be normalized");
    }
});
