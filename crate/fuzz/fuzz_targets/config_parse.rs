//! Fuzzes the JSON config parser end to end: JSON decoding, schema
//! validation, and problem construction. Any input may be rejected, but
//! none may panic, hang, or build an invalid problem.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = gsde::harness::ExperimentConfig::from_json_str(text) else {
        return;
    };
    // Anything that parses must also survive the per-command accessors.
    let problem = config.problem().expect("parsed config rebuilt its problem");
    assert!(problem.dim() > 0);
    assert!(problem.horizon() > 0.0);
    let _ = config.run_spec();
    let _ = config.single_resolution();
    let _ = config.ladder();
    let _ = config.table_resolutions();
});
