//! Fuzzes the command-line grammar: bytes are split on newlines into
//! argv entries and fed to the parse-only entry point. Nothing is
//! executed or printed; the only requirement is no panic and a sane code.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let argv = std::iter::once("gsde").chain(text.split('\n'));
    let code = gsde::harness::check_args(argv);
    assert!(code == 0 || code == 2, "parse produced exit code {code}");
});
