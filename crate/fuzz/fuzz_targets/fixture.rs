#![no_main]

use libfuzzer_sys::fuzz_target;
use quillmate_core::gateway::replay::Fixture;

fuzz_target!(|data: &str| {
    if let Ok(fixture) = Fixture::parse(data) {
        assert_eq!(fixture.hash().len(), 64);
    }
});
