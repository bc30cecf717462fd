#![no_main]

use libfuzzer_sys::fuzz_target;
use quillmate_core::store::{Model, Snapshot};

fuzz_target!(|data: &str| {
    if let Ok(snapshot) = Snapshot::parse(data) {
        let _ = Model::from_snapshot(snapshot);
    }
});
