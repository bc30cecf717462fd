#![no_main]

use libfuzzer_sys::fuzz_target;
use quillmate_core::model::{EventRecord, Settings};
use quillmate_core::store::{apply_event, Model};

fuzz_target!(|data: &str| {
    for line in data.lines() {
        if let Ok(record) = EventRecord::parse(line) {
            let mut model = Model::new(Settings::default());
            let _ = apply_event(&mut model, &record);
        }
    }
});
