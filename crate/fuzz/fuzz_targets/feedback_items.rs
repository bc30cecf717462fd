#![no_main]

use libfuzzer_sys::fuzz_target;
use quillmate_core::gateway::parse::{format_feedback_items, parse_feedback_items};

fuzz_target!(|items: Vec<(String, Option<String>)>| {
    let text = format_feedback_items(items.iter().map(|(e, r)| (e.as_str(), r.as_deref())));
    let parsed = parse_feedback_items(&text).expect("formatted items parse");
    assert_eq!(parsed, items);
    let _ = parse_feedback_items(items.first().map(|(e, _)| e.as_str()).unwrap_or(""));
});
