#![no_main]

use libfuzzer_sys::fuzz_target;
use quillmate_core::style::{parse_markdown, parse_markdown_description, validate_style_description};

fuzz_target!(|data: &str| {
    let rich = parse_markdown(data);
    rich.validate().expect("markdown import yields valid rich text");
    let _ = validate_style_description(&rich);
    if let Ok(desc) = parse_markdown_description(data) {
        let _ = desc.to_markdown();
        let _ = desc.content_text();
    }
});
