#![no_main]

use libfuzzer_sys::fuzz_target;
use quillmate_core::richtext::RichText;

fuzz_target!(|data: &str| {
    let Ok(text) = RichText::parse(data) else {
        return;
    };
    // canonical form re-parses to the same value
    let again = RichText::parse(&text.to_canonical()).expect("canonical form parses");
    assert_eq!(again, text);
    let plain = text.plain_text();
    assert_eq!(plain.chars().count(), text.char_len());
    let _ = text.find_all("a");
});
