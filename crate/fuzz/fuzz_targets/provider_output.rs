#![no_main]

use libfuzzer_sys::fuzz_target;
use quillmate_core::gateway::parse::{
    parse_comparison_output, parse_rating, parse_score_output, parse_style_output,
};

fuzz_target!(|data: &str| {
    if let Ok(r) = parse_rating(data) {
        assert!(r.value() <= 10);
    }
    if let Ok((_, r)) = parse_comparison_output(data) {
        assert!(r.value() <= 10);
    }
    if let Ok(score) = parse_score_output(data) {
        assert!(score <= 10);
    }
    let _ = parse_style_output(data);
});
