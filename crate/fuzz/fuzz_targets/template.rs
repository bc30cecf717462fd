#![no_main]

use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;
use quillmate_core::gateway::Template;

fuzz_target!(|data: &str| {
    let Ok(template) = Template::parse(data) else {
        return;
    };
    let bindings: BTreeMap<String, String> = template
        .placeholders()
        .into_iter()
        .map(|p| (p.to_string(), format!("<{p}>")))
        .collect();
    template.render(&bindings).expect("exact bindings render");
});
