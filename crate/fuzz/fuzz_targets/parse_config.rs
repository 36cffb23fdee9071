#![no_main]
use ease_cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = parse_config(data) {
        let _ = cfg.data.map(|d| d.into_vec().len());
    }
});
