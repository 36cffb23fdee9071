//! Checkpoint JSON decoding; accepted documents must survive a round trip.

#![no_main]
use ease_core::evaluator::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(ckpt) = Checkpoint::from_json(data) else { return };
    let params = ckpt.to_params().expect("decoded checkpoint rebuilds");
    let again = Checkpoint::from_json(&ckpt.to_json()).expect("re-encoded checkpoint decodes");
    assert_eq!(again.to_params().unwrap(), params);
});
