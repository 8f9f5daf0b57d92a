#![no_main]

use ble_txpc::ConfigFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((model, scenario)) = ConfigFile::parse(text) else {
        return;
    };
    let dumped = ConfigFile::new(model.clone(), scenario.clone())
        .to_toml()
        .expect("valid config serializes");
    let (model2, scenario2) = ConfigFile::parse(&dumped).expect("dumped config parses");
    assert_eq!(model, model2);
    assert_eq!(scenario, scenario2);
});
