#![no_main]
use libfuzzer_sys::fuzz_target;

use twoscale::harness::{ExperimentConfig, Purpose, SuiteConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        for p in [Purpose::Correctors, Purpose::Oracle1d, Purpose::SweepDirichlet, Purpose::SweepNeumann, Purpose::H1] {
            let _ = cfg.validate(p);
        }
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).expect("serialized config parses");
        assert_eq!(cfg.to_toml(), again.to_toml());
    }
    let _ = SuiteConfig::from_toml(text);
});
