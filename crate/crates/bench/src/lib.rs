//! Shared fixtures for the criterion benches: a grid small enough that a
//! full run is a sensible per-iteration unit, and a matching binned cohort.

use cytotwin_core::cohort::{bin_times, normalize, BinnedDataset};
use cytotwin_core::engine::SimConfig;
use cytotwin_core::mrm::baseline;
use cytotwin_core::pseudo::{make_pseudo_cohort, Generator, GeneratorSpec};
use cytotwin_core::synth::SamplingSchedule;

pub fn small_config() -> SimConfig {
    SimConfig {
        grid_width: 16,
        grid_height: 16,
        injury_radius: 4,
        step_count: 100,
        ..SimConfig::default()
    }
}

/// Two noisy baseline patients sampled every 2 h, binned at the sampling
/// interval — the smallest dataset `fitness` accepts.
pub fn small_binned_dataset(config: &SimConfig) -> BinnedDataset {
    let spec = GeneratorSpec {
        generators: vec![Generator {
            mrm: baseline(),
            group: "obs".into(),
        }],
        patients_per_generator: 2,
        noise_sigma: 0.1,
        schedule: SamplingSchedule::new((0..=5).map(|i| i as f64 * 2.0).collect()).unwrap(),
        seed: 1,
    };
    let (data, _) = make_pseudo_cohort(&spec, config).unwrap();
    bin_times(&normalize(&data), 2.0).unwrap()
}
