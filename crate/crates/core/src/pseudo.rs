//! Pseudo-patient cohorts with known generating matrices. These stand in
//! for clinical data in recovery experiments: the generators are the
//! ground truth a calibration run is supposed to find again.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::EXPORTED_CHANNELS;
use crate::cohort::{CohortDataset, Observation};
use crate::engine::{run, SimConfig};
use crate::error::{Error, Result};
use crate::mrm::Mrm;
use crate::rng::{derive_seed, gaussian, rng_from};
use crate::synth::{nearest_sample, SamplingSchedule};

#[derive(Debug, Clone)]
pub struct Generator {
    pub mrm: Mrm,
    pub group: String,
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub generators: Vec<Generator>,
    pub patients_per_generator: usize,
    /// Multiplicative log-normal observation noise: value * exp(sigma * z).
    pub noise_sigma: f64,
    pub schedule: SamplingSchedule,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(Error::Config("at least one generator required".into()));
        }
        for (i, g) in self.generators.iter().enumerate() {
            g.mrm.validate()?;
            if g.group.trim().is_empty() {
                return Err(Error::Config(format!("generator {i} has an empty group")));
            }
        }
        if self.patients_per_generator == 0 {
            return Err(Error::Config("patients_per_generator must be >= 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma {} must be finite and >= 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub mrm_id: String,
    pub group: String,
    pub n_patients: usize,
}

/// Sidecar answer key: which matrix produced which pseudo patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// patient_id -> generating matrix id.
    pub patients: BTreeMap<String, String>,
    pub generators: Vec<GeneratorRecord>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Patient seed for generator `i`, patient `j` under a spec seed.
pub fn pseudo_patient_seed(seed: u64, generator: usize, patient: usize) -> u64 {
    derive_seed(
        seed,
        &["pseudo", &generator.to_string(), &patient.to_string()],
    )
}

/// Simulate every generator `patients_per_generator` times and emit noisy
/// observations at the schedule times (nearest recorded sample, exported
/// channels only). The noise draw happens even at sigma = 0 so turning
/// noise on or off never shifts any other stream.
pub fn make_pseudo_cohort(
    spec: &GeneratorSpec,
    config: &SimConfig,
) -> Result<(CohortDataset, GroundTruth)> {
    config.validate()?;
    spec.validate()?;
    spec.schedule.check_horizon(config)?;
    let mut observations = Vec::new();
    let mut patients = BTreeMap::new();
    let mut generators = Vec::with_capacity(spec.generators.len());
    for (i, g) in spec.generators.iter().enumerate() {
        let gen_id = g.mrm.mrm_id();
        for j in 0..spec.patients_per_generator {
            let run_seed = pseudo_patient_seed(spec.seed, i, j);
            let traj = run(config, &g.mrm, run_seed)?;
            let mut noise = rng_from(spec.seed, &["pseudo-noise", &i.to_string(), &j.to_string()]);
            let patient_id = format!("g{i}p{j:03}");
            for &t in spec.schedule.times_h() {
                let k = nearest_sample(&traj.times_h, t);
                for (ci, c) in EXPORTED_CHANNELS.iter().enumerate() {
                    let z = gaussian(&mut noise);
                    observations.push(Observation {
                        patient_id: patient_id.clone(),
                        group: g.group.clone(),
                        time_h: t,
                        channel: *c,
                        value: traj.channels[ci][k] * (spec.noise_sigma * z).exp(),
                    });
                }
            }
            patients.insert(patient_id, gen_id.clone());
        }
        generators.push(GeneratorRecord {
            mrm_id: gen_id,
            group: g.group.clone(),
            n_patients: spec.patients_per_generator,
        });
    }
    let data = CohortDataset::from_observations(observations)?;
    Ok((
        data,
        GroundTruth {
            patients,
            generators,
            noise_sigma: spec.noise_sigma,
            seed: spec.seed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{bin_times, normalize, write_cohort_csv};
    use crate::envelope::{build_envelope, encompassment};
    use crate::mrm::{baseline, Rule};

    fn small_config() -> SimConfig {
        SimConfig {
            grid_width: 16,
            grid_height: 16,
            injury_radius: 4,
            step_count: 100,
            ..SimConfig::default()
        }
    }

    fn spec(sigma: f64, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            generators: vec![Generator {
                mrm: baseline(),
                group: "recovery".into(),
            }],
            patients_per_generator: 3,
            noise_sigma: sigma,
            schedule: SamplingSchedule::new(vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]).unwrap(),
            seed,
        }
    }

    #[test]
    fn cohort_shape_ids_and_ground_truth() {
        let base = baseline();
        let shifted = base.scale_row(Rule::PmnSecretion, 1.5).unwrap();
        let s = GeneratorSpec {
            generators: vec![
                Generator {
                    mrm: base.clone(),
                    group: "control".into(),
                },
                Generator {
                    mrm: shifted.clone(),
                    group: "elevated".into(),
                },
            ],
            patients_per_generator: 2,
            noise_sigma: 0.1,
            schedule: SamplingSchedule::new(vec![0.0, 5.0, 10.0]).unwrap(),
            seed: 31,
        };
        let cfg = small_config();
        let (data, truth) = make_pseudo_cohort(&s, &cfg).unwrap();
        assert_eq!(data.n_patients(), 4);
        // 4 patients x 3 times x 9 channels.
        assert_eq!(data.observations.len(), 4 * 3 * 9);
        assert_eq!(data.group_of("g0p000").unwrap(), "control");
        assert_eq!(data.group_of("g0p001").unwrap(), "control");
        assert_eq!(data.group_of("g1p000").unwrap(), "elevated");
        assert_eq!(data.group_of("g1p001").unwrap(), "elevated");
        assert_eq!(truth.patients["g0p000"], base.mrm_id());
        assert_eq!(truth.patients["g1p001"], shifted.mrm_id());
        assert_eq!(truth.generators.len(), 2);
        assert_eq!(truth.generators[0].n_patients, 2);

        // Deterministic end to end, including through CSV.
        let csv = |d: &CohortDataset| {
            let mut buf = Vec::new();
            write_cohort_csv(&mut buf, d).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let (again, truth2) = make_pseudo_cohort(&s, &cfg).unwrap();
        assert_eq!(csv(&again), csv(&data));
        assert_eq!(truth2, truth);
        let mut other = s.clone();
        other.seed = 32;
        let (diff, _) = make_pseudo_cohort(&other, &cfg).unwrap();
        assert_ne!(csv(&diff), csv(&data));
    }

    #[test]
    fn zero_noise_data_sits_exactly_inside_its_own_ensemble() {
        let s = spec(0.0, 44);
        let cfg = small_config();
        let (data, _) = make_pseudo_cohort(&s, &cfg).unwrap();
        let norm = normalize(&data);
        // Re-run the identical seeds to rebuild the generating ensemble.
        let trajs: Vec<_> = (0..s.patients_per_generator)
            .map(|j| {
                run(
                    &cfg,
                    &s.generators[0].mrm,
                    pseudo_patient_seed(s.seed, 0, j),
                )
                .unwrap()
            })
            .collect();
        let env = build_envelope(&trajs, &norm.divisors, 1.0).unwrap();
        let binned = bin_times(&norm, 1.0).unwrap();
        assert_eq!(encompassment(&env, &binned, "recovery").unwrap(), 1.0);
    }

    #[test]
    fn noise_pushes_observations_out_of_the_ensemble() {
        let cfg = small_config();
        let mut scores = Vec::new();
        for &sigma in &[0.0, 0.1, 0.3] {
            let s = spec(sigma, 44); // same seed: identical runs and z draws
            let (data, _) = make_pseudo_cohort(&s, &cfg).unwrap();
            let norm = normalize(&data);
            let trajs: Vec<_> = (0..s.patients_per_generator)
                .map(|j| {
                    run(
                        &cfg,
                        &s.generators[0].mrm,
                        pseudo_patient_seed(s.seed, 0, j),
                    )
                    .unwrap()
                })
                .collect();
            let env = build_envelope(&trajs, &norm.divisors, 1.0).unwrap();
            let binned = bin_times(&norm, 1.0).unwrap();
            scores.push(encompassment(&env, &binned, "recovery").unwrap());
        }
        assert_eq!(scores[0], 1.0);
        assert!(scores[1] < scores[0], "sigma 0.1 score {}", scores[1]);
        assert!(scores[2] < scores[1], "sigma 0.3 score {}", scores[2]);
    }

    #[test]
    fn spec_validation() {
        let cfg = small_config();
        let mut s = spec(0.1, 1);
        s.generators.clear();
        assert!(matches!(
            make_pseudo_cohort(&s, &cfg),
            Err(Error::Config(_))
        ));

        let mut s = spec(0.1, 1);
        s.patients_per_generator = 0;
        assert!(matches!(
            make_pseudo_cohort(&s, &cfg),
            Err(Error::Config(_))
        ));

        let mut s = spec(-0.1, 1);
        s.noise_sigma = -0.1;
        assert!(matches!(
            make_pseudo_cohort(&s, &cfg),
            Err(Error::Config(_))
        ));

        let mut s = spec(0.1, 1);
        s.generators[0].group = "  ".into();
        assert!(matches!(
            make_pseudo_cohort(&s, &cfg),
            Err(Error::Config(_))
        ));

        // Schedule reaching past the horizon is refused up front.
        let mut s = spec(0.1, 1);
        s.schedule = SamplingSchedule::new(vec![0.0, 11.0]).unwrap();
        assert!(matches!(
            make_pseudo_cohort(&s, &cfg),
            Err(Error::Config(_))
        ));
    }
}
