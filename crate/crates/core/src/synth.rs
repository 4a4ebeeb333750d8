//! Synthetic cohort generation: draw viable matrices from a region model,
//! simulate one patient per draw, resample onto a sampling schedule, and
//! export labeled datasets as JSONL or long-format CSV.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{EXPORTED_CHANNELS, N_EXPORTED};
use crate::cohort::Divisors;
use crate::engine::{run, Outcome, SimConfig, TrajectoryRecord, DEFICIT_CHANNEL};
use crate::envelope::{build_envelope, EnvelopeModel};
use crate::error::{Error, Result};
use crate::explore::{sample_viable, RegionModel};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    times_h: Vec<f64>,
}

impl SamplingSchedule {
    pub fn new(times_h: Vec<f64>) -> Result<SamplingSchedule> {
        if times_h.is_empty() {
            return Err(Error::Config(
                "schedule must contain at least one time".into(),
            ));
        }
        for (i, &t) in times_h.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!(
                    "schedule time {t} at position {i} must be finite and >= 0"
                )));
            }
            if i > 0 && t <= times_h[i - 1] {
                return Err(Error::Config(format!(
                    "schedule times must be strictly increasing; position {i} \
                     holds {t} after {}",
                    times_h[i - 1]
                )));
            }
        }
        Ok(SamplingSchedule { times_h })
    }

    /// Hourly samples over the first 200 hours (201 points).
    pub fn default_hourly() -> SamplingSchedule {
        SamplingSchedule {
            times_h: (0..=200).map(|t| t as f64).collect(),
        }
    }

    pub fn times_h(&self) -> &[f64] {
        &self.times_h
    }

    pub fn len(&self) -> usize {
        self.times_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_h.is_empty()
    }

    /// The schedule must end within the simulated horizon.
    pub fn check_horizon(&self, config: &SimConfig) -> Result<()> {
        let horizon = config.step_count as f64 / config.ticks_per_hour as f64;
        let last = *self.times_h.last().expect("schedule is non-empty");
        if last > horizon {
            return Err(Error::Config(format!(
                "schedule reaches {last} h but the simulation horizon is {horizon} h"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub patient_id: String,
    pub mrm_id: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub group: String,
    pub times_h: Vec<f64>,
    /// Channel-name keyed series; always the nine exported channels.
    pub channels: BTreeMap<String, Vec<f64>>,
    pub deficit: Vec<f64>,
}

impl SyntheticRecord {
    fn to_trajectory(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            mrm_id: self.mrm_id.clone(),
            seed: self.seed,
            outcome: self.outcome,
            times_h: self.times_h.clone(),
            channels: EXPORTED_CHANNELS
                .iter()
                .map(|c| self.channels[c.name()].clone())
                .collect(),
            deficit: self.deficit.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.times_h.len();
        if self.channels.len() != N_EXPORTED {
            return Err(Error::Domain(format!(
                "record {} carries {} channels, expected {N_EXPORTED}",
                self.patient_id,
                self.channels.len()
            )));
        }
        for c in EXPORTED_CHANNELS {
            match self.channels.get(c.name()) {
                Some(series) if series.len() == n => {}
                Some(series) => {
                    return Err(Error::Domain(format!(
                        "record {} channel {c}: {} samples for {n} times",
                        self.patient_id,
                        series.len()
                    )))
                }
                None => {
                    return Err(Error::Domain(format!(
                        "record {} lacks channel {c}",
                        self.patient_id
                    )))
                }
            }
        }
        if self.deficit.len() != n {
            return Err(Error::Domain(format!(
                "record {} deficit length {} != {n}",
                self.patient_id,
                self.deficit.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub records: Vec<SyntheticRecord>,
    /// Normalization frame inherited from the region's calibration.
    pub divisors: Divisors,
    pub group: String,
}

/// Index of the recorded sample nearest to `t`; ties resolve to the
/// earlier sample, times past the recording clamp to the last one.
pub(crate) fn nearest_sample(times: &[f64], t: f64) -> usize {
    debug_assert!(!times.is_empty());
    let mut best = 0;
    let mut best_d = (t - times[0]).abs();
    for (i, &rt) in times.iter().enumerate().skip(1) {
        let d = (t - rt).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Simulate `n` patients from freshly sampled viable matrices and resample
/// each trajectory onto `schedule` by nearest recorded sample (no
/// interpolation). Patient seeds derive from (seed, "patient", index).
pub fn generate_cohort(
    region: &RegionModel,
    n: usize,
    schedule: &SamplingSchedule,
    config: &SimConfig,
    seed: u64,
) -> Result<SyntheticDataset> {
    config.validate()?;
    schedule.check_horizon(config)?;
    let genomes = sample_viable(region, n, seed)?;
    let mut records = Vec::with_capacity(n);
    for (i, mrm) in genomes.iter().enumerate() {
        let run_seed = derive_seed(seed, &["patient", &i.to_string()]);
        let traj = run(config, mrm, run_seed)?;
        let picks: Vec<usize> = schedule
            .times_h()
            .iter()
            .map(|&t| nearest_sample(&traj.times_h, t))
            .collect();
        let channels: BTreeMap<String, Vec<f64>> = EXPORTED_CHANNELS
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let series: Vec<f64> = picks.iter().map(|&k| traj.channels[ci][k]).collect();
                (c.name().to_string(), series)
            })
            .collect();
        records.push(SyntheticRecord {
            patient_id: format!("s{i:04}"),
            mrm_id: mrm.mrm_id(),
            seed: run_seed,
            outcome: traj.outcome,
            group: region.group.clone(),
            times_h: schedule.times_h().to_vec(),
            channels,
            deficit: picks.iter().map(|&k| traj.deficit[k]).collect(),
        });
    }
    Ok(SyntheticDataset {
        records,
        divisors: region.divisors,
        group: region.group.clone(),
    })
}

/// Per-group envelopes over the dataset's records, normalized by the
/// dataset's calibration divisors.
pub fn trajectory_space(
    ds: &SyntheticDataset,
    bin_width_h: f64,
) -> Result<BTreeMap<String, EnvelopeModel>> {
    if ds.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut by_group: BTreeMap<&str, Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in &ds.records {
        by_group
            .entry(&r.group)
            .or_default()
            .push(r.to_trajectory());
    }
    by_group
        .into_iter()
        .map(|(g, trajs)| {
            build_envelope(&trajs, &ds.divisors, bin_width_h).map(|e| (g.to_string(), e))
        })
        .collect()
}

/// One record object per line.
pub fn export_jsonl<W: Write>(ds: &SyntheticDataset, out: &mut W) -> Result<()> {
    for r in &ds.records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

pub fn import_jsonl<R: BufRead>(input: R) -> Result<Vec<SyntheticRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SyntheticRecord = serde_json::from_str(&line)?;
        r.validate()?;
        records.push(r);
    }
    Ok(records)
}

pub const SYNTH_CSV_HEADER: &str = "patient_id,mrm_id,seed,group,outcome,time_h,channel,value";

/// Long format: per patient, per schedule time, one row per exported
/// channel plus one OXY_DEFICIT row.
pub fn export_csv<W: Write>(ds: &SyntheticDataset, out: &mut W) -> Result<()> {
    writeln!(out, "{SYNTH_CSV_HEADER}")?;
    for r in &ds.records {
        for (si, &t) in r.times_h.iter().enumerate() {
            for c in EXPORTED_CHANNELS {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.patient_id,
                    r.mrm_id,
                    r.seed,
                    r.group,
                    r.outcome,
                    t,
                    c.name(),
                    r.channels[c.name()][si]
                )?;
            }
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.patient_id,
                r.mrm_id,
                r.seed,
                r.group,
                r.outcome,
                t,
                DEFICIT_CHANNEL,
                r.deficit[si]
            )?;
        }
    }
    Ok(())
}

pub fn import_csv(text: &str) -> Result<Vec<SyntheticRecord>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
    if header.trim() != SYNTH_CSV_HEADER {
        return Err(Error::Cohort {
            line: 1,
            msg: format!("bad header '{header}'"),
        });
    }
    // Patients appear in contiguous blocks; keep first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut partial: BTreeMap<String, SyntheticRecord> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Cohort {
                line,
                msg: format!("expected 8 fields, found {}", f.len()),
            });
        }
        let bad = |what: &str| Error::Cohort {
            line,
            msg: format!("bad {what}"),
        };
        let seed: u64 = f[2].trim().parse().map_err(|_| bad("seed"))?;
        let outcome = Outcome::from_name(f[4].trim()).ok_or_else(|| bad("outcome"))?;
        let t: f64 = f[5].trim().parse().map_err(|_| bad("time_h"))?;
        let value: f64 = f[7].trim().parse().map_err(|_| bad("value"))?;
        let channel = f[6].trim();
        let pid = f[0].trim().to_string();
        let rec = partial.entry(pid.clone()).or_insert_with(|| {
            order.push(pid.clone());
            SyntheticRecord {
                patient_id: pid.clone(),
                mrm_id: f[1].trim().to_string(),
                seed,
                outcome,
                group: f[3].trim().to_string(),
                times_h: Vec::new(),
                channels: EXPORTED_CHANNELS
                    .iter()
                    .map(|c| (c.name().to_string(), Vec::new()))
                    .collect(),
                deficit: Vec::new(),
            }
        });
        if rec.mrm_id != f[1].trim() || rec.seed != seed || rec.group != f[3].trim() {
            return Err(Error::Cohort {
                line,
                msg: format!("patient '{pid}' changes identity mid-file"),
            });
        }
        if rec.times_h.last() != Some(&t) {
            rec.times_h.push(t);
        }
        if channel == DEFICIT_CHANNEL {
            rec.deficit.push(value);
        } else {
            let series = rec.channels.get_mut(channel).ok_or_else(|| Error::Cohort {
                line,
                msg: format!("unknown channel '{channel}'"),
            })?;
            series.push(value);
        }
    }
    if partial.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut records = Vec::with_capacity(order.len());
    for pid in order {
        let r = partial.remove(&pid).expect("tracked patient");
        r.validate()?;
        records.push(r);
    }
    Ok(records)
}

pub fn write_jsonl_file(ds: &SyntheticDataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    export_jsonl(ds, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_jsonl_file(path: &Path) -> Result<Vec<SyntheticRecord>> {
    let file = std::fs::File::open(path)?;
    import_jsonl(std::io::BufReader::new(file))
}
