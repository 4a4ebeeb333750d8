//! Trajectory-space envelopes: per-(channel, bin) min/max bands over a
//! normalized ensemble, and the encompassment score that drives
//! non-falsifiability calibration.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, EXPORTED_CHANNELS, N_EXPORTED};
use crate::cohort::{BinnedDataset, Divisors};
use crate::engine::TrajectoryRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeModel {
    pub bin_width_h: f64,
    pub ensemble_size: usize,
    #[serde(flatten)]
    pub divisors: Divisors,
    /// bands[channel][bin], channels in EXPORTED_CHANNELS order. None means
    /// the ensemble had no sample in that bin.
    pub bands: Vec<Vec<Option<Band>>>,
}

impl EnvelopeModel {
    pub fn n_bins(&self) -> usize {
        self.bands.first().map_or(0, |b| b.len())
    }

    pub fn band(&self, c: Channel, bin: usize) -> Option<Band> {
        let i = exported_index(c)?;
        self.bands
            .get(i)
            .and_then(|row| row.get(bin).copied().flatten())
    }

    /// Inclusive band membership; a bin with no band, or beyond the
    /// envelope's horizon, contains nothing.
    pub fn contains(&self, c: Channel, bin: usize, normalized_value: f64) -> bool {
        match self.band(c, bin) {
            Some(b) => b.lo <= normalized_value && normalized_value <= b.hi,
            None => false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serializes")
    }

    pub fn from_json(text: &str) -> Result<EnvelopeModel> {
        let e: EnvelopeModel = serde_json::from_str(text)?;
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_h > 0.0) {
            return Err(Error::Config(format!(
                "bin width {} must be > 0",
                self.bin_width_h
            )));
        }
        if self.bands.len() != N_EXPORTED {
            return Err(Error::Config(format!(
                "envelope has {} channel rows, expected {N_EXPORTED}",
                self.bands.len()
            )));
        }
        let n = self.n_bins();
        for (i, row) in self.bands.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "channel {} has {} bins, expected {n}",
                    EXPORTED_CHANNELS[i],
                    row.len()
                )));
            }
            for (bin, band) in row.iter().enumerate() {
                if let Some(b) = band {
                    if !(b.lo <= b.hi) {
                        return Err(Error::Config(format!(
                            "band lo {} > hi {} at ({}, bin {bin})",
                            b.lo, b.hi, EXPORTED_CHANNELS[i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn exported_index(c: Channel) -> Option<usize> {
    EXPORTED_CHANNELS.iter().position(|&e| e == c)
}

/// Min/max bands per (channel, bin) over an ensemble of simulated
/// trajectories, normalized by the cohort divisors so envelope and data
/// live in one frame. All trajectories must share a sampling schedule;
/// shorter ones (early deaths) must be prefixes of the longest.
pub fn build_envelope(
    trajectories: &[TrajectoryRecord],
    divisors: &Divisors,
    bin_width_h: f64,
) -> Result<EnvelopeModel> {
    if trajectories.is_empty() {
        return Err(Error::Domain(
            "envelope needs at least one trajectory".into(),
        ));
    }
    if !(bin_width_h > 0.0) {
        return Err(Error::Config(format!(
            "bin width {bin_width_h} must be > 0"
        )));
    }
    let longest = trajectories
        .iter()
        .max_by_key(|t| t.n_samples())
        .expect("non-empty");
    if longest.n_samples() == 0 {
        return Err(Error::Domain("trajectories have no samples".into()));
    }
    for t in trajectories {
        if t.times_h[..] != longest.times_h[..t.n_samples()] {
            return Err(Error::ScheduleMismatch(format!(
                "trajectory for seed {} does not share the ensemble schedule",
                t.seed
            )));
        }
    }
    let max_t = *longest.times_h.last().expect("non-empty schedule");
    let n_bins = (max_t / bin_width_h).floor() as usize + 1;
    let mut bands: Vec<Vec<Option<Band>>> = vec![vec![None; n_bins]; N_EXPORTED];
    for t in trajectories {
        for (ci, series) in t.channels.iter().enumerate() {
            let div = divisors.0[ci];
            for (si, &time) in t.times_h.iter().enumerate() {
                let bin = (time / bin_width_h).floor() as usize;
                let v = series[si] / div;
                let slot = &mut bands[ci][bin];
                *slot = Some(match *slot {
                    None => Band { lo: v, hi: v },
                    Some(b) => Band {
                        lo: b.lo.min(v),
                        hi: b.hi.max(v),
                    },
                });
            }
        }
    }
    Ok(EnvelopeModel {
        bin_width_h,
        ensemble_size: trajectories.len(),
        divisors: *divisors,
        bands,
    })
}

/// Fraction of the group's observations that fall inside their
/// (channel, bin) band. Observations beyond the envelope horizon or in
/// empty bins count as not encompassed.
pub fn encompassment(env: &EnvelopeModel, data: &BinnedDataset, group: &str) -> Result<f64> {
    if !data.groups().iter().any(|g| g == group) {
        return Err(Error::UnknownGroup(group.to_string()));
    }
    let mut total = 0usize;
    let mut inside = 0usize;
    for (o, bin) in &data.observations {
        if o.group != group {
            continue;
        }
        total += 1;
        if env.contains(o.channel, *bin, o.value) {
            inside += 1;
        }
    }
    Ok(inside as f64 / total as f64)
}

/// Observed trajectory space of one cohort group: min/max bands over the
/// group's (already normalized) observations. Bins are sized to the
/// group's own time range.
pub fn group_envelope(data: &BinnedDataset, group: &str) -> Result<EnvelopeModel> {
    if !data.groups().iter().any(|g| g == group) {
        return Err(Error::UnknownGroup(group.to_string()));
    }
    let n_bins = data
        .observations
        .iter()
        .filter(|(o, _)| o.group == group)
        .map(|(_, bin)| bin + 1)
        .max()
        .expect("group has observations");
    let mut bands: Vec<Vec<Option<Band>>> = vec![vec![None; n_bins]; N_EXPORTED];
    let mut n_patients = std::collections::BTreeSet::new();
    for (o, bin) in &data.observations {
        if o.group != group {
            continue;
        }
        n_patients.insert(o.patient_id.as_str());
        let ci = exported_index(o.channel).expect("cohort channels are exported");
        let slot = &mut bands[ci][*bin];
        *slot = Some(match *slot {
            None => Band {
                lo: o.value,
                hi: o.value,
            },
            Some(b) => Band {
                lo: b.lo.min(o.value),
                hi: b.hi.max(o.value),
            },
        });
    }
    Ok(EnvelopeModel {
        bin_width_h: data.bin_width_h,
        ensemble_size: n_patients.len(),
        divisors: data.divisors,
        bands,
    })
}
