//! Cohort ingestion: long-format CSV of per-patient mediator observations,
//! p95 normalization into a unit-free frame, and time binning.

use std::collections::BTreeMap;
use std::io::Write;

use serde::de::Error as DeError;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{Channel, EXPORTED_CHANNELS, N_EXPORTED};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub patient_id: String,
    pub group: String,
    pub time_h: f64,
    pub channel: Channel,
    pub value: f64,
}

/// Validated observation list with a patient → group index.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortDataset {
    pub observations: Vec<Observation>,
    patients: BTreeMap<String, String>,
}

/// Per-channel normalization divisors, in EXPORTED_CHANNELS order.
/// Serializes as `{"divisors":{"TNFa":...,...}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divisors(pub [f64; N_EXPORTED]);

impl Divisors {
    pub fn ones() -> Divisors {
        Divisors([1.0; N_EXPORTED])
    }

    pub fn get(&self, c: Channel) -> f64 {
        let i = EXPORTED_CHANNELS
            .iter()
            .position(|&e| e == c)
            .expect("divisors exist only for exported channels");
        self.0[i]
    }
}

impl Serialize for Divisors {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        struct Inner<'a>(&'a Divisors);
        impl Serialize for Inner<'_> {
            fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
                let mut m = ser.serialize_map(Some(N_EXPORTED))?;
                for (i, c) in EXPORTED_CHANNELS.iter().enumerate() {
                    m.serialize_entry(c.name(), &self.0 .0[i])?;
                }
                m.end()
            }
        }
        let mut outer = ser.serialize_map(Some(1))?;
        outer.serialize_entry("divisors", &Inner(self))?;
        outer.end()
    }
}

impl<'de> Deserialize<'de> for Divisors {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        // Tolerates sibling keys so the type can be #[serde(flatten)]-embedded
        // in manifest documents.
        let outer: BTreeMap<String, serde_json::Value> = Deserialize::deserialize(de)?;
        let inner = outer
            .get("divisors")
            .and_then(|v| v.as_object())
            .ok_or_else(|| D::Error::custom("missing 'divisors' object"))?;
        let mut out = [f64::NAN; N_EXPORTED];
        for (i, c) in EXPORTED_CHANNELS.iter().enumerate() {
            out[i] = inner
                .get(c.name())
                .and_then(|v| v.as_f64())
                .ok_or_else(|| D::Error::custom(format!("missing divisor for {c}")))?;
        }
        Ok(Divisors(out))
    }
}

/// Same observations divided per channel by the cohort p95; divisors kept
/// for round-tripping into and out of the normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDataset {
    pub observations: Vec<Observation>,
    pub patients: BTreeMap<String, String>,
    pub divisors: Divisors,
}

/// Normalized observations tagged with their time-bin index.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset {
    pub observations: Vec<(Observation, usize)>,
    pub patients: BTreeMap<String, String>,
    pub divisors: Divisors,
    pub bin_width_h: f64,
}

impl CohortDataset {
    pub fn from_observations(observations: Vec<Observation>) -> Result<CohortDataset> {
        let mut patients = BTreeMap::new();
        for (i, o) in observations.iter().enumerate() {
            validate_observation(o, i + 1)?;
            if let Some(prev) = patients.insert(o.patient_id.clone(), o.group.clone()) {
                if prev != o.group {
                    return Err(Error::Cohort {
                        line: i + 1,
                        msg: format!(
                            "patient '{}' appears in groups '{prev}' and '{}'",
                            o.patient_id, o.group
                        ),
                    });
                }
            }
        }
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(CohortDataset {
            observations,
            patients,
        })
    }

    /// Parse long-format CSV: `patient_id,group,time_h,channel,value`.
    /// Errors carry 1-based line numbers (line 1 is the header).
    pub fn parse_csv(text: &str) -> Result<CohortDataset> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
        if header.trim() != "patient_id,group,time_h,channel,value" {
            return Err(Error::Cohort {
                line: 1,
                msg: format!("bad header '{header}'"),
            });
        }
        let mut patients: BTreeMap<String, String> = BTreeMap::new();
        let mut observations = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Cohort {
                    line,
                    msg: format!("expected 5 fields, found {}", fields.len()),
                });
            }
            let time_h: f64 = fields[2].trim().parse().map_err(|_| Error::Cohort {
                line,
                msg: format!("bad time_h '{}'", fields[2]),
            })?;
            let channel = Channel::from_name(fields[3].trim())
                .filter(|c| c.is_exported())
                .ok_or_else(|| Error::Cohort {
                    line,
                    msg: format!("unknown channel '{}'", fields[3].trim()),
                })?;
            let value: f64 = fields[4].trim().parse().map_err(|_| Error::Cohort {
                line,
                msg: format!("bad value '{}'", fields[4]),
            })?;
            let o = Observation {
                patient_id: fields[0].trim().to_string(),
                group: fields[1].trim().to_string(),
                time_h,
                channel,
                value,
            };
            validate_observation(&o, line)?;
            if let Some(prev) = patients.insert(o.patient_id.clone(), o.group.clone()) {
                if prev != o.group {
                    return Err(Error::Cohort {
                        line,
                        msg: format!(
                            "patient '{}' appears in groups '{prev}' and '{}'",
                            o.patient_id, o.group
                        ),
                    });
                }
            }
            observations.push(o);
        }
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(CohortDataset {
            observations,
            patients,
        })
    }

    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = self.patients.values().cloned().collect();
        g.sort();
        g.dedup();
        g
    }

    pub fn group_of(&self, patient_id: &str) -> Option<&str> {
        self.patients.get(patient_id).map(|s| s.as_str())
    }

    pub fn n_patients(&self) -> usize {
        self.patients.len()
    }

    pub fn patients(&self) -> &BTreeMap<String, String> {
        &self.patients
    }
}

fn validate_observation(o: &Observation, line: usize) -> Result<()> {
    if !o.channel.is_exported() {
        return Err(Error::Cohort {
            line,
            msg: format!("channel '{}' is not an exported channel", o.channel),
        });
    }
    if !(o.time_h >= 0.0 && o.time_h.is_finite()) {
        return Err(Error::Cohort {
            line,
            msg: format!("time_h {} must be finite and >= 0", o.time_h),
        });
    }
    if !(o.value >= 0.0 && o.value.is_finite()) {
        return Err(Error::Cohort {
            line,
            msg: format!("value {} must be finite and >= 0", o.value),
        });
    }
    Ok(())
}

pub fn write_cohort_csv<W: Write>(out: &mut W, d: &CohortDataset) -> Result<()> {
    writeln!(out, "patient_id,group,time_h,channel,value")?;
    for o in &d.observations {
        writeln!(
            out,
            "{},{},{},{},{}",
            o.patient_id, o.group, o.time_h, o.channel, o.value
        )?;
    }
    Ok(())
}

/// 95th percentile with numpy-style linear interpolation at rank
/// 0.95 * (n - 1) over the sorted values.
pub fn percentile95(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = 0.95 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Divide every value by its channel's cohort-wide p95. Channels with no
/// signal (all zero, or absent) keep divisor 1.0 so zeros stay zeros.
pub fn normalize(d: &CohortDataset) -> NormalizedDataset {
    let mut divisors = [1.0; N_EXPORTED];
    for (i, c) in EXPORTED_CHANNELS.iter().enumerate() {
        let values: Vec<f64> = d
            .observations
            .iter()
            .filter(|o| o.channel == *c)
            .map(|o| o.value)
            .collect();
        if !values.is_empty() {
            let p = percentile95(&values);
            if p > 0.0 {
                divisors[i] = p;
            }
        }
    }
    let divisors = Divisors(divisors);
    let observations = d
        .observations
        .iter()
        .map(|o| Observation {
            value: o.value / divisors.get(o.channel),
            ..o.clone()
        })
        .collect();
    NormalizedDataset {
        observations,
        patients: d.patients.clone(),
        divisors,
    }
}

/// Tag each observation with bin index floor(time_h / bin_width_h).
/// A time exactly on a boundary goes to the upper bin (floor convention:
/// 24.0 at width 24 is bin 1). Observations are kept, never aggregated.
pub fn bin_times(d: &NormalizedDataset, bin_width_h: f64) -> Result<BinnedDataset> {
    if !(bin_width_h > 0.0) {
        return Err(Error::Config(format!(
            "bin width {bin_width_h} must be > 0"
        )));
    }
    let observations = d
        .observations
        .iter()
        .map(|o| (o.clone(), (o.time_h / bin_width_h).floor() as usize))
        .collect();
    Ok(BinnedDataset {
        observations,
        patients: d.patients.clone(),
        divisors: d.divisors,
        bin_width_h,
    })
}

impl BinnedDataset {
    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = self.patients.values().cloned().collect();
        g.sort();
        g.dedup();
        g
    }

    /// Stable content digest for provenance manifests.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (o, bin) in &self.observations {
            h.update(o.patient_id.as_bytes());
            h.update(o.group.as_bytes());
            h.update(o.time_h.to_le_bytes());
            h.update(o.channel.name().as_bytes());
            h.update(o.value.to_le_bytes());
            h.update((*bin as u64).to_le_bytes());
        }
        h.update(self.bin_width_h.to_le_bytes());
        let digest = h.finalize();
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}
