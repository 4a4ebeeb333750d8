//! Stochastic tissue-inflammation simulator.
//!
//! A run takes a config, a rule matrix, and a seed, and yields one
//! multi-channel trajectory: grid-mean concentrations of the nine exported
//! mediators plus an oxygen-deficit series, sampled hourly, with a terminal
//! outcome label.

pub mod config;
pub mod grid;
pub mod state;
pub mod step;

pub use config::{PerChannel, SimConfig};
pub use grid::{diffuse_decay, Grid};
pub use state::{init_world, Agent, AgentKind, SimState};
pub use step::{evaluate_rules, step, MAX_AGENTS, SECRETION_UNIT};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, EXPORTED_CHANNELS, N_EXPORTED};
use crate::error::{Error, Result};
use crate::mrm::Mrm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Healed,
    Unresolved,
    Dead,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Healed => "Healed",
            Outcome::Unresolved => "Unresolved",
            Outcome::Dead => "Dead",
        })
    }
}

impl Outcome {
    pub fn from_name(name: &str) -> Option<Outcome> {
        match name {
            "Healed" => Some(Outcome::Healed),
            "Unresolved" => Some(Outcome::Unresolved),
            "Dead" => Some(Outcome::Dead),
            _ => None,
        }
    }
}

/// One replicate's sampled output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub mrm_id: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub times_h: Vec<f64>,
    /// Grid-mean series per exported channel, in EXPORTED_CHANNELS order.
    pub channels: Vec<Vec<f64>>,
    /// Mean damage fraction at each sample time.
    pub deficit: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn channel_series(&self, c: Channel) -> Option<&[f64]> {
        EXPORTED_CHANNELS
            .iter()
            .position(|&e| e == c)
            .map(|i| self.channels[i].as_slice())
    }

    pub fn n_samples(&self) -> usize {
        self.times_h.len()
    }
}

/// Dead if the deficit ever reaches the death threshold, Healed if it ends
/// below the heal threshold, Unresolved otherwise (the persistent-illness
/// group).
pub fn classify_outcome(deficit_series: &[f64], config: &SimConfig) -> Result<Outcome> {
    let Some(&last) = deficit_series.last() else {
        return Err(Error::Domain("empty deficit series".into()));
    };
    let max = deficit_series.iter().copied().fold(f64::MIN, f64::max);
    if max >= config.death_threshold_frac {
        Ok(Outcome::Dead)
    } else if last < config.heal_threshold_frac {
        Ok(Outcome::Healed)
    } else {
        Ok(Outcome::Unresolved)
    }
}

/// Simulate `step_count` ticks, sampling exported channel means and the
/// deficit at hour 0 and every `ticks_per_hour` ticks after. Stops early
/// once a sampled deficit crosses the death threshold.
pub fn run(config: &SimConfig, mrm: &Mrm, seed: u64) -> Result<TrajectoryRecord> {
    let mut state = init_world(config, mrm, seed)?;
    let mut times_h = Vec::new();
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); N_EXPORTED];
    let mut deficit = Vec::new();

    let sample = |state: &SimState,
                  times_h: &mut Vec<f64>,
                  channels: &mut Vec<Vec<f64>>,
                  deficit: &mut Vec<f64>| {
        times_h.push(state.tick as f64 / config.ticks_per_hour as f64);
        for (k, c) in EXPORTED_CHANNELS.iter().enumerate() {
            channels[k].push(state.field(*c).mean());
        }
        let d = state.deficit();
        deficit.push(d);
        d
    };

    let mut d = sample(&state, &mut times_h, &mut channels, &mut deficit);
    if d < config.death_threshold_frac {
        for t in 1..=config.step_count {
            step(&mut state, mrm, config);
            if t % config.ticks_per_hour == 0 {
                d = sample(&state, &mut times_h, &mut channels, &mut deficit);
                if d >= config.death_threshold_frac {
                    break;
                }
            }
        }
    }

    Ok(TrajectoryRecord {
        mrm_id: mrm.mrm_id(),
        seed,
        outcome: classify_outcome(&deficit, config)?,
        times_h,
        channels,
        deficit,
    })
}

/// Pseudo-channel name used for the deficit column in trajectory CSV.
pub const DEFICIT_CHANNEL: &str = "OXY_DEFICIT";

/// CSV export: `mrm_id,seed,outcome,time_h,channel,value`, one row per
/// (sample, channel), deficit last under the OXY_DEFICIT pseudo-channel.
pub fn write_trajectory_csv<W: Write>(out: &mut W, records: &[TrajectoryRecord]) -> Result<()> {
    writeln!(out, "mrm_id,seed,outcome,time_h,channel,value")?;
    for r in records {
        for (si, &t) in r.times_h.iter().enumerate() {
            for (k, c) in EXPORTED_CHANNELS.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.mrm_id, r.seed, r.outcome, t, c, r.channels[k][si]
                )?;
            }
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.mrm_id, r.seed, r.outcome, t, DEFICIT_CHANNEL, r.deficit[si]
            )?;
        }
    }
    Ok(())
}
