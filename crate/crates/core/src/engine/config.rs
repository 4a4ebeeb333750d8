//! Simulation configuration: grid geometry, transport constants, rule
//! saturation constants, outcome thresholds.

use serde::de::{Error as DeError, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{Channel, ALL_CHANNELS, N_CHANNELS};
use crate::error::{Error, Result};

/// One f64 per mediator channel. Serializes as a name-keyed map and requires
/// every channel to be present on load, so a config file cannot silently
/// leave a channel at an unintended default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerChannel(pub [f64; N_CHANNELS]);

impl PerChannel {
    pub fn uniform(v: f64) -> Self {
        PerChannel([v; N_CHANNELS])
    }

    pub fn get(&self, c: Channel) -> f64 {
        self.0[c.index()]
    }

    pub fn set(&mut self, c: Channel, v: f64) {
        self.0[c.index()] = v;
    }
}

impl Serialize for PerChannel {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(N_CHANNELS))?;
        for c in ALL_CHANNELS {
            map.serialize_entry(c.name(), &self.get(c))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for PerChannel {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = PerChannel;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map from channel name to value covering all 10 channels")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<PerChannel, A::Error> {
                let mut values = [f64::NAN; N_CHANNELS];
                while let Some((key, v)) = access.next_entry::<String, f64>()? {
                    let c = Channel::from_name(&key)
                        .ok_or_else(|| A::Error::custom(format!("unknown channel '{key}'")))?;
                    values[c.index()] = v;
                }
                let missing: Vec<&str> = ALL_CHANNELS
                    .iter()
                    .filter(|c| values[c.index()].is_nan())
                    .map(|c| c.name())
                    .collect();
                if !missing.is_empty() {
                    return Err(A::Error::custom(format!(
                        "missing channels: {}",
                        missing.join(", ")
                    )));
                }
                Ok(PerChannel(values))
            }
        }
        de.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    /// Radius in cells of the initial circular injury; 0 means no injury.
    pub injury_radius: usize,
    pub step_count: usize,
    /// Ticks per simulated hour; also the sampling stride for trajectories.
    pub ticks_per_hour: usize,
    /// Fraction of a cell's content shared with each neighbor per tick.
    pub diffusion_coeff: PerChannel,
    /// Multiplicative survival per tick, in (0, 1].
    pub decay_factor: PerChannel,
    /// Expected resting agents recruited per tick at full rule gain.
    pub recruitment_base_rate: f64,
    pub half_saturation: PerChannel,
    pub gain_cap: f64,
    pub death_threshold_frac: f64,
    pub heal_threshold_frac: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid_width: 64,
            grid_height: 64,
            injury_radius: 12,
            step_count: 2000,
            ticks_per_hour: 10,
            // Decay half-life ~3.5 h and a short diffusion length keep
            // mediators concentrated around their sources instead of
            // washing out across the grid.
            diffusion_coeff: PerChannel::uniform(0.06),
            decay_factor: PerChannel::uniform(0.98),
            recruitment_base_rate: 1.0,
            half_saturation: PerChannel::uniform(1.0),
            gain_cap: 4.0,
            death_threshold_frac: 0.80,
            heal_threshold_frac: 0.01,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.grid_width < 8 || self.grid_height < 8 {
            return fail(format!(
                "grid {}x{} below minimum 8x8",
                self.grid_width, self.grid_height
            ));
        }
        let half_min = self.grid_width.min(self.grid_height) as f64 / 2.0;
        if self.injury_radius as f64 >= half_min {
            return fail(format!(
                "injury_radius {} must be < min(grid dims)/2 = {half_min}",
                self.injury_radius
            ));
        }
        if self.step_count == 0 {
            return fail("step_count must be > 0".into());
        }
        if self.ticks_per_hour == 0 {
            return fail("ticks_per_hour must be > 0".into());
        }
        for c in ALL_CHANNELS {
            let d = self.diffusion_coeff.get(c);
            if !(0.0..=0.25).contains(&d) {
                return fail(format!("diffusion_coeff[{c}] = {d} outside [0, 0.25]"));
            }
            let lam = self.decay_factor.get(c);
            if !(lam > 0.0 && lam <= 1.0) {
                return fail(format!("decay_factor[{c}] = {lam} outside (0, 1]"));
            }
            let h = self.half_saturation.get(c);
            if !(h > 0.0) {
                return fail(format!("half_saturation[{c}] = {h} must be > 0"));
            }
        }
        if !(self.recruitment_base_rate >= 0.0) {
            return fail(format!(
                "recruitment_base_rate {} must be >= 0",
                self.recruitment_base_rate
            ));
        }
        if !(self.gain_cap > 0.0) {
            return fail(format!("gain_cap {} must be > 0", self.gain_cap));
        }
        if !(self.heal_threshold_frac > 0.0
            && self.heal_threshold_frac < self.death_threshold_frac
            && self.death_threshold_frac <= 1.0)
        {
            return fail(format!(
                "thresholds must satisfy 0 < heal {} < death {} <= 1",
                self.heal_threshold_frac, self.death_threshold_frac
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_cells(&self) -> usize {
        self.grid_width * self.grid_height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = SimConfig::from_json("{}").unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!(cfg.half_saturation.get(Channel::DAMP), 1.0);
        assert_eq!(cfg.gain_cap, 4.0);
    }

    #[test]
    fn json_roundtrip() {
        let cfg = SimConfig {
            injury_radius: 7,
            rng_seed: 99,
            ..SimConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(SimConfig::from_json("{\"grid_w\": 64}").is_err());
    }

    #[test]
    fn per_channel_map_must_be_complete() {
        let err = SimConfig::from_json("{\"diffusion_coeff\": {\"TNFa\": 0.1}}");
        let msg = format!("{}", err.unwrap_err());
        assert!(msg.contains("missing channels"), "{msg}");
    }

    #[test]
    fn out_of_range_values_rejected() {
        let mut cfg = SimConfig::default();
        cfg.diffusion_coeff.set(Channel::IL6, 0.3);
        assert!(cfg.validate().is_err());

        let mut cfg = SimConfig::default();
        cfg.decay_factor.set(Channel::TNFa, 0.0);
        assert!(cfg.validate().is_err());

        let cfg = SimConfig {
            injury_radius: 32,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());

        let cfg = SimConfig {
            step_count: 0,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
