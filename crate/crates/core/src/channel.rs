//! Mediator channels tracked on the grid.
//!
//! Nine cytokines are exported in recorded trajectories; DAMP is the
//! endogenous damage signal and stays internal to the simulation. Order is
//! fixed — serialized matrices and trajectory files index by it.

use serde::{Deserialize, Serialize};

pub const N_CHANNELS: usize = 10;
pub const N_EXPORTED: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    TNFa,
    IL1a,
    IL1ra,
    IL6,
    IL4,
    IL8,
    IL10,
    GCSF,
    IFNg,
    DAMP,
}

pub const ALL_CHANNELS: [Channel; N_CHANNELS] = [
    Channel::TNFa,
    Channel::IL1a,
    Channel::IL1ra,
    Channel::IL6,
    Channel::IL4,
    Channel::IL8,
    Channel::IL10,
    Channel::GCSF,
    Channel::IFNg,
    Channel::DAMP,
];

/// The channels written to trajectory output (everything except DAMP).
pub const EXPORTED_CHANNELS: [Channel; N_EXPORTED] = [
    Channel::TNFa,
    Channel::IL1a,
    Channel::IL1ra,
    Channel::IL6,
    Channel::IL4,
    Channel::IL8,
    Channel::IL10,
    Channel::GCSF,
    Channel::IFNg,
];

impl Channel {
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Channel::TNFa => "TNFa",
            Channel::IL1a => "IL1a",
            Channel::IL1ra => "IL1ra",
            Channel::IL6 => "IL6",
            Channel::IL4 => "IL4",
            Channel::IL8 => "IL8",
            Channel::IL10 => "IL10",
            Channel::GCSF => "GCSF",
            Channel::IFNg => "IFNg",
            Channel::DAMP => "DAMP",
        }
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        ALL_CHANNELS.iter().copied().find(|c| c.name() == name)
    }

    pub fn is_exported(self) -> bool {
        self != Channel::DAMP
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
