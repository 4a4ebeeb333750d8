//! World state and initial-condition construction.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{Channel, N_CHANNELS};
use crate::engine::config::SimConfig;
use crate::engine::grid::Grid;
use crate::error::Result;
use crate::mrm::Mrm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Pmn,
    Monocyte,
    Lymphocyte,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub kind: AgentKind,
    pub x: usize,
    pub y: usize,
    pub age: u32,
    pub activation: f64,
}

/// Full simulation state. Everything that influences the future is in here
/// (including the PRNG), so stepping is a pure function of
/// (state, mrm, config).
#[derive(Debug, Clone)]
pub struct SimState {
    pub width: usize,
    pub height: usize,
    /// Per-cell structural damage in [0, 1], row-major.
    pub damage: Vec<f64>,
    /// Per-cell oxygenation, always 100 * (1 - damage).
    pub oxygen: Vec<f64>,
    /// One mediator field per channel, indexed by Channel order.
    pub fields: Vec<Grid>,
    pub agents: Vec<Agent>,
    pub tick: u64,
    pub rng: ChaCha8Rng,
    /// Diffusion scratch; carries no semantic content between ticks.
    pub(crate) scratch: Vec<f64>,
    /// Post-transport snapshot of all fields (channel-major). Every rule
    /// gain in a tick reads this image, so in-tick deposits stay invisible
    /// until the next tick and agent evaluation order cannot matter.
    pub(crate) pre: Vec<f64>,
}

impl PartialEq for SimState {
    fn eq(&self, other: &Self) -> bool {
        // Scratch buffers are excluded: they are overwritten before use.
        self.width == other.width
            && self.height == other.height
            && self.damage == other.damage
            && self.oxygen == other.oxygen
            && self.fields == other.fields
            && self.agents == other.agents
            && self.tick == other.tick
            && self.rng == other.rng
    }
}

impl SimState {
    /// Blank world: no damage, no mediators, no agents.
    pub fn blank(width: usize, height: usize, seed: u64) -> SimState {
        let n = width * height;
        SimState {
            width,
            height,
            damage: vec![0.0; n],
            oxygen: vec![100.0; n],
            fields: (0..N_CHANNELS)
                .map(|_| Grid::zeros(width, height))
                .collect(),
            agents: Vec::new(),
            tick: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            scratch: vec![0.0; n],
            pre: vec![0.0; n * N_CHANNELS],
        }
    }

    pub fn field(&self, c: Channel) -> &Grid {
        &self.fields[c.index()]
    }

    pub fn field_mut(&mut self, c: Channel) -> &mut Grid {
        &mut self.fields[c.index()]
    }

    /// Mean damage over the grid; the exported organ-dysfunction proxy.
    pub fn deficit(&self) -> f64 {
        self.damage.iter().sum::<f64>() / self.damage.len() as f64
    }

    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }
}

/// Build the initial world: centered circular injury (damage 1, one unit of
/// DAMP per injured cell) and `recruitment_base_rate * 10` resting agents
/// placed uniformly at random.
///
/// PRNG draws, in order: per initial agent, x, then y, then the kind
/// uniform.
pub fn init_world(config: &SimConfig, mrm: &Mrm, seed: u64) -> Result<SimState> {
    config.validate()?;
    mrm.validate()?;
    let (w, h) = (config.grid_width, config.grid_height);
    let mut state = SimState::blank(w, h, seed);

    if config.injury_radius > 0 {
        let (cx, cy) = (w as isize / 2, h as isize / 2);
        let r2 = (config.injury_radius * config.injury_radius) as isize;
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as isize - cx, y as isize - cy);
                if dx * dx + dy * dy <= r2 {
                    let i = y * w + x;
                    state.damage[i] = 1.0;
                    state.oxygen[i] = 0.0;
                    state.fields[Channel::DAMP.index()].data[i] = 1.0;
                }
            }
        }
    }

    let n_agents = (config.recruitment_base_rate * 10.0).round() as usize;
    for _ in 0..n_agents {
        let x = state.rng.gen_range(0..w);
        let y = state.rng.gen_range(0..h);
        let kind = draw_kind(&mut state.rng);
        state.agents.push(Agent {
            kind,
            x,
            y,
            age: 0,
            activation: 0.0,
        });
    }
    Ok(state)
}

/// Recruitment kind mix: mostly neutrophils, some monocytes, few
/// lymphocytes. One uniform draw.
pub(crate) fn draw_kind(rng: &mut impl Rng) -> AgentKind {
    let u: f64 = rng.gen();
    if u < 0.6 {
        AgentKind::Pmn
    } else if u < 0.9 {
        AgentKind::Monocyte
    } else {
        AgentKind::Lymphocyte
    }
}
