//! The rule matrix: 10 rules × 10 mediator channels, entries in [-2, 2].
//!
//! Rows weight how strongly each mediator drives a behavioral rule; the flat
//! row-major vector of all 100 entries is the genome searched by calibration
//! and boundary mapping. Identity is a content hash so the same matrix gets
//! the same id no matter where or when it was produced.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{Channel, ALL_CHANNELS, N_CHANNELS};
use crate::error::{Error, Result};
use crate::rng::{gaussian, rng_from};

pub const N_RULES: usize = 10;
pub const GENOME_LEN: usize = N_RULES * N_CHANNELS;
pub const ENTRY_MIN: f64 = -2.0;
pub const ENTRY_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    PmnActivation,
    PmnSecretion,
    Chemotaxis,
    MonoActivation,
    MonoProSecretion,
    MonoAntiSecretion,
    LymphBalance,
    DamageGrowth,
    Healing,
    Recruitment,
}

pub const ALL_RULES: [Rule; N_RULES] = [
    Rule::PmnActivation,
    Rule::PmnSecretion,
    Rule::Chemotaxis,
    Rule::MonoActivation,
    Rule::MonoProSecretion,
    Rule::MonoAntiSecretion,
    Rule::LymphBalance,
    Rule::DamageGrowth,
    Rule::Healing,
    Rule::Recruitment,
];

impl Rule {
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Rule::PmnActivation => "pmn_activation",
            Rule::PmnSecretion => "pmn_secretion",
            Rule::Chemotaxis => "chemotaxis",
            Rule::MonoActivation => "mono_activation",
            Rule::MonoProSecretion => "mono_pro_secretion",
            Rule::MonoAntiSecretion => "mono_anti_secretion",
            Rule::LymphBalance => "lymph_balance",
            Rule::DamageGrowth => "damage_growth",
            Rule::Healing => "healing",
            Rule::Recruitment => "recruitment",
        }
    }
}

/// Flat row-major view of a matrix; the search-space coordinate.
pub type Genome = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Mrm {
    entries: [[f64; N_CHANNELS]; N_RULES],
}

impl Mrm {
    pub fn new(entries: [[f64; N_CHANNELS]; N_RULES]) -> Result<Self> {
        let m = Mrm { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (row, r) in self.entries.iter().enumerate() {
            for (col, &value) in r.iter().enumerate() {
                if !(ENTRY_MIN..=ENTRY_MAX).contains(&value) || !value.is_finite() {
                    return Err(Error::MrmRange { row, col, value });
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, rule: Rule, channel: Channel) -> f64 {
        self.entries[rule.index()][channel.index()]
    }

    pub fn row(&self, rule: Rule) -> &[f64; N_CHANNELS] {
        &self.entries[rule.index()]
    }

    pub fn entries(&self) -> &[[f64; N_CHANNELS]; N_RULES] {
        &self.entries
    }

    /// Content hash: first 16 bytes of sha256 over the row-major
    /// little-endian f64 image, as 32 hex chars.
    pub fn mrm_id(&self) -> String {
        let mut h = Sha256::new();
        for row in &self.entries {
            for &v in row {
                h.update(v.to_le_bytes());
            }
        }
        let digest = h.finalize();
        let mut id = String::with_capacity(32);
        for b in &digest[..16] {
            id.push_str(&format!("{b:02x}"));
        }
        id
    }

    /// Copy with one rule row scaled by `factor`; entries clamp to the
    /// admissible range.
    pub fn scale_row(&self, rule: Rule, factor: f64) -> Result<Mrm> {
        let mut entries = self.entries;
        for v in entries[rule.index()].iter_mut() {
            *v = (*v * factor).clamp(ENTRY_MIN, ENTRY_MAX);
        }
        Mrm::new(entries)
    }

    pub fn encode(&self) -> Genome {
        self.entries.iter().flatten().copied().collect()
    }

    pub fn decode(genome: &[f64]) -> Result<Mrm> {
        if genome.len() != GENOME_LEN {
            return Err(Error::GenomeLength(genome.len()));
        }
        let mut entries = [[0.0; N_CHANNELS]; N_RULES];
        for (i, &v) in genome.iter().enumerate() {
            entries[i / N_CHANNELS][i % N_CHANNELS] = v;
        }
        Mrm::new(entries)
    }

    /// Gaussian jitter: each entry independently mutates with probability
    /// `per_gene_prob`, receiving additive noise of scale `sigma`, then
    /// clamps to the entry box. Draw order is row-major; each gene consumes
    /// one uniform for the gate and, if it fires, one Box-Muller pair.
    pub fn perturb_with(&self, sigma: f64, per_gene_prob: f64, rng: &mut impl Rng) -> Mrm {
        let mut entries = self.entries;
        for row in entries.iter_mut() {
            for v in row.iter_mut() {
                if rng.gen::<f64>() < per_gene_prob {
                    *v = (*v + sigma * gaussian(rng)).clamp(ENTRY_MIN, ENTRY_MAX);
                }
            }
        }
        Mrm { entries }
    }

    pub fn perturb(&self, sigma: f64, per_gene_prob: f64, seed: u64) -> Mrm {
        let mut rng = rng_from(seed, &["perturb"]);
        self.perturb_with(sigma, per_gene_prob, &mut rng)
    }

    pub fn to_json(&self) -> String {
        let doc = MrmDoc::from(self);
        serde_json::to_string_pretty(&doc).expect("matrix serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Mrm> {
        let doc: MrmDoc = serde_json::from_str(text)?;
        doc.into_mrm()
    }
}

/// On-disk shape: named axes plus the dense entry grid. Axis names are
/// checked on load so a file written against a different schema is rejected
/// instead of silently reinterpreted.
#[derive(Serialize, Deserialize)]
pub struct MrmDoc {
    pub rules: Vec<String>,
    pub mediators: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl From<&Mrm> for MrmDoc {
    fn from(m: &Mrm) -> Self {
        MrmDoc {
            rules: ALL_RULES.iter().map(|r| r.name().to_string()).collect(),
            mediators: ALL_CHANNELS.iter().map(|c| c.name().to_string()).collect(),
            entries: m.entries.iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl MrmDoc {
    pub fn into_mrm(self) -> Result<Mrm> {
        if self.rules.len() != N_RULES || self.mediators.len() != N_CHANNELS {
            return Err(Error::Config(format!(
                "matrix document names {} rules and {} mediators, expected {N_RULES} and {N_CHANNELS}",
                self.rules.len(),
                self.mediators.len()
            )));
        }
        for (i, name) in self.rules.iter().enumerate() {
            if name != ALL_RULES[i].name() {
                return Err(Error::Config(format!(
                    "rule {i} named '{name}', expected '{}'",
                    ALL_RULES[i].name()
                )));
            }
        }
        for (i, name) in self.mediators.iter().enumerate() {
            if name != ALL_CHANNELS[i].name() {
                return Err(Error::Config(format!(
                    "mediator {i} named '{name}', expected '{}'",
                    ALL_CHANNELS[i].name()
                )));
            }
        }
        if self.entries.len() != N_RULES || self.entries.iter().any(|r| r.len() != N_CHANNELS) {
            return Err(Error::MrmShape {
                rows: self.entries.len(),
                cols: self.entries.first().map_or(0, |r| r.len()),
            });
        }
        let mut entries = [[0.0; N_CHANNELS]; N_RULES];
        for (i, row) in self.entries.iter().enumerate() {
            entries[i].copy_from_slice(row);
        }
        Mrm::new(entries)
    }
}

const BASELINE_JSON: &str = include_str!("../assets/baseline_mrm.json");

/// The hand-written starting matrix: literature-signed links only, ternary
/// entries. Everything left at zero is open for search to fill in.
pub fn baseline() -> Mrm {
    Mrm::from_json(BASELINE_JSON).expect("shipped baseline asset must parse")
}
