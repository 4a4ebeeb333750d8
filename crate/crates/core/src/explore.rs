//! Committee-based active learning over rule-matrix space. A bagged
//! committee of centroid-distance classifiers approximates the viable
//! region learned by calibration; query-by-committee (vote entropy)
//! spends the simulation budget where members disagree, which
//! concentrates samples near the viability boundary. The resulting region
//! model supports rejection sampling of fresh viable matrices.
//!
//! RNG contract. Committee member i draws from
//! derive_seed(seed, ["member", i]): first n bootstrap indices, then the
//! feature shuffle. Candidate pools for iteration t draw from
//! derive_seed(rng_seed, ["pool", t]): jitter picks first (viable index,
//! then per-gene perturbation), then Latin-hypercube rows. Evaluation
//! seeds come from the calibration master seed, so a matrix scores the
//! same here as it would in the GA.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{fitness, write_atomic, ViableArchive};
use crate::cohort::{BinnedDataset, Divisors};
use crate::engine::SimConfig;
use crate::error::{Error, Result};
use crate::mrm::{Mrm, GENOME_LEN};
use crate::rng::{derive_seed, latin_hypercube, rng_from};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlParams {
    /// Committee size B; must be odd and >= 3 so votes cannot tie.
    pub committee_size: usize,
    pub pool_size: usize,
    /// Points acquired (and simulated) per iteration.
    pub batch_size: usize,
    /// Gaussian sigma for jittered pool candidates and region sampling.
    pub jitter_sigma: f64,
    /// Genome coordinates visible to each committee member.
    pub feature_count: usize,
    pub rng_seed: u64,
}

impl Default for AlParams {
    fn default() -> AlParams {
        AlParams {
            committee_size: 25,
            pool_size: 256,
            batch_size: 8,
            jitter_sigma: 0.2,
            feature_count: 30,
            rng_seed: 0,
        }
    }
}

impl AlParams {
    pub fn validate(&self) -> Result<()> {
        if self.committee_size < 3 || self.committee_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "committee_size {} must be odd and >= 3",
                self.committee_size
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.pool_size < self.batch_size {
            return Err(Error::Config(format!(
                "pool_size {} must be >= batch_size {}",
                self.pool_size, self.batch_size
            )));
        }
        if self.feature_count == 0 || self.feature_count > GENOME_LEN {
            return Err(Error::Config(format!(
                "feature_count {} must be in 1..={GENOME_LEN}",
                self.feature_count
            )));
        }
        if !(self.jitter_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "jitter_sigma {} must be >= 0",
                self.jitter_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ga,
    Al { iteration: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub mrm: Mrm,
    pub score: f64,
    pub viable: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemberModel {
    /// Bootstrap resample saw one class only.
    Constant { class: bool },
    /// Viable iff within Chebyshev `radius` of the viable-class centroid
    /// on the member's feature subset. A distance threshold (rather than
    /// a second centroid) is what an enclosing region demands: nonviable
    /// points surround the viable cluster, so their centroid collapses
    /// onto the viable one and carries no signal. The max-coordinate
    /// metric makes a member's vote flip on the single gene that leaves
    /// the region, so disagreement tracks the boundary gene-by-gene.
    Sphere { centroid: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitteeMember {
    pub features: Vec<usize>,
    pub model: MemberModel,
}

impl CommitteeMember {
    pub fn predict(&self, genome: &[f64]) -> bool {
        match &self.model {
            MemberModel::Constant { class } => *class,
            MemberModel::Sphere { centroid, radius } => {
                let mut d = 0.0f64;
                for (k, &f) in self.features.iter().enumerate() {
                    d = d.max((genome[f] - centroid[k]).abs());
                }
                d <= *radius
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateCommittee {
    pub members: Vec<CommitteeMember>,
}

impl SurrogateCommittee {
    pub fn vote_fraction(&self, mrm: &Mrm) -> f64 {
        let g = mrm.encode();
        let votes = self.members.iter().filter(|m| m.predict(&g)).count();
        votes as f64 / self.members.len() as f64
    }

    pub fn predict(&self, mrm: &Mrm) -> bool {
        self.vote_fraction(mrm) >= 0.5
    }
}

/// Train B bagged members on bootstrap resamples, each restricted to a
/// random feature subset. Each member fits a viable-class centroid and an
/// acceptance radius halfway between the classes' mean distances to it;
/// training is one pass per class, O(n * d) per member.
pub fn train_committee(
    points: &[LabeledPoint],
    b: usize,
    feature_count: usize,
    seed: u64,
) -> Result<SurrogateCommittee> {
    if b < 3 || b.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "committee size {b} must be odd and >= 3"
        )));
    }
    let n_viable = points.iter().filter(|p| p.viable).count();
    if n_viable == 0 || n_viable == points.len() {
        return Err(Error::DegenerateLabels);
    }
    let genomes: Vec<Vec<f64>> = points.iter().map(|p| p.mrm.encode()).collect();
    let members = (0..b)
        .map(|i| {
            let mut rng = rng_from(seed, &["member", &i.to_string()]);
            let sample: Vec<usize> = (0..points.len())
                .map(|_| rng.gen_range(0..points.len()))
                .collect();
            let mut coords: Vec<usize> = (0..GENOME_LEN).collect();
            coords.shuffle(&mut rng);
            let mut features = coords[..feature_count].to_vec();
            features.sort_unstable();

            let mut sums = vec![0.0; feature_count];
            let mut counts = [0usize; 2];
            for &pi in &sample {
                let class = points[pi].viable as usize;
                counts[class] += 1;
                if class == 1 {
                    for (k, &f) in features.iter().enumerate() {
                        sums[k] += genomes[pi][f];
                    }
                }
            }
            let model = if counts[0] == 0 || counts[1] == 0 {
                MemberModel::Constant {
                    class: counts[1] > 0,
                }
            } else {
                let centroid: Vec<f64> = sums.iter().map(|s| s / counts[1] as f64).collect();
                let dist = |pi: usize| -> f64 {
                    features
                        .iter()
                        .enumerate()
                        .map(|(k, &f)| (genomes[pi][f] - centroid[k]).abs())
                        .fold(0.0, f64::max)
                };
                // Margin midpoint: halfway between the farthest in-sample
                // viable point and the nearest nonviable one. Robust to how
                // much far-away nonviable mass the archive carries.
                let mut max_viable = 0.0f64;
                let mut min_nonviable = f64::INFINITY;
                for &pi in &sample {
                    let d = dist(pi);
                    if points[pi].viable {
                        max_viable = max_viable.max(d);
                    } else {
                        min_nonviable = min_nonviable.min(d);
                    }
                }
                let radius = 0.5 * (max_viable + min_nonviable);
                MemberModel::Sphere { centroid, radius }
            };
            CommitteeMember { features, model }
        })
        .collect();
    Ok(SurrogateCommittee { members })
}

/// Binary vote entropy of a committee probability.
pub fn vote_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }
}

/// Indices of the `u` most contested pool candidates (highest vote
/// entropy; ties broken toward the lower pool index).
pub fn acquire(committee: &SurrogateCommittee, pool: &[Mrm], u: usize) -> Result<Vec<usize>> {
    if u > pool.len() {
        return Err(Error::Config(format!(
            "cannot acquire {u} candidates from a pool of {}",
            pool.len()
        )));
    }
    let mut scored: Vec<(usize, f64)> = pool
        .iter()
        .enumerate()
        .map(|(i, m)| (i, vote_entropy(committee.vote_fraction(m))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored[..u].iter().map(|(i, _)| *i).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionStrategy {
    VoteEntropy,
    /// Uniform pool picks at the same budget; the control arm for
    /// efficiency comparisons.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionModel {
    /// Seed archive points plus every acquired point, in evaluation order.
    pub points: Vec<LabeledPoint>,
    pub committee: SurrogateCommittee,
    pub al_params: AlParams,
    pub tau: f64,
    pub group: String,
    pub divisors: Divisors,
    /// Per-gene (min, max) over viable points.
    pub bbox: Vec<(f64, f64)>,
    /// Final committee agreement with the true labels of `points`.
    pub training_accuracy: f64,
    pub budget_used: usize,
    pub iterations: usize,
}

impl RegionModel {
    pub fn viable_points(&self) -> impl Iterator<Item = &LabeledPoint> {
        self.points.iter().filter(|p| p.viable)
    }
}

/// Map the viability boundary around a calibration archive by spending
/// `budget` simulation-backed evaluations on committee-contested
/// candidates.
pub fn al_explore(
    archive: &ViableArchive,
    budget: usize,
    al: &AlParams,
    data: &BinnedDataset,
    config: &SimConfig,
) -> Result<RegionModel> {
    config.validate()?;
    let k = archive.params.replicates_per_eval;
    let master = archive.params.rng_seed;
    let group = archive.group.clone();
    let seed_points: Vec<LabeledPoint> = archive
        .entries
        .iter()
        .map(|e| LabeledPoint {
            mrm: e.mrm.clone(),
            score: e.score,
            viable: e.viable,
            provenance: Provenance::Ga,
        })
        .collect();
    let eval = |m: &Mrm| fitness(m, data, config, k, &group, master).map(|(s, _)| s);
    al_explore_with(
        seed_points,
        budget,
        al,
        archive.params.viability_threshold,
        &group,
        archive.divisors,
        AcquisitionStrategy::VoteEntropy,
        eval,
    )
}

/// Exploration loop over an arbitrary evaluator (tests use analytic
/// oracles). `al_explore` plugs in simulation-backed fitness.
#[allow(clippy::too_many_arguments)]
pub fn al_explore_with<F>(
    seed_points: Vec<LabeledPoint>,
    budget: usize,
    al: &AlParams,
    tau: f64,
    group: &str,
    divisors: Divisors,
    strategy: AcquisitionStrategy,
    eval: F,
) -> Result<RegionModel>
where
    F: Fn(&Mrm) -> Result<f64> + Sync,
{
    al.validate()?;
    for (label, present) in [
        ("viable", seed_points.iter().any(|p| p.viable)),
        ("nonviable", seed_points.iter().any(|p| !p.viable)),
    ] {
        if !present {
            return Err(Error::Domain(format!(
                "seed archive has no {label} points at tau {tau}; rerun calibration \
                 with an adjusted threshold or more generations before exploring"
            )));
        }
    }

    let mut points = seed_points;
    let mut used = 0usize;
    let mut iteration = 0usize;
    while used < budget {
        let u = al.batch_size.min(budget - used);
        let committee = train_committee(
            &points,
            al.committee_size,
            al.feature_count,
            derive_seed(al.rng_seed, &["committee", &iteration.to_string()]),
        )?;
        let pool = build_pool(al, iteration, &points);
        let chosen = match strategy {
            AcquisitionStrategy::VoteEntropy => acquire(&committee, &pool, u)?,
            AcquisitionStrategy::Random => {
                let mut rng = rng_from(al.rng_seed, &["random-acquire", &iteration.to_string()]);
                rand::seq::index::sample(&mut rng, pool.len(), u).into_vec()
            }
        };
        let scores: Vec<f64> = chosen
            .par_iter()
            .map(|&i| eval(&pool[i]))
            .collect::<Result<Vec<_>>>()?;
        for (&i, score) in chosen.iter().zip(scores) {
            points.push(LabeledPoint {
                mrm: pool[i].clone(),
                score,
                viable: score >= tau,
                provenance: Provenance::Al { iteration },
            });
        }
        used += u;
        iteration += 1;
    }

    let committee = train_committee(
        &points,
        al.committee_size,
        al.feature_count,
        derive_seed(al.rng_seed, &["committee-final"]),
    )?;
    let correct = points
        .iter()
        .filter(|p| committee.predict(&p.mrm) == p.viable)
        .count();
    let training_accuracy = correct as f64 / points.len() as f64;
    let bbox = viable_bbox(&points);
    Ok(RegionModel {
        points,
        committee,
        al_params: al.clone(),
        tau,
        group: group.to_string(),
        divisors,
        bbox,
        training_accuracy,
        budget_used: used,
        iterations: iteration,
    })
}

/// Half local jitter around viable points, half Latin-hypercube coverage
/// of the full box. Jitter candidates come first so the acquire tie-break
/// (ascending pool index) favors boundary-adjacent points when the
/// committee is still unanimous everywhere.
fn build_pool(al: &AlParams, iteration: usize, points: &[LabeledPoint]) -> Vec<Mrm> {
    let mut rng = rng_from(al.rng_seed, &["pool", &iteration.to_string()]);
    let n_jitter = al.pool_size - al.pool_size / 2;
    let viable: Vec<&LabeledPoint> = points.iter().filter(|p| p.viable).collect();
    let mut pool: Vec<Mrm> = Vec::with_capacity(al.pool_size);
    for _ in 0..n_jitter {
        let anchor = viable[rng.gen_range(0..viable.len())];
        pool.push(anchor.mrm.perturb_with(al.jitter_sigma, 1.0, &mut rng));
    }
    pool.extend(
        latin_hypercube(&mut rng, al.pool_size - n_jitter, GENOME_LEN, -2.0, 2.0)
            .into_iter()
            .map(|g| Mrm::decode(&g).expect("hypercube rows are in range")),
    );
    pool
}

fn viable_bbox(points: &[LabeledPoint]) -> Vec<(f64, f64)> {
    let mut bbox = vec![(f64::INFINITY, f64::NEG_INFINITY); GENOME_LEN];
    for p in points.iter().filter(|p| p.viable) {
        for (slot, v) in bbox.iter_mut().zip(p.mrm.encode()) {
            slot.0 = slot.0.min(v);
            slot.1 = slot.1.max(v);
        }
    }
    bbox
}

/// Rejection-sample `n` fresh matrices from the learned region: jitter a
/// random viable point, keep candidates the committee accepts
/// (vote fraction >= 0.5). Errors when acceptance collapses below 1%.
pub fn sample_viable(region: &RegionModel, n: usize, seed: u64) -> Result<Vec<Mrm>> {
    let viable: Vec<&LabeledPoint> = region.points.iter().filter(|p| p.viable).collect();
    if viable.is_empty() {
        return Err(Error::Domain("region has no viable points".into()));
    }
    let mut rng = rng_from(seed, &["sample"]);
    let sigma = region.al_params.jitter_sigma;
    let max_proposals = 10_000usize.max(200 * n);
    let mut accepted = Vec::with_capacity(n);
    let mut proposals = 0usize;
    while accepted.len() < n {
        if proposals >= 10_000 || proposals >= max_proposals {
            let rate = accepted.len() as f64 / proposals as f64;
            if rate < 0.01 || proposals >= max_proposals {
                return Err(Error::RegionTooThin { rate, proposals });
            }
        }
        let anchor = viable[rng.gen_range(0..viable.len())];
        let candidate = anchor.mrm.perturb_with(sigma, 1.0, &mut rng);
        proposals += 1;
        if region.committee.vote_fraction(&candidate) >= 0.5 {
            accepted.push(candidate);
        }
    }
    Ok(accepted)
}

// ---- region directory I/O ----

#[derive(Serialize, Deserialize)]
struct RegionManifest {
    al_params: AlParams,
    tau: f64,
    group: String,
    #[serde(flatten)]
    divisors: Divisors,
    bbox: Vec<(f64, f64)>,
    training_accuracy: f64,
    budget_used: usize,
    iterations: usize,
    n_points: usize,
    n_viable: usize,
    /// Point order, as mrm_ids into points/.
    points: Vec<String>,
}

/// Layout: `region_manifest.json`, `committee.json`, and one
/// `points/<mrm_id>.json` per labeled point (matrix document plus label,
/// score, provenance, and the committee's vote fraction).
pub fn write_region(region: &RegionModel, dir: &Path) -> Result<()> {
    let points_dir = dir.join("points");
    std::fs::create_dir_all(&points_dir)?;
    for p in &region.points {
        let mut doc: serde_json::Value = serde_json::from_str(&p.mrm.to_json())?;
        let obj = doc.as_object_mut().expect("matrix doc is an object");
        obj.insert(
            "label".into(),
            if p.viable { "viable" } else { "nonviable" }.into(),
        );
        obj.insert("score".into(), p.score.into());
        obj.insert("provenance".into(), serde_json::to_value(&p.provenance)?);
        obj.insert(
            "vote_fraction".into(),
            region.committee.vote_fraction(&p.mrm).into(),
        );
        write_atomic(
            &points_dir.join(format!("{}.json", p.mrm.mrm_id())),
            &serde_json::to_string_pretty(&doc)?,
        )?;
    }
    write_atomic(
        &dir.join("committee.json"),
        &serde_json::to_string_pretty(&region.committee)?,
    )?;
    let manifest = RegionManifest {
        al_params: region.al_params.clone(),
        tau: region.tau,
        group: region.group.clone(),
        divisors: region.divisors,
        bbox: region.bbox.clone(),
        training_accuracy: region.training_accuracy,
        budget_used: region.budget_used,
        iterations: region.iterations,
        n_points: region.points.len(),
        n_viable: region.viable_points().count(),
        points: region.points.iter().map(|p| p.mrm.mrm_id()).collect(),
    };
    write_atomic(
        &dir.join("region_manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )
}

pub fn read_region(dir: &Path) -> Result<RegionModel> {
    let manifest: RegionManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("region_manifest.json"))?)?;
    let committee: SurrogateCommittee =
        serde_json::from_str(&std::fs::read_to_string(dir.join("committee.json"))?)?;
    let mut points = Vec::with_capacity(manifest.points.len());
    for id in &manifest.points {
        let text = std::fs::read_to_string(dir.join("points").join(format!("{id}.json")))?;
        let mut doc: serde_json::Value = serde_json::from_str(&text)?;
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("point {id} is not an object")))?;
        let viable = obj.remove("label").as_ref().and_then(|v| v.as_str()) == Some("viable");
        let score = obj
            .remove("score")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::Config(format!("point {id} lacks a score")))?;
        let provenance: Provenance = serde_json::from_value(
            obj.remove("provenance")
                .ok_or_else(|| Error::Config(format!("point {id} lacks provenance")))?,
        )?;
        obj.remove("vote_fraction");
        let mrm = Mrm::from_json(&serde_json::to_string(&doc)?)?;
        if mrm.mrm_id() != *id {
            return Err(Error::Config(format!(
                "region point file {id}.json holds matrix {}",
                mrm.mrm_id()
            )));
        }
        points.push(LabeledPoint {
            mrm,
            score,
            viable,
            provenance,
        });
    }
    Ok(RegionModel {
        points,
        committee,
        al_params: manifest.al_params,
        tau: manifest.tau,
        group: manifest.group,
        divisors: manifest.divisors,
        bbox: manifest.bbox,
        training_accuracy: manifest.training_accuracy,
        budget_used: manifest.budget_used,
        iterations: manifest.iterations,
    })
}

/// Chebyshev distance in genome space; the metric used by the analytic
/// boundary tests.
pub fn chebyshev(a: &Mrm, b: &Mrm) -> f64 {
    a.encode()
        .iter()
        .zip(b.encode())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
