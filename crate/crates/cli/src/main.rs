mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cytotwin_core::calibrate::{ga_run, read_archive, write_archive, write_atomic, GaParams};
use cytotwin_core::cohort::{bin_times, normalize, write_cohort_csv, CohortDataset};
use cytotwin_core::engine::{run, write_trajectory_csv, SimConfig};
use cytotwin_core::envelope::EnvelopeModel;
use cytotwin_core::explore::{al_explore, read_region, write_region, AlParams};
use cytotwin_core::mrm::{baseline, Mrm};
use cytotwin_core::pseudo::{make_pseudo_cohort, Generator, GeneratorSpec};
use cytotwin_core::synth::{
    export_csv, export_jsonl, generate_cohort, trajectory_space, SamplingSchedule,
};
use cytotwin_core::validate::drift_check;

use manifest::ManifestBuilder;

/// Stochastic inflammation digital-twin pipeline: simulate, calibrate,
/// map the viable parameter region, and generate validated synthetic
/// cytokine cohorts. Every command writes a manifest next to its output
/// sufficient to re-run it bit-identically.
#[derive(Parser)]
#[command(name = "cytotwin", version)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    /// Outputs never depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write the trajectory as long-format CSV.
    Simulate {
        /// Simulation config JSON; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// "baseline" or a path to a rule-matrix JSON.
        #[arg(long, default_value = "baseline")]
        mrm: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate rule matrices against a cohort CSV; archive every
    /// evaluated candidate with its envelope-encompassment score.
    Calibrate {
        /// Cohort CSV: patient_id,group,time_h,channel,value.
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Group to calibrate against; required when the cohort has several.
        #[arg(long)]
        group: Option<String>,
        /// Time-bin width in hours for envelope comparison.
        #[arg(long, default_value_t = 24.0)]
        bin_width: f64,
        #[arg(long, default_value_t = GaParams::default().population_size)]
        population: usize,
        #[arg(long, default_value_t = GaParams::default().generations)]
        generations: usize,
        /// Stochastic replicates per fitness evaluation.
        #[arg(long, default_value_t = GaParams::default().replicates_per_eval)]
        replicates: usize,
        /// Viability threshold on the encompassment score.
        #[arg(long, default_value_t = GaParams::default().viability_threshold)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output archive directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Map the viable-region boundary by committee active learning,
    /// starting from a calibration archive.
    Explore {
        /// Calibration archive directory.
        #[arg(long)]
        archive: PathBuf,
        /// The same cohort CSV the archive was calibrated against.
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Must match the calibration bin width (checked by dataset hash).
        #[arg(long, default_value_t = 24.0)]
        bin_width: f64,
        /// Simulation budget for boundary refinement.
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output region directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the viable region and simulate a labeled synthetic cohort.
    Generate {
        /// Region directory from `explore`.
        #[arg(long)]
        region: PathBuf,
        /// Number of virtual patients.
        #[arg(long)]
        n: usize,
        /// "default" (hourly, 0-200 h) or a path to {"times_h":[...]} JSON.
        #[arg(long, default_value = "default")]
        schedule: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; the extension picks the format (.jsonl or .csv).
        #[arg(long)]
        out: PathBuf,
        /// Also write the cohort's trajectory-space envelope as JSON
        /// (requires --n >= 1).
        #[arg(long)]
        envelope_out: Option<PathBuf>,
        /// Time-bin width in hours for --envelope-out.
        #[arg(long, default_value_t = 24.0)]
        bin_width: f64,
    },
    /// Score a cohort against a calibrated envelope and report drift.
    Validate {
        #[arg(long)]
        cohort: PathBuf,
        /// Envelope JSON (carries its own normalization divisors).
        #[arg(long)]
        envelope: PathBuf,
        /// Encompassment threshold: drifted when outside fraction > 1 - tau.
        #[arg(long, default_value_t = 0.9)]
        tau: f64,
        /// Output report JSON.
        #[arg(long)]
        report: PathBuf,
    },
    /// Render envelopes (and optional raw observations) as an SVG figure,
    /// one panel per channel. First envelope blue, second red.
    Plot {
        #[arg(long)]
        envelope: PathBuf,
        /// Second envelope for comparison.
        #[arg(long)]
        envelope_b: Option<PathBuf>,
        /// Cohort CSV to overlay as points (at most two groups).
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manufacture a pseudo-clinical cohort from known generator matrices,
    /// with a ground-truth sidecar mapping patients to generators.
    Pseudo {
        /// Spec JSON: generators, patients_per_generator, noise_sigma,
        /// schedule, seed.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output cohort CSV.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar path (default: ground_truth.json next to the
        /// cohort).
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate {
            config,
            mrm,
            seed,
            out,
        } => simulate(config, mrm, seed, out),
        Command::Calibrate {
            cohort,
            config,
            group,
            bin_width,
            population,
            generations,
            replicates,
            tau,
            seed,
            out,
        } => calibrate(
            cohort,
            config,
            group,
            bin_width,
            population,
            generations,
            replicates,
            tau,
            seed,
            out,
        ),
        Command::Explore {
            archive,
            cohort,
            config,
            bin_width,
            budget,
            seed,
            out,
        } => explore(archive, cohort, config, bin_width, budget, seed, out),
        Command::Generate {
            region,
            n,
            schedule,
            config,
            seed,
            out,
            envelope_out,
            bin_width,
        } => generate(
            region,
            n,
            schedule,
            config,
            seed,
            out,
            envelope_out,
            bin_width,
        ),
        Command::Validate {
            cohort,
            envelope,
            tau,
            report,
        } => validate(cohort, envelope, tau, report),
        Command::Plot {
            envelope,
            envelope_b,
            cohort,
            out,
        } => plot_cmd(envelope, envelope_b, cohort, out),
        Command::Pseudo {
            spec,
            config,
            seed,
            out,
            ground_truth,
        } => pseudo(spec, config, seed, out, ground_truth),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: &Option<PathBuf>, man: &mut ManifestBuilder) -> Result<SimConfig> {
    match path {
        Some(p) => {
            man.input(p)?;
            Ok(SimConfig::from_json(&read_file(p)?)?)
        }
        None => Ok(SimConfig::default()),
    }
}

fn load_mrm(spec: &str, man: &mut ManifestBuilder) -> Result<Mrm> {
    if spec == "baseline" {
        return Ok(baseline());
    }
    let p = Path::new(spec);
    man.input(p)?;
    Ok(Mrm::from_json(&read_file(p)?)?)
}

fn load_cohort(path: &Path, man: &mut ManifestBuilder) -> Result<CohortDataset> {
    man.input(path)?;
    Ok(CohortDataset::parse_csv(&read_file(path)?)?)
}

fn load_schedule(spec: &str, man: &mut ManifestBuilder) -> Result<SamplingSchedule> {
    if spec == "default" {
        return Ok(SamplingSchedule::default_hourly());
    }
    let p = Path::new(spec);
    man.input(p)?;
    let doc: SamplingSchedule = serde_json::from_str(&read_file(p)?)?;
    // Deserialization bypasses construction checks; re-validate.
    Ok(SamplingSchedule::new(doc.times_h().to_vec())?)
}

fn resolve_group(requested: Option<String>, groups: &[String]) -> Result<String> {
    match requested {
        Some(g) if groups.contains(&g) => Ok(g),
        Some(g) => bail!("group '{g}' not in cohort (groups: {})", groups.join(", ")),
        None if groups.len() == 1 => Ok(groups[0].clone()),
        None => bail!(
            "cohort has groups {}; pick one with --group",
            groups.join(", ")
        ),
    }
}

fn simulate(config: Option<PathBuf>, mrm: String, seed: u64, out: PathBuf) -> Result<()> {
    let mut man = ManifestBuilder::new();
    let cfg = load_config(&config, &mut man)?;
    let m = load_mrm(&mrm, &mut man)?;
    man.seed("run", seed);
    man.parameters(serde_json::json!({ "mrm_id": m.mrm_id(), "config": &cfg }))?;
    let record = run(&cfg, &m, seed)?;
    let outcome = record.outcome;
    let samples = record.times_h.len();
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &[record])?;
    write_atomic(&out, std::str::from_utf8(&buf)?)?;
    man.write_next_to(&out)?;
    println!(
        "simulated {outcome} in {samples} samples -> {}",
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn calibrate(
    cohort: PathBuf,
    config: Option<PathBuf>,
    group: Option<String>,
    bin_width: f64,
    population: usize,
    generations: usize,
    replicates: usize,
    tau: f64,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let mut man = ManifestBuilder::new();
    let cfg = load_config(&config, &mut man)?;
    let data = load_cohort(&cohort, &mut man)?;
    let binned = bin_times(&normalize(&data), bin_width)?;
    let group = resolve_group(group, &binned.groups())?;
    let params = GaParams {
        population_size: population,
        generations,
        replicates_per_eval: replicates,
        viability_threshold: tau,
        rng_seed: seed,
        ..GaParams::default()
    };
    man.seed("ga", seed);
    man.parameters(serde_json::json!({
        "ga": &params,
        "bin_width_h": bin_width,
        "group": &group,
        "config": &cfg,
    }))?;
    let archive = ga_run(&binned, &params, &cfg, &group)?;
    std::fs::create_dir_all(&out)?;
    write_archive(&archive, &out)?;
    man.write_next_to(&out)?;
    let best = archive.best().map(|e| e.score).unwrap_or(f64::NAN);
    println!(
        "calibrated '{group}': {} evaluations, {} viable at tau {tau}, best {best:.4} -> {}",
        archive.entries.len(),
        archive.n_viable(),
        out.display()
    );
    Ok(())
}

fn explore(
    archive_dir: PathBuf,
    cohort: PathBuf,
    config: Option<PathBuf>,
    bin_width: f64,
    budget: usize,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let mut man = ManifestBuilder::new();
    let cfg = load_config(&config, &mut man)?;
    man.input(&archive_dir)?;
    let archive = read_archive(&archive_dir)?;
    let data = load_cohort(&cohort, &mut man)?;
    let binned = bin_times(&normalize(&data), bin_width)?;
    if binned.content_hash() != archive.dataset_hash {
        bail!(
            "cohort hash {} does not match the archive's calibration data {}; \
             candidates must be scored against the same cohort and bin width",
            binned.content_hash(),
            archive.dataset_hash
        );
    }
    let al = AlParams {
        rng_seed: seed,
        ..AlParams::default()
    };
    man.seed("al", seed);
    man.parameters(serde_json::json!({
        "al": &al,
        "budget": budget,
        "bin_width_h": bin_width,
        "config": &cfg,
    }))?;
    let region = al_explore(&archive, budget, &al, &binned, &cfg)?;
    std::fs::create_dir_all(&out)?;
    write_region(&region, &out)?;
    man.write_next_to(&out)?;
    println!(
        "explored {} labeled points ({} viable) in {} iterations, training accuracy {:.3} -> {}",
        region.points.len(),
        region.viable_points().count(),
        region.iterations,
        region.training_accuracy,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn generate(
    region_dir: PathBuf,
    n: usize,
    schedule: String,
    config: Option<PathBuf>,
    seed: u64,
    out: PathBuf,
    envelope_out: Option<PathBuf>,
    bin_width: f64,
) -> Result<()> {
    let mut man = ManifestBuilder::new();
    let cfg = load_config(&config, &mut man)?;
    man.input(&region_dir)?;
    let region = read_region(&region_dir)?;
    let sched = load_schedule(&schedule, &mut man)?;
    man.seed("cohort", seed);
    man.parameters(serde_json::json!({
        "n": n,
        "schedule_len": sched.len(),
        "bin_width_h": bin_width,
        "config": &cfg,
    }))?;
    let ds = generate_cohort(&region, n, &sched, &cfg, seed)?;
    let mut buf = Vec::new();
    match out.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => export_jsonl(&ds, &mut buf)?,
        Some("csv") => export_csv(&ds, &mut buf)?,
        _ => bail!("--out must end in .jsonl or .csv, got {}", out.display()),
    }
    write_atomic(&out, std::str::from_utf8(&buf)?)?;
    if let Some(env_path) = &envelope_out {
        if ds.records.is_empty() {
            bail!("--envelope-out needs at least one generated record (--n >= 1)");
        }
        let spaces = trajectory_space(&ds, bin_width)?;
        let env = &spaces[&ds.group];
        write_atomic(env_path, &env.to_json())?;
    }
    man.write_next_to(&out)?;
    println!(
        "generated {} synthetic patients (group '{}') -> {}",
        ds.records.len(),
        ds.group,
        out.display()
    );
    Ok(())
}

fn validate(cohort: PathBuf, envelope: PathBuf, tau: f64, report: PathBuf) -> Result<()> {
    let mut man = ManifestBuilder::new();
    let data = load_cohort(&cohort, &mut man)?;
    man.input(&envelope)?;
    let env = EnvelopeModel::from_json(&read_file(&envelope)?)?;
    man.parameters(serde_json::json!({ "tau": tau }))?;
    let rep = drift_check(&data, &env, &env.divisors, tau)?;
    write_atomic(&report, &serde_json::to_string_pretty(&rep)?)?;
    man.write_next_to(&report)?;
    println!(
        "drifted={} outside {}/{} observations (fraction {:.4}, tau {tau}) -> {}",
        rep.drifted,
        rep.outside_count,
        rep.total_observations,
        rep.outside_fraction,
        report.display()
    );
    Ok(())
}

fn plot_cmd(
    envelope: PathBuf,
    envelope_b: Option<PathBuf>,
    cohort: Option<PathBuf>,
    out: PathBuf,
) -> Result<()> {
    let mut man = ManifestBuilder::new();
    man.input(&envelope)?;
    let env_a = EnvelopeModel::from_json(&read_file(&envelope)?)?;
    let env_b = match &envelope_b {
        Some(p) => {
            man.input(p)?;
            Some(EnvelopeModel::from_json(&read_file(p)?)?)
        }
        None => None,
    };
    let overlay = match &cohort {
        Some(p) => Some(load_cohort(p, &mut man)?),
        None => None,
    };
    let svg = plot::render_svg(&plot::PlotSpec {
        env_a: &env_a,
        env_b: env_b.as_ref(),
        cohort: overlay.as_ref(),
    })?;
    write_atomic(&out, &svg)?;
    man.write_next_to(&out)?;
    println!("plotted {} -> {}", envelope.display(), out.display());
    Ok(())
}

#[derive(serde::Deserialize)]
struct PseudoSpecDoc {
    generators: Vec<PseudoGeneratorDoc>,
    patients_per_generator: usize,
    #[serde(default = "default_noise")]
    noise_sigma: f64,
    #[serde(default)]
    schedule: ScheduleDoc,
    #[serde(default)]
    seed: u64,
}

#[derive(serde::Deserialize)]
struct PseudoGeneratorDoc {
    /// "baseline" or a rule-matrix JSON path.
    mrm: String,
    group: String,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum ScheduleDoc {
    Named(String),
    Times(Vec<f64>),
}

impl Default for ScheduleDoc {
    fn default() -> Self {
        ScheduleDoc::Named("default".into())
    }
}

fn default_noise() -> f64 {
    0.1
}

fn pseudo(
    spec_path: PathBuf,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    ground_truth: Option<PathBuf>,
) -> Result<()> {
    let mut man = ManifestBuilder::new();
    let cfg = load_config(&config, &mut man)?;
    man.input(&spec_path)?;
    let doc: PseudoSpecDoc = serde_json::from_str(&read_file(&spec_path)?)
        .with_context(|| format!("parsing {}", spec_path.display()))?;
    let mut generators = Vec::with_capacity(doc.generators.len());
    for g in &doc.generators {
        generators.push(Generator {
            mrm: load_mrm(&g.mrm, &mut man)?,
            group: g.group.clone(),
        });
    }
    let schedule = match doc.schedule {
        ScheduleDoc::Named(ref s) if s == "default" => SamplingSchedule::default_hourly(),
        ScheduleDoc::Named(other) => {
            bail!("unknown schedule '{other}' (use \"default\" or a times array)")
        }
        ScheduleDoc::Times(times) => SamplingSchedule::new(times)?,
    };
    let spec = GeneratorSpec {
        generators,
        patients_per_generator: doc.patients_per_generator,
        noise_sigma: doc.noise_sigma,
        schedule,
        seed: seed.unwrap_or(doc.seed),
    };
    man.seed("cohort", spec.seed);
    man.parameters(serde_json::json!({
        "patients_per_generator": spec.patients_per_generator,
        "noise_sigma": spec.noise_sigma,
        "n_generators": spec.generators.len(),
        "config": &cfg,
    }))?;
    let (data, truth) = make_pseudo_cohort(&spec, &cfg)?;
    let mut buf = Vec::new();
    write_cohort_csv(&mut buf, &data)?;
    write_atomic(&out, std::str::from_utf8(&buf)?)?;
    let truth_path = ground_truth.unwrap_or_else(|| out.with_file_name("ground_truth.json"));
    write_atomic(&truth_path, &serde_json::to_string_pretty(&truth)?)?;
    man.write_next_to(&out)?;
    println!(
        "pseudo cohort: {} patients from {} generators -> {} (truth {})",
        data.n_patients(),
        spec.generators.len(),
        out.display(),
        truth_path.display()
    );
    Ok(())
}
