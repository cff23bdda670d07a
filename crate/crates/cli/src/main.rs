use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rnncov::audio::{apply_transform, load_wav, pick_transform, save_wav, AudioClip, MutationRecord, TransformKind};
use rnncov::coverage::{profile_traces, CoverageEvaluator, Criterion};
use rnncov::fuzz::{run_campaign, Budget, FuzzConfig, DEFAULT_WER_THRESHOLD};
use rnncov::mdp::{build_model, MdpModel, ModelParams};
use rnncov::sut::{ToyTranscriber, Vocabulary};
use rnncov::trace::{load_traces, save_traces};
use rnncov::{profile_corpus, synth};

#[derive(Parser)]
#[command(
    name = "rnncov",
    version,
    about = "Coverage-guided metamorphic testing for recurrent speech models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transcribe a directory of WAV files and write their hidden-state traces.
    Profile(ProfileArgs),
    /// Fit the state abstraction and count abstract transitions.
    BuildModel(BuildModelArgs),
    /// Score a trace file against a model.
    Coverage(CoverageArgs),
    /// Apply one metamorphic transform to a WAV file.
    Mutate(MutateArgs),
    /// Run a coverage-guided fuzzing campaign.
    Fuzz(FuzzArgs),
    /// Write the fixture weights, vocabulary and a synthetic corpus.
    DemoCorpus(DemoArgs),
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    audio_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildModelArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Number of principal components for states.
    #[arg(long)]
    pca_dims: usize,
    /// Intervals per projected state axis.
    #[arg(long)]
    partitions: usize,
    /// Defaults to --pca-dims.
    #[arg(long)]
    input_pca_dims: Option<usize>,
    /// Defaults to --partitions.
    #[arg(long)]
    input_partitions: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    traces: PathBuf,
    /// bscov, ksbcov, btcov, iscov, wicov or all.
    #[arg(long, default_value = "all")]
    criterion: String,
    #[arg(long, default_value_t = 1)]
    boundary_steps: usize,
}

#[derive(Args)]
struct MutateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Transform to apply, e.g. changespeed or low_pass_filter.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    kind: Option<String>,
    /// Pick uniformly among the transforms the lineage still admits.
    #[arg(long)]
    random: bool,
    /// Mutation record of the input clip; its lineage is extended.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Defaults to `<input>.mut.wav`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = rnncov::audio::transform::DEFAULT_MAX_HISTORY)]
    max_history: usize,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Directory of seed WAV files.
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long, default_value = "bscov")]
    criterion: Criterion,
    #[arg(long, default_value_t = 1)]
    boundary_steps: usize,
    #[arg(long, default_value_t = DEFAULT_WER_THRESHOLD)]
    wer_threshold: f64,
    #[arg(long, conflicts_with = "time_budget", required_unless_present = "time_budget")]
    iterations: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = rnncov::audio::transform::DEFAULT_MAX_HISTORY)]
    max_history: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    train: usize,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Clip length in seconds.
    #[arg(long, default_value_t = 1.0)]
    secs: f64,
}

/// WAV files of `dir` sorted by name, with ids taken from the file stem.
fn read_wav_dir(dir: &Path) -> Result<Vec<(String, AudioClip)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .wav files in {}", dir.display());
    }
    paths
        .into_iter()
        .map(|p| {
            let clip = load_wav(&p).with_context(|| format!("loading {}", p.display()))?;
            Ok((clip_id(&p), clip))
        })
        .collect()
}

fn clip_id(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let id: String = stem.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if id.is_empty() {
        "clip".into()
    } else {
        id
    }
}

fn record_path(wav: &Path) -> PathBuf {
    wav.with_extension("record.json")
}

fn profile(a: ProfileArgs) -> Result<()> {
    let sut = ToyTranscriber::load(&a.weights, &a.vocab)?;
    let clips = read_wav_dir(&a.audio_dir)?;
    let ts = profile_corpus(&sut, &clips)?;
    save_traces(&ts, &a.out)?;
    println!(
        "profiled {} clips, {} transitions -> {}",
        ts.len(),
        ts.total_transitions(),
        a.out.display()
    );
    Ok(())
}

fn build(a: BuildModelArgs) -> Result<()> {
    let ts = load_traces(&a.traces)?;
    let params = ModelParams {
        k: a.pca_dims,
        m: a.partitions,
        k_in: a.input_pca_dims.unwrap_or(a.pca_dims),
        m_in: a.input_partitions.unwrap_or(a.partitions),
    };
    let model = build_model(&ts, params)?;
    model.save(&a.out)?;
    println!(
        "model: {} states, {} choices, {} transitions -> {}",
        model.states().len(),
        model.choice_count(),
        model.total_count(),
        a.out.display()
    );
    Ok(())
}

fn coverage(a: CoverageArgs) -> Result<()> {
    let criteria: Vec<Criterion> = if a.criterion.eq_ignore_ascii_case("all") {
        Criterion::ALL.to_vec()
    } else {
        vec![a.criterion.parse()?]
    };
    let model = MdpModel::load(&a.model)?;
    let ts = load_traces(&a.traces)?;
    let p = profile_traces(&model, &ts.traces)?;
    let ev = CoverageEvaluator::new(&model, a.boundary_steps)?;
    for c in criteria {
        let v = ev.evaluate(c, &p);
        println!(
            "criterion={} value={} numerator={} denominator={}",
            c.name(),
            v.to_decimal(),
            v.numerator_decimal(),
            v.denominator
        );
    }
    Ok(())
}

fn mutate(a: MutateArgs) -> Result<()> {
    let clip = load_wav(&a.input)?;
    let mut record = match &a.history {
        Some(h) => {
            MutationRecord::from_json(&fs::read_to_string(h).with_context(|| format!("reading {}", h.display()))?)?
        }
        None => MutationRecord::new(clip_id(&a.input)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let kind: TransformKind = match &a.kind {
        Some(k) => k.parse()?,
        None => match pick_transform(&record, &mut rng, a.max_history) {
            Some(k) => k,
            None => bail!("lineage already has {} transforms", record.history.len()),
        },
    };
    let (mutant, applied) = apply_transform(&clip, kind, a.seed)?;
    record.push(applied)?;
    let out = a.out.unwrap_or_else(|| a.input.with_extension("mut.wav"));
    save_wav(&mutant, &out)?;
    let rec = record_path(&out);
    fs::write(&rec, record.to_json()).with_context(|| format!("writing {}", rec.display()))?;
    println!("{kind} -> {} (record {})", out.display(), rec.display());
    Ok(())
}

fn fuzz(a: FuzzArgs) -> Result<()> {
    let model = MdpModel::load(&a.model)?;
    let sut = ToyTranscriber::load(&a.weights, &a.vocab)?;
    let seeds = read_wav_dir(&a.seeds)?;
    let budget = match (a.iterations, a.time_budget) {
        (Some(n), _) => Budget::Iterations(n),
        (None, Some(s)) if s.is_finite() && s > 0.0 => Budget::WallClock(Duration::from_secs_f64(s)),
        _ => bail!("time budget must be a positive number of seconds"),
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let cfg = FuzzConfig {
        criterion: a.criterion,
        wer_threshold: a.wer_threshold,
        boundary_steps: a.boundary_steps,
        campaign_seed: a.seed,
        budget,
        max_history: a.max_history,
        output_dir: Some(a.out.clone()),
    };
    let r = run_campaign(&cfg, &model, &sut, &seeds)?;
    println!(
        "{}: {} -> {} over {} iterations; {} mutants, {} failures, {} admitted; report in {}",
        r.criterion,
        r.initial_coverage,
        r.final_coverage,
        r.totals.iterations,
        r.totals.mutants,
        r.totals.failures,
        r.totals.admissions,
        a.out.display()
    );
    Ok(())
}

fn demo(a: DemoArgs) -> Result<()> {
    for sub in ["train", "seeds"] {
        fs::create_dir_all(a.out.join(sub)).with_context(|| format!("creating {}", a.out.display()))?;
    }
    synth::fixture_weights().save(a.out.join("weights.txt"))?;
    Vocabulary::english().save(a.out.join("vocab.txt"))?;
    for (dir, prefix, base, n) in [("train", "train", 1, a.train), ("seeds", "seed", 2, a.seeds)] {
        for (id, clip) in synth::corpus(prefix, base, n, a.secs) {
            save_wav(&clip, a.out.join(dir).join(format!("{id}.wav")))?;
        }
    }
    println!(
        "wrote weights.txt, vocab.txt, {} training and {} seed clips to {}",
        a.train,
        a.seeds,
        a.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Profile(a) => profile(a),
        Command::BuildModel(a) => build(a),
        Command::Coverage(a) => coverage(a),
        Command::Mutate(a) => mutate(a),
        Command::Fuzz(a) => fuzz(a),
        Command::DemoCorpus(a) => demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already fold their source into the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
