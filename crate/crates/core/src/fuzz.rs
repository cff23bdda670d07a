//! Coverage-guided metamorphic fuzzing.
//!
//! Each iteration selects a queued input, picks a transform its lineage
//! still admits, mutates, and runs the mutant through the system under
//! test. A mutant whose transcript drifts from its lineage root's by more
//! than the WER threshold is a failure. Otherwise it joins the queue if it
//! adds a unit to the chosen criterion's numerator set.
//!
//! Iteration `i` draws from its own generator seeded with
//! `campaign_seed ^ i`, so a campaign replays exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{apply_transform, pick_transform, save_wav, AudioClip, MutationRecord};
use crate::coverage::{CoverageEvaluator, CoverageProfile, CoverageValue, Criterion};
use crate::error::{Error, Result};
use crate::mdp::MdpModel;
use crate::sut::{wer, Sut};

pub const DEFAULT_WER_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Iterations(u64),
    WallClock(Duration),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzConfig {
    pub criterion: Criterion,
    pub wer_threshold: f64,
    pub boundary_steps: usize,
    pub campaign_seed: u64,
    pub budget: Budget,
    pub max_history: usize,
    /// Where failure and queue artifacts go; nothing is written if unset.
    pub output_dir: Option<PathBuf>,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            criterion: Criterion::Bscov,
            wer_threshold: DEFAULT_WER_THRESHOLD,
            boundary_steps: 1,
            campaign_seed: 0,
            budget: Budget::Iterations(1000),
            max_history: crate::audio::transform::DEFAULT_MAX_HISTORY,
            output_dir: None,
        }
    }
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.wer_threshold) {
            return Err(Error::Config(format!(
                "wer threshold {} must be in [0, 1]",
                self.wer_threshold
            )));
        }
        match self.budget {
            Budget::Iterations(0) => return Err(Error::Config("iteration budget must be positive".into())),
            Budget::WallClock(d) if d.is_zero() => return Err(Error::Config("time budget must be positive".into())),
            _ => {}
        }
        if self.boundary_steps == 0 || self.max_history == 0 {
            return Err(Error::Config("boundary steps and max history must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SeedEntry {
    pub id: String,
    pub clip: AudioClip,
    pub record: MutationRecord,
    /// Index of the lineage root in the initial seed list.
    pub root: usize,
    pub transcript: String,
    pub profile: CoverageProfile,
    pub selection_count: u64,
}

/// Draws an entry with probability proportional to `1 / (1 + count)` and
/// bumps its selection count.
pub fn select_seed<R: Rng + ?Sized>(queue: &mut [SeedEntry], rng: &mut R) -> Result<usize> {
    let idx = select_index(queue.iter().map(|e| e.selection_count), rng)?;
    queue[idx].selection_count += 1;
    Ok(idx)
}

/// Weighted draw over selection counts.
pub fn select_index<I, R>(counts: I, rng: &mut R) -> Result<usize>
where
    I: Iterator<Item = u64> + Clone,
    R: Rng + ?Sized,
{
    let total: f64 = counts.clone().map(|c| 1.0 / (1.0 + c as f64)).sum();
    if total == 0.0 {
        return Err(Error::EmptyQueue);
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, c) in counts.enumerate() {
        let w = 1.0 / (1.0 + c as f64);
        if u < w {
            return Ok(i);
        }
        u -= w;
        last = i;
    }
    Ok(last)
}

/// True iff merging `candidate` into `global` grows the criterion's
/// numerator set.
pub fn coverage_increase(
    evaluator: &CoverageEvaluator<'_>,
    global: &CoverageProfile,
    candidate: &CoverageProfile,
    criterion: Criterion,
) -> Result<bool> {
    evaluator.increases(criterion, global, candidate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTest {
    pub id: String,
    pub iteration: u64,
    pub mutant_path: String,
    pub record: MutationRecord,
    pub reference: String,
    pub hypothesis: String,
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntryReport {
    pub id: String,
    pub record: MutationRecord,
    pub transcript: String,
    pub selection_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub iteration: u64,
    pub id: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u64,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub iterations: u64,
    pub mutants: u64,
    pub failures: u64,
    pub admissions: u64,
    /// Iterations where no transform was admissible.
    pub skipped: u64,
    /// Mutations that produced unusable audio (fully trimmed, too short).
    pub invalid: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub criterion: String,
    pub campaign_seed: u64,
    pub wer_threshold: f64,
    pub boundary_steps: usize,
    pub max_history: usize,
    pub seeds: Vec<QueueEntryReport>,
    /// Seeds dropped at startup because they produced no usable reference.
    pub dropped_seeds: Vec<String>,
    pub initial_coverage: String,
    pub final_coverage: String,
    pub coverage_curve: Vec<CurvePoint>,
    pub admissions: Vec<Admission>,
    pub failed: Vec<FailedTest>,
    pub queue_final: Vec<QueueEntryReport>,
    pub totals: Totals,
}

impl FuzzReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("iteration,value\n");
        for p in &self.coverage_curve {
            out.push_str(&format!("{},{}\n", p.iteration, p.value));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let report = dir.join("report.json");
        fs::write(&report, self.to_json()).map_err(|e| Error::io(&report, e))?;
        let csv = dir.join("coverage.csv");
        fs::write(&csv, self.curve_csv()).map_err(|e| Error::io(&csv, e))
    }
}

fn queue_report(e: &SeedEntry) -> QueueEntryReport {
    QueueEntryReport {
        id: e.id.clone(),
        record: e.record.clone(),
        transcript: e.transcript.clone(),
        selection_count: e.selection_count,
    }
}

fn write_artifacts(
    dir: &Path,
    sub: &str,
    id: &str,
    clip: &AudioClip,
    record: &MutationRecord,
    text: &str,
) -> Result<()> {
    let dir = dir.join(sub);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    save_wav(clip, dir.join(format!("{id}.wav")))?;
    let rec = dir.join(format!("{id}.record.json"));
    fs::write(&rec, record.to_json()).map_err(|e| Error::io(&rec, e))?;
    let txt = dir.join(format!("{id}.txt"));
    fs::write(&txt, text).map_err(|e| Error::io(&txt, e))
}

/// Runs a campaign from `seeds` (id, clip) against `sut`.
pub fn run_campaign<S: Sut + ?Sized>(
    cfg: &FuzzConfig,
    model: &MdpModel,
    sut: &S,
    seeds: &[(String, AudioClip)],
) -> Result<FuzzReport> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("campaign needs at least one seed".into()));
    }
    if sut.state_dim() != model.state_dim() || sut.input_dim() != model.input_dim() {
        return Err(Error::Validation(format!(
            "system under test produces state {} / input {}, model expects {} / {}",
            sut.state_dim(),
            sut.input_dim(),
            model.state_dim(),
            model.input_dim()
        )));
    }
    let evaluator = CoverageEvaluator::new(model, cfg.boundary_steps)?;

    let mut queue: Vec<SeedEntry> = Vec::new();
    let mut references: Vec<String> = Vec::new();
    let mut dropped = Vec::new();
    let mut global = CoverageProfile::empty(model);
    for (id, clip) in seeds {
        let t = match sut.transcribe(id, clip) {
            Ok(t) if !t.text.trim().is_empty() => t,
            _ => {
                dropped.push(id.clone());
                continue;
            }
        };
        let mut profile = CoverageProfile::empty(model);
        profile.add_trace(model, &t.trace)?;
        global.merge_from(&profile)?;
        queue.push(SeedEntry {
            id: id.clone(),
            clip: clip.clone(),
            record: MutationRecord::new(id.clone()),
            root: references.len(),
            transcript: t.text.clone(),
            profile,
            selection_count: 0,
        });
        references.push(t.text);
    }
    if queue.is_empty() {
        return Err(Error::Validation("no seed produced a usable transcript".into()));
    }
    let initial_seeds: Vec<QueueEntryReport> = queue.iter().map(queue_report).collect();

    let mut current = evaluator.evaluate(cfg.criterion, &global);
    let initial = current.clone();
    let mut curve = vec![CurvePoint {
        iteration: 0,
        value: current.to_decimal(),
    }];
    let mut admissions = Vec::new();
    let mut failed = Vec::new();
    let mut totals = Totals::default();
    let started = Instant::now();

    let mut iteration = 0u64;
    loop {
        match cfg.budget {
            Budget::Iterations(n) if iteration >= n => break,
            Budget::WallClock(d) if started.elapsed() >= d => break,
            _ => {}
        }
        iteration += 1;
        totals.iterations = iteration;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.campaign_seed ^ iteration);

        let idx = select_seed(&mut queue, &mut rng)?;
        let parent = &queue[idx];
        let Some(kind) = pick_transform(&parent.record, &mut rng, cfg.max_history) else {
            totals.skipped += 1;
            continue;
        };
        let mutation_seed = rng.next_u64();
        let (mutant, applied) = match apply_transform(&parent.clip, kind, mutation_seed) {
            Ok(m) => m,
            Err(Error::FullyTrimmed | Error::TooShort(_)) => {
                totals.invalid += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut record = parent.record.clone();
        record.push(applied)?;
        let id = format!("{}-i{iteration}", record.seed_id);
        totals.mutants += 1;

        let result = match sut.transcribe(&id, &mutant) {
            Ok(r) => r,
            Err(Error::TooShort(_)) => {
                totals.invalid += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let root = parent.root;
        let reference = &references[root];
        let rate = wer(reference, &result.text)?;
        if rate > cfg.wer_threshold {
            if let Some(dir) = &cfg.output_dir {
                let text = format!("reference: {reference}\nhypothesis: {}\nwer: {rate}\n", result.text);
                write_artifacts(dir, "failures", &id, &mutant, &record, &text)?;
            }
            failed.push(FailedTest {
                mutant_path: format!("failures/{id}.wav"),
                id,
                iteration,
                record,
                reference: reference.clone(),
                hypothesis: result.text,
                wer: rate,
            });
            totals.failures += 1;
            continue;
        }

        let mut profile = CoverageProfile::empty(model);
        profile.add_trace(model, &result.trace)?;
        if coverage_increase(&evaluator, &global, &profile, cfg.criterion)? {
            global.merge_from(&profile)?;
            let next: CoverageValue = evaluator.evaluate(cfg.criterion, &global);
            debug_assert!(next.ratio() > current.ratio());
            if let Some(dir) = &cfg.output_dir {
                write_artifacts(dir, "queue", &id, &mutant, &record, &result.text)?;
            }
            admissions.push(Admission {
                iteration,
                id: id.clone(),
                before: current.to_decimal(),
                after: next.to_decimal(),
            });
            curve.push(CurvePoint {
                iteration,
                value: next.to_decimal(),
            });
            current = next;
            totals.admissions += 1;
            queue.push(SeedEntry {
                id,
                clip: mutant,
                record,
                root,
                transcript: result.text,
                profile,
                selection_count: 0,
            });
        }
    }
    if curve.last().map(|p| p.iteration) != Some(iteration) {
        curve.push(CurvePoint {
            iteration,
            value: current.to_decimal(),
        });
    }

    let report = FuzzReport {
        criterion: cfg.criterion.to_string(),
        campaign_seed: cfg.campaign_seed,
        wer_threshold: cfg.wer_threshold,
        boundary_steps: cfg.boundary_steps,
        max_history: cfg.max_history,
        seeds: initial_seeds,
        dropped_seeds: dropped,
        initial_coverage: initial.to_decimal(),
        final_coverage: current.to_decimal(),
        coverage_curve: curve,
        admissions,
        failed,
        queue_final: queue.iter().map(queue_report).collect(),
        totals,
    };
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}
