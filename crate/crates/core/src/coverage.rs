//! State- and transition-level coverage of a test trace collection against
//! a fixed [`MdpModel`].
//!
//! | criterion | numerator | denominator |
//! |-----------|-----------|-------------|
//! | BSCov     | \|Ŝ_T ∩ Ŝ_M\| | \|Ŝ_M\| |
//! | k-SBCov   | \|Ŝ_T ∩ B_k\| | \|B_k\| (cells at distance 1..=k from Ŝ_M) |
//! | BTCov     | \|δ̂_T ∩ δ̂_M\| over (src, dst) pairs | \|δ̂_M\| |
//! | ISCov     | Σ_ŝ \|𝒳̂_T(ŝ) ∩ 𝒳̂_M(ŝ)\| | Σ_ŝ \|𝒳̂_M(ŝ)\| |
//! | WICov     | Σ over covered (ŝ, x̂, ŝ') of Pr_x̂(ŝ, ŝ') | Σ_ŝ \|𝒳̂_M(ŝ)\| |
//!
//! Values are exact rationals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};

use crate::abstraction::{boundary_region, AbstractInput, AbstractState};
use crate::error::{Error, Result};
use crate::mdp::{AbstractTransition, MdpModel};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Criterion {
    Bscov,
    Ksbcov,
    Btcov,
    Iscov,
    Wicov,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Bscov,
        Criterion::Ksbcov,
        Criterion::Btcov,
        Criterion::Iscov,
        Criterion::Wicov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Bscov => "bscov",
            Criterion::Ksbcov => "ksbcov",
            Criterion::Btcov => "btcov",
            Criterion::Iscov => "iscov",
            Criterion::Wicov => "wicov",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown criterion {s:?}")))
    }
}

/// What a trace collection touched under a model's abstraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageProfile {
    model_id: u64,
    pub states: BTreeSet<AbstractState>,
    pub transitions: BTreeSet<AbstractTransition>,
    pub state_inputs: BTreeMap<AbstractState, BTreeSet<AbstractInput>>,
    pub src_dst_pairs: BTreeSet<(AbstractState, AbstractState)>,
}

impl CoverageProfile {
    pub fn empty(model: &MdpModel) -> Self {
        CoverageProfile {
            model_id: model.fingerprint(),
            states: BTreeSet::new(),
            transitions: BTreeSet::new(),
            state_inputs: BTreeMap::new(),
            src_dst_pairs: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn model_id(&self) -> u64 {
        self.model_id
    }

    /// Adds one abstracted trace.
    pub fn add_path(&mut self, path: &[AbstractTransition]) {
        for t in path {
            self.states.insert(t.src.clone());
            self.states.insert(t.dst.clone());
            self.state_inputs
                .entry(t.src.clone())
                .or_default()
                .insert(t.input.clone());
            self.src_dst_pairs.insert((t.src.clone(), t.dst.clone()));
            self.transitions.insert(t.clone());
        }
    }

    pub fn add_trace(&mut self, model: &MdpModel, trace: &Trace) -> Result<()> {
        self.check_model(model)?;
        let path = model.abstract_trace(trace)?;
        self.add_path(&path);
        Ok(())
    }

    fn check_model(&self, model: &MdpModel) -> Result<()> {
        if self.model_id != model.fingerprint() {
            return Err(Error::Validation(
                "coverage profile belongs to a different model".into(),
            ));
        }
        Ok(())
    }

    /// In-place union with `other`.
    pub fn merge_from(&mut self, other: &CoverageProfile) -> Result<()> {
        if self.model_id != other.model_id {
            return Err(Error::Validation("cannot merge profiles of different models".into()));
        }
        self.states.extend(other.states.iter().cloned());
        self.transitions.extend(other.transitions.iter().cloned());
        self.src_dst_pairs.extend(other.src_dst_pairs.iter().cloned());
        for (s, xs) in &other.state_inputs {
            self.state_inputs
                .entry(s.clone())
                .or_default()
                .extend(xs.iter().cloned());
        }
        Ok(())
    }

    /// Checks that transitions agree with the state and input sets.
    pub fn is_consistent(&self) -> bool {
        self.transitions.iter().all(|t| {
            self.states.contains(&t.src)
                && self.states.contains(&t.dst)
                && self.state_inputs.get(&t.src).is_some_and(|xs| xs.contains(&t.input))
                && self.src_dst_pairs.contains(&(t.src.clone(), t.dst.clone()))
        })
    }
}

/// Abstracts every trace under `model` and collects the touched units.
pub fn profile_traces(model: &MdpModel, traces: &[Trace]) -> Result<CoverageProfile> {
    let mut p = CoverageProfile::empty(model);
    for t in traces {
        p.add_trace(model, t)?;
    }
    Ok(p)
}

pub fn merge(a: &CoverageProfile, b: &CoverageProfile) -> Result<CoverageProfile> {
    let mut out = a.clone();
    out.merge_from(b)?;
    Ok(out)
}

/// An exact coverage ratio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageValue {
    pub criterion: Criterion,
    pub numerator: BigRational,
    pub denominator: u64,
}

impl CoverageValue {
    fn new(criterion: Criterion, numerator: BigRational, denominator: usize) -> Self {
        CoverageValue {
            criterion,
            numerator,
            denominator: denominator as u64,
        }
    }

    fn count(criterion: Criterion, numerator: usize, denominator: usize) -> Self {
        Self::new(
            criterion,
            BigRational::from_integer(BigInt::from(numerator)),
            denominator,
        )
    }

    pub fn ratio(&self) -> BigRational {
        if self.denominator == 0 {
            return BigRational::zero();
        }
        &self.numerator / BigRational::from_integer(BigInt::from(self.denominator))
    }

    /// True iff the ratio is exactly 1.
    pub fn is_full(&self) -> bool {
        self.denominator > 0 && self.numerator == BigRational::from_integer(BigInt::from(self.denominator))
    }

    pub fn value(&self) -> f64 {
        self.ratio().to_f64().unwrap_or(0.0)
    }

    /// Value rounded half-up to 6 decimal places.
    pub fn to_decimal(&self) -> String {
        format_decimal(&self.ratio(), 6)
    }

    pub fn numerator_decimal(&self) -> String {
        format_decimal(&self.numerator, 6)
    }
}

/// Formats a non-negative rational with `places` decimals, rounding half up.
pub fn format_decimal(r: &BigRational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = r * BigRational::from_integer(scale.clone());
    let rounded = (scaled + BigRational::new(BigInt::from(1), BigInt::from(2)))
        .floor()
        .to_integer();
    let int = &rounded / &scale;
    let frac = &rounded % &scale;
    format!("{int}.{frac:0>width$}", width = places as usize)
}

pub fn bscov(model: &MdpModel, p: &CoverageProfile) -> CoverageValue {
    let hit = p.states.iter().filter(|s| model.states().contains(*s)).count();
    CoverageValue::count(Criterion::Bscov, hit, model.states().len())
}

/// Union of the boundary layers `1..=k_steps` around Ŝ_M.
pub fn boundary_union(model: &MdpModel, k_steps: usize) -> Result<BTreeSet<AbstractState>> {
    Ok(boundary_region(model.states(), k_steps)?
        .into_values()
        .flatten()
        .collect())
}

pub fn ksbcov(model: &MdpModel, p: &CoverageProfile, k_steps: usize) -> Result<CoverageValue> {
    let boundary = boundary_union(model, k_steps)?;
    Ok(ksbcov_with(&boundary, p))
}

fn ksbcov_with(boundary: &BTreeSet<AbstractState>, p: &CoverageProfile) -> CoverageValue {
    let hit = p.states.iter().filter(|s| boundary.contains(*s)).count();
    CoverageValue::count(Criterion::Ksbcov, hit, boundary.len())
}

pub fn btcov(model: &MdpModel, p: &CoverageProfile) -> CoverageValue {
    let pairs = model.src_dst_pairs();
    let hit = p.src_dst_pairs.iter().filter(|t| pairs.contains(*t)).count();
    CoverageValue::count(Criterion::Btcov, hit, pairs.len())
}

pub fn iscov(model: &MdpModel, p: &CoverageProfile) -> CoverageValue {
    let enabled = model.enabled_input_map();
    let hit: usize = p
        .state_inputs
        .iter()
        .filter_map(|(s, xs)| enabled.get(s).map(|m| xs.intersection(m).count()))
        .sum();
    CoverageValue::count(Criterion::Iscov, hit, model.choice_count())
}

pub fn wicov(model: &MdpModel, p: &CoverageProfile) -> CoverageValue {
    // covered destination counts per training choice
    let mut covered: BTreeMap<(&AbstractState, &AbstractInput), (u64, u64)> = BTreeMap::new();
    for t in &p.transitions {
        let Some(dsts) = model.transitions().get(&(t.src.clone(), t.input.clone())) else {
            continue;
        };
        let Some(n) = dsts.get(&t.dst) else {
            continue;
        };
        let entry = covered
            .entry((&t.src, &t.input))
            .or_insert_with(|| (0, dsts.values().sum()));
        entry.0 += n;
    }
    let numerator = covered
        .values()
        .map(|(n, total)| BigRational::new(BigInt::from(*n), BigInt::from(*total)))
        .fold(BigRational::zero(), |acc, r| acc + r);
    CoverageValue::new(Criterion::Wicov, numerator, model.choice_count())
}

/// `|Ŝ_x ∩ Ŝ_y| / |Ŝ_x ∪ Ŝ_y|` as `(intersection, union)`.
pub fn jaccard_counts(a: &CoverageProfile, b: &CoverageProfile) -> Result<(usize, usize)> {
    let inter = a.states.intersection(&b.states).count();
    let union = a.states.len() + b.states.len() - inter;
    if union == 0 {
        return Err(Error::EmptyJaccard);
    }
    Ok((inter, union))
}

pub fn jaccard(a: &CoverageProfile, b: &CoverageProfile) -> Result<f64> {
    let (i, u) = jaccard_counts(a, b)?;
    Ok(i as f64 / u as f64)
}

/// Evaluates criteria against one model, caching the boundary region.
#[derive(Debug, Clone)]
pub struct CoverageEvaluator<'m> {
    model: &'m MdpModel,
    boundary_steps: usize,
    boundary: BTreeSet<AbstractState>,
}

impl<'m> CoverageEvaluator<'m> {
    pub fn new(model: &'m MdpModel, boundary_steps: usize) -> Result<Self> {
        if boundary_steps == 0 {
            return Err(Error::Config("boundary steps must be >= 1".into()));
        }
        Ok(CoverageEvaluator {
            model,
            boundary_steps,
            boundary: boundary_union(model, boundary_steps)?,
        })
    }

    pub fn model(&self) -> &'m MdpModel {
        self.model
    }

    pub fn boundary_steps(&self) -> usize {
        self.boundary_steps
    }

    pub fn boundary(&self) -> &BTreeSet<AbstractState> {
        &self.boundary
    }

    pub fn evaluate(&self, criterion: Criterion, p: &CoverageProfile) -> CoverageValue {
        match criterion {
            Criterion::Bscov => bscov(self.model, p),
            Criterion::Ksbcov => ksbcov_with(&self.boundary, p),
            Criterion::Btcov => btcov(self.model, p),
            Criterion::Iscov => iscov(self.model, p),
            Criterion::Wicov => wicov(self.model, p),
        }
    }

    /// True iff merging `candidate` into `global` adds a unit to the
    /// criterion's numerator set.
    pub fn increases(
        &self,
        criterion: Criterion,
        global: &CoverageProfile,
        candidate: &CoverageProfile,
    ) -> Result<bool> {
        if global.model_id != candidate.model_id || global.model_id != self.model.fingerprint() {
            return Err(Error::Validation("profiles belong to different models".into()));
        }
        let model = self.model;
        let new_state = |region: &BTreeSet<AbstractState>| {
            candidate
                .states
                .iter()
                .any(|s| region.contains(s) && !global.states.contains(s))
        };
        Ok(match criterion {
            Criterion::Bscov => new_state(model.states()),
            Criterion::Ksbcov => new_state(&self.boundary),
            Criterion::Btcov => candidate
                .src_dst_pairs
                .iter()
                .any(|t| model.src_dst_pairs().contains(t) && !global.src_dst_pairs.contains(t)),
            Criterion::Iscov => candidate.state_inputs.iter().any(|(s, xs)| {
                let Some(enabled) = model.enabled_input_map().get(s) else {
                    return false;
                };
                let seen = global.state_inputs.get(s);
                xs.iter()
                    .any(|x| enabled.contains(x) && !seen.is_some_and(|g| g.contains(x)))
            }),
            Criterion::Wicov => candidate
                .transitions
                .iter()
                .any(|t| model.count(&t.src, &t.input, &t.dst) > 0 && !global.transitions.contains(t)),
        })
    }
}
