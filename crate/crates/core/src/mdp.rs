//! Abstract transition model built from profiling traces.
//!
//! Every concrete transition `(s, x, s')` is mapped through the state and
//! input abstractions and counted under its `(ŝ, x̂, ŝ')` bucket. Counts are
//! the stored quantity; probabilities are derived on query as
//! `count(ŝ, x̂, ŝ') / count(ŝ, x̂, ·)`.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;

use crate::abstraction::{write_indices, AbstractInput, AbstractState, Abstraction, GridConfig, Projection};
use crate::error::{Error, Result};
use crate::trace::{Trace, TraceSet};

pub const MODEL_MAGIC: &str = "RNNMDP";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractTransition {
    pub src: AbstractState,
    pub input: AbstractInput,
    pub dst: AbstractState,
}

pub type Choice = (AbstractState, AbstractInput);

#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    pub state_abstraction: Abstraction,
    pub input_abstraction: Abstraction,
    states: BTreeSet<AbstractState>,
    initial: BTreeSet<AbstractState>,
    transitions: BTreeMap<Choice, BTreeMap<AbstractState, u64>>,
    enabled_inputs: BTreeMap<AbstractState, BTreeSet<AbstractInput>>,
    src_dst: BTreeSet<(AbstractState, AbstractState)>,
    fingerprint: u64,
}

/// Abstraction parameters for [`build_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    pub k: usize,
    pub m: usize,
    pub k_in: usize,
    pub m_in: usize,
}

impl ModelParams {
    /// Input abstraction defaults to the state parameters.
    pub fn new(k: usize, m: usize) -> Self {
        ModelParams { k, m, k_in: k, m_in: m }
    }
}

/// Fits both abstractions on the profiling set, then counts every concrete
/// transition in a single pass.
pub fn build_model(ts: &TraceSet, params: ModelParams) -> Result<MdpModel> {
    if ts.is_empty() {
        return Err(Error::Validation("cannot build a model from an empty trace set".into()));
    }
    ts.validate()?;
    let states = ts.traces.iter().flat_map(|t| t.states().map(|s| s.values()));
    let state_abstraction = Abstraction::fit(states, params.k, params.m)?;
    let inputs = ts
        .traces
        .iter()
        .flat_map(|t| t.steps.iter().map(|s| s.input.as_slice()));
    let input_abstraction = Abstraction::fit(inputs, params.k_in, params.m_in)?;
    MdpModel::from_traces(state_abstraction, input_abstraction, &ts.traces)
}

impl MdpModel {
    /// Builds a model under fixed, already-fitted abstractions.
    pub fn from_traces(
        state_abstraction: Abstraction,
        input_abstraction: Abstraction,
        traces: &[Trace],
    ) -> Result<Self> {
        let mut model = MdpModel {
            state_abstraction,
            input_abstraction,
            states: BTreeSet::new(),
            initial: BTreeSet::new(),
            transitions: BTreeMap::new(),
            enabled_inputs: BTreeMap::new(),
            src_dst: BTreeSet::new(),
            fingerprint: 0,
        };
        let mut visited = 0usize;
        for trace in traces {
            let path = model.abstract_trace(trace)?;
            if let Some(first) = path.first() {
                model.initial.insert(first.src.clone());
            }
            for t in path {
                *model
                    .transitions
                    .entry((t.src, t.input))
                    .or_default()
                    .entry(t.dst)
                    .or_default() += 1;
                visited += 1;
            }
        }
        debug_assert_eq!(visited, traces.iter().map(Trace::len).sum::<usize>());
        model.rebuild_indexes();
        Ok(model)
    }

    fn rebuild_indexes(&mut self) {
        self.states = self.initial.clone();
        self.enabled_inputs.clear();
        self.src_dst.clear();
        for ((src, input), dsts) in &self.transitions {
            self.states.insert(src.clone());
            self.enabled_inputs
                .entry(src.clone())
                .or_default()
                .insert(input.clone());
            for dst in dsts.keys() {
                self.states.insert(dst.clone());
                self.src_dst.insert((src.clone(), dst.clone()));
            }
        }
        let mut h = DefaultHasher::new();
        self.render().hash(&mut h);
        self.fingerprint = h.finish();
    }

    /// Content hash of the serialized model; profiles record it so that
    /// profiles from different models are never mixed.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn state_dim(&self) -> usize {
        self.state_abstraction.input_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_abstraction.input_dim()
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            k: self.state_abstraction.grid.k,
            m: self.state_abstraction.grid.m,
            k_in: self.input_abstraction.grid.k,
            m_in: self.input_abstraction.grid.m,
        }
    }

    /// Ŝ_M: every source, destination and initial state.
    pub fn states(&self) -> &BTreeSet<AbstractState> {
        &self.states
    }

    pub fn initial(&self) -> &BTreeSet<AbstractState> {
        &self.initial
    }

    pub fn transitions(&self) -> &BTreeMap<Choice, BTreeMap<AbstractState, u64>> {
        &self.transitions
    }

    /// Abstract transitions at `(src, dst)` granularity.
    pub fn src_dst_pairs(&self) -> &BTreeSet<(AbstractState, AbstractState)> {
        &self.src_dst
    }

    pub fn enabled_inputs(&self, s: &AbstractState) -> BTreeSet<AbstractInput> {
        self.enabled_inputs.get(s).cloned().unwrap_or_default()
    }

    pub fn enabled_input_map(&self) -> &BTreeMap<AbstractState, BTreeSet<AbstractInput>> {
        &self.enabled_inputs
    }

    /// Σ_ŝ |𝒳̂_M(ŝ)|, the number of observed (state, input) choices.
    pub fn choice_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn count(&self, s: &AbstractState, x: &AbstractInput, d: &AbstractState) -> u64 {
        self.transitions
            .get(&(s.clone(), x.clone()))
            .and_then(|m| m.get(d))
            .copied()
            .unwrap_or(0)
    }

    /// Total number of concrete transitions folded into the model.
    pub fn total_count(&self) -> u64 {
        self.transitions.values().flat_map(|m| m.values()).sum()
    }

    /// `(count(ŝ,x̂,ŝ'), count(ŝ,x̂,·))`, or an error if `(ŝ, x̂)` was never
    /// observed.
    pub fn probability_ratio(&self, s: &AbstractState, x: &AbstractInput, d: &AbstractState) -> Result<(u64, u64)> {
        let dsts = self
            .transitions
            .get(&(s.clone(), x.clone()))
            .ok_or_else(|| Error::UndefinedDistribution {
                state: s.0.clone(),
                input: x.0.clone(),
            })?;
        let total: u64 = dsts.values().sum();
        Ok((dsts.get(d).copied().unwrap_or(0), total))
    }

    pub fn transition_probability(&self, s: &AbstractState, x: &AbstractInput, d: &AbstractState) -> Result<f64> {
        let (n, total) = self.probability_ratio(s, x, d)?;
        Ok(n as f64 / total as f64)
    }

    pub fn abstract_state_of(&self, v: &[f32]) -> Result<AbstractState> {
        self.state_abstraction.cell(v).map(AbstractState)
    }

    pub fn abstract_input_of(&self, v: &[f32]) -> Result<AbstractInput> {
        self.input_abstraction.cell(v).map(AbstractInput)
    }

    /// Maps each concrete transition of `trace` through the abstractions.
    pub fn abstract_trace(&self, trace: &Trace) -> Result<Vec<AbstractTransition>> {
        let states = trace
            .states()
            .map(|s| {
                if s.len() != self.state_dim() {
                    return Err(Error::Validation(format!(
                        "trace {}: state dimension {} does not match model ({})",
                        trace.id,
                        s.len(),
                        self.state_dim()
                    )));
                }
                self.abstract_state_of(s.values())
            })
            .collect::<Result<Vec<_>>>()?;
        trace
            .steps
            .iter()
            .enumerate()
            .map(|(i, step)| {
                if step.input.len() != self.input_dim() {
                    return Err(Error::Validation(format!(
                        "trace {}: input dimension {} does not match model ({})",
                        trace.id,
                        step.input.len(),
                        self.input_dim()
                    )));
                }
                Ok(AbstractTransition {
                    src: states[i].clone(),
                    input: self.abstract_input_of(&step.input)?,
                    dst: states[i + 1].clone(),
                })
            })
            .collect()
    }

    /// Checks the structural invariants that loading and building rely on.
    pub fn validate(&self) -> Result<()> {
        self.state_abstraction.projection.validate()?;
        self.state_abstraction.grid.validate()?;
        self.input_abstraction.projection.validate()?;
        self.input_abstraction.grid.validate()?;
        let k = self.state_abstraction.grid.k;
        let k_in = self.input_abstraction.grid.k;
        for ((s, x), dsts) in &self.transitions {
            if dsts.is_empty() || dsts.values().any(|c| *c == 0) {
                return Err(Error::Validation(format!("choice ({s}; {x}) has a zero count")));
            }
            if s.dims() != k || x.dims() != k_in || dsts.keys().any(|d| d.dims() != k) {
                return Err(Error::Validation(format!(
                    "choice ({s}; {x}) has wrong cell dimensions"
                )));
            }
        }
        if self.initial.iter().any(|s| s.dims() != k) {
            return Err(Error::Validation("initial state has wrong dimensions".into()));
        }
        Ok(())
    }

    /// Serializes to the `RNNMDP 1` text format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let p = self.params();
        writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
        writeln!(out, "params {} {} {} {}", p.k, p.m, p.k_in, p.m_in).unwrap();
        render_abstraction(&mut out, "state", &self.state_abstraction);
        render_abstraction(&mut out, "input", &self.input_abstraction);
        for s in &self.initial {
            out.push_str("initial ");
            write_indices(&mut out, &s.0).unwrap();
            out.push('\n');
        }
        for ((s, x), dsts) in &self.transitions {
            for (d, n) in dsts {
                out.push_str("count ");
                write_indices(&mut out, &s.0).unwrap();
                out.push(' ');
                write_indices(&mut out, &x.0).unwrap();
                out.push(' ');
                write_indices(&mut out, &d.0).unwrap();
                writeln!(out, " {n}").unwrap();
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut reader = LineReader {
            lines: text.lines().enumerate(),
            origin,
            line_no: 0,
        };
        let header = reader.next_line()?;
        if header != format!("{MODEL_MAGIC} {MODEL_VERSION}") {
            return Err(reader.error(format!("expected `{MODEL_MAGIC} {MODEL_VERSION}` header")));
        }
        let params = reader.keyed("params")?;
        let params: Vec<usize> = params
            .split(' ')
            .map(|v| v.parse().map_err(|_| reader.error(format!("bad parameter {v:?}"))))
            .collect::<Result<_>>()?;
        let [k, m, k_in, m_in] = params[..] else {
            return Err(reader.error("params needs 4 values"));
        };
        let state_abstraction = parse_abstraction(&mut reader, "state", k, m)?;
        let input_abstraction = parse_abstraction(&mut reader, "input", k_in, m_in)?;
        let mut model = MdpModel {
            state_abstraction,
            input_abstraction,
            states: BTreeSet::new(),
            initial: BTreeSet::new(),
            transitions: BTreeMap::new(),
            enabled_inputs: BTreeMap::new(),
            src_dst: BTreeSet::new(),
            fingerprint: 0,
        };
        loop {
            let line = reader.next_line()?;
            if line == "end" {
                break;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "initial" => {
                    let s = AbstractState(reader.indices(rest, k)?);
                    model.initial.insert(s);
                }
                "count" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    let [s, x, d, n] = parts[..] else {
                        return Err(reader.error("count needs `<src> <input> <dst> <n>`"));
                    };
                    let s = AbstractState(reader.indices(s, k)?);
                    let x = AbstractInput(reader.indices(x, k_in)?);
                    let d = AbstractState(reader.indices(d, k)?);
                    let n: u64 = n.parse().map_err(|_| reader.error(format!("bad count {n:?}")))?;
                    if n == 0 {
                        return Err(reader.error("counts must be positive"));
                    }
                    if model.transitions.entry((s, x)).or_default().insert(d, n).is_some() {
                        return Err(reader.error("duplicate count entry"));
                    }
                }
                other => return Err(reader.error(format!("unexpected record {other:?}"))),
            }
        }
        model.rebuild_indexes();
        model.validate()?;
        Ok(model)
    }
}

fn render_floats(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        // shortest representation that round-trips
        write!(out, " {v:e}").unwrap();
    }
    out.push('\n');
}

fn render_abstraction(out: &mut String, name: &str, a: &Abstraction) {
    writeln!(out, "abstraction {name} {} {}", a.projection.input_dim(), a.grid.k).unwrap();
    render_floats(out, "mean", &a.projection.mean);
    for c in &a.projection.components {
        render_floats(out, "component", c);
    }
    render_floats(out, "variance", &a.projection.explained_variance);
    render_floats(out, "lower", &a.grid.lb);
    render_floats(out, "upper", &a.grid.ub);
}

struct LineReader<'a, I> {
    lines: I,
    origin: &'a str,
    line_no: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> LineReader<'a, I> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.origin, self.line_no, msg)
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line_no = i + 1;
                Ok(l)
            }
            None => {
                self.line_no += 1;
                Err(self.error("unexpected end of file"))
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ => Err(self.error(format!("expected `{key}` record"))),
        }
    }

    fn floats(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let rest = self.keyed(key)?;
        let values: Vec<f64> = rest
            .split(' ')
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(self.error(format!("bad number {v:?}"))),
            })
            .collect::<Result<_>>()?;
        if values.len() != n {
            return Err(self.error(format!("{key}: {} values, expected {n}", values.len())));
        }
        Ok(values)
    }

    fn indices(&self, text: &str, n: usize) -> Result<Vec<i32>> {
        let idx: Vec<i32> = text
            .split(',')
            .map(|v| v.parse().map_err(|_| self.error(format!("bad index {v:?}"))))
            .collect::<Result<_>>()?;
        if idx.len() != n {
            return Err(self.error(format!("cell has {} indices, expected {n}", idx.len())));
        }
        Ok(idx)
    }
}

fn parse_abstraction<'a, I: Iterator<Item = (usize, &'a str)>>(
    reader: &mut LineReader<'a, I>,
    name: &str,
    k: usize,
    m: usize,
) -> Result<Abstraction> {
    let rest = reader.keyed("abstraction")?;
    let parts: Vec<&str> = rest.split(' ').collect();
    let [n, dim, kk] = parts[..] else {
        return Err(reader.error("expected `abstraction <name> <dim> <k>`"));
    };
    if n != name {
        return Err(reader.error(format!("expected {name} abstraction, found {n}")));
    }
    let dim: usize = dim.parse().map_err(|_| reader.error("bad dimension"))?;
    if kk.parse::<usize>().ok() != Some(k) {
        return Err(reader.error(format!("abstraction k {kk} does not match params ({k})")));
    }
    let mean = reader.floats("mean", dim)?;
    let components = (0..k)
        .map(|_| reader.floats("component", dim))
        .collect::<Result<Vec<_>>>()?;
    let variance = reader.floats("variance", k)?;
    let lb = reader.floats("lower", k)?;
    let ub = reader.floats("upper", k)?;
    let line = reader.line_no;
    let wrap = |e: Error| Error::parse(reader.origin, line, e.to_string());
    let projection = Projection::new(mean, components, variance).map_err(wrap)?;
    let grid = GridConfig::new(m, lb, ub).map_err(wrap)?;
    Abstraction::new(projection, grid).map_err(wrap)
}
