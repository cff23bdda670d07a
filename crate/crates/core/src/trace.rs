//! Concrete execution traces of a recurrent model and their text file format.
//!
//! A trace records, for every step `i`, the hidden state `s_i` the model held
//! before consuming input frame `x_i`, the input itself and the emitted token
//! `y_i`. The state after the last step is stored separately as the final
//! state, so a trace with `N` steps carries `N + 1` states.
//!
//! File grammar (one record per line, `\n` terminated):
//!
//! ```text
//! RNNTRACE 1 <state_dim> <input_dim>
//! T <trace_id>
//! S <y> | <x_0> ... <x_{input_dim-1}> | <s_0> ... <s_{state_dim-1}>
//! F <s_0> ... <s_{state_dim-1}>
//! ```
//!
//! Numbers are written with 9 significant digits, which round-trips `f32`
//! exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_MAGIC: &str = "RNNTRACE";
pub const TRACE_VERSION: u32 = 1;

/// Hidden state vector of the recurrent model at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteState(pub Vec<f32>);

impl ConcreteState {
    pub fn zeros(dim: usize) -> Self {
        ConcreteState(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(i) = self.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("{what}: non-finite value at component {i}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub state: ConcreteState,
    pub input: Vec<f32>,
    pub output: u32,
}

/// One concrete transition `(s_i, x_i, y_i, s_{i+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcreteTransition<'a> {
    pub source: &'a ConcreteState,
    pub input: &'a [f32],
    pub output: u32,
    pub destination: &'a ConcreteState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: String,
    pub steps: Vec<TraceStep>,
    pub final_state: ConcreteState,
}

impl Trace {
    /// Builds a trace and checks the structural invariants: at least one
    /// step, a zero initial state and consistent dimensions.
    pub fn new(id: impl Into<String>, steps: Vec<TraceStep>, final_state: ConcreteState) -> Result<Self> {
        let trace = Trace {
            id: id.into(),
            steps,
            final_state,
        };
        trace.validate_shape()?;
        Ok(trace)
    }

    fn validate_shape(&self) -> Result<()> {
        if self.id.is_empty() || self.id.chars().any(char::is_whitespace) {
            return Err(Error::Validation(format!(
                "trace id {:?} must be non-empty and contain no whitespace",
                self.id
            )));
        }
        let first = self
            .steps
            .first()
            .ok_or_else(|| Error::Validation(format!("trace {}: no steps", self.id)))?;
        if !first.state.is_zero() {
            return Err(Error::Validation(format!(
                "trace {}: initial state is not the zero vector",
                self.id
            )));
        }
        let state_dim = first.state.len();
        let input_dim = first.input.len();
        self.validate_dims(state_dim, input_dim)
    }

    fn validate_dims(&self, state_dim: usize, input_dim: usize) -> Result<()> {
        for (i, step) in self.steps.iter().enumerate() {
            if step.state.len() != state_dim {
                return Err(Error::Validation(format!(
                    "trace {}: step {i} state has dimension {}, expected {state_dim}",
                    self.id,
                    step.state.len()
                )));
            }
            if step.input.len() != input_dim {
                return Err(Error::Validation(format!(
                    "trace {}: step {i} input has dimension {}, expected {input_dim}",
                    self.id,
                    step.input.len()
                )));
            }
            step.state.check_finite(&format!("trace {} step {i} state", self.id))?;
            if let Some(j) = step.input.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "trace {}: step {i} input has non-finite value at component {j}",
                    self.id
                )));
            }
        }
        if self.final_state.len() != state_dim {
            return Err(Error::Validation(format!(
                "trace {}: final state has dimension {}, expected {state_dim}",
                self.id,
                self.final_state.len()
            )));
        }
        self.final_state.check_finite(&format!("trace {} final state", self.id))
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Every state of the trace in order, `s_0 ..= s_N`.
    pub fn states(&self) -> impl Iterator<Item = &ConcreteState> + Clone {
        self.steps
            .iter()
            .map(|s| &s.state)
            .chain(std::iter::once(&self.final_state))
    }

    pub fn transitions(&self) -> Vec<ConcreteTransition<'_>> {
        trace_transitions(self)
    }
}

/// Expands a trace into its concrete transitions. Entry `i` ends in the
/// state that entry `i + 1` starts from; the last entry ends in the final
/// state.
pub fn trace_transitions(trace: &Trace) -> Vec<ConcreteTransition<'_>> {
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| ConcreteTransition {
            source: &step.state,
            input: &step.input,
            output: step.output,
            destination: trace
                .steps
                .get(i + 1)
                .map(|next| &next.state)
                .unwrap_or(&trace.final_state),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub state_dim: usize,
    pub input_dim: usize,
    pub traces: Vec<Trace>,
}

impl TraceSet {
    pub fn new(state_dim: usize, input_dim: usize) -> Result<Self> {
        if state_dim == 0 || input_dim == 0 {
            return Err(Error::Validation(format!(
                "dimensions must be positive (state {state_dim}, input {input_dim})"
            )));
        }
        Ok(TraceSet {
            state_dim,
            input_dim,
            traces: Vec::new(),
        })
    }

    pub fn push(&mut self, trace: Trace) -> Result<()> {
        self.check_trace(&trace)?;
        self.traces.push(trace);
        Ok(())
    }

    pub fn check_trace(&self, trace: &Trace) -> Result<()> {
        trace.validate_shape()?;
        trace.validate_dims(self.state_dim, self.input_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.input_dim == 0 {
            return Err(Error::Validation("dimensions must be positive".into()));
        }
        self.traces.iter().try_for_each(|t| self.check_trace(t))
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn total_transitions(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }
}

pub(crate) fn fmt_f32(out: &mut String, v: f32) {
    // 9 significant digits
    write!(out, "{v:.8e}").expect("write to String");
}

fn push_values(out: &mut String, values: &[f32]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt_f32(out, *v);
    }
}

/// Renders a trace set in the canonical text format.
pub fn render_traces(ts: &TraceSet) -> String {
    let mut out = String::new();
    writeln!(out, "{TRACE_MAGIC} {TRACE_VERSION} {} {}", ts.state_dim, ts.input_dim).unwrap();
    for trace in &ts.traces {
        writeln!(out, "T {}", trace.id).unwrap();
        for step in &trace.steps {
            write!(out, "S {} | ", step.output).unwrap();
            push_values(&mut out, &step.input);
            out.push_str(" | ");
            push_values(&mut out, step.state.values());
            out.push('\n');
        }
        out.push_str("F ");
        push_values(&mut out, trace.final_state.values());
        out.push('\n');
    }
    out
}

pub fn save_traces(ts: &TraceSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ts.validate()?;
    fs::write(path, render_traces(ts)).map_err(|e| Error::io(path, e))
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<TraceSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_traces(&text, &path.display().to_string())
}

fn parse_values(origin: &str, line_no: usize, field: &str, expected: usize, text: &str) -> Result<Vec<f32>> {
    let values = text
        .split_ascii_whitespace()
        .map(|tok| {
            let v: f32 = tok
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("{field}: bad number {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(origin, line_no, format!("{field}: non-finite {tok:?}")));
            }
            Ok(v)
        })
        .collect::<Result<Vec<f32>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            origin,
            line_no,
            format!("{field}: {} values, expected {expected}", values.len()),
        ));
    }
    Ok(values)
}

struct PartialTrace {
    id: String,
    steps: Vec<TraceStep>,
}

/// Parses the canonical trace format. `origin` names the source in errors.
pub fn parse_traces(text: &str, origin: &str) -> Result<TraceSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    let (state_dim, input_dim) = match fields.as_slice() {
        [magic, version, sd, id] if *magic == TRACE_MAGIC => {
            if version.parse::<u32>().ok() != Some(TRACE_VERSION) {
                return Err(Error::parse(origin, 1, format!("unsupported version {version:?}")));
            }
            let sd: usize = sd
                .parse()
                .map_err(|_| Error::parse(origin, 1, format!("bad state_dim {sd:?}")))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::parse(origin, 1, format!("bad input_dim {id:?}")))?;
            (sd, id)
        }
        _ => return Err(Error::parse(origin, 1, "expected `RNNTRACE 1 <state_dim> <input_dim>`")),
    };
    let mut set = TraceSet::new(state_dim, input_dim).map_err(|e| Error::parse(origin, 1, e.to_string()))?;

    let mut current: Option<PartialTrace> = None;
    for (line_no, line) in lines {
        if line.is_empty() {
            return Err(Error::parse(origin, line_no, "empty line"));
        }
        let (tag, rest) = line.split_at(1);
        let rest = rest
            .strip_prefix(' ')
            .ok_or_else(|| Error::parse(origin, line_no, "expected a space after the record tag"))?;
        match tag {
            "T" => {
                if let Some(open) = &current {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("trace {} not closed by an F line", open.id),
                    ));
                }
                if rest.is_empty() || rest.chars().any(char::is_whitespace) {
                    return Err(Error::parse(origin, line_no, format!("bad trace id {rest:?}")));
                }
                current = Some(PartialTrace {
                    id: rest.to_string(),
                    steps: Vec::new(),
                });
            }
            "S" => {
                let open = current
                    .as_mut()
                    .ok_or_else(|| Error::parse(origin, line_no, "step outside of a trace"))?;
                let mut parts = rest.split('|');
                let (Some(y), Some(x), Some(s), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                    return Err(Error::parse(origin, line_no, "expected `S <y> | <x..> | <s..>`"));
                };
                let output: u32 = y
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(origin, line_no, format!("bad token {:?}", y.trim())))?;
                let input = parse_values(origin, line_no, "input", input_dim, x)?;
                let state = parse_values(origin, line_no, "state", state_dim, s)?;
                open.steps.push(TraceStep {
                    state: ConcreteState(state),
                    input,
                    output,
                });
            }
            "F" => {
                let open = current
                    .take()
                    .ok_or_else(|| Error::parse(origin, line_no, "final state outside of a trace"))?;
                let final_state = ConcreteState(parse_values(origin, line_no, "final state", state_dim, rest)?);
                let trace = Trace {
                    id: open.id,
                    steps: open.steps,
                    final_state,
                };
                set.push(trace)?;
            }
            other => {
                return Err(Error::parse(origin, line_no, format!("unknown record tag {other:?}")));
            }
        }
    }
    if let Some(open) = current {
        return Err(Error::parse(
            origin,
            text.lines().count(),
            format!("trace {} not closed by an F line", open.id),
        ));
    }
    Ok(set)
}
