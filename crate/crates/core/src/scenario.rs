//! Scenario description: layout, movements, traffic and run length.
//!
//! The text format is one directive per line, `#` starts a comment:
//!
//! ```text
//! area <width> <height>
//! range <meters>
//! node <id> <x> <y>
//! move <t> <id> <dest_x> <dest_y> <speed>
//! flow <src> <dst> <rate_pps> <size_bytes> <start> <stop>
//! end <t>
//! ```
//!
//! Times are seconds. `range` may be omitted and defaults to the radio
//! model's default.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;
use crate::world::{Area, NodeId, Position, RadioModel, WaypointLeg, World};

const BUILTINS: [(&str, &str); 2] = [
    ("scenario1", include_str!("../scenarios/scenario1.scn")),
    ("scenario2", include_str!("../scenarios/scenario2.scn")),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficFlow {
    pub src: NodeId,
    pub dst: NodeId,
    /// Packets per second.
    pub rate: f64,
    pub packet_size: u32,
    pub start: SimTime,
    pub stop: SimTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub area: Area,
    pub radio: RadioModel,
    pub nodes: Vec<(NodeId, Position)>,
    pub movements: Vec<WaypointLeg>,
    pub flows: Vec<TrafficFlow>,
    pub end_time: SimTime,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{}", semantic_message(*line, message))]
    Semantic { line: Option<usize>, message: String },
    #[error("unknown scenario `{0}` (expected one of: scenario1, scenario2)")]
    UnknownScenario(String),
}

fn semantic_message(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("invalid scenario at line {l}: {message}"),
        None => format!("invalid scenario: {message}"),
    }
}

fn semantic(line: Option<usize>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Semantic { line, message: message.into() }
}

/// One packet emission of one flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Emission {
    pub at: SimTime,
    pub flow: usize,
}

/// A validated scenario lowered to what the engine schedules.
#[derive(Clone, Debug, PartialEq)]
pub struct EventBatch {
    pub legs: Vec<WaypointLeg>,
    /// Ordered by time, then flow index.
    pub emissions: Vec<Emission>,
    pub end: SimTime,
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

/// Source text of a built-in scenario.
pub fn builtin_source(name: &str) -> Result<&'static str, ScenarioError> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| *src)
        .ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))
}

pub fn builtin(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    parse(builtin_source(name)?)
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let line = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                tokens.push(Token { text: &line[s..i], column: line[..s].chars().count() + 1 });
                start = None;
            }
            _ => {}
        }
    }
    tokens
}

struct LineParser<'a> {
    line: usize,
    tokens: Vec<Token<'a>>,
    end_column: usize,
}

impl<'a> LineParser<'a> {
    fn syntax(&self, column: usize, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Syntax { line: self.line, column, message: message.into() }
    }

    fn expect_arity(&self, n: usize) -> Result<(), ScenarioError> {
        let directive = self.tokens[0].text;
        if self.tokens.len() - 1 < n {
            return Err(self.syntax(self.end_column, format!("`{directive}` needs {n} arguments")));
        }
        if let Some(extra) = self.tokens.get(n + 1) {
            return Err(self.syntax(extra.column, format!("unexpected argument `{}`", extra.text)));
        }
        Ok(())
    }

    fn real(&self, i: usize) -> Result<f64, ScenarioError> {
        let t = &self.tokens[i];
        match t.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.syntax(t.column, format!("expected a number, found `{}`", t.text))),
        }
    }

    fn time(&self, i: usize) -> Result<SimTime, ScenarioError> {
        let v = self.real(i)?;
        if v < 0.0 {
            return Err(self.syntax(self.tokens[i].column, "time must not be negative"));
        }
        Ok(SimTime::from_secs(v))
    }

    fn integer<T: std::str::FromStr>(&self, i: usize, what: &str) -> Result<T, ScenarioError> {
        let t = &self.tokens[i];
        t.text.parse::<T>().map_err(|_| self.syntax(t.column, format!("expected {what}, found `{}`", t.text)))
    }

    fn node(&self, i: usize) -> Result<NodeId, ScenarioError> {
        self.integer::<u16>(i, "a node id").map(NodeId)
    }
}

/// Parses and validates scenario text.
pub fn parse(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let mut area = None;
    let mut radio = RadioModel::default();
    let mut nodes: Vec<(NodeId, Position)> = Vec::new();
    let mut movements = Vec::new();
    let mut flows = Vec::new();
    let mut end_time = None;
    // Source line of each node / move / flow, for error messages.
    let mut node_lines = Vec::new();
    let mut move_lines = Vec::new();
    let mut flow_lines = Vec::new();
    let mut end_line = 0;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        let p =
            LineParser { line, tokens, end_column: raw.split('#').next().unwrap_or("").trim_end().chars().count() + 1 };
        match p.tokens[0].text {
            "area" => {
                p.expect_arity(2)?;
                area = Some(Area { width: p.real(1)?, height: p.real(2)? });
            }
            "range" => {
                p.expect_arity(1)?;
                radio.range = p.real(1)?;
            }
            "node" => {
                p.expect_arity(3)?;
                nodes.push((p.node(1)?, Position::new(p.real(2)?, p.real(3)?)));
                node_lines.push(line);
            }
            "move" => {
                p.expect_arity(5)?;
                movements.push(WaypointLeg {
                    start_time: p.time(1)?,
                    node: p.node(2)?,
                    dest: Position::new(p.real(3)?, p.real(4)?),
                    speed: p.real(5)?,
                });
                move_lines.push(line);
            }
            "flow" => {
                p.expect_arity(6)?;
                flows.push(TrafficFlow {
                    src: p.node(1)?,
                    dst: p.node(2)?,
                    rate: p.real(3)?,
                    packet_size: p.integer(4, "a packet size in bytes")?,
                    start: p.time(5)?,
                    stop: p.time(6)?,
                });
                flow_lines.push(line);
            }
            "end" => {
                p.expect_arity(1)?;
                end_time = Some(p.time(1)?);
                end_line = line;
            }
            other => return Err(p.syntax(p.tokens[0].column, format!("unknown directive `{other}`"))),
        }
    }

    let missing = |what: &str| ScenarioError::Syntax {
        line: last_line.max(1),
        column: 1,
        message: format!("missing `{what}` directive"),
    };
    if nodes.is_empty() && area.is_none() && end_time.is_none() && movements.is_empty() && flows.is_empty() {
        return Err(ScenarioError::Syntax { line: 1, column: 1, message: "empty scenario".into() });
    }
    let area = area.ok_or_else(|| missing("area"))?;
    let end_time = end_time.ok_or_else(|| missing("end"))?;

    let spec = ScenarioSpec { area, radio, nodes, movements, flows, end_time };
    let lines = SourceLines { nodes: node_lines, moves: move_lines, flows: flow_lines, end: end_line };
    check(&spec, Some(&lines))?;
    Ok(spec)
}

struct SourceLines {
    nodes: Vec<usize>,
    moves: Vec<usize>,
    flows: Vec<usize>,
    end: usize,
}

/// Checks every invariant a scenario must satisfy before it can run.
pub fn validate(spec: &ScenarioSpec) -> Result<(), ScenarioError> {
    check(spec, None)
}

fn check(spec: &ScenarioSpec, src: Option<&SourceLines>) -> Result<(), ScenarioError> {
    let at = |v: Option<&Vec<usize>>, i: usize| v.and_then(|l| l.get(i).copied());
    let node_line = |i| at(src.map(|s| &s.nodes), i);
    let move_line = |i| at(src.map(|s| &s.moves), i);
    let flow_line = |i| at(src.map(|s| &s.flows), i);
    let end_line = src.map(|s| s.end);

    let Area { width, height } = spec.area;
    if !(width > 0.0 && height > 0.0) {
        return Err(semantic(None, "area dimensions must be positive"));
    }
    if spec.radio.range.is_nan() || spec.radio.range <= 0.0 {
        return Err(semantic(None, "radio range must be positive"));
    }
    if spec.end_time == SimTime::ZERO {
        return Err(semantic(end_line, "end time must be positive"));
    }
    if spec.nodes.is_empty() {
        return Err(semantic(None, "scenario has no nodes"));
    }

    let n = spec.nodes.len();
    let mut seen = vec![false; n];
    for (i, (id, pos)) in spec.nodes.iter().enumerate() {
        if id.index() >= n {
            return Err(semantic(node_line(i), format!("node ids must be dense 0..{}, found {id}", n - 1)));
        }
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(semantic(node_line(i), format!("node {id} declared twice")));
        }
        if !spec.area.contains(pos) {
            return Err(semantic(node_line(i), format!("node {id} is placed outside the area")));
        }
    }
    let known = |id: NodeId| id.index() < n;

    let mut world = spec.initial_world();
    for (i, leg) in spec.movements.iter().enumerate() {
        let line = move_line(i);
        if !known(leg.node) {
            return Err(semantic(line, format!("movement refers to unknown node {}", leg.node)));
        }
        if leg.start_time >= spec.end_time {
            return Err(semantic(line, format!("movement at {} s is not before the end time", leg.start_time)));
        }
        if !spec.area.contains(&leg.dest) {
            return Err(semantic(line, format!("node {} would leave the area", leg.node)));
        }
        world.apply_movement(*leg, SimTime::ZERO).map_err(|e| semantic(line, e.to_string()))?;
    }

    for (i, f) in spec.flows.iter().enumerate() {
        let line = flow_line(i);
        for id in [f.src, f.dst] {
            if !known(id) {
                return Err(semantic(line, format!("flow refers to unknown node {id}")));
            }
        }
        if f.src == f.dst {
            return Err(semantic(line, "flow source and destination must differ"));
        }
        if f.rate.is_nan() || f.rate <= 0.0 {
            return Err(semantic(line, "flow rate must be positive"));
        }
        if f.packet_size == 0 {
            return Err(semantic(line, "packet size must be positive"));
        }
        if !(f.start < f.stop && f.stop <= spec.end_time) {
            return Err(semantic(line, "flow needs start < stop <= end time"));
        }
    }
    Ok(())
}

impl ScenarioSpec {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Initial positions indexed by node id.
    pub fn positions(&self) -> Vec<Position> {
        let mut out = vec![Position::new(0.0, 0.0); self.nodes.len()];
        for &(id, p) in &self.nodes {
            if let Some(slot) = out.get_mut(id.index()) {
                *slot = p;
            }
        }
        out
    }

    fn initial_world(&self) -> World {
        World::new(self.area, self.radio, &self.positions())
    }

    /// World with every movement registered. The spec must be valid.
    pub fn world(&self) -> World {
        let mut w = self.initial_world();
        for leg in &self.movements {
            w.apply_movement(*leg, SimTime::ZERO).expect("validated scenario");
        }
        w
    }

    /// Renders the spec in the text format; `parse` reads it back unchanged.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "area {} {}", self.area.width, self.area.height);
        let _ = writeln!(out, "range {}", self.radio.range);
        for (id, p) in &self.nodes {
            let _ = writeln!(out, "node {id} {} {}", p.x, p.y);
        }
        for m in &self.movements {
            let _ = writeln!(out, "move {} {} {} {} {}", m.start_time, m.node, m.dest.x, m.dest.y, m.speed);
        }
        for f in &self.flows {
            let _ = writeln!(out, "flow {} {} {} {} {} {}", f.src, f.dst, f.rate, f.packet_size, f.start, f.stop);
        }
        let _ = writeln!(out, "end {}", self.end_time);
        out
    }
}

/// Emission times of one flow: `start + k / rate` for every k with the
/// result strictly before `stop`.
pub fn emission_times(flow: &TrafficFlow) -> Vec<SimTime> {
    let start = flow.start.as_secs();
    (0u64..).map(|k| SimTime::from_secs(start + k as f64 / flow.rate)).take_while(|&t| t < flow.stop).collect()
}

/// Lowers a scenario to mobility legs, a packet schedule and the end time.
pub fn compile(spec: &ScenarioSpec) -> Result<EventBatch, ScenarioError> {
    validate(spec)?;
    let mut emissions: Vec<Emission> = spec
        .flows
        .iter()
        .enumerate()
        .flat_map(|(flow, f)| emission_times(f).into_iter().map(move |at| Emission { at, flow }))
        .collect();
    emissions.sort_by_key(|e| (e.at, e.flow));
    Ok(EventBatch { legs: spec.movements.clone(), emissions, end: spec.end_time })
}
