//! Episode trace: one JSON object per line, tagged by `event`.
//!
//! Every record carries `step`, the number of scans fused so far. Records:
//!
//! - `scan`: viewpoint, scan kind, valid pixels, points fused into the
//!   surface and points attributed to already replaced models.
//! - `presegment`: surface size, floor/wall split, component count.
//! - `postsegment`: Potts energy and every object with its label,
//!   objectness and lifecycle state.
//! - `nbo_decision`: robot state, weights, inputs and the `O, S_z, S_e,
//!   S_d, total` breakdown for every candidate object, and the choice.
//! - `nbv_decision`: priors, every candidate view with its gain and
//!   per-model gains, the argmax, the executed view and views skipped as
//!   unreachable or already scanned.
//! - `navigation`, `replacement`, `abandon`, `frontier`, `warning`,
//!   `termination`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::camera::Viewpoint;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point, Pose};
use crate::planning::gain::select_nbv;
use crate::planning::nbo::{argmax_nbo, nbo_scores};
use crate::planning::{NboInput, NboScore, NboWeights, RobotState, ViewCandidate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Entry,
    Nbv,
    Fallback,
    Frontier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectState {
    Complete,
    Noise,
    InProgress,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: u32,
    pub label: String,
    pub points: usize,
    pub objectness: f64,
    pub state: ObjectState,
    pub components: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// No objects left to scan and no floor frontier.
    Explored,
    /// No floor was found, so there is nothing to explore.
    NoFloor,
    FrontierBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Scan {
        step: usize,
        kind: ScanKind,
        viewpoint: Viewpoint,
        valid_pixels: usize,
        fused: usize,
        diverted: usize,
        surface_points: usize,
    },
    Presegment {
        step: usize,
        surface_points: usize,
        floor_points: usize,
        wall_points: usize,
        floor_found: bool,
        components: usize,
        dropped_points: usize,
    },
    Postsegment {
        step: usize,
        energy: f64,
        objects: Vec<ObjectSummary>,
    },
    NboDecision {
        step: usize,
        robot: RobotState,
        weights: NboWeights,
        inputs: Vec<NboInput>,
        scores: Vec<NboScore>,
        chosen: Option<u32>,
        ooi: Option<u32>,
    },
    NbvDecision {
        step: usize,
        ooi: u32,
        object: u32,
        nbv_index: usize,
        priors: Vec<f64>,
        candidates: Vec<ViewCandidate>,
        argmax: Option<usize>,
        chosen: Option<usize>,
        unreachable: Vec<usize>,
        /// Candidates skipped because a scan was already taken there.
        revisits: Vec<usize>,
        fallback: Option<Viewpoint>,
    },
    Navigation {
        step: usize,
        from: Point,
        to: Point,
        length: f64,
        waypoints: Vec<Point>,
    },
    Replacement {
        step: usize,
        object: u32,
        recognized: u32,
        entry: u32,
        model_id: String,
        label: String,
        pose: Pose,
        aabb: Aabb,
        objectness: f64,
        points_removed: usize,
    },
    Abandon {
        step: usize,
        ooi: u32,
        reason: String,
    },
    Frontier {
        step: usize,
        cell: usize,
        viewpoint: Viewpoint,
        reachable: bool,
    },
    Warning {
        step: usize,
        message: String,
    },
    Termination {
        step: usize,
        reason: TerminationReason,
        partial: bool,
        nbo_count: usize,
        traveled: f64,
    },
}

impl TraceEvent {
    pub fn step(&self) -> usize {
        match self {
            TraceEvent::Scan { step, .. }
            | TraceEvent::Presegment { step, .. }
            | TraceEvent::Postsegment { step, .. }
            | TraceEvent::NboDecision { step, .. }
            | TraceEvent::NbvDecision { step, .. }
            | TraceEvent::Navigation { step, .. }
            | TraceEvent::Replacement { step, .. }
            | TraceEvent::Abandon { step, .. }
            | TraceEvent::Frontier { step, .. }
            | TraceEvent::Warning { step, .. }
            | TraceEvent::Termination { step, .. } => *step,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub events: Vec<TraceEvent>,
}

impl EpisodeTrace {
    pub fn scans(&self) -> impl Iterator<Item = (&Viewpoint, ScanKind)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Scan { viewpoint, kind, .. } => Some((viewpoint, *kind)),
            _ => None,
        })
    }
}

fn write_event(sink: &mut dyn Write, e: &TraceEvent) -> Result<()> {
    serde_json::to_writer(&mut *sink, e)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

/// Writes `trace` as JSON lines, flushing after each record.
pub fn emit_trace(trace: &EpisodeTrace, mut sink: impl Write) -> Result<()> {
    for e in &trace.events {
        write_event(&mut sink, e)?;
    }
    Ok(())
}

pub fn read_trace(reader: impl BufRead) -> Result<EpisodeTrace> {
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("trace line {}: {e}", n + 1)))?);
    }
    Ok(EpisodeTrace { events })
}

/// Accumulates events and streams each to an optional sink as it happens.
pub struct TraceRecorder<'a> {
    pub trace: EpisodeTrace,
    sink: Option<&'a mut dyn Write>,
}

impl<'a> TraceRecorder<'a> {
    pub fn new(sink: Option<&'a mut dyn Write>) -> Self {
        TraceRecorder {
            trace: EpisodeTrace::default(),
            sink,
        }
    }

    pub fn push(&mut self, e: TraceEvent) -> Result<()> {
        if let Some(s) = self.sink.as_mut() {
            write_event(*s, &e)?;
        }
        self.trace.events.push(e);
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub nbo_decisions: usize,
    pub nbv_decisions: usize,
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn is_consistent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recomputes every recorded NBO and NBV argmax from the recorded inputs
/// and checks it against the recorded decision.
pub fn replay(trace: &EpisodeTrace) -> ReplayReport {
    let mut report = ReplayReport::default();
    for e in &trace.events {
        match e {
            TraceEvent::NboDecision {
                step,
                robot,
                weights,
                inputs,
                scores,
                chosen,
                ..
            } => {
                report.nbo_decisions += 1;
                let again = nbo_scores(inputs, robot, weights);
                if again != *scores {
                    report.mismatches.push(format!("step {step}: NBO scores differ"));
                }
                let best = argmax_nbo(&again).map(|i| again[i].object);
                if best != *chosen {
                    report
                        .mismatches
                        .push(format!("step {step}: NBO argmax {best:?} but trace chose {chosen:?}"));
                }
            }
            TraceEvent::NbvDecision {
                step,
                candidates,
                argmax,
                ..
            } => {
                report.nbv_decisions += 1;
                let best = select_nbv(candidates).ok().map(|i| candidates[i].index);
                if best != *argmax {
                    report
                        .mismatches
                        .push(format!("step {step}: NBV argmax {best:?} but trace recorded {argmax:?}"));
                }
            }
            _ => {}
        }
    }
    report
}
