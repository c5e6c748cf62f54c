//! Per-sample CSV trace and the JSON run summary.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::runtime::{ManeuverPhase, TimestepTrace};
use crate::scenario::ScenarioConfig;

/// Column order of the trace file.
pub const TRACE_COLUMNS: [&str; 16] = [
    "t",
    "agent_id",
    "s",
    "dy",
    "dpsi",
    "v",
    "ax",
    "delta",
    "a_y",
    "phase",
    "admm_iters",
    "primal_res",
    "dual_res",
    "solve_time",
    "comm_overhead",
    "slack_max",
];

/// Writes one row per (timestep, agent). With `deterministic` set, wall-clock
/// solve times are written as zero so identical runs give identical bytes.
pub fn write_trace<W: Write>(
    writer: W,
    config: &ScenarioConfig,
    traces: &[TimestepTrace],
    deterministic: bool,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(TRACE_COLUMNS)?;
    for tr in traces {
        let last = tr.residuals.last().copied().unwrap_or_default();
        for (agent, step) in config.agents.iter().zip(&tr.agents) {
            let solve_time = if deterministic { 0.0 } else { step.solve_time_s };
            let x = &step.state;
            w.write_record([
                fmt(tr.time_s),
                agent.name.clone(),
                fmt(x.s),
                fmt(x.dy),
                fmt(x.dpsi),
                fmt(x.v),
                fmt(step.input.ax),
                fmt(step.input.delta),
                fmt(step.lateral_accel),
                tr.phase.label().to_string(),
                tr.admm_iters.to_string(),
                fmt(last.primal),
                fmt(last.dual),
                fmt(solve_time),
                fmt(tr.comm_overhead_s),
                fmt(tr.max_slack()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fmt(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub phase: String,
    pub steps: usize,
    pub max_abs_ax: f64,
    pub max_admm_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub scenario: String,
    pub steps: usize,
    /// Time of the first sample in M-Step 2, if it was reached.
    pub m_step1_end_s: Option<f64>,
    /// Time of the first sample after the lane change was detected.
    pub m_step2_end_s: Option<f64>,
    pub phases: Vec<PhaseStats>,
    pub first_step_admm_iters: usize,
    pub max_admm_iters: usize,
    pub nonconverged_steps: usize,
    /// Largest per-agent wall time in one step, solve plus communication.
    pub max_wall_time_s: f64,
    pub max_slack_after_m_step1: f64,
}

pub fn report_summary(config: &ScenarioConfig, traces: &[TimestepTrace]) -> ReportSummary {
    let first_in = |phase: ManeuverPhase| traces.iter().find(|t| t.phase == phase).map(|t| t.time_s);
    let m_step1_end_s = first_in(ManeuverPhase::LaneChange);
    let phases = [ManeuverPhase::EstablishHeadway, ManeuverPhase::LaneChange, ManeuverPhase::Done]
        .into_iter()
        .map(|phase| {
            let mut stats = PhaseStats { phase: phase.label().into(), steps: 0, max_abs_ax: 0.0, max_admm_iters: 0 };
            for t in traces.iter().filter(|t| t.phase == phase) {
                stats.steps += 1;
                stats.max_admm_iters = stats.max_admm_iters.max(t.admm_iters);
                for a in &t.agents {
                    stats.max_abs_ax = stats.max_abs_ax.max(a.input.ax.abs());
                }
            }
            stats
        })
        .collect();
    let max_wall_time_s = traces
        .iter()
        .flat_map(|t| t.agents.iter().map(move |a| a.solve_time_s + t.comm_overhead_s))
        .fold(0.0, f64::max);
    let max_slack_after_m_step1 = traces
        .iter()
        .filter(|t| t.phase != ManeuverPhase::EstablishHeadway)
        .map(TimestepTrace::max_slack)
        .fold(0.0, f64::max);
    ReportSummary {
        scenario: config.name.clone(),
        steps: traces.len(),
        m_step1_end_s,
        m_step2_end_s: first_in(ManeuverPhase::Done),
        phases,
        first_step_admm_iters: traces.first().map_or(0, |t| t.admm_iters),
        max_admm_iters: traces.iter().map(|t| t.admm_iters).max().unwrap_or(0),
        nonconverged_steps: traces.iter().filter(|t| t.has_nonconvergence()).count(),
        max_wall_time_s,
        max_slack_after_m_step1,
    }
}

/// One bound that an applied step broke by more than the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub agent: String,
    pub quantity: String,
    pub value: f64,
    pub limit: f64,
}

/// Checks every applied step against the agent limits, the active lateral
/// band and, once headway has been established, the minimum gaps of the edges
/// in force.
pub fn constraint_violations(config: &ScenarioConfig, traces: &[TimestepTrace], tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for tr in traces {
        for (agent, step) in config.agents.iter().zip(&tr.agents) {
            let l = &agent.limits;
            let (x, u) = (&step.state, &step.input);
            let a_tot = u.ax.hypot(step.lateral_accel);
            let checks = [
                ("ax", u.ax, l.ax_min_mps2, l.ax_max_mps2),
                ("a_y", step.lateral_accel, -l.ay_max_mps2, l.ay_max_mps2),
                ("a_tot", a_tot, 0.0, l.atot_max_mps2),
                ("v", x.v, 0.0, l.v_max_mps),
                ("delta", u.delta, -l.delta_max_deg.to_radians(), l.delta_max_deg.to_radians()),
                ("dy", x.dy, step.band[0], step.band[1]),
            ];
            for (quantity, value, lo, hi) in checks {
                if value < lo - tol || value > hi + tol {
                    let limit = if value < lo { lo } else { hi };
                    out.push(Violation { t: tr.time_s, agent: agent.name.clone(), quantity: quantity.into(), value, limit });
                }
            }
        }
        if tr.phase != ManeuverPhase::EstablishHeadway {
            for &e in &tr.active_edges {
                let edge = &config.headway.edges[e];
                let (Some(f), Some(l)) = (config.agent_index(&edge.follower), config.agent_index(&edge.leader)) else {
                    continue;
                };
                let gap = tr.agents[l].state.s - tr.agents[f].state.s;
                if gap < config.headway.d_hw_m - tol {
                    out.push(Violation {
                        t: tr.time_s,
                        agent: edge.follower.clone(),
                        quantity: format!("gap to {}", edge.leader),
                        value: gap,
                        limit: config.headway.d_hw_m,
                    });
                }
            }
        }
    }
    out
}
