use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::solve::{dynamic_trim, static_trim};
use super::{classify, TrimSolution};
use crate::error::Result;
use crate::flightdyn::Simulator;
use crate::vehicle::config::AircraftConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeEntry {
    pub speed: f64,
    pub trimmed: bool,
    pub w_ok: bool,
    pub q_ok: bool,
    /// `None` when the trim pipeline failed outright.
    pub solution: Option<TrimSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeTable {
    pub morphing: bool,
    pub entries: Vec<EnvelopeEntry>,
}

fn entry(config: &AircraftConfig, speed: f64, sol: Option<TrimSolution>) -> EnvelopeEntry {
    match sol {
        Some(s) => {
            let c = classify(s.residual_w, s.residual_q_deg, config);
            EnvelopeEntry { speed, trimmed: c.trimmed, w_ok: c.w_ok, q_ok: c.q_ok, solution: Some(s) }
        }
        None => EnvelopeEntry { speed, trimmed: false, w_ok: false, q_ok: false, solution: None },
    }
}

/// Lexicographic preference: trimmed first, then the smaller residual ratio.
fn better(config: &AircraftConfig, a: &TrimSolution, b: &TrimSolution) -> bool {
    let ca = classify(a.residual_w, a.residual_q_deg, config);
    let cb = classify(b.residual_w, b.residual_q_deg, config);
    match (ca.trimmed, cb.trimmed) {
        (true, false) => true,
        (false, true) => false,
        _ => a.residual_ratio(config) < b.residual_ratio(config),
    }
}

fn trim_at(sim: &Simulator, speed: f64, morphing: bool) -> Result<TrimSolution> {
    let s = static_trim(sim, speed, 0.0)?;
    let frozen = dynamic_trim(sim, &s, false)?;
    if !morphing || !sim.config.morphing_enabled() {
        return Ok(frozen);
    }
    // the frozen answer is a candidate of the morphing problem
    let morph = dynamic_trim(sim, &frozen, true)?;
    Ok(if better(&sim.config, &morph, &frozen) { morph } else { frozen })
}

/// Static then dynamic trim at every speed, in parallel; failures are recorded as untrimmed.
pub fn trim_envelope(sim: &Simulator, speeds: &[f64], morphing: bool) -> EnvelopeTable {
    let entries = speeds
        .par_iter()
        .map(|&v| entry(&sim.config, v, trim_at(sim, v, morphing).ok()))
        .collect();
    EnvelopeTable { morphing, entries }
}

impl EnvelopeTable {
    pub fn trimmed_speeds(&self) -> Vec<f64> {
        self.entries.iter().filter(|e| e.trimmed).map(|e| e.speed).collect()
    }

    /// Aligned text: one column per speed, rows for w, q and the trimmed flag.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let label = if self.morphing { "morphing" } else { "fixed" };
        let _ = write!(out, "{:<16}", format!("{label} U [m/s]"));
        for e in &self.entries {
            let _ = write!(out, "{:>12.1}", e.speed);
        }
        out.push('\n');
        let cell = |v: Option<f64>, ok: bool| match v {
            Some(v) if v.is_finite() => format!("{}{:.4}", if ok { "*" } else { " " }, v),
            _ => "   -".to_string(),
        };
        let _ = write!(out, "{:<16}", "w [m/s]");
        for e in &self.entries {
            let _ = write!(out, "{:>12}", cell(e.solution.map(|s| s.residual_w), e.w_ok));
        }
        out.push('\n');
        let _ = write!(out, "{:<16}", "q [deg/s]");
        for e in &self.entries {
            let _ = write!(out, "{:>12}", cell(e.solution.map(|s| s.residual_q_deg), e.q_ok));
        }
        out.push('\n');
        let _ = write!(out, "{:<16}", "trimmed");
        for e in &self.entries {
            let _ = write!(out, "{:>12}", if e.trimmed { "yes" } else { "no" });
        }
        out.push('\n');
        out
    }
}
