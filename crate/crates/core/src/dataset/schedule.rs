use serde::{Deserialize, Serialize};

use super::DepthCurve;
use crate::error::{invalid, Result};

/// Stepped standoff trajectory: dwell at each standoff, move between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StairsSchedule {
    pub standoffs_mm: Vec<f64>,
    pub dwell_s: f64,
    pub transition_s: f64,
    pub traverse_speed_mm_s: f64,
    pub segment_length_mm: f64,
    /// Metal contact before the first and after the last dwell.
    pub lead_in_s: f64,
    pub lead_out_s: f64,
}

impl Default for StairsSchedule {
    fn default() -> Self {
        Self {
            standoffs_mm: vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            dwell_s: 2.0,
            transition_s: 1.0,
            traverse_speed_mm_s: 5.0,
            segment_length_mm: 10.0,
            lead_in_s: 1.0,
            lead_out_s: 1.0,
        }
    }
}

/// One dwell interval on the timeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dwell {
    pub standoff_mm: f64,
    pub start_s: f64,
    pub end_s: f64,
}

impl StairsSchedule {
    pub fn validate(&self, curve: &DepthCurve) -> Result<()> {
        let mut problems = Vec::new();
        if self.standoffs_mm.is_empty() {
            problems.push("schedule needs at least one standoff".to_string());
        }
        let (lo, hi) = curve.range();
        for &z in &self.standoffs_mm {
            if !(z > 0.0 && (lo..=hi).contains(&z)) {
                problems.push(format!("standoff {z} mm outside [{lo}, {hi}]"));
            }
        }
        if !(self.dwell_s > 0.0) {
            problems.push("dwell_s must be positive".into());
        }
        if !(self.transition_s >= 0.0 && self.lead_in_s >= 0.0 && self.lead_out_s >= 0.0) {
            problems.push("transition and lead times must be nonnegative".into());
        }
        let travelled = self.dwell_s * self.traverse_speed_mm_s;
        if (travelled - self.segment_length_mm).abs() > 1e-9 {
            problems.push(format!(
                "dwell_s * traverse_speed_mm_s = {travelled} mm must equal segment_length_mm = {}",
                self.segment_length_mm
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            invalid(problems.join("; "))
        }
    }

    pub fn duration_s(&self) -> f64 {
        let n = self.standoffs_mm.len() as f64;
        self.lead_in_s + n * self.dwell_s + (n - 1.0).max(0.0) * self.transition_s + self.lead_out_s
    }

    pub fn dwells(&self) -> Vec<Dwell> {
        let mut t = self.lead_in_s;
        self.standoffs_mm
            .iter()
            .map(|&z| {
                let d = Dwell {
                    standoff_mm: z,
                    start_s: t,
                    end_s: t + self.dwell_s,
                };
                t += self.dwell_s + self.transition_s;
                d
            })
            .collect()
    }
}
