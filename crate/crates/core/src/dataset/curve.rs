use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Erosion depth (mean, std) in µm as a piecewise-linear function of standoff in mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthCurve {
    /// `(standoff_mm, mean_um, std_um)`, sorted by standoff.
    pub anchors: Vec<(f64, f64, f64)>,
}

impl Default for DepthCurve {
    fn default() -> Self {
        Self {
            anchors: vec![
                (2.0, 437.34, 185.99),
                (3.0, 1257.45, 205.11),
                (5.0, 1327.71, 405.06),
                (6.0, 1198.65, 259.41),
                (7.0, 1004.1, 154.17),
            ],
        }
    }
}

impl DepthCurve {
    pub fn validate(&self) -> Result<()> {
        if self.anchors.len() < 2 {
            return invalid("depth curve needs at least two anchors");
        }
        for w in self.anchors.windows(2) {
            if w[1].0 <= w[0].0 {
                return invalid("depth curve anchors must be strictly increasing in standoff");
            }
        }
        if self.anchors.iter().any(|a| a.1 < 0.0 || a.2 < 0.0 || !a.0.is_finite()) {
            return invalid("depth curve means and stds must be nonnegative");
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.anchors[0].0, self.anchors[self.anchors.len() - 1].0)
    }

    pub fn lookup(&self, standoff_mm: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&standoff_mm) {
            return invalid(format!(
                "standoff {standoff_mm} mm outside the depth curve range [{lo}, {hi}]"
            ));
        }
        let k = self
            .anchors
            .windows(2)
            .position(|w| standoff_mm <= w[1].0)
            .unwrap_or(0);
        let (a, b) = (self.anchors[k], self.anchors[k + 1]);
        let f = (standoff_mm - a.0) / (b.0 - a.0);
        Ok((a.1 + (b.1 - a.1) * f, a.2 + (b.2 - a.2) * f))
    }
}

pub fn depth_curve_lookup(standoff_mm: f64) -> Result<(f64, f64)> {
    DepthCurve::default().lookup(standoff_mm)
}
