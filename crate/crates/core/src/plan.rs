//! Planned trajectories and their CSV representation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::flatness::{flat_to_state, FlatJet};
use crate::io::{parse_row, write_row, Provenance};
use crate::model::{CraneParams, CraneState, InputForces};

/// One time sample of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSample {
    pub t: f64,
    pub jet: FlatJet,
    pub state: CraneState,
    pub u_ff: InputForces,
}

impl PlanSample {
    /// Trolley and rope references `(x_t, y_t, L)`.
    pub fn reference(&self) -> [f64; 3] {
        self.state.actuated()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub samples: Vec<PlanSample>,
}

pub const PLAN_COLUMNS: [&str; 24] = [
    "t", "x_p", "dx_p", "ddx_p", "d3x_p", "d4x_p", "y_p", "dy_p", "ddy_p", "d3y_p", "d4y_p", "z_p",
    "dz_p", "ddz_p", "d3z_p", "d4z_p", "x_t", "y_t", "L", "alpha", "beta", "f_x", "f_y", "f_l",
];

impl Plan {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linear interpolation of the sample at time `t` (held outside the range).
    pub fn sample_at(&self, t: f64) -> Option<PlanSample> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t <= first.t || self.samples.len() == 1 {
            return Some(*first);
        }
        if t >= last.t {
            return Some(*last);
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let w = (t - a.t) / (b.t - a.t);
        let lerp = |x: f64, y: f64| x + w * (y - x);
        let mut axes = [[0.0; 5]; 3];
        for ax in 0..3 {
            for k in 0..5 {
                axes[ax][k] = lerp(a.jet.axes[ax][k], b.jet.axes[ax][k]);
            }
        }
        let sa = a.state.to_array();
        let sb = b.state.to_array();
        let state = CraneState::from_array(std::array::from_fn(|k| lerp(sa[k], sb[k])));
        let ua = a.u_ff.to_array();
        let ub = b.u_ff.to_array();
        Some(PlanSample {
            t,
            jet: FlatJet { axes },
            state,
            u_ff: InputForces::from_array(std::array::from_fn(|k| lerp(ua[k], ub[k]))),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &Provenance) -> Result<()> {
        provenance.write_header(&mut w)?;
        writeln!(w, "{}", PLAN_COLUMNS.join(","))?;
        for s in &self.samples {
            let mut row = Vec::with_capacity(24);
            row.push(s.t);
            for ax in &s.jet.axes {
                row.extend_from_slice(ax);
            }
            row.extend_from_slice(&[s.state.x_t, s.state.y_t, s.state.l, s.state.alpha, s.state.beta]);
            row.extend_from_slice(&s.u_ff.to_array());
            write_row(&mut w, &row)?;
        }
        Ok(())
    }

    /// Reads a plan CSV. Rates of the crane state are not stored and are
    /// recomputed from the flat jets.
    pub fn read_csv<R: BufRead>(r: R, params: &CraneParams) -> Result<Plan> {
        let mut samples = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != PLAN_COLUMNS {
                    return Err(CraneError::Config(format!("unexpected plan header `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let v = parse_row(line, PLAN_COLUMNS.len(), lineno + 1)?;
            let mut axes = [[0.0; 5]; 3];
            for ax in 0..3 {
                axes[ax].copy_from_slice(&v[1 + 5 * ax..6 + 5 * ax]);
            }
            let jet = FlatJet { axes };
            let state = flat_to_state(&jet, params).map_err(|e| e.at_node(samples.len()))?;
            samples.push(PlanSample {
                t: v[0],
                jet,
                state,
                u_ff: InputForces::new(v[21], v[22], v[23]),
            });
        }
        if samples.is_empty() {
            return Err(CraneError::Config("plan file has no samples".into()));
        }
        Ok(Plan { samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatness::{trajectory_to_plan, FlatState};
    use crate::model::{FrictionVariant, Smoothing};

    #[test]
    fn csv_round_trip_preserves_samples() {
        let p = CraneParams::default();
        let a = FlatState::at_rest([0.3, 0.4, -0.5]);
        let mut b = a;
        b.0[0] = 0.31;
        b.0[1] = 0.1;
        let plan = trajectory_to_plan(&[a, b], &[[0.0; 3]], 0.1, &p, &FrictionVariant::COMPLETE, &Smoothing::default())
            .unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf, &Provenance::new("abc", 7)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# craneplan config_sha256=abc seed=7"));
        let back = Plan::read_csv(&buf[..], &p).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn interpolation_holds_outside_range() {
        let p = CraneParams::default();
        let a = FlatState::at_rest([0.3, 0.4, -0.5]);
        let plan = trajectory_to_plan(&[a, a], &[[0.0; 3]], 0.1, &p, &FrictionVariant::COMPLETE, &Smoothing::default())
            .unwrap();
        assert_eq!(plan.sample_at(5.0).unwrap().t, 0.1);
        assert_eq!(plan.sample_at(-1.0).unwrap().t, 0.0);
        assert!((plan.sample_at(0.05).unwrap().t - 0.05).abs() < 1e-15);
    }
}
