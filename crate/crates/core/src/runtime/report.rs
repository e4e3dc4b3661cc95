use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::policy::PolicyConfig;
use crate::tree::TreeLimits;

/// Wall-clock milliseconds spent per search phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub selection: f64,
    pub expansion: f64,
    pub simulation: f64,
    pub backprop: f64,
    pub communication: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.selection + self.expansion + self.simulation + self.backprop + self.communication
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            selection: self.selection * k,
            expansion: self.expansion * k,
            simulation: self.simulation * k,
            backprop: self.backprop * k,
            communication: self.communication * k,
        }
    }

    pub fn add(&mut self, other: &PhaseTimes) {
        self.selection += other.selection;
        self.expansion += other.expansion;
        self.simulation += other.simulation;
        self.backprop += other.backprop;
        self.communication += other.communication;
    }
}

/// Fraction of the run each pool's workers spent executing tasks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub expansion: f64,
    pub simulation: f64,
}

/// Settings the run was made with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub t_max: u64,
    pub n_exp: usize,
    pub n_sim: usize,
    pub policy: PolicyConfig,
    pub limits: TreeLimits,
    #[serde(default)]
    pub serialize: bool,
    #[serde(default)]
    pub r_vl: Option<f64>,
    #[serde(default)]
    pub n_vl: Option<f64>,
}

/// Metrics of one planning call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub planner: String,
    pub best_action: Option<usize>,
    /// Value of the chosen root child (0 without one).
    #[serde(rename = "return")]
    pub value: f64,
    /// Completed rollouts; equals the root's visit count.
    pub rollouts: u64,
    pub wall_ms: f64,
    pub phase_ms: PhaseTimes,
    pub occupancy: Occupancy,
    pub seed: u64,
    pub config: ConfigEcho,
    /// Largest in-flight count seen at the root.
    #[serde(default)]
    pub max_root_in_flight: u64,
}

impl RunReport {
    /// Copy with every wall-clock field zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        Self { wall_ms: 0.0, phase_ms: PhaseTimes::default(), occupancy: Occupancy::default(), ..self.clone() }
    }
}

pub(crate) fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Accumulates phase durations in one thread of control.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PhaseClock {
    pub selection: Duration,
    pub expansion: Duration,
    pub simulation: Duration,
    pub backprop: Duration,
    pub communication: Duration,
}

impl PhaseClock {
    pub fn times(&self) -> PhaseTimes {
        PhaseTimes {
            selection: ms(self.selection),
            expansion: ms(self.expansion),
            simulation: ms(self.simulation),
            backprop: ms(self.backprop),
            communication: ms(self.communication),
        }
    }

    /// Runs `f` and charges its duration to the slot chosen by `slot`.
    pub fn time<T>(&mut self, slot: fn(&mut Self) -> &mut Duration, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *slot(self) += t.elapsed();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> RunReport {
        RunReport {
            planner: "wu-uct".into(),
            best_action: Some(2),
            value: 0.5,
            rollouts: 16,
            wall_ms: 12.5,
            phase_ms: PhaseTimes { selection: 1.0, expansion: 2.0, simulation: 8.0, backprop: 0.5, communication: 1.0 },
            occupancy: Occupancy { expansion: 0.1, simulation: 0.97 },
            seed: 3,
            config: ConfigEcho {
                t_max: 16,
                n_exp: 1,
                n_sim: 4,
                policy: PolicyConfig::default(),
                limits: TreeLimits::default(),
                serialize: false,
                r_vl: None,
                n_vl: None,
            },
            max_root_in_flight: 5,
        }
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(report()).unwrap();
        for key in ["best_action", "return", "rollouts", "phase_ms", "occupancy", "seed", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        for key in ["selection", "expansion", "simulation", "backprop", "communication"] {
            assert!(v["phase_ms"].get(key).is_some(), "missing phase {key}");
        }
        assert_eq!(v["occupancy"]["simulation"], 0.97);
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        let back: RunReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn phase_sum() {
        assert_eq!(report().phase_ms.total(), 12.5);
        assert_eq!(report().without_timings().phase_ms.total(), 0.0);
    }
}
