//! The shared two-wire DC bus, its loads, and post-run rating checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::engine::TraceLog;

/// Fraction of a converter's rated power it may deliver in parallel operation.
pub const PARALLEL_DERATING: f64 = 0.75;
/// Default current rating of a series output diode.
pub const DEFAULT_DIODE_RATING: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Load {
    Resistive { r: f64 },
    ConstantPower { p: f64, v_min: f64 },
}

pub fn load_current(load: &Load, v: f64) -> f64 {
    match *load {
        Load::Resistive { r } => v / r,
        Load::ConstantPower { p, v_min } => p / v.max(v_min),
    }
}

/// Ideal series diode: a source port never sinks current.
#[inline]
pub fn diode_or(i: f64) -> f64 {
    i.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortCurrent {
    /// Injection from a source converter, passed through the port diode.
    Source(f64),
    /// Signed battery-converter injection.
    Battery(f64),
    /// Current drawn by a load.
    Load(f64),
}

impl PortCurrent {
    /// Net current this port pushes into the bus node.
    pub fn injection(self) -> f64 {
        match self {
            PortCurrent::Source(i) => diode_or(i),
            PortCurrent::Battery(i) => i,
            PortCurrent::Load(i) => -i,
        }
    }
}

/// Lumped bus node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcBus {
    pub c_bus: f64,
    pub v: f64,
}

impl DcBus {
    pub fn derivative(&self, ports: &[PortCurrent]) -> f64 {
        ports.iter().map(|p| p.injection()).sum::<f64>() / self.c_bus
    }

    /// Advances the bus voltage under constant port currents for `dt`.
    pub fn step(&mut self, ports: &[PortCurrent], dt: f64) -> f64 {
        self.v = (self.v + self.derivative(ports) * dt).max(0.0);
        self.v
    }

    pub fn stored_energy(&self) -> f64 {
        0.5 * self.c_bus * self.v * self.v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub component: String,
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Delivered power above the derated share of the converter rating.
    ConverterPower,
    /// Series diode current above its rating.
    DiodeCurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingViolation {
    pub component: String,
    pub kind: ViolationKind,
    pub t_start: f64,
    pub t_end: f64,
    pub peak: f64,
    pub limit: f64,
}

/// Trace column holding a converter's delivered power.
pub fn power_signal(component: &str) -> String {
    format!("{component}.p_out")
}

/// Trace column holding a source converter's port (diode) current.
pub fn diode_signal(component: &str) -> String {
    format!("{component}.i_out")
}

fn scan(
    trace: &TraceLog,
    component: &str,
    signal: &str,
    limit: f64,
    kind: ViolationKind,
    out: &mut Vec<RatingViolation>,
) {
    let Some(col) = trace.column_index(signal) else {
        return;
    };
    let mut open: Option<RatingViolation> = None;
    for (t, row) in trace.rows() {
        let x = row[col];
        if x > limit {
            match &mut open {
                Some(v) => {
                    v.t_end = t;
                    v.peak = v.peak.max(x);
                }
                None => {
                    open = Some(RatingViolation {
                        component: component.into(),
                        kind,
                        t_start: t,
                        t_end: t,
                        peak: x,
                        limit,
                    })
                }
            }
        } else if let Some(v) = open.take() {
            out.push(v);
        }
    }
    out.extend(open);
}

/// Flags every contiguous run of samples where a converter delivers more
/// than 75% of its rated power, or a port diode carries more than its rated
/// current. Components without a matching trace column are skipped.
pub fn rating_check(
    converter_ratings: &[Rating],
    diode_ratings: &[Rating],
    trace: &TraceLog,
) -> Vec<RatingViolation> {
    let mut out = Vec::new();
    for r in converter_ratings {
        scan(
            trace,
            &r.component,
            &power_signal(&r.component),
            PARALLEL_DERATING * r.limit,
            ViolationKind::ConverterPower,
            &mut out,
        );
    }
    for r in diode_ratings {
        scan(
            trace,
            &r.component,
            &diode_signal(&r.component),
            r.limit,
            ViolationKind::DiodeCurrent,
            &mut out,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn no_current_no_change() {
        let mut bus = DcBus { c_bus: 0.01, v: 48.0 };
        assert_eq!(bus.step(&[], 1e-3), 48.0);
        assert_eq!(
            bus.step(&[PortCurrent::Source(0.0), PortCurrent::Load(0.0)], 1e-3),
            48.0
        );
    }

    #[test]
    fn one_amp_into_ten_millifarad() {
        let mut bus = DcBus { c_bus: 0.01, v: 48.0 };
        bus.step(&[PortCurrent::Battery(1.0)], 0.001);
        assert_relative_eq!(bus.v, 48.1, epsilon = 1e-12);
    }

    #[test]
    fn reverse_source_current_blocked() {
        let bus = DcBus { c_bus: 0.01, v: 48.0 };
        assert_eq!(bus.derivative(&[PortCurrent::Source(-3.0)]), 0.0);
    }

    #[test]
    fn load_examples() {
        assert_relative_eq!(load_current(&Load::Resistive { r: 10.0 }, 48.0), 4.8);
        let cpl = Load::ConstantPower { p: 96.0, v_min: 10.0 };
        assert_relative_eq!(load_current(&cpl, 48.0), 2.0);
        assert_relative_eq!(load_current(&cpl, 5.0), 9.6);
    }

    fn synthetic(p_out: &[f64], i_out: &[f64]) -> TraceLog {
        let mut trace = TraceLog::new(vec!["conv.p_out".to_string(), "conv.i_out".to_string()]);
        for (k, (p, i)) in p_out.iter().zip(i_out).enumerate() {
            trace.push_row(k as f64, &[*p, *i]);
        }
        trace
    }

    #[test]
    fn power_above_derating_flagged() {
        let trace = synthetic(&[50.0, 80.0, 70.0], &[1.0, 1.0, 1.0]);
        let v = rating_check(
            &[Rating {
                component: "conv".into(),
                limit: 100.0,
            }],
            &[],
            &trace,
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ConverterPower);
        assert_eq!((v[0].t_start, v[0].t_end, v[0].peak), (1.0, 1.0, 80.0));
    }

    #[test]
    fn diode_overcurrent_flagged() {
        let trace = synthetic(&[0.0; 4], &[29.0, 31.0, 30.5, 31.0]);
        let v = rating_check(
            &[],
            &[Rating {
                component: "conv".into(),
                limit: DEFAULT_DIODE_RATING,
            }],
            &trace,
        );
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].t_start, v[0].t_end, v[0].peak), (1.0, 3.0, 31.0));
    }

    #[test]
    fn compliant_trace_clean() {
        let trace = synthetic(&[10.0, 74.0], &[5.0, 29.9]);
        let v = rating_check(
            &[Rating {
                component: "conv".into(),
                limit: 100.0,
            }],
            &[Rating {
                component: "conv".into(),
                limit: 30.0,
            }],
            &trace,
        );
        assert!(v.is_empty());
    }
}
