//! Energy bookkeeping over a finished trace.

use serde::{Deserialize, Serialize};

use super::trace::TraceLog;

pub const E_SOURCE: &str = "energy.source";
pub const E_LOAD: &str = "energy.load";
pub const E_BATTERY: &str = "energy.battery";
pub const E_STORED: &str = "energy.stored";
pub const E_DISSIPATED: &str = "energy.dissipated";
pub const E_CLAMP: &str = "energy.clamp";

/// Energy totals in joules between the first and last trace rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Delivered by all source terminals.
    pub source: f64,
    /// Absorbed by loads.
    pub load: f64,
    /// Absorbed at the battery terminals (negative when it discharged).
    pub battery: f64,
    /// Change of field energy in every inductor and capacitor.
    pub stored_delta: f64,
    /// Resistive and diode losses integrated by the engine.
    pub dissipated: f64,
    /// Field energy removed by state clamps (conduction-mode limits, idle reset).
    pub clamp: f64,
    /// Balance before subtracting losses; equals the losses in a consistent run.
    pub residual_lossless: f64,
    pub residual: f64,
    /// `|residual|` over the largest of source, load and battery energy.
    pub relative: f64,
}

fn delta(trace: &TraceLog, name: &str) -> f64 {
    match (trace.first(name), trace.last(name)) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

/// Balances source energy against load, battery, storage, clamp and loss
/// energy. Missing energy columns count as zero.
pub fn energy_audit(trace: &TraceLog) -> AuditReport {
    let source = delta(trace, E_SOURCE);
    let load = delta(trace, E_LOAD);
    let battery = delta(trace, E_BATTERY);
    let stored_delta = delta(trace, E_STORED);
    let dissipated = delta(trace, E_DISSIPATED);
    let clamp = delta(trace, E_CLAMP);
    let residual_lossless = source - load - battery - stored_delta - clamp;
    let residual = residual_lossless - dissipated;
    let scale = source.abs().max(load.abs()).max(battery.abs());
    let relative = if scale > 0.0 {
        residual.abs() / scale
    } else {
        residual.abs()
    };
    AuditReport {
        source,
        load,
        battery,
        stored_delta,
        dissipated,
        clamp,
        residual_lossless,
        residual,
        relative,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn balanced_columns_zero_residual() {
        let names: Vec<_> = [E_SOURCE, E_LOAD, E_BATTERY, E_STORED, E_DISSIPATED, E_CLAMP]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut tr = TraceLog::new(names);
        tr.push_row(0.0, &[0.0, 0.0, 0.0, 5.0, 0.0, 0.0]);
        tr.push_row(1.0, &[100.0, 60.0, 30.0, 7.0, 5.0, 3.0]);
        let a = energy_audit(&tr);
        assert_eq!(a.stored_delta, 2.0);
        assert_eq!(a.residual_lossless, 5.0);
        assert_eq!(a.residual, 0.0);
        assert_eq!(a.relative, 0.0);
    }

    #[test]
    fn empty_trace() {
        let a = energy_audit(&TraceLog::new(vec![]));
        assert_eq!(a.residual, 0.0);
    }
}
