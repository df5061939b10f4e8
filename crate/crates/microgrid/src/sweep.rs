//! MPP tracking sweep over irradiance levels with a fixed PV + boost rig.

use std::collections::BTreeMap;

use microgrid_core::engine::TraceLog;
use microgrid_core::scenario::{
    BusSpec, ControlSpec, ConverterSpec, LoadSpec, PvSource, ResistiveLoad, Signal, SimConfig,
    SourceConverter, SourceSpec,
};
use microgrid_core::sources::{mpp_oracle, PvPanel, SourceError};
use microgrid_core::{run, EngineError, Scenario};
use rayon::prelude::*;
use serde::Serialize;

/// Resistive load of the sweep rig; puts the tracked duty well inside
/// (0.05, 0.95) for the reference panel.
pub const RIG_LOAD: f64 = 60.0;
pub const RIG_T_END: f64 = 100.0;
/// Start of the averaging window.
pub const RIG_SETTLE: f64 = 60.0;

pub fn reference_panel() -> PvPanel {
    PvPanel::new(5.0, 1e-9, 1.5, 0.01, 1000.0)
}

/// PV panel through an MPPT boost into a resistive load at constant irradiance.
pub fn mppt_rig(panel: PvPanel, irradiance: f64) -> Scenario {
    Scenario {
        sources: vec![SourceSpec::Pv(PvSource {
            id: "pv".into(),
            panel,
            irradiance: Signal::Const(irradiance),
            c_in: 1e-3,
            v_init: 25.0,
        })],
        converters: vec![ConverterSpec::Boost(SourceConverter {
            id: "boost".into(),
            source: "pv".into(),
            l: 5e-3,
            c: 1e-4,
            r_nom: RIG_LOAD,
            r_series: 0.0,
            i_l_init: 0.0,
            rated_power: None,
            diode_rating: 30.0,
            control: ControlSpec::Mppt {
                initial_duty: 0.5,
                delta_d: 0.01,
                period: 2.0,
                duty_min: 0.05,
                duty_max: 0.95,
                dead_band: 1e-4,
            },
        })],
        battery: None,
        loads: vec![LoadSpec::Resistive(ResistiveLoad {
            id: "load".into(),
            r: Signal::Const(RIG_LOAD),
        })],
        bus: BusSpec {
            v_ref: 48.0,
            c_bus: 1e-4,
            v_init: Some(30.0),
            r_port: 0.0,
            diode_drop: 0.0,
        },
        profiles: BTreeMap::new(),
        sim: SimConfig {
            dt: 1e-4,
            t_end: RIG_T_END,
            log_every: 100,
        },
    }
}

/// Mean of `signal` and the min/max of `duty` over samples at `t >= from`.
pub fn tail_stats(trace: &TraceLog, signal: &str, duty: &str, from: f64) -> Option<(f64, f64, f64)> {
    let p = trace.column(signal)?;
    let d = trace.column(duty)?;
    let idx: Vec<usize> = (0..trace.len()).filter(|&k| trace.times()[k] >= from).collect();
    if idx.is_empty() {
        return None;
    }
    let mean = idx.iter().map(|&k| p[k]).sum::<f64>() / idx.len() as f64;
    let lo = idx.iter().map(|&k| d[k]).fold(f64::INFINITY, f64::min);
    let hi = idx.iter().map(|&k| d[k]).fold(f64::NEG_INFINITY, f64::max);
    Some((mean, lo, hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct MppRow {
    pub irradiance: f64,
    pub v_mpp: f64,
    pub p_mpp: f64,
    pub v_oc: f64,
    pub p_tracked: f64,
    pub ratio: f64,
    pub duty_lo: f64,
    pub duty_hi: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("irradiance {g}: {err}")]
    Oracle { g: f64, err: SourceError },
    #[error("irradiance {g}: {err}")]
    Engine { g: f64, err: EngineError },
}

pub fn sweep_one(panel: PvPanel, g: f64) -> Result<MppRow, SweepError> {
    let oracle = mpp_oracle(&panel, g).map_err(|err| SweepError::Oracle { g, err })?;
    let trace = run(&mppt_rig(panel, g)).map_err(|err| SweepError::Engine { g, err })?;
    let (p_tracked, duty_lo, duty_hi) =
        tail_stats(&trace, "pv.p", "boost.duty", RIG_SETTLE).expect("rig signals present");
    Ok(MppRow {
        irradiance: g,
        v_mpp: oracle.v_mpp,
        p_mpp: oracle.p_mpp,
        v_oc: oracle.v_oc,
        p_tracked,
        ratio: p_tracked / oracle.p_mpp,
        duty_lo,
        duty_hi,
    })
}

/// Runs every level in parallel; rows keep the input order.
pub fn mpp_sweep(panel: PvPanel, levels: &[f64]) -> Result<Vec<MppRow>, SweepError> {
    // reject bad levels before spending time on simulations
    for &g in levels {
        if !(g > 0.0) {
            return Err(SweepError::Oracle {
                g,
                err: SourceError::NonPositiveIrradiance(g),
            });
        }
    }
    levels.par_iter().map(|&g| sweep_one(panel, g)).collect()
}

pub fn write_csv<W: std::io::Write>(rows: &[MppRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
