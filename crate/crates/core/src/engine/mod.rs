//! Fixed-step simulation of a validated [`Scenario`].
//!
//! Continuous state (bus voltage, state of charge, PV terminal voltages,
//! inductor currents and four energy integrals) advances by RK4 with every
//! control input held over the step. Controllers, the MPPT scheduler and the
//! mode FSM act at step boundaries on the pre-step measurements.

mod audit;
mod rk4;
mod trace;

pub use audit::{
    energy_audit, AuditReport, E_BATTERY, E_CLAMP, E_DISSIPATED, E_LOAD, E_SOURCE, E_STORED,
};
pub use rk4::Rk4;
pub use trace::{Event, EventKind, TraceLog};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bus::{diode_or, load_current, Load};
use crate::control::{MpptTracker, PiController};
use crate::converters::{
    bidir_derivatives, bidir_high_side_duty, boost_inductor_slope, buck_inductor_slope,
    ConverterState, Mode,
};
use crate::power_mgmt::{Battery, ModeController};
use crate::scenario::{
    ControlSpec, ConverterSpec, LoadSpec, Scenario, Signal, SourceSpec,
};
use crate::sources::{pv_current, PvPanel, SourceError, WindMg};

/// Magnitude past which a state counts as diverged.
pub const BLOWUP_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("numerical blowup of `{signal}` at t = {t} s")]
    NumericalBlowup { t: f64, signal: String },
    #[error("source `{source_id}` at t = {t} s: {err}")]
    Source {
        t: f64,
        source_id: String,
        err: SourceError,
    },
}

enum SrcKind {
    Pv { panel: PvPanel, c_in: f64, x: usize },
    Wind { mg: WindMg, omega: f64 },
}

struct SrcRt {
    id: String,
    kind: SrcKind,
    input: Signal,
}

#[derive(Clone, Copy, PartialEq)]
enum Topology {
    Buck,
    Boost,
}

enum CtlRt {
    Pi {
        pi: PiController,
        v_ref: Signal,
        feedforward: bool,
        duty_min: f64,
        duty_max: f64,
    },
    Mppt(MpptTracker),
    Fixed(f64),
}

struct ConvRt {
    id: String,
    topo: Topology,
    src: usize,
    l: f64,
    r_series: f64,
    x: usize,
    ctl: CtlRt,
}

struct BidirRt {
    id: String,
    l: f64,
    r_series: f64,
    x: usize,
    mc: ModeController,
    inner: PiController,
}

struct LoadRt {
    id: String,
    spec: LoadSpec,
    v_min: f64,
}

/// Inputs held constant across one step.
struct Held {
    src_in: Vec<f64>,
    duty: Vec<f64>,
    /// Active-switch duty of the half-bridge.
    bidir_d: f64,
    mode: Mode,
    i_cmd: f64,
    loads: Vec<Load>,
}

/// Algebraic quantities at one state.
#[derive(Default)]
struct Flows {
    src_v: Vec<f64>,
    src_i: Vec<f64>,
    src_iin: Vec<f64>,
    src_dv: Vec<f64>,
    conv_iin: Vec<f64>,
    conv_iport: Vec<f64>,
    conv_di: Vec<f64>,
    i_b: f64,
    v_t: f64,
    i_bus: f64,
    di_b: f64,
    load_i: Vec<f64>,
    dv_bus: f64,
    dsoc: f64,
    p_src: f64,
    p_load: f64,
    p_batt: f64,
    p_loss: f64,
}

const X_VBUS: usize = 0;
const X_SOC: usize = 1;

struct Plant<'a> {
    sc: &'a Scenario,
    c_total: f64,
    r_port: f64,
    diode_drop: f64,
    sources: Vec<SrcRt>,
    convs: Vec<ConvRt>,
    bidir: Option<BidirRt>,
    battery: Option<Battery>,
    loads: Vec<LoadRt>,
    x_energy: usize,
    state_names: Vec<String>,
}

impl<'a> Plant<'a> {
    fn compile(sc: &'a Scenario) -> (Self, Vec<f64>) {
        let mut x = vec![sc.v_init(), 0.0];
        let mut names: Vec<String> = vec!["bus.v".into(), "battery.soc".into()];
        let battery = sc.battery.as_ref().map(|b| b.battery());
        if let Some(b) = &battery {
            x[X_SOC] = b.soc;
        }
        let t0 = 0.0;

        let mut sources = Vec::new();
        for s in &sc.sources {
            let rt = match s {
                SourceSpec::Pv(pv) => {
                    x.push(pv.v_init);
                    names.push(format!("{}.v", pv.id));
                    SrcRt {
                        id: pv.id.clone(),
                        kind: SrcKind::Pv {
                            panel: pv.panel,
                            c_in: pv.c_in,
                            x: x.len() - 1,
                        },
                        input: pv.irradiance.clone(),
                    }
                }
                SourceSpec::WindMg(w) => {
                    let wind = w.wind_speed.eval(&sc.profiles, t0);
                    SrcRt {
                        id: w.id.clone(),
                        kind: SrcKind::Wind {
                            mg: w.generator,
                            omega: w
                                .omega_init
                                .unwrap_or_else(|| w.generator.target_speed(wind)),
                        },
                        input: w.wind_speed.clone(),
                    }
                }
            };
            sources.push(rt);
        }

        let mut c_total = sc.bus.c_bus;
        let mut convs = Vec::new();
        let mut bidir = None;
        for c in &sc.converters {
            c_total += c.params().c;
            match c {
                ConverterSpec::Buck(s) | ConverterSpec::Boost(s) => {
                    let topo = if matches!(c, ConverterSpec::Buck(_)) {
                        Topology::Buck
                    } else {
                        Topology::Boost
                    };
                    x.push(s.i_l_init);
                    names.push(format!("{}.i_l", s.id));
                    let ctl = match &s.control {
                        ControlSpec::VoltagePi {
                            k_p,
                            k_i,
                            v_ref,
                            feedforward,
                            anti_windup,
                            duty_min,
                            duty_max,
                        } => CtlRt::Pi {
                            pi: PiController::new(*k_p, *k_i, *duty_min, *duty_max)
                                .with_anti_windup(*anti_windup),
                            v_ref: v_ref.clone().unwrap_or(Signal::Const(sc.bus.v_ref)),
                            feedforward: *feedforward,
                            duty_min: *duty_min,
                            duty_max: *duty_max,
                        },
                        ControlSpec::Mppt {
                            initial_duty,
                            delta_d,
                            period,
                            duty_min,
                            duty_max,
                            dead_band,
                        } => CtlRt::Mppt(
                            MpptTracker::new(*initial_duty, *delta_d, *period, *duty_min, *duty_max)
                                .with_dead_band(*dead_band),
                        ),
                        ControlSpec::Fixed { duty } => CtlRt::Fixed(*duty),
                    };
                    convs.push(ConvRt {
                        id: s.id.clone(),
                        topo,
                        src: sources.iter().position(|r| r.id == s.source).unwrap(),
                        l: s.l,
                        r_series: s.r_series,
                        x: x.len() - 1,
                        ctl,
                    });
                }
                ConverterSpec::Bidirectional(b) => {
                    let bat = battery.as_ref().unwrap();
                    let v_ref = b.v_ref.unwrap_or(sc.bus.v_ref);
                    let band = b.band.unwrap_or(0.01 * v_ref);
                    let mut mc = ModeController::new(v_ref, band, bat, b.i_charge_max, b.i_discharge_max)
                        .with_gains(b.k_p, b.k_i);
                    mc.reentry_margin = sc.battery.as_ref().unwrap().reentry_margin;
                    x.push(0.0);
                    names.push(format!("{}.i_l", b.id));
                    bidir = Some(BidirRt {
                        id: b.id.clone(),
                        l: b.l,
                        r_series: b.r_series,
                        x: x.len() - 1,
                        mc,
                        inner: PiController::new(b.current_k_p, b.current_k_i, -1.0, 1.0),
                    });
                }
            }
        }

        let loads = sc
            .loads
            .iter()
            .map(|l| LoadRt {
                id: l.id().into(),
                spec: l.clone(),
                v_min: match l {
                    LoadSpec::ConstantPower(c) => c.v_min.unwrap_or(0.1 * sc.bus.v_ref),
                    LoadSpec::Resistive(_) => 0.0,
                },
            })
            .collect();

        let x_energy = x.len();
        x.extend_from_slice(&[0.0; 4]);
        for n in [E_SOURCE, E_LOAD, E_BATTERY, E_DISSIPATED] {
            names.push(n.into());
        }

        let plant = Plant {
            sc,
            c_total,
            r_port: sc.bus.r_port,
            diode_drop: sc.bus.diode_drop,
            sources,
            convs,
            bidir,
            battery,
            loads,
            x_energy,
            state_names: names,
        };
        (plant, x)
    }

    fn new_flows(&self) -> Flows {
        let ns = self.sources.len();
        let nc = self.convs.len();
        Flows {
            src_v: vec![0.0; ns],
            src_i: vec![0.0; ns],
            src_iin: vec![0.0; ns],
            src_dv: vec![0.0; ns],
            conv_iin: vec![0.0; nc],
            conv_iport: vec![0.0; nc],
            conv_di: vec![0.0; nc],
            load_i: vec![0.0; self.loads.len()],
            ..Flows::default()
        }
    }

    fn held_inputs(&self, t: f64) -> (Vec<f64>, Vec<Load>) {
        let p = &self.sc.profiles;
        let src_in = self.sources.iter().map(|s| s.input.eval(p, t)).collect();
        let loads = self
            .loads
            .iter()
            .map(|l| match &l.spec {
                LoadSpec::Resistive(r) => Load::Resistive { r: r.r.eval(p, t) },
                LoadSpec::ConstantPower(c) => Load::ConstantPower {
                    p: c.p.eval(p, t),
                    v_min: l.v_min,
                },
            })
            .collect();
        (src_in, loads)
    }

    fn flows(&self, x: &[f64], h: &Held, f: &mut Flows, t: f64) -> Result<(), EngineError> {
        let v_bus = x[X_VBUS];

        for (k, c) in self.convs.iter().enumerate() {
            let i = x[c.x].max(0.0);
            let d = h.duty[k];
            let (iin, iport) = match c.topo {
                Topology::Buck => (d * i, i),
                Topology::Boost => (i, (1.0 - d) * i),
            };
            f.conv_iin[k] = iin;
            f.conv_iport[k] = diode_or(iport);
        }
        f.src_iin.iter_mut().for_each(|v| *v = 0.0);
        for (k, c) in self.convs.iter().enumerate() {
            f.src_iin[c.src] += f.conv_iin[k];
        }

        f.p_src = 0.0;
        for (k, s) in self.sources.iter().enumerate() {
            let iin = f.src_iin[k];
            match &s.kind {
                SrcKind::Pv { panel, c_in, x: xi } => {
                    let v = x[*xi];
                    let i = pv_current(panel, v.max(0.0), h.src_in[k]).map_err(|err| {
                        EngineError::Source {
                            t,
                            source_id: s.id.clone(),
                            err,
                        }
                    })?;
                    f.src_v[k] = v;
                    f.src_i[k] = i;
                    f.src_dv[k] = (i - iin) / c_in;
                }
                SrcKind::Wind { mg, omega } => {
                    f.src_v[k] = mg.terminal_voltage(*omega, iin);
                    f.src_i[k] = iin;
                    f.src_dv[k] = 0.0;
                }
            }
            f.p_src += f.src_v[k] * f.src_i[k];
        }

        f.p_loss = 0.0;
        let mut i_ports = 0.0;
        for (k, c) in self.convs.iter().enumerate() {
            let i = x[c.x].max(0.0);
            let d = h.duty[k];
            let iport = f.conv_iport[k];
            let drop = if iport > 0.0 { self.diode_drop } else { 0.0 };
            let v_seen = v_bus + drop + self.r_port * iport;
            let v_in = f.src_v[c.src];
            f.conv_di[k] = match c.topo {
                Topology::Buck => buck_inductor_slope(c.l, i, v_in, d, v_seen, c.r_series),
                Topology::Boost => boost_inductor_slope(c.l, i, v_in, d, v_seen, c.r_series),
            };
            f.p_loss += c.r_series * i * i + (self.r_port * iport + drop) * iport;
            i_ports += iport;
        }

        let soc = x[X_SOC].clamp(0.0, 1.0);
        f.i_b = 0.0;
        f.i_bus = 0.0;
        f.di_b = 0.0;
        f.v_t = self.battery.as_ref().map_or(0.0, |b| b.ocv(soc));
        if let (Some(b), Some(bat)) = (&self.bidir, &self.battery) {
            if h.mode != Mode::Idle {
                let i = x[b.x];
                let st = ConverterState { i_l: i, v_c: v_bus };
                let p = crate::converters::ConverterParams {
                    l: b.l,
                    c: 1.0,
                    r_nom: 1.0,
                };
                let v_eff = bat.ocv(soc) + i * (bat.r_int + b.r_series);
                f.i_b = i;
                f.v_t = bat.terminal_voltage(soc, i);
                f.i_bus = bidir_high_side_duty(h.bidir_d, h.mode) * i;
                f.di_b = bidir_derivatives(&p, &st, v_eff, h.bidir_d, h.mode).0;
                f.p_loss += b.r_series * i * i;
            }
        }
        f.dsoc = self.battery.as_ref().map_or(0.0, |b| b.soc_rate(f.i_b));
        f.p_batt = f.v_t * f.i_b;

        f.p_load = 0.0;
        let mut i_load = 0.0;
        for (k, l) in h.loads.iter().enumerate() {
            let i = load_current(l, v_bus);
            f.load_i[k] = i;
            i_load += i;
            f.p_load += v_bus * i;
        }
        f.dv_bus = (i_ports - f.i_bus - i_load) / self.c_total;
        Ok(())
    }

    fn derivative(&self, f: &Flows, dx: &mut [f64]) {
        dx[X_VBUS] = f.dv_bus;
        dx[X_SOC] = f.dsoc;
        for (k, s) in self.sources.iter().enumerate() {
            if let SrcKind::Pv { x, .. } = s.kind {
                dx[x] = f.src_dv[k];
            }
        }
        for (k, c) in self.convs.iter().enumerate() {
            dx[c.x] = f.conv_di[k];
        }
        if let Some(b) = &self.bidir {
            dx[b.x] = f.di_b;
        }
        let e = self.x_energy;
        dx[e] = f.p_src;
        dx[e + 1] = f.p_load;
        dx[e + 2] = f.p_batt;
        dx[e + 3] = f.p_loss;
    }

    fn stored_energy(&self, x: &[f64]) -> f64 {
        let v = x[X_VBUS];
        let mut e = 0.5 * self.c_total * v * v;
        for s in &self.sources {
            if let SrcKind::Pv { c_in, x: xi, .. } = s.kind {
                e += 0.5 * c_in * x[xi] * x[xi];
            }
        }
        for c in &self.convs {
            e += 0.5 * c.l * x[c.x] * x[c.x];
        }
        if let Some(b) = &self.bidir {
            e += 0.5 * b.l * x[b.x] * x[b.x];
        }
        e
    }

    fn signal_names(&self) -> Vec<String> {
        let mut s: Vec<String> = vec!["bus.v".into()];
        for src in &self.sources {
            for q in ["v", "i", "p"] {
                s.push(format!("{}.{q}", src.id));
            }
            if matches!(src.kind, SrcKind::Wind { .. }) {
                s.push(format!("{}.omega", src.id));
            }
        }
        for c in &self.convs {
            for q in ["duty", "i_l", "i_out", "p_out"] {
                s.push(format!("{}.{q}", c.id));
            }
        }
        if let Some(b) = &self.bidir {
            for q in ["duty", "i_l", "i_bus", "p_out", "mode", "i_cmd"] {
                s.push(format!("{}.{q}", b.id));
            }
        }
        if self.battery.is_some() {
            for q in ["soc", "v", "i", "p"] {
                s.push(format!("battery.{q}"));
            }
        }
        for l in &self.loads {
            s.push(format!("{}.i", l.id));
            s.push(format!("{}.p", l.id));
        }
        for n in [E_SOURCE, E_LOAD, E_BATTERY, E_STORED, E_DISSIPATED, E_CLAMP] {
            s.push(n.into());
        }
        s
    }

    fn log_row(&self, x: &[f64], h: &Held, f: &Flows, e_clamp: f64, row: &mut Vec<f64>) {
        row.clear();
        let v_bus = x[X_VBUS];
        row.push(v_bus);
        for (k, s) in self.sources.iter().enumerate() {
            row.extend_from_slice(&[f.src_v[k], f.src_i[k], f.src_v[k] * f.src_i[k]]);
            if let SrcKind::Wind { omega, .. } = s.kind {
                row.push(omega);
            }
        }
        for (k, c) in self.convs.iter().enumerate() {
            let ip = f.conv_iport[k];
            row.extend_from_slice(&[h.duty[k], x[c.x], ip, v_bus * ip]);
        }
        if let Some(b) = &self.bidir {
            let d = if h.mode == Mode::Idle { 0.0 } else { h.bidir_d };
            row.extend_from_slice(&[
                d,
                x[b.x],
                f.i_bus,
                -v_bus * f.i_bus,
                h.mode.code(),
                h.i_cmd,
            ]);
        }
        if self.battery.is_some() {
            row.extend_from_slice(&[x[X_SOC], f.v_t, f.i_b, f.p_batt]);
        }
        for k in 0..self.loads.len() {
            row.push(f.load_i[k]);
            row.push(v_bus * f.load_i[k]);
        }
        let e = self.x_energy;
        row.extend_from_slice(&[
            x[e],
            x[e + 1],
            x[e + 2],
            self.stored_energy(x),
            x[e + 3],
            e_clamp,
        ]);
    }
}

/// Simulates `sc`, which must have passed [`Scenario::validate`].
pub fn run(sc: &Scenario) -> Result<TraceLog, EngineError> {
    let (mut plant, mut x) = Plant::compile(sc);
    let dt = sc.sim.dt;
    let steps = sc.sim.steps();
    let log_every = sc.sim.log_every;
    let mut trace = TraceLog::new(plant.signal_names());
    let mut rk = Rk4::new(x.len());
    let mut flows = plant.new_flows();
    let mut scratch = plant.new_flows();
    let mut row = Vec::with_capacity(trace.signals().len());
    let mut e_clamp = 0.0;

    let (src_in, loads) = plant.held_inputs(0.0);
    let mut held = Held {
        src_in,
        duty: plant
            .convs
            .iter()
            .map(|c| match &c.ctl {
                CtlRt::Mppt(m) => m.duty,
                CtlRt::Fixed(d) => *d,
                CtlRt::Pi { .. } => 0.0,
            })
            .collect(),
        bidir_d: 0.0,
        mode: Mode::Idle,
        i_cmd: 0.0,
        loads,
    };

    for n in 0..=steps {
        let t = n as f64 * dt;

        // (1) profiles
        let (src_in, loads) = plant.held_inputs(t);
        held.src_in = src_in;
        held.loads = loads;

        // (2) source terminals
        if n > 0 {
            for (k, s) in plant.sources.iter_mut().enumerate() {
                if let SrcKind::Wind { mg, omega } = &mut s.kind {
                    *omega = mg.advance_speed(held.src_in[k], *omega, dt);
                }
            }
        }
        plant.flows(&x, &held, &mut flows, t)?;
        let v_bus = x[X_VBUS];

        // (3)-(4) duty commands
        for (k, c) in plant.convs.iter_mut().enumerate() {
            let v_in = flows.src_v[c.src];
            held.duty[k] = match &mut c.ctl {
                CtlRt::Fixed(d) => *d,
                CtlRt::Mppt(m) => {
                    let i_src = flows.src_i[c.src];
                    if let Some(u) = m.step_with_slack(v_in, i_src, t, 0.5 * dt) {
                        trace.events.push(Event {
                            t,
                            kind: EventKind::MpptUpdate {
                                converter: c.id.clone(),
                                duty: u.duty,
                                power: u.power,
                            },
                        });
                    }
                    m.duty
                }
                CtlRt::Pi {
                    pi,
                    v_ref,
                    feedforward,
                    duty_min,
                    duty_max,
                } => {
                    let r = v_ref.eval(&sc.profiles, t);
                    let d_ff = if *feedforward {
                        let ideal = match c.topo {
                            Topology::Buck if v_in > 0.0 => r / v_in,
                            Topology::Buck => *duty_max,
                            Topology::Boost if r > 0.0 => 1.0 - v_in / r,
                            Topology::Boost => *duty_min,
                        };
                        ideal.clamp(*duty_min, *duty_max)
                    } else {
                        0.0
                    };
                    pi.set_limits(*duty_min - d_ff, *duty_max - d_ff);
                    (d_ff + pi.step(r - v_bus, dt)).clamp(*duty_min, *duty_max)
                }
            };
        }

        // (5) mode selection and battery current command
        if let (Some(b), Some(bat)) = (&mut plant.bidir, &plant.battery) {
            let soc = x[X_SOC];
            let before = b.mc.mode;
            let mode = b.mc.select_mode(v_bus, soc);
            if mode != before {
                trace.events.push(Event {
                    t,
                    kind: EventKind::ModeChange {
                        converter: b.id.clone(),
                        from: before,
                        to: mode,
                    },
                });
                b.inner.reset();
                if mode == Mode::Idle {
                    let i = x[b.x];
                    e_clamp += 0.5 * b.l * i * i;
                    x[b.x] = 0.0;
                }
            }
            held.mode = mode;
            if mode == Mode::Idle {
                held.i_cmd = 0.0;
                held.bidir_d = 0.0;
            } else {
                held.i_cmd = b.mc.current_command(v_bus, dt);
                let i = x[b.x];
                let v_t = bat.terminal_voltage(soc.clamp(0.0, 1.0), i);
                let d_ff = if v_bus > 0.0 {
                    (v_t / v_bus).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                b.inner.set_limits(-d_ff, 1.0 - d_ff);
                let d_hs = (d_ff + b.inner.step(held.i_cmd - i, dt)).clamp(0.0, 1.0);
                held.bidir_d = if mode == Mode::Charge { d_hs } else { 1.0 - d_hs };
            }
        }

        // (8) log
        if n % log_every == 0 || n == steps {
            plant.flows(&x, &held, &mut flows, t)?;
            plant.log_row(&x, &held, &flows, e_clamp, &mut row);
            trace.push_row(t, &row);
        }
        if n == steps {
            break;
        }

        // (6)-(7) integrate
        let p = &plant;
        let h = &held;
        rk.step(&mut x, dt, |xs, dx| {
            p.flows(xs, h, &mut scratch, t)?;
            p.derivative(&scratch, dx);
            Ok::<(), EngineError>(())
        })?;

        // conduction and physical limits
        for c in &plant.convs {
            if x[c.x] < 0.0 {
                e_clamp += 0.5 * c.l * x[c.x] * x[c.x];
                x[c.x] = 0.0;
            }
        }
        for s in &plant.sources {
            if let SrcKind::Pv { c_in, x: xi, .. } = s.kind {
                if x[xi] < 0.0 {
                    e_clamp += 0.5 * c_in * x[xi] * x[xi];
                    x[xi] = 0.0;
                }
            }
        }
        if x[X_VBUS] < 0.0 {
            e_clamp += 0.5 * plant.c_total * x[X_VBUS] * x[X_VBUS];
            x[X_VBUS] = 0.0;
        }
        x[X_SOC] = x[X_SOC].clamp(0.0, 1.0);

        if let Some(k) = x
            .iter()
            .position(|v| !v.is_finite() || libm::fabs(*v) > BLOWUP_LIMIT)
        {
            return Err(EngineError::NumericalBlowup {
                t: (n + 1) as f64 * dt,
                signal: plant.state_names[k].clone(),
            });
        }
    }
    Ok(trace)
}
