//! Declarative description of a microgrid run.
//!
//! A [`Scenario`] names every source, converter, load and the optional
//! battery, binds time-varying inputs to [`Profile`]s and fixes the solver
//! settings. All quantities are SI (V, A, Ω, H, F, W, s, W/m², m/s).
//!
//! Deserialization only checks shape; call [`Scenario::validate`] before
//! handing a scenario to the engine.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::converters::ConverterParams;
use crate::power_mgmt::Battery;
use crate::sources::{PvPanel, WindMg};

/// Identifier a converter uses to bind to the battery instead of a source.
pub const BATTERY_ID: &str = "battery";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("dangling reference `{0}`")]
    DanglingReference(String),
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Field path for validation errors, reference name for dangling ones.
    pub fn subject(&self) -> &str {
        match self {
            ScenarioError::Validation { field, .. } => field,
            ScenarioError::DanglingReference(name) => name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Step,
    #[default]
    Linear,
}

/// Piecewise time series, clamped to its end values outside the sampled range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl Profile {
    pub fn new(points: Vec<(f64, f64)>, interpolation: Interpolation) -> Self {
        Profile {
            points,
            interpolation,
        }
    }

    pub fn constant(value: f64) -> Self {
        Profile::new(alloc::vec![(0.0, value)], Interpolation::Step)
    }

    fn check(&self, field: &str) -> Result<(), ScenarioError> {
        if self.points.is_empty() {
            return Err(ScenarioError::invalid(field, "profile has no points"));
        }
        if self
            .points
            .iter()
            .any(|&(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(ScenarioError::invalid(field, "non-finite profile point"));
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ScenarioError::invalid(
                field,
                "profile times must be strictly increasing",
            ));
        }
        Ok(())
    }

    /// Value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        let (t0, v0) = pts[0];
        if t <= t0 {
            return v0;
        }
        let (tn, vn) = pts[pts.len() - 1];
        if t >= tn {
            return vn;
        }
        // first index whose time is > t; always in 1..len here
        let hi = pts.partition_point(|&(tp, _)| tp <= t);
        let (ta, va) = pts[hi - 1];
        match self.interpolation {
            Interpolation::Step => va,
            Interpolation::Linear => {
                let (tb, vb) = pts[hi];
                va + (vb - va) * (t - ta) / (tb - ta)
            }
        }
    }
}

/// A scalar input that is either a constant or the name of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Signal {
    Const(f64),
    Profile(String),
}

impl Signal {
    pub fn profile_name(&self) -> Option<&str> {
        match self {
            Signal::Profile(name) => Some(name),
            Signal::Const(_) => None,
        }
    }

    pub fn eval(&self, profiles: &BTreeMap<String, Profile>, t: f64) -> f64 {
        match self {
            Signal::Const(v) => *v,
            Signal::Profile(name) => profiles[name].eval(t),
        }
    }
}

impl From<f64> for Signal {
    fn from(v: f64) -> Self {
        Signal::Const(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSource {
    pub id: String,
    pub panel: PvPanel,
    /// Irradiance in W/m².
    pub irradiance: Signal,
    /// Terminal capacitance between the panel and its converter.
    #[serde(default = "default_c_in")]
    pub c_in: f64,
    /// Initial terminal voltage; defaults to 0.
    #[serde(default)]
    pub v_init: f64,
}

fn default_c_in() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSource {
    pub id: String,
    pub generator: WindMg,
    /// Wind speed in m/s.
    pub wind_speed: Signal,
    /// Initial shaft speed; defaults to the target speed at t = 0.
    #[serde(default)]
    pub omega_init: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Pv(PvSource),
    WindMg(WindSource),
}

impl SourceSpec {
    pub fn id(&self) -> &str {
        match self {
            SourceSpec::Pv(s) => &s.id,
            SourceSpec::WindMg(s) => &s.id,
        }
    }
}

/// Duty command source for a unidirectional converter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    /// Bus-voltage PI loop. With `feedforward` the PI trims the ideal
    /// steady-state duty computed from the measured input voltage.
    VoltagePi {
        k_p: f64,
        k_i: f64,
        /// Reference voltage; defaults to `bus.v_ref`.
        #[serde(default)]
        v_ref: Option<Signal>,
        #[serde(default = "yes")]
        feedforward: bool,
        #[serde(default = "yes")]
        anti_windup: bool,
        #[serde(default)]
        duty_min: f64,
        #[serde(default = "one")]
        duty_max: f64,
    },
    /// Perturb-and-observe tracker acting on the duty cycle.
    Mppt {
        #[serde(default = "half")]
        initial_duty: f64,
        #[serde(default = "default_delta_d")]
        delta_d: f64,
        #[serde(default = "default_mppt_period")]
        period: f64,
        #[serde(default = "default_mppt_duty_min")]
        duty_min: f64,
        #[serde(default = "default_mppt_duty_max")]
        duty_max: f64,
        #[serde(default = "default_dead_band")]
        dead_band: f64,
    },
    Fixed {
        duty: f64,
    },
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_delta_d() -> f64 {
    0.01
}
fn default_mppt_period() -> f64 {
    2.0
}
fn default_mppt_duty_min() -> f64 {
    0.05
}
fn default_mppt_duty_max() -> f64 {
    0.95
}
fn default_dead_band() -> f64 {
    1e-4
}
fn default_diode_rating() -> f64 {
    30.0
}

/// Buck or boost stage between one source and the bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConverter {
    pub id: String,
    pub source: String,
    pub l: f64,
    pub c: f64,
    pub r_nom: f64,
    /// Inductor series resistance; 0 disables the conduction-loss term.
    #[serde(default)]
    pub r_series: f64,
    #[serde(default)]
    pub i_l_init: f64,
    /// Nameplate output power used by the rating check.
    #[serde(default)]
    pub rated_power: Option<f64>,
    /// Current rating of the series output diode.
    #[serde(default = "default_diode_rating")]
    pub diode_rating: f64,
    pub control: ControlSpec,
}

impl SourceConverter {
    pub fn params(&self) -> ConverterParams {
        ConverterParams {
            l: self.l,
            c: self.c,
            r_nom: self.r_nom,
        }
    }
}

/// Half-bridge between the battery and the bus, driven by the mode controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidirectionalConverter {
    pub id: String,
    pub source: String,
    pub l: f64,
    pub c: f64,
    pub r_nom: f64,
    #[serde(default)]
    pub r_series: f64,
    /// Hysteresis half-width; defaults to 1% of the regulated voltage.
    #[serde(default)]
    pub band: Option<f64>,
    /// Regulated bus voltage; defaults to `bus.v_ref`.
    #[serde(default)]
    pub v_ref: Option<f64>,
    pub i_charge_max: f64,
    pub i_discharge_max: f64,
    /// Bus-voltage loop, A/V.
    #[serde(default = "default_bus_kp")]
    pub k_p: f64,
    /// Bus-voltage loop, A/(V·s).
    #[serde(default = "default_bus_ki")]
    pub k_i: f64,
    /// Inner current loop, duty/A.
    #[serde(default = "default_current_kp")]
    pub current_k_p: f64,
    /// Inner current loop, duty/(A·s).
    #[serde(default = "default_current_ki")]
    pub current_k_i: f64,
    #[serde(default)]
    pub rated_power: Option<f64>,
}

fn default_bus_kp() -> f64 {
    2.0
}
fn default_bus_ki() -> f64 {
    50.0
}
fn default_current_kp() -> f64 {
    0.1
}
fn default_current_ki() -> f64 {
    20.0
}

impl BidirectionalConverter {
    pub fn params(&self) -> ConverterParams {
        ConverterParams {
            l: self.l,
            c: self.c,
            r_nom: self.r_nom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConverterSpec {
    Buck(SourceConverter),
    Boost(SourceConverter),
    Bidirectional(BidirectionalConverter),
}

impl ConverterSpec {
    pub fn id(&self) -> &str {
        match self {
            ConverterSpec::Buck(c) | ConverterSpec::Boost(c) => &c.id,
            ConverterSpec::Bidirectional(c) => &c.id,
        }
    }

    pub fn source(&self) -> &str {
        match self {
            ConverterSpec::Buck(c) | ConverterSpec::Boost(c) => &c.source,
            ConverterSpec::Bidirectional(c) => &c.source,
        }
    }

    pub fn params(&self) -> ConverterParams {
        match self {
            ConverterSpec::Buck(c) | ConverterSpec::Boost(c) => c.params(),
            ConverterSpec::Bidirectional(c) => c.params(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub capacity_ah: f64,
    pub soc: f64,
    pub v_full: f64,
    pub v_empty: f64,
    #[serde(default)]
    pub r_int: f64,
    #[serde(default = "default_soc_min")]
    pub soc_min: f64,
    #[serde(default = "one")]
    pub soc_max: f64,
    /// Charging resumes after a full-charge idle once soc < soc_max - margin.
    #[serde(default = "default_reentry")]
    pub reentry_margin: f64,
}

fn default_soc_min() -> f64 {
    0.2
}
fn default_reentry() -> f64 {
    0.02
}

impl BatterySpec {
    pub fn battery(&self) -> Battery {
        Battery {
            capacity_ah: self.capacity_ah,
            soc: self.soc,
            v_full: self.v_full,
            v_empty: self.v_empty,
            r_int: self.r_int,
            soc_min: self.soc_min,
            soc_max: self.soc_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistiveLoad {
    pub id: String,
    /// Resistance in Ω.
    pub r: Signal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantPowerLoad {
    pub id: String,
    /// Demand in W.
    pub p: Signal,
    /// Guard voltage; defaults to 10% of `bus.v_ref`.
    #[serde(default)]
    pub v_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadSpec {
    Resistive(ResistiveLoad),
    ConstantPower(ConstantPowerLoad),
}

impl LoadSpec {
    pub fn id(&self) -> &str {
        match self {
            LoadSpec::Resistive(l) => &l.id,
            LoadSpec::ConstantPower(l) => &l.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub v_ref: f64,
    /// Lumped bus capacitance; converter output capacitors add to it.
    pub c_bus: f64,
    /// Initial bus voltage; defaults to `v_ref`.
    #[serde(default)]
    pub v_init: Option<f64>,
    /// Series resistance of each source port (loss studies).
    #[serde(default)]
    pub r_port: f64,
    /// Forward drop of each source port diode; 0 is the ideal diode.
    #[serde(default)]
    pub diode_drop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
}

fn default_log_every() -> u64 {
    100
}

impl SimConfig {
    /// Number of solver steps, valid after [`Scenario::validate`].
    pub fn steps(&self) -> u64 {
        libm::round(self.t_end / self.dt) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub converters: Vec<ConverterSpec>,
    #[serde(default)]
    pub battery: Option<BatterySpec>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    pub bus: BusSpec,
    #[serde(default)]
    pub profiles: BTreeMap<String, Profile>,
    pub sim: SimConfig,
}

fn positive(field: impl Into<String>, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::invalid(field, "must be finite and > 0"))
    }
}

fn non_negative(field: impl Into<String>, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::invalid(field, "must be finite and >= 0"))
    }
}

fn unit_interval(field: impl Into<String>, v: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ScenarioError::invalid(field, "must lie in [0, 1]"))
    }
}

impl Scenario {
    /// Checks every structural and numeric invariant of the scenario.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.validate_sim()?;
        self.validate_bus()?;
        for (name, p) in &self.profiles {
            p.check(&format!("profiles.{name}"))?;
        }
        self.validate_sources()?;
        self.validate_converters()?;
        self.validate_battery()?;
        self.validate_loads()?;
        Ok(())
    }

    fn validate_sim(&self) -> Result<(), ScenarioError> {
        let sim = &self.sim;
        if !(sim.dt.is_finite() && sim.dt > 0.0 && sim.dt <= 1e-3) {
            return Err(ScenarioError::invalid("sim.dt", "must satisfy 0 < dt <= 1e-3"));
        }
        if !(sim.t_end.is_finite() && sim.t_end >= sim.dt) {
            return Err(ScenarioError::invalid("sim.t_end", "must be >= dt"));
        }
        let ratio = sim.t_end / sim.dt;
        let steps = libm::round(ratio);
        if libm::fabs(ratio - steps) > 1e-9 * steps.max(1.0) || steps > 1e12 {
            return Err(ScenarioError::invalid(
                "sim.t_end",
                "t_end / dt must be an exact integer step count",
            ));
        }
        if sim.log_every == 0 {
            return Err(ScenarioError::invalid("sim.log_every", "must be >= 1"));
        }
        Ok(())
    }

    fn validate_bus(&self) -> Result<(), ScenarioError> {
        positive("bus.v_ref", self.bus.v_ref)?;
        positive("bus.c_bus", self.bus.c_bus)?;
        if let Some(v) = self.bus.v_init {
            non_negative("bus.v_init", v)?;
        }
        non_negative("bus.r_port", self.bus.r_port)?;
        non_negative("bus.diode_drop", self.bus.diode_drop)
    }

    fn check_signal(&self, field: String, sig: &Signal) -> Result<(), ScenarioError> {
        match sig {
            Signal::Const(v) if !v.is_finite() => {
                Err(ScenarioError::invalid(field, "must be finite"))
            }
            Signal::Const(_) => Ok(()),
            Signal::Profile(name) if self.profiles.contains_key(name) => Ok(()),
            Signal::Profile(name) => Err(ScenarioError::DanglingReference(name.clone())),
        }
    }

    fn validate_sources(&self) -> Result<(), ScenarioError> {
        for (k, src) in self.sources.iter().enumerate() {
            let at = |f: &str| format!("sources[{k}].{f}");
            if src.id() == BATTERY_ID {
                return Err(ScenarioError::invalid(at("id"), "`battery` is reserved"));
            }
            if self.sources[..k].iter().any(|s| s.id() == src.id()) {
                return Err(ScenarioError::invalid(at("id"), "duplicate id"));
            }
            match src {
                SourceSpec::Pv(pv) => {
                    let p = &pv.panel;
                    positive(at("panel.i_ph_stc"), p.i_ph_stc)?;
                    positive(at("panel.i_0"), p.i_0)?;
                    positive(at("panel.n_vt"), p.n_vt)?;
                    positive(at("panel.r_s"), p.r_s)?;
                    positive(at("panel.r_sh"), p.r_sh)?;
                    positive(at("panel.g_stc"), p.g_stc)?;
                    positive(at("c_in"), pv.c_in)?;
                    non_negative(at("v_init"), pv.v_init)?;
                    self.check_signal(at("irradiance"), &pv.irradiance)?;
                }
                SourceSpec::WindMg(w) => {
                    let g = &w.generator;
                    positive(at("generator.k_e"), g.k_e)?;
                    positive(at("generator.r_a"), g.r_a)?;
                    positive(at("generator.k_w"), g.k_w)?;
                    non_negative(at("generator.tau"), g.tau)?;
                    if let Some(om) = w.omega_init {
                        non_negative(at("omega_init"), om)?;
                    }
                    self.check_signal(at("wind_speed"), &w.wind_speed)?;
                }
            }
        }
        Ok(())
    }

    fn validate_converters(&self) -> Result<(), ScenarioError> {
        let mut bidirectional = 0;
        for (k, conv) in self.converters.iter().enumerate() {
            let at = |f: &str| format!("converters[{k}].{f}");
            if conv.id() == BATTERY_ID || conv.id() == "bus" {
                return Err(ScenarioError::invalid(at("id"), "reserved id"));
            }
            if self.converters[..k].iter().any(|c| c.id() == conv.id())
                || self.sources.iter().any(|s| s.id() == conv.id())
            {
                return Err(ScenarioError::invalid(at("id"), "duplicate id"));
            }
            let p = conv.params();
            positive(at("l"), p.l)?;
            positive(at("c"), p.c)?;
            positive(at("r_nom"), p.r_nom)?;
            match conv {
                ConverterSpec::Buck(c) | ConverterSpec::Boost(c) => {
                    if c.source == BATTERY_ID {
                        return Err(ScenarioError::invalid(
                            at("source"),
                            "only the bidirectional converter may bind the battery",
                        ));
                    }
                    if !self.sources.iter().any(|s| s.id() == c.source) {
                        return Err(ScenarioError::DanglingReference(c.source.clone()));
                    }
                    non_negative(at("r_series"), c.r_series)?;
                    non_negative(at("i_l_init"), c.i_l_init)?;
                    if let Some(r) = c.rated_power {
                        positive(at("rated_power"), r)?;
                    }
                    positive(at("diode_rating"), c.diode_rating)?;
                    self.validate_control(&at("control"), &c.control)?;
                }
                ConverterSpec::Bidirectional(c) => {
                    bidirectional += 1;
                    if bidirectional > 1 {
                        return Err(ScenarioError::invalid(
                            "converters",
                            "at most one bidirectional converter",
                        ));
                    }
                    if c.source != BATTERY_ID {
                        return Err(ScenarioError::invalid(
                            at("source"),
                            "bidirectional converter must bind `battery`",
                        ));
                    }
                    if self.battery.is_none() {
                        return Err(ScenarioError::DanglingReference(BATTERY_ID.to_string()));
                    }
                    non_negative(at("r_series"), c.r_series)?;
                    if let Some(b) = c.band {
                        positive(at("band"), b)?;
                    }
                    if let Some(v) = c.v_ref {
                        positive(at("v_ref"), v)?;
                    }
                    positive(at("i_charge_max"), c.i_charge_max)?;
                    positive(at("i_discharge_max"), c.i_discharge_max)?;
                    non_negative(at("k_p"), c.k_p)?;
                    non_negative(at("k_i"), c.k_i)?;
                    non_negative(at("current_k_p"), c.current_k_p)?;
                    non_negative(at("current_k_i"), c.current_k_i)?;
                    if let Some(r) = c.rated_power {
                        positive(at("rated_power"), r)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_control(&self, at: &str, ctl: &ControlSpec) -> Result<(), ScenarioError> {
        let f = |s: &str| format!("{at}.{s}");
        match ctl {
            ControlSpec::VoltagePi {
                k_p,
                k_i,
                v_ref,
                duty_min,
                duty_max,
                ..
            } => {
                non_negative(f("k_p"), *k_p)?;
                non_negative(f("k_i"), *k_i)?;
                if let Some(sig) = v_ref {
                    self.check_signal(f("v_ref"), sig)?;
                }
                unit_interval(f("duty_min"), *duty_min)?;
                unit_interval(f("duty_max"), *duty_max)?;
                if duty_min >= duty_max {
                    return Err(ScenarioError::invalid(f("duty_min"), "must be < duty_max"));
                }
            }
            ControlSpec::Mppt {
                initial_duty,
                delta_d,
                period,
                duty_min,
                duty_max,
                dead_band,
            } => {
                unit_interval(f("duty_min"), *duty_min)?;
                unit_interval(f("duty_max"), *duty_max)?;
                if duty_min >= duty_max {
                    return Err(ScenarioError::invalid(f("duty_min"), "must be < duty_max"));
                }
                if !(*duty_min..=*duty_max).contains(initial_duty) {
                    return Err(ScenarioError::invalid(
                        f("initial_duty"),
                        "must lie within [duty_min, duty_max]",
                    ));
                }
                positive(f("delta_d"), *delta_d)?;
                positive(f("period"), *period)?;
                non_negative(f("dead_band"), *dead_band)?;
            }
            ControlSpec::Fixed { duty } => unit_interval(f("duty"), *duty)?,
        }
        Ok(())
    }

    fn validate_battery(&self) -> Result<(), ScenarioError> {
        let Some(b) = &self.battery else {
            return Ok(());
        };
        positive("battery.capacity_ah", b.capacity_ah)?;
        unit_interval("battery.soc", b.soc)?;
        positive("battery.v_empty", b.v_empty)?;
        if !(b.v_full.is_finite() && b.v_full > b.v_empty) {
            return Err(ScenarioError::invalid("battery.v_full", "must exceed v_empty"));
        }
        non_negative("battery.r_int", b.r_int)?;
        unit_interval("battery.soc_min", b.soc_min)?;
        unit_interval("battery.soc_max", b.soc_max)?;
        if b.soc_min >= b.soc_max {
            return Err(ScenarioError::invalid("battery.soc_min", "must be < soc_max"));
        }
        non_negative("battery.reentry_margin", b.reentry_margin)
    }

    fn validate_loads(&self) -> Result<(), ScenarioError> {
        for (k, load) in self.loads.iter().enumerate() {
            let at = |f: &str| format!("loads[{k}].{f}");
            if self.loads[..k].iter().any(|l| l.id() == load.id())
                || self.sources.iter().any(|s| s.id() == load.id())
                || self.converters.iter().any(|c| c.id() == load.id())
                || load.id() == BATTERY_ID
                || load.id() == "bus"
            {
                return Err(ScenarioError::invalid(at("id"), "duplicate or reserved id"));
            }
            match load {
                LoadSpec::Resistive(l) => {
                    self.check_signal(at("r"), &l.r)?;
                    if let Signal::Const(r) = l.r {
                        positive(at("r"), r)?;
                    }
                }
                LoadSpec::ConstantPower(l) => {
                    self.check_signal(at("p"), &l.p)?;
                    if let Signal::Const(p) = l.p {
                        non_negative(at("p"), p)?;
                    }
                    if let Some(v) = l.v_min {
                        positive(at("v_min"), v)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn v_init(&self) -> f64 {
        self.bus.v_init.unwrap_or(self.bus.v_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn minimal() -> Scenario {
        Scenario {
            sources: vec![SourceSpec::Pv(PvSource {
                id: "pv".into(),
                panel: PvPanel::new(5.0, 1e-9, 1.5, 0.01, 1000.0),
                irradiance: Signal::Const(1000.0),
                c_in: 1e-3,
                v_init: 0.0,
            })],
            converters: vec![ConverterSpec::Boost(SourceConverter {
                id: "boost".into(),
                source: "pv".into(),
                l: 1e-3,
                c: 1e-4,
                r_nom: 10.0,
                r_series: 0.0,
                i_l_init: 0.0,
                rated_power: None,
                diode_rating: 30.0,
                control: ControlSpec::Fixed { duty: 0.5 },
            })],
            battery: None,
            loads: vec![LoadSpec::Resistive(ResistiveLoad {
                id: "r".into(),
                r: Signal::Const(60.0),
            })],
            bus: BusSpec {
                v_ref: 48.0,
                c_bus: 1e-3,
                v_init: None,
                r_port: 0.0,
                diode_drop: 0.0,
            },
            profiles: BTreeMap::new(),
            sim: SimConfig {
                dt: 5e-5,
                t_end: 0.1,
                log_every: 100,
            },
        }
    }

    #[test]
    fn minimal_scenario_is_valid() {
        let sc = minimal();
        sc.validate().unwrap();
        assert_eq!(sc.sources.len(), 1);
        assert_eq!(sc.converters.len(), 1);
        assert_eq!(sc.loads.len(), 1);
        assert_eq!(sc.sim.steps(), 2000);
    }

    #[test]
    fn missing_profile_is_dangling() {
        let mut sc = minimal();
        if let SourceSpec::Pv(pv) = &mut sc.sources[0] {
            pv.irradiance = Signal::Profile("irr".into());
        }
        assert_eq!(
            sc.validate(),
            Err(ScenarioError::DanglingReference("irr".into()))
        );
    }

    #[test]
    fn zero_dt_names_field() {
        let mut sc = minimal();
        sc.sim.dt = 0.0;
        let err = sc.validate().unwrap_err();
        assert_eq!(err.subject(), "sim.dt");
    }

    #[test]
    fn inexact_step_count_rejected() {
        let mut sc = minimal();
        sc.sim.t_end = 0.10002;
        assert_eq!(sc.validate().unwrap_err().subject(), "sim.t_end");
    }

    #[test]
    fn converter_must_reference_existing_source() {
        let mut sc = minimal();
        if let ConverterSpec::Boost(c) = &mut sc.converters[0] {
            c.source = "wind".into();
        }
        assert_eq!(
            sc.validate(),
            Err(ScenarioError::DanglingReference("wind".into()))
        );
    }

    #[test]
    fn bidirectional_needs_battery() {
        let mut sc = minimal();
        sc.converters.push(ConverterSpec::Bidirectional(BidirectionalConverter {
            id: "bdc".into(),
            source: BATTERY_ID.into(),
            l: 1e-3,
            c: 1e-4,
            r_nom: 10.0,
            r_series: 0.0,
            band: None,
            v_ref: None,
            i_charge_max: 10.0,
            i_discharge_max: 10.0,
            k_p: 2.0,
            k_i: 50.0,
            current_k_p: 0.02,
            current_k_i: 2.0,
            rated_power: None,
        }));
        assert_eq!(
            sc.validate(),
            Err(ScenarioError::DanglingReference("battery".into()))
        );
    }

    #[test]
    fn negative_inductance_rejected() {
        let mut sc = minimal();
        if let ConverterSpec::Boost(c) = &mut sc.converters[0] {
            c.l = -1.0;
        }
        assert_eq!(sc.validate().unwrap_err().subject(), "converters[0].l");
    }

    #[test]
    fn profile_examples() {
        let lin = Profile::new(vec![(0.0, 100.0), (10.0, 200.0)], Interpolation::Linear);
        assert_eq!(lin.eval(5.0), 150.0);
        let step = Profile::new(vec![(0.0, 100.0), (10.0, 200.0)], Interpolation::Step);
        assert_eq!(step.eval(5.0), 100.0);
        assert_eq!(step.eval(10.0), 200.0);
        for mode in [Interpolation::Step, Interpolation::Linear] {
            let single = Profile::new(vec![(0.0, 100.0)], mode);
            assert_eq!(single.eval(99.0), 100.0);
        }
    }

    #[test]
    fn profile_clamps_before_first_point() {
        let p = Profile::new(vec![(2.0, 7.0), (3.0, 9.0)], Interpolation::Linear);
        assert_eq!(p.eval(0.0), 7.0);
        assert_eq!(p.eval(50.0), 9.0);
    }

    #[test]
    fn non_increasing_profile_rejected() {
        let mut sc = minimal();
        sc.profiles.insert(
            "bad".into(),
            Profile::new(vec![(0.0, 1.0), (0.0, 2.0)], Interpolation::Step),
        );
        assert_eq!(sc.validate().unwrap_err().subject(), "profiles.bad");
    }

    proptest! {
        #[test]
        fn linear_profile_monotone(
            mut incs in proptest::collection::vec((0.01f64..5.0, 0.0f64..10.0), 1..8),
            ts in proptest::collection::vec(-1.0f64..60.0, 2..20),
        ) {
            let mut t = 0.0;
            let mut v = 0.0;
            let mut points = Vec::new();
            for (dt, dv) in incs.drain(..) {
                points.push((t, v));
                t += dt;
                v += dv;
            }
            let p = Profile::new(points, Interpolation::Linear);
            let mut ts = ts;
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in ts.windows(2) {
                prop_assert!(p.eval(w[0]) <= p.eval(w[1]) + 1e-12);
            }
        }
    }
}
