//! Small-signal design report for one converter operating point.

use std::fmt::Write;

use microgrid_core::control::{
    closed_loop_pi_poly, max_stable_kp, routh_array, ziegler_nichols, KpBound, PidGains,
    RouthTable, TuneError, ZnRule,
};
use microgrid_core::converters::{boost_tf, buck_tf, Complex64, ConverterParams, TransferFunction};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Buck,
    Boost,
}

#[derive(Debug, Clone)]
pub struct TuneRequest {
    pub topology: Topology,
    pub params: ConverterParams,
    pub v_out: f64,
    pub duty: f64,
    pub k_i: f64,
    /// Gain whose closed loop is tabulated; omitted tabulates nothing.
    pub k_p: Option<f64>,
    /// Ultimate gain and period for the Ziegler-Nichols table.
    pub ultimate: Option<(f64, f64, ZnRule)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub topology: Topology,
    /// Ascending coefficients.
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    /// `[re, im]` pairs.
    pub poles: Vec<[f64; 2]>,
    pub zeros: Vec<[f64; 2]>,
    pub rhp_zero: bool,
    pub max_stable_kp: KpBound,
    pub closed_loop: Option<ClosedLoop>,
    pub ziegler_nichols: Option<PidGains>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedLoop {
    pub k_p: f64,
    pub k_i: f64,
    pub poly: Vec<f64>,
    pub routh: RouthTable,
}

#[derive(Debug, thiserror::Error)]
pub enum TuneFailure {
    #[error("invalid operating point: {0}")]
    Input(String),
    #[error(
        "no stabilizing k_p: the PI loop is unstable even for vanishing proportional gain \
         with k_i = {k_i}; lower k_i or change the operating point"
    )]
    NoStableGain { k_i: f64 },
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn tune(req: &TuneRequest) -> Result<TuneReport, TuneFailure> {
    let p = &req.params;
    let ok = [p.l, p.c, p.r_nom, req.v_out].iter().all(|x| x.is_finite() && *x > 0.0);
    if !ok {
        return Err(TuneFailure::Input("L, C, R and V must be > 0".into()));
    }
    if !(0.0..1.0).contains(&req.duty) || (req.topology == Topology::Buck && req.duty == 0.0) {
        return Err(TuneFailure::Input("duty must lie in (0, 1)".into()));
    }
    let tf: TransferFunction = match req.topology {
        Topology::Buck => buck_tf(p, req.v_out, req.duty),
        Topology::Boost => boost_tf(p, req.v_out, req.duty),
    };
    let poles = tf.poles().map_err(|e| TuneFailure::Input(e.to_string()))?;
    let zeros = tf.zeros().map_err(|e| TuneFailure::Input(e.to_string()))?;
    let bound = max_stable_kp(&tf, req.k_i).map_err(|e| match e {
        TuneError::NoStableGain => TuneFailure::NoStableGain { k_i: req.k_i },
        TuneError::InvalidArgument(m) => TuneFailure::Input(m.into()),
    })?;
    let closed_loop = match req.k_p {
        Some(k_p) => {
            let poly = closed_loop_pi_poly(&tf, k_p, req.k_i);
            let routh = routh_array(&poly).map_err(|e| TuneFailure::Input(e.to_string()))?;
            Some(ClosedLoop {
                k_p,
                k_i: req.k_i,
                poly,
                routh,
            })
        }
        None => None,
    };
    let ziegler_nichols = match req.ultimate {
        Some((k_u, t_u, rule)) => {
            Some(ziegler_nichols(k_u, t_u, rule).map_err(|e| TuneFailure::Input(e.to_string()))?)
        }
        None => None,
    };
    Ok(TuneReport {
        topology: req.topology,
        rhp_zero: zeros.iter().any(|z| z.re > 0.0),
        num: tf.num.clone(),
        den: tf.den.clone(),
        poles: pairs(&poles),
        zeros: pairs(&zeros),
        max_stable_kp: bound,
        closed_loop,
        ziegler_nichols,
    })
}

fn poly_text(c: &[f64]) -> String {
    let mut s = String::new();
    for (k, a) in c.iter().enumerate().rev() {
        if !s.is_empty() {
            s.push_str(" + ");
        }
        match k {
            0 => write!(s, "{a:e}"),
            1 => write!(s, "{a:e}·s"),
            _ => write!(s, "{a:e}·s^{k}"),
        }
        .unwrap();
    }
    s
}

pub fn render(r: &TuneReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "plant ({:?})", r.topology);
    let _ = writeln!(s, "  num: {}", poly_text(&r.num));
    let _ = writeln!(s, "  den: {}", poly_text(&r.den));
    let _ = writeln!(s, "  den coefficients (ascending): {:?}", r.den);
    for [re, im] in &r.poles {
        let _ = writeln!(s, "  pole {re:.6e} {im:+.6e}j");
    }
    for [re, im] in &r.zeros {
        let _ = writeln!(s, "  zero {re:.6e} {im:+.6e}j");
    }
    if r.rhp_zero {
        let _ = writeln!(s, "  right-half-plane zero present (non-minimum phase)");
    }
    match r.max_stable_kp {
        KpBound::Bounded { k_p } => {
            let _ = writeln!(s, "max stable k_p: {k_p:.9e}");
        }
        KpBound::Unbounded { cap } => {
            let _ = writeln!(s, "max stable k_p: none found up to {cap:e}");
        }
    }
    if let Some(cl) = &r.closed_loop {
        let _ = writeln!(s, "closed loop at k_p = {}, k_i = {}", cl.k_p, cl.k_i);
        let _ = writeln!(s, "  characteristic: {}", poly_text(&cl.poly));
        let n = cl.routh.order();
        for (k, row) in cl.routh.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:>14.6e}")).collect();
            let _ = writeln!(s, "  s^{:<2} {}", n - k, cells.join(" "));
        }
        let _ = writeln!(
            s,
            "  sign changes: {}  ->  {}",
            cl.routh.sign_changes,
            if cl.routh.stable { "stable" } else { "unstable" }
        );
    }
    if let Some(g) = &r.ziegler_nichols {
        let (kp, ki, kd) = g.parallel();
        let _ = writeln!(
            s,
            "ziegler-nichols: k_p = {:.6}, t_i = {}, t_d = {}  (k_i = {ki:.6}, k_d = {kd:.6})",
            kp, g.t_i, g.t_d
        );
    }
    s
}
