//! Rating check of a trace against the nameplate values in its scenario.

use std::fmt::Write;

use microgrid_core::bus::{rating_check, Rating, RatingViolation, ViolationKind};
use microgrid_core::engine::TraceLog;
use microgrid_core::scenario::ConverterSpec;
use microgrid_core::Scenario;

pub fn ratings(sc: &Scenario) -> (Vec<Rating>, Vec<Rating>) {
    let mut power = Vec::new();
    let mut diode = Vec::new();
    for c in &sc.converters {
        let rated = match c {
            ConverterSpec::Buck(s) | ConverterSpec::Boost(s) => {
                diode.push(Rating {
                    component: s.id.clone(),
                    limit: s.diode_rating,
                });
                s.rated_power
            }
            ConverterSpec::Bidirectional(b) => b.rated_power,
        };
        if let Some(limit) = rated {
            power.push(Rating {
                component: c.id().into(),
                limit,
            });
        }
    }
    (power, diode)
}

pub fn check(sc: &Scenario, trace: &TraceLog) -> Vec<RatingViolation> {
    let (power, diode) = ratings(sc);
    rating_check(&power, &diode, trace)
}

pub fn render(v: &[RatingViolation]) -> String {
    if v.is_empty() {
        return "no rating violations\n".into();
    }
    let mut s = String::new();
    for r in v {
        let (what, unit) = match r.kind {
            ViolationKind::ConverterPower => ("power above 75% of rating", "W"),
            ViolationKind::DiodeCurrent => ("diode current above rating", "A"),
        };
        let _ = writeln!(
            s,
            "{}: {what} from t = {} s to t = {} s, peak {:.4} {unit} (limit {:.4} {unit})",
            r.component, r.t_start, r.t_end, r.peak, r.limit
        );
    }
    s
}
