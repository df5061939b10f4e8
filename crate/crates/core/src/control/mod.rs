//! Controllers and control-design tooling.

pub mod mppt;
pub mod pi;
pub mod roots;
pub mod routh;
pub mod tuning;

pub use mppt::{fractional_voc_ref, MpptTracker};
pub use pi::PiController;
pub use roots::{polynomial_roots, RootsError};
pub use routh::{routh_array, RouthError, RouthTable};
pub use tuning::{
    closed_loop_pi_poly, max_stable_gain, max_stable_kp, ziegler_nichols, KpBound, PidGains,
    TuneError, ZnRule,
};
