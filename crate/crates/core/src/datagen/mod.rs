//! Synthetic datasets: Ornstein-Uhlenbeck pairs and Fokker-Planck evolution pairs.
//!
//! Every datum draws from its own ChaCha stream derived from the config seed, so a
//! dataset is a pure function of its config.

mod fokker_planck;
mod ou;

pub use fokker_planck::{gen_fp, solve_fokker_planck, FokkerPlanck, FpConfig, Potential};
pub use ou::{gen_ou, ou_mean, ou_pdf, ou_variance, OuConfig, OU_MIN_TIME};

use rand::Rng;

use crate::scalar::Scalar;

pub(crate) fn uniform_in<T: Scalar, R: Rng + ?Sized>(rng: &mut R, (lo, hi): (T, T)) -> T {
    let u: f64 = rng.gen();
    lo + (hi - lo) * T::lit(u)
}
