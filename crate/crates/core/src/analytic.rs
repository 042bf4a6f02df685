//! Closed-form performance of the discovery scheme.
//!
//! Collision side: each of `N` contenders transmits with probability `T_o`,
//! so a given pair gets a collision-free slot with probability
//! `T_o (1 - T_o)^(N-1)`, maximised at `T_o = 1/N`.
//!
//! SIR side: with Rayleigh fading and a PPP of interferers of density
//! `lambda_u`, the SIR tail at a receiver whose transmitter sits at distance
//! `R` is the Laplace transform of the interference evaluated at
//! `s = tau * R^alpha`:
//!
//! ```text
//! L_I(s) = exp(-lambda_u * G(s, alpha)),  G(s, alpha) = pi^2 delta s^delta / sin(pi delta),
//! delta = 2 / alpha
//! ```
//!
//! The two sides are independent, which gives the per-slot success
//! probability and from it the number of slots needed to succeed at least
//! once with probability `eta`.
//!
//! The SIR threshold `tau` is always given in dB and converted once, inside
//! [`sir_ccdf`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::channel::db_to_linear;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticParams {
    /// Density of concurrent interfering transmitters per unit area.
    pub lambda_u: f64,
    /// Number of potential D2D pairs contending for a slot.
    pub n_pairs: usize,
    pub tau_db: f64,
    /// Transmitter-receiver separation.
    pub r: f64,
    pub alpha: f64,
    pub eta: f64,
    /// Transmission probability; `None` means the optimum `1/N`.
    pub t_o: Option<f64>,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        AnalyticParams {
            lambda_u: 0.1,
            n_pairs: 4,
            tau_db: 0.0,
            r: 1.0,
            alpha: 4.0,
            eta: 0.9,
            t_o: None,
        }
    }
}

impl AnalyticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_u.is_finite() && self.lambda_u >= 0.0) {
            return Err(Error::param("lambda_u", format!("must be >= 0, got {}", self.lambda_u)));
        }
        if self.n_pairs < 1 {
            return Err(Error::param("N", "must be >= 1"));
        }
        if !self.tau_db.is_finite() {
            return Err(Error::param("tau_db", format!("must be finite, got {}", self.tau_db)));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::param("R", format!("must be > 0, got {}", self.r)));
        }
        check_alpha(self.alpha)?;
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1), got {}", self.eta)));
        }
        if let Some(t) = self.t_o {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param("T_o", format!("must lie in [0, 1], got {t}")));
            }
        }
        Ok(())
    }

    pub fn transmission_probability(&self) -> f64 {
        self.t_o.unwrap_or_else(|| optimal_to(self.n_pairs))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::param(
            "alpha",
            format!("must be > 2 for a finite interference transform, got {alpha}"),
        ));
    }
    Ok(())
}

/// Probability that a pair transmitting with probability `t_o` finds the
/// slot free of the other `n - 1` contenders.
pub fn p_nc(t_o: f64, n: usize) -> f64 {
    debug_assert!(n >= 1);
    t_o * (1.0 - t_o).powi(n as i32 - 1)
}

pub fn optimal_to(n: usize) -> f64 {
    debug_assert!(n >= 1);
    1.0 / n as f64
}

pub fn p_nc_star(n: usize) -> f64 {
    p_nc(optimal_to(n), n)
}

pub fn g_function(s: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if s.is_nan() || s < 0.0 {
        return Err(Error::param("s", format!("must be >= 0, got {s}")));
    }
    let delta = 2.0 / alpha;
    Ok(PI * PI * delta * s.powf(delta) / (PI * delta).sin())
}

/// `G(s, alpha)` through the gamma-function form `pi Gamma(1+delta) Gamma(1-delta) s^delta`.
pub fn g_function_gamma(s: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if s.is_nan() || s < 0.0 {
        return Err(Error::param("s", format!("must be >= 0, got {s}")));
    }
    let delta = 2.0 / alpha;
    Ok(PI * gamma(1.0 + delta) * gamma(1.0 - delta) * s.powf(delta))
}

pub fn laplace_interference(s: f64, lambda_u: f64, alpha: f64) -> Result<f64> {
    if !(lambda_u.is_finite() && lambda_u >= 0.0) {
        return Err(Error::param("lambda_u", format!("must be >= 0, got {lambda_u}")));
    }
    Ok((-lambda_u * g_function(s, alpha)?).exp())
}

/// `P(SIR >= tau)` at the receiver of a pair of separation `R`.
pub fn sir_ccdf(params: &AnalyticParams) -> Result<f64> {
    params.validate()?;
    let s = db_to_linear(params.tau_db) * params.r.powf(params.alpha);
    laplace_interference(s, params.lambda_u, params.alpha)
}

/// Per-slot probability of a collision-free transmission that also clears
/// the SIR threshold.
pub fn p_success(params: &AnalyticParams) -> Result<f64> {
    let sir = sir_ccdf(params)?;
    Ok(p_nc(params.transmission_probability(), params.n_pairs) * sir)
}

pub fn p_at_least_one(p_success: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // log form keeps tiny success probabilities from rounding 1 - p to 1
    -(n as f64 * (-p_success).ln_1p()).exp_m1()
}

/// Smallest slot count `n` with `p_at_least_one(p, n) >= eta`.
pub fn required_slots_for(p: f64, eta: f64) -> Result<u64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param("eta", format!("must lie in (0, 1), got {eta}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p_success", format!("must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Err(Error::Unreachable { eta });
    }
    if p == 1.0 {
        return Ok(1);
    }
    let ratio = (1.0 - eta).ln() / (-p).ln_1p();
    if ratio >= 2f64.powi(62) {
        // a slot count this large is never reached in practice
        return Err(Error::Unreachable { eta });
    }
    let mut n = (ratio.ceil() as u64).max(1);
    // the ceiling can land one off the exact boundary under rounding
    while p_at_least_one(p, n) < eta {
        n += 1;
    }
    while n > 1 && p_at_least_one(p, n - 1) >= eta {
        n -= 1;
    }
    Ok(n)
}

pub fn required_slots(params: &AnalyticParams) -> Result<u64> {
    required_slots_for(p_success(params)?, params.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn scene(lambda_u: f64, n_pairs: usize, tau_db: f64) -> AnalyticParams {
        AnalyticParams {
            lambda_u,
            n_pairs,
            tau_db,
            r: 1.0,
            alpha: 4.0,
            eta: 0.9,
            t_o: None,
        }
    }

    #[test]
    fn p_nc_examples() {
        assert_eq!(p_nc(1.0, 1), 1.0);
        assert_eq!(p_nc(0.5, 2), 0.25);
        assert!(close(p_nc(0.3, 5), 0.07203, 1e-12));
    }

    #[test]
    fn optimal_to_examples() {
        assert_eq!(optimal_to(1), 1.0);
        assert_eq!(optimal_to(2), 0.5);
        assert_eq!(optimal_to(8), 0.125);
    }

    #[test]
    fn optimal_to_beats_grid() {
        for n in 1..=16 {
            let best = p_nc(optimal_to(n), n);
            for k in 0..=1000 {
                let t = k as f64 / 1000.0;
                assert!(best >= p_nc(t, n) - 1e-15, "N={n} t={t}");
            }
        }
        // N=8: the grid maximum sits at t = 0.125
        let argmax = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .max_by(|a, b| p_nc(*a, 8).total_cmp(&p_nc(*b, 8)))
            .unwrap();
        assert_eq!(argmax, 0.125);
    }

    #[test]
    fn p_nc_star_examples() {
        assert_eq!(p_nc_star(1), 1.0);
        assert_eq!(p_nc_star(2), 0.25);
        let limit = 100.0 * p_nc_star(100);
        assert!((limit / (-1f64).exp() - 1.0).abs() < 0.006);
    }

    #[test]
    fn g_function_examples() {
        assert_eq!(g_function(0.0, 4.0).unwrap(), 0.0);
        assert!(close(g_function(1.0, 4.0).unwrap(), 4.934802200544679, 1e-12));
        assert!(close(g_function(16.0, 4.0).unwrap(), 19.739208802178716, 1e-11));
        assert!(close(g_function_gamma(16.0, 4.0).unwrap(), 19.739208802178716, 1e-11));
        assert!(g_function(1.0, 2.0).is_err());
        assert!(g_function(1.0, 1.5).is_err());
    }

    #[test]
    fn reflection_identity_on_alpha_grid() {
        let mut alpha = 2.05;
        while alpha <= 8.0 {
            let a = g_function(1.0, alpha).unwrap();
            let b = g_function_gamma(1.0, alpha).unwrap();
            assert!((a - b).abs() < 1e-10, "alpha={alpha}: {a} vs {b}");
            alpha += 0.01;
        }
    }

    #[test]
    fn laplace_examples() {
        assert_eq!(laplace_interference(3.0, 0.0, 4.0).unwrap(), 1.0);
        assert_eq!(laplace_interference(0.0, 0.5, 4.0).unwrap(), 1.0);
        assert!(close(
            laplace_interference(1.0, 0.1, 4.0).unwrap(),
            0.6104980252657972,
            1e-12
        ));
    }

    #[test]
    fn sir_ccdf_examples() {
        assert_eq!(sir_ccdf(&scene(0.0, 1, 30.0)).unwrap(), 1.0);
        assert!(close(sir_ccdf(&scene(0.1, 1, 0.0)).unwrap(), 0.6104980252657972, 1e-12));
        assert!(sir_ccdf(&scene(0.1, 1, 200.0)).unwrap() < 1e-12);
    }

    #[test]
    fn sir_ccdf_monotone_on_grid() {
        let taus: Vec<f64> = (-20..=20).map(|t| t as f64).collect();
        let lambdas = [0.0, 0.001, 0.01, 0.05, 0.1, 0.5, 1.0];
        let rs = [0.5, 1.0, 2.0, 5.0];
        for &r in &rs {
            for &l in &lambdas {
                let mut prev = f64::INFINITY;
                for &t in &taus {
                    let v = sir_ccdf(&AnalyticParams { r, ..scene(l, 1, t) }).unwrap();
                    assert!(v <= prev);
                    prev = v;
                }
            }
        }
        for &t in &taus {
            let mut prev = f64::INFINITY;
            for &l in &lambdas {
                let v = sir_ccdf(&scene(l, 1, t)).unwrap();
                assert!(v <= prev);
                prev = v;
            }
            let mut prev = f64::INFINITY;
            for &r in &rs {
                let v = sir_ccdf(&AnalyticParams { r, ..scene(0.1, 1, t) }).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn p_success_examples() {
        assert_eq!(p_success(&scene(0.0, 1, 0.0)).unwrap(), 1.0);
        assert_eq!(p_success(&scene(0.0, 2, 0.0)).unwrap(), 0.25);
        assert!(close(
            p_success(&scene(0.1, 4, 0.0)).unwrap(),
            0.06438846360225205,
            1e-12
        ));
    }

    #[test]
    fn p_at_least_one_examples() {
        assert_eq!(p_at_least_one(0.3, 0), 0.0);
        assert_eq!(p_at_least_one(1.0, 1), 1.0);
        assert_eq!(p_at_least_one(0.5, 4), 0.9375);
    }

    #[test]
    fn required_slots_examples() {
        assert_eq!(required_slots_for(0.9, 0.9).unwrap(), 1);
        assert_eq!(required_slots_for(0.5, 0.9).unwrap(), 4);
        assert_eq!(required_slots_for(0.25, 0.99).unwrap(), 17);
        assert_eq!(required_slots_for(1.0, 0.9).unwrap(), 1);
        assert_eq!(required_slots_for(0.0, 0.9), Err(Error::Unreachable { eta: 0.9 }));
        assert_eq!(required_slots_for(1e-300, 0.9), Err(Error::Unreachable { eta: 0.9 }));
        // 1 - p rounds to 1 here, the log form does not
        assert_eq!(required_slots_for(1e-17, 1e-16), Ok(10));
        assert_eq!(required_slots(&scene(0.0, 2, 0.0)).unwrap(), 9);
    }

    #[test]
    fn validation_rejects_out_of_domain() {
        assert!(AnalyticParams {
            alpha: 2.0,
            ..scene(0.1, 1, 0.0)
        }
        .validate()
        .is_err());
        assert!(AnalyticParams {
            eta: 1.0,
            ..scene(0.1, 1, 0.0)
        }
        .validate()
        .is_err());
        assert!(AnalyticParams {
            n_pairs: 0,
            ..scene(0.1, 1, 0.0)
        }
        .validate()
        .is_err());
        assert!(AnalyticParams {
            r: 0.0,
            ..scene(0.1, 1, 0.0)
        }
        .validate()
        .is_err());
        assert!(scene(-0.1, 1, 0.0).validate().is_err());
        assert!(AnalyticParams {
            t_o: Some(1.5),
            ..scene(0.1, 1, 0.0)
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn required_slots_brackets(p in 1e-4..0.9999f64, eta in 0.01..0.999f64) {
            let n = required_slots_for(p, eta).unwrap();
            prop_assert!(p_at_least_one(p, n) >= eta);
            if n > 1 {
                prop_assert!(p_at_least_one(p, n - 1) < eta);
            }
        }

        #[test]
        fn p_at_least_one_monotone(p in 0.0..1.0f64, dp in 0.0..0.5f64, n in 0u64..500) {
            let q = (p + dp).min(1.0);
            prop_assert!(p_at_least_one(p, n + 1) >= p_at_least_one(p, n));
            prop_assert!(p_at_least_one(q, n) >= p_at_least_one(p, n));
        }

        #[test]
        fn success_bounded_by_collision_term(
            lambda_u in 0.0..2.0f64,
            n in 1usize..32,
            tau_db in -30.0..30.0f64,
            r in 0.1..5.0f64,
            alpha in 2.05..8.0f64,
        ) {
            let params = AnalyticParams { lambda_u, n_pairs: n, tau_db, r, alpha, eta: 0.9, t_o: None };
            let p = p_success(&params).unwrap();
            prop_assert!(p >= 0.0);
            prop_assert!(p <= p_nc_star(n));
            prop_assert!(p_nc_star(n) <= 1.0);
        }
    }
}
