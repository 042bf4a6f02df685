//! Link gains and SIR.
//!
//! Received power on a link is `P_t * h * d^-alpha * S` with Rayleigh power
//! fading `h ~ Exp(1)` and optional log-normal shadowing `S`. Noise is not
//! modelled; the SIR of a link with no interferers is `+inf`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{InterfererRegion, Point};

/// Default floor below which a link distance is treated as a singularity.
pub const DEFAULT_MIN_DISTANCE: f64 = 1e-6;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub alpha: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_enabled: bool,
    pub interferer_region: InterfererRegion,
    pub min_distance: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            alpha: 4.0,
            shadowing_sigma_db: 4.0,
            shadowing_enabled: false,
            interferer_region: InterfererRegion::WholePlane,
            min_distance: DEFAULT_MIN_DISTANCE,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(Error::param("alpha", format!("must be > 2, got {}", self.alpha)));
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::param(
                "shadowing_sigma_db",
                format!("must be >= 0, got {}", self.shadowing_sigma_db),
            ));
        }
        if !(self.min_distance.is_finite() && self.min_distance > 0.0) {
            return Err(Error::param(
                "min_distance",
                format!("must be > 0, got {}", self.min_distance),
            ));
        }
        Ok(())
    }

    /// Shadowing deviation actually applied to links (0 when disabled).
    pub fn effective_sigma_db(&self) -> f64 {
        if self.shadowing_enabled {
            self.shadowing_sigma_db
        } else {
            0.0
        }
    }
}

/// Transmit powers. Only the UE power enters link budgets, and since every
/// transmitter uses it, it cancels in the SIR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub ue_tx_power_dbm: f64,
    pub bs_tx_power_dbm: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            ue_tx_power_dbm: 23.0,
            bs_tx_power_dbm: 40.0,
        }
    }
}

/// Linear SIR. `+inf` stands for an interference-free link.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SirSample(f64);

impl SirSample {
    pub const INFINITE: SirSample = SirSample(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::param("sir", format!("must be >= 0, got {value}")));
        }
        Ok(SirSample(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    pub fn db(&self) -> f64 {
        linear_to_db(self.0)
    }

    pub fn meets(&self, tau_db: f64) -> bool {
        self.0 >= db_to_linear(tau_db)
    }
}

pub fn path_loss(distance: f64, alpha: f64) -> Result<f64> {
    if distance.is_nan() || distance <= 0.0 {
        return Err(Error::Singularity { distance, floor: 0.0 });
    }
    Ok(distance.powf(-alpha))
}

pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Log-normal multiplier `10^(g/10)`, `g ~ N(0, sigma_db^2)`.
pub fn sample_shadowing<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db <= 0.0 {
        return 1.0;
    }
    let g: f64 = Normal::new(0.0, sigma_db).expect("finite positive sigma").sample(rng);
    db_to_linear(g)
}

/// Source of per-link random gains, consumed in link order: the desired link
/// first, then each interferer. Every link draws fading, then shadowing.
pub trait GainSource {
    fn fading(&mut self) -> f64;
    fn shadowing(&mut self, sigma_db: f64) -> f64;
}

pub struct RandomGains<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> GainSource for RandomGains<'_, R> {
    fn fading(&mut self) -> f64 {
        sample_fading(self.0)
    }

    fn shadowing(&mut self, sigma_db: f64) -> f64 {
        sample_shadowing(sigma_db, self.0)
    }
}

/// Replays a recorded fading sequence (cycling) with shadowing pinned to 1.
#[derive(Debug, Clone)]
pub struct FixedGains {
    fading: Vec<f64>,
    next: usize,
}

impl FixedGains {
    pub fn new(fading: Vec<f64>) -> Self {
        assert!(!fading.is_empty(), "fixed gain sequence must not be empty");
        FixedGains { fading, next: 0 }
    }

    pub fn unit() -> Self {
        FixedGains::new(vec![1.0])
    }
}

impl GainSource for FixedGains {
    fn fading(&mut self) -> f64 {
        let h = self.fading[self.next % self.fading.len()];
        self.next += 1;
        h
    }

    fn shadowing(&mut self, _sigma_db: f64) -> f64 {
        1.0
    }
}

fn link_gain<G: GainSource + ?Sized>(from: &Point, to: &Point, params: &ChannelParams, gains: &mut G) -> Result<f64> {
    let d = from.distance(to);
    if d < params.min_distance {
        return Err(Error::Singularity {
            distance: d,
            floor: params.min_distance,
        });
    }
    let h = gains.fading();
    let s = gains.shadowing(params.effective_sigma_db());
    Ok(h * d.powf(-params.alpha) * s)
}

/// SIR at `rx` for the desired transmitter `tx` with every node sending at
/// `tx_power` (linear units).
pub fn compute_sir_powered<G: GainSource + ?Sized>(
    tx: &Point,
    rx: &Point,
    interferer_txs: &[Point],
    params: &ChannelParams,
    tx_power: f64,
    gains: &mut G,
) -> Result<SirSample> {
    let signal = tx_power * link_gain(tx, rx, params, gains)?;
    let mut interference = 0.0;
    for z in interferer_txs {
        interference += tx_power * link_gain(z, rx, params, gains)?;
    }
    if interference == 0.0 {
        return Ok(SirSample::INFINITE);
    }
    Ok(SirSample(signal / interference))
}

pub fn compute_sir_with<G: GainSource + ?Sized>(
    tx: &Point,
    rx: &Point,
    interferer_txs: &[Point],
    params: &ChannelParams,
    gains: &mut G,
) -> Result<SirSample> {
    compute_sir_powered(tx, rx, interferer_txs, params, 1.0, gains)
}

/// SIR with fresh fading (and shadowing, if enabled) on every link.
pub fn compute_sir<R: Rng + ?Sized>(
    tx: &Point,
    rx: &Point,
    interferer_txs: &[Point],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<SirSample> {
    compute_sir_with(tx, rx, interferer_txs, params, &mut RandomGains(rng))
}
