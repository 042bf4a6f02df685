//! Point-process sampling and pair placement.
//!
//! The interferer field is a homogeneous Poisson point process truncated to a
//! disc [`Window`]. Two scene builders exist: [`pair_users`] forms D2D pairs
//! out of a sampled UE population, and [`place_fixed_pair`] drops a single
//! pair with an exact separation at the window center.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson, UnitDisc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn scaled(&self, factor: f64) -> Point {
        Point::new(self.x * factor, self.y * factor)
    }
}

/// Disc-shaped observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub radius: f64,
}

impl Window {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::param("window.radius", format!("must be > 0, got {radius}")));
        }
        Ok(Window { center, radius })
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.center.distance(p) <= self.radius
    }

    /// Radius large enough that the interference beyond it is negligible
    /// for a link of length `separation` in a field of density `density`.
    pub fn truncation_radius(separation: f64, density: f64) -> f64 {
        let by_link = 10.0 * separation;
        if density > 0.0 {
            by_link.max(5.0 / density.sqrt())
        } else {
            by_link
        }
    }
}

/// Where interferers may fall relative to the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfererRegion {
    /// Interferers anywhere in the window.
    #[default]
    WholePlane,
    /// Interferers only outside the disc of radius R around the receiver.
    GuardZone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D2DPair {
    pub id: usize,
    pub tx: Point,
    pub rx: Point,
    pub separation: f64,
}

impl D2DPair {
    fn new(id: usize, tx: Point, rx: Point) -> Self {
        D2DPair {
            id,
            tx,
            rx,
            separation: tx.distance(&rx),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub bs_points: Vec<Point>,
    /// UE population. In fixed-pair scenes this is the interferer field and
    /// excludes the pair itself.
    pub ue_points: Vec<Point>,
    pub pairs: Vec<D2DPair>,
    pub window: Window,
    pub seed: u64,
}

/// Homogeneous PPP of intensity `density` restricted to `window`.
pub fn sample_ppp<R: Rng + ?Sized>(density: f64, window: &Window, rng: &mut R) -> Result<Vec<Point>> {
    if !(density.is_finite() && density >= 0.0) {
        return Err(Error::param("density", format!("must be >= 0, got {density}")));
    }
    let mean = density * window.area();
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::param("density", e.to_string()))?
        .sample(rng) as usize;
    Ok((0..count)
        .map(|_| {
            let [u, v]: [f64; 2] = UnitDisc.sample(rng);
            Point::new(window.center.x + window.radius * u, window.center.y + window.radius * v)
        })
        .collect())
}

/// Serving base station of `origin`: the nearest BS, lowest index on ties.
pub fn representative_cell(bs_points: &[Point], origin: Point) -> Result<Point> {
    let mut best: Option<(f64, Point)> = None;
    for bs in bs_points {
        let d = bs.distance(&origin);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, *bs));
        }
    }
    best.map(|(_, p)| p).ok_or(Error::NoBaseStations)
}

/// Greedy nearest-neighbour pairing in index order.
///
/// Each still-unmatched UE is offered its nearest unmatched neighbour; the
/// pair is kept when the separation is within `threshold`. Pairing stops as
/// soon as `count` pairs exist. Ids run 1..=count in formation order.
pub fn pair_users(ue_points: &[Point], threshold: f64, count: usize) -> Result<Vec<D2DPair>> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::param(
            "distance_threshold",
            format!("must be > 0, got {threshold}"),
        ));
    }
    let mut matched = vec![false; ue_points.len()];
    let mut pairs = Vec::with_capacity(count.min(ue_points.len() / 2));
    for i in 0..ue_points.len() {
        if pairs.len() == count {
            break;
        }
        if matched[i] {
            continue;
        }
        let nearest = ue_points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i && !matched[j])
            .map(|(j, p)| (j, ue_points[i].distance(p)))
            .filter(|&(_, d)| d > 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, d)) = nearest {
            if d <= threshold {
                matched[i] = true;
                matched[j] = true;
                pairs.push(D2DPair::new(pairs.len() + 1, ue_points[i], ue_points[j]));
            }
        }
    }
    if pairs.len() < count {
        return Err(Error::PairShortfall {
            requested: count,
            found: pairs.len(),
        });
    }
    Ok(pairs)
}

/// Interferer field around a receiver, optionally with the guard zone of
/// radius `separation` removed.
pub fn sample_interferers<R: Rng + ?Sized>(
    density: f64,
    window: &Window,
    region: InterfererRegion,
    separation: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let mut field = sample_ppp(density, window, rng)?;
    if region == InterfererRegion::GuardZone {
        field.retain(|p| p.distance(&window.center) > separation);
    }
    Ok(field)
}

/// Single pair with the receiver at the window center and the transmitter at
/// distance exactly `separation`, plus an interferer field of the given density.
pub fn place_fixed_pair<R: Rng + ?Sized>(
    separation: f64,
    interferer_density: f64,
    window: &Window,
    region: InterfererRegion,
    rng: &mut R,
) -> Result<NetworkRealization> {
    if !(separation.is_finite() && separation > 0.0) {
        return Err(Error::param("R", format!("must be > 0, got {separation}")));
    }
    if separation >= window.radius {
        return Err(Error::param(
            "R",
            format!("{separation} must be smaller than the window radius {}", window.radius),
        ));
    }
    let rx = window.center;
    let angle = rng.random_range(0.0..2.0 * PI);
    let tx = Point::new(rx.x + separation * angle.cos(), rx.y + separation * angle.sin());
    let ue_points = sample_interferers(interferer_density, window, region, separation, rng)?;
    Ok(NetworkRealization {
        bs_points: Vec::new(),
        ue_points,
        pairs: vec![D2DPair {
            id: 1,
            tx,
            rx,
            separation,
        }],
        window: *window,
        seed: 0,
    })
}
