//! Experiment files and named presets.
//!
//! An experiment file is TOML with flat top-level keys and an optional
//! `[sweep]` table:
//!
//! ```toml
//! lambda_u = 0.1        # interferer density per unit area
//! lambda_b = 0.2        # BS density
//! N = 4                 # contending D2D pairs
//! eta = 0.9             # target P(at least one success)
//! tau_db = 0            # SIR threshold, dB
//! alpha = 4             # path-loss exponent, > 2
//! R = 1                 # pair separation
//! ue_tx_power_dbm = 23
//! bs_tx_power_dbm = 40
//! shadowing_sigma_db = 4
//! trials = 100000
//! shadowing = false
//! mode = "single_message"          # or "full_signaling"
//! interferers = "saturated"        # or "contention_only"
//! region = "whole_plane"           # or "guard_zone"
//! contention = "persistent"        # or "shrinking"
//! placement = "fixed_pair"         # or "nearest_neighbor"
//! seed = 20170502
//!
//! [sweep]
//! axis = "lambda_u"                # lambda_u | N | tau_db | R
//! values = [0.01, 0.05, 0.1]
//! ```
//!
//! Optional keys: `T_o`, `slots_cap`, `pair_threshold`, `window_radius`,
//! `tau_grid_db`, `min_distance`. Missing keys take the values of
//! [`ExperimentConfig::default`]; unknown keys are rejected. Seeds in files
//! are limited to `0..=i64::MAX`.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::analytic::AnalyticParams;
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::InterfererRegion;
use crate::montecarlo::{ExperimentConfig, Placement, Sweep, SweepAxis};
use crate::protocol::{ContentionModel, InterfererModel, SignalingMode};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda_u: Option<Spanned<f64>>,
    lambda_b: Option<Spanned<f64>>,
    #[serde(rename = "N")]
    n_pairs: Option<Spanned<i64>>,
    eta: Option<Spanned<f64>>,
    tau_db: Option<Spanned<f64>>,
    alpha: Option<Spanned<f64>>,
    #[serde(rename = "R")]
    r: Option<Spanned<f64>>,
    ue_tx_power_dbm: Option<Spanned<f64>>,
    bs_tx_power_dbm: Option<Spanned<f64>>,
    shadowing_sigma_db: Option<Spanned<f64>>,
    trials: Option<Spanned<i64>>,
    shadowing: Option<Spanned<bool>>,
    mode: Option<Spanned<SignalingMode>>,
    interferers: Option<Spanned<InterfererModel>>,
    region: Option<Spanned<InterfererRegion>>,
    contention: Option<Spanned<ContentionModel>>,
    placement: Option<Spanned<Placement>>,
    #[serde(rename = "T_o")]
    t_o: Option<Spanned<f64>>,
    slots_cap: Option<Spanned<i64>>,
    pair_threshold: Option<Spanned<f64>>,
    window_radius: Option<Spanned<f64>>,
    tau_grid_db: Option<Spanned<Vec<f64>>>,
    min_distance: Option<Spanned<f64>>,
    seed: Option<Spanned<i64>>,
    sweep: Option<Spanned<RawSweep>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: Spanned<String>,
    values: Spanned<Vec<f64>>,
}

/// Serialized form; mirrors [`RawConfig`] without spans.
#[derive(Debug, Serialize)]
struct ConfigDoc {
    lambda_u: f64,
    lambda_b: f64,
    #[serde(rename = "N")]
    n_pairs: i64,
    eta: f64,
    tau_db: f64,
    alpha: f64,
    #[serde(rename = "R")]
    r: f64,
    ue_tx_power_dbm: f64,
    bs_tx_power_dbm: f64,
    shadowing_sigma_db: f64,
    trials: i64,
    shadowing: bool,
    mode: SignalingMode,
    interferers: InterfererModel,
    region: InterfererRegion,
    contention: ContentionModel,
    placement: Placement,
    #[serde(rename = "T_o", skip_serializing_if = "Option::is_none")]
    t_o: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slots_cap: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_radius: Option<f64>,
    tau_grid_db: Vec<f64>,
    min_distance: f64,
    seed: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepDoc>,
}

#[derive(Debug, Serialize)]
struct SweepDoc {
    axis: String,
    values: Vec<f64>,
}

fn line_of(text: &str, span: &Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Lines<'a> {
    text: &'a str,
    by_key: HashMap<&'static str, usize>,
}

impl<'a> Lines<'a> {
    fn take<T>(&mut self, key: &'static str, field: Option<Spanned<T>>) -> Option<T> {
        field.map(|s| {
            self.by_key.insert(key, line_of(self.text, &s.span()));
            s.into_inner()
        })
    }

    fn error(&self, key: &str, reason: impl std::fmt::Display) -> Error {
        let line = self.by_key.get(key).copied();
        let message = match line {
            Some(l) => format!("config error at line {l}: `{key}` {reason}"),
            None => format!("config error: `{key}` {reason}"),
        };
        Error::Config {
            key: Some(key.to_string()),
            line,
            message,
        }
    }

    fn non_negative(&self, key: &'static str, v: i64) -> Result<u64> {
        u64::try_from(v).map_err(|_| self.error(key, format!("must be >= 0, got {v}")))
    }
}

fn syntax_error(e: toml::de::Error, text: &str) -> Error {
    let line = e.span().map(|s| line_of(text, &s));
    let key = e
        .message()
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next())
        .map(str::to_string);
    Error::Config {
        key,
        line,
        message: format!("config error: {}", e.to_string().trim_end()),
    }
}

/// Parse an experiment file over the documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| syntax_error(e, text))?;
    let mut lines = Lines {
        text,
        by_key: HashMap::new(),
    };
    let mut c = ExperimentConfig::default();

    if let Some(v) = lines.take("lambda_u", raw.lambda_u) {
        c.analytic.lambda_u = v;
    }
    if let Some(v) = lines.take("lambda_b", raw.lambda_b) {
        c.lambda_b = v;
    }
    if let Some(v) = lines.take("N", raw.n_pairs) {
        let n = lines.non_negative("N", v)?;
        c.analytic.n_pairs = n as usize;
    }
    if let Some(v) = lines.take("eta", raw.eta) {
        c.analytic.eta = v;
    }
    if let Some(v) = lines.take("tau_db", raw.tau_db) {
        c.analytic.tau_db = v;
    }
    if let Some(v) = lines.take("alpha", raw.alpha) {
        c.analytic.alpha = v;
        c.channel.alpha = v;
    }
    if let Some(v) = lines.take("R", raw.r) {
        c.analytic.r = v;
    }
    if let Some(v) = lines.take("ue_tx_power_dbm", raw.ue_tx_power_dbm) {
        c.power.ue_tx_power_dbm = v;
    }
    if let Some(v) = lines.take("bs_tx_power_dbm", raw.bs_tx_power_dbm) {
        c.power.bs_tx_power_dbm = v;
    }
    if let Some(v) = lines.take("shadowing_sigma_db", raw.shadowing_sigma_db) {
        c.channel.shadowing_sigma_db = v;
    }
    if let Some(v) = lines.take("trials", raw.trials) {
        c.trials = lines.non_negative("trials", v)? as usize;
    }
    if let Some(v) = lines.take("shadowing", raw.shadowing) {
        c.channel.shadowing_enabled = v;
    }
    if let Some(v) = lines.take("mode", raw.mode) {
        c.signaling = v;
    }
    if let Some(v) = lines.take("interferers", raw.interferers) {
        c.interferers = v;
    }
    if let Some(v) = lines.take("region", raw.region) {
        c.channel.interferer_region = v;
    }
    if let Some(v) = lines.take("contention", raw.contention) {
        c.contention = v;
    }
    if let Some(v) = lines.take("placement", raw.placement) {
        c.placement = v;
    }
    if let Some(v) = lines.take("T_o", raw.t_o) {
        c.analytic.t_o = Some(v);
    }
    if let Some(v) = lines.take("slots_cap", raw.slots_cap) {
        c.slots_cap = Some(lines.non_negative("slots_cap", v)?);
    }
    if let Some(v) = lines.take("pair_threshold", raw.pair_threshold) {
        c.pair_threshold = Some(v);
    }
    if let Some(v) = lines.take("window_radius", raw.window_radius) {
        c.window_radius = Some(v);
    }
    if let Some(v) = lines.take("tau_grid_db", raw.tau_grid_db) {
        c.tau_grid_db = v;
    }
    if let Some(v) = lines.take("min_distance", raw.min_distance) {
        c.channel.min_distance = v;
    }
    if let Some(v) = lines.take("seed", raw.seed) {
        c.seed = lines.non_negative("seed", v)?;
    }
    if let Some(sweep) = lines.take("sweep", raw.sweep) {
        let axis_line = line_of(text, &sweep.axis.span());
        let axis_name = sweep.axis.into_inner();
        lines.by_key.insert("sweep.axis", axis_line);
        let axis = SweepAxis::parse(&axis_name)
            .ok_or_else(|| lines.error("sweep.axis", format!("has unknown axis `{axis_name}`")))?;
        let values = lines.take("sweep.values", Some(sweep.values)).unwrap_or_default();
        c.sweep = Some(Sweep { axis, values });
    }

    c.validate().map_err(|e| match e {
        Error::Parameter { name, reason } => {
            let key = match name {
                "window.radius" => "window_radius",
                "sweep" => "sweep.values",
                other => other,
            };
            // defaults are valid, so an unset key failing came from a sweep value
            let key = if lines.by_key.contains_key(key) || c.sweep.is_none() {
                key
            } else {
                "sweep.values"
            };
            lines.error(key, reason)
        }
        other => other,
    })?;
    Ok(c)
}

/// Serialize a config so that [`parse_config`] reproduces it.
pub fn to_toml(config: &ExperimentConfig) -> String {
    let a = &config.analytic;
    let doc = ConfigDoc {
        lambda_u: a.lambda_u,
        lambda_b: config.lambda_b,
        n_pairs: a.n_pairs as i64,
        eta: a.eta,
        tau_db: a.tau_db,
        alpha: a.alpha,
        r: a.r,
        ue_tx_power_dbm: config.power.ue_tx_power_dbm,
        bs_tx_power_dbm: config.power.bs_tx_power_dbm,
        shadowing_sigma_db: config.channel.shadowing_sigma_db,
        trials: config.trials as i64,
        shadowing: config.channel.shadowing_enabled,
        mode: config.signaling,
        interferers: config.interferers,
        region: config.channel.interferer_region,
        contention: config.contention,
        placement: config.placement,
        t_o: a.t_o,
        slots_cap: config.slots_cap.map(|v| v as i64),
        pair_threshold: config.pair_threshold,
        window_radius: config.window_radius,
        tau_grid_db: config.tau_grid_db.clone(),
        min_distance: config.channel.min_distance,
        seed: config.seed as i64,
        sweep: config.sweep.as_ref().map(|s| SweepDoc {
            axis: s.axis.as_str().to_string(),
            values: s.values.clone(),
        }),
    };
    toml::to_string(&doc).expect("config document is always serializable")
}

/// Flat `(key, value)` echo of a config for run metadata.
pub fn config_echo(config: &ExperimentConfig) -> Vec<(String, String)> {
    let a = &config.analytic;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let join = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    let mut rows = vec![
        ("lambda_u", a.lambda_u.to_string()),
        ("lambda_b", config.lambda_b.to_string()),
        ("N", a.n_pairs.to_string()),
        ("eta", a.eta.to_string()),
        ("tau_db", a.tau_db.to_string()),
        ("alpha", a.alpha.to_string()),
        ("R", a.r.to_string()),
        ("ue_tx_power_dbm", config.power.ue_tx_power_dbm.to_string()),
        ("bs_tx_power_dbm", config.power.bs_tx_power_dbm.to_string()),
        ("shadowing_sigma_db", config.channel.shadowing_sigma_db.to_string()),
        ("trials", config.trials.to_string()),
        ("shadowing", config.channel.shadowing_enabled.to_string()),
        ("mode", enum_name(&config.signaling)),
        ("interferers", enum_name(&config.interferers)),
        ("region", enum_name(&config.channel.interferer_region)),
        ("contention", enum_name(&config.contention)),
        ("placement", enum_name(&config.placement)),
        ("T_o", a.transmission_probability().to_string()),
        ("slots_cap", config.slots_cap().to_string()),
        ("pair_threshold", opt(config.pair_threshold.or(Some(a.r)))),
        ("window_radius", config.window_radius().to_string()),
        ("tau_grid_db", join(&config.tau_grid_db)),
        ("min_distance", config.channel.min_distance.to_string()),
        ("seed", config.seed.to_string()),
    ];
    if let Some(s) = &config.sweep {
        rows.push(("sweep.axis", s.axis.as_str().to_string()));
        rows.push(("sweep.values", join(&s.values)));
    }
    rows.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn enum_name<T: Serialize>(v: &T) -> String {
    toml::Value::try_from(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// One curve group of a figure preset.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    /// Subdirectory name for multi-series presets; empty for single-series ones.
    pub label: String,
    pub config: ExperimentConfig,
}

pub const PRESET_NAMES: [&str; 8] = [
    "default",
    "validation",
    "fig2",
    "fig3",
    "fig4",
    "fig5",
    "fig6",
    "table1",
];
pub const FIGURE_PRESETS: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

const FIGURE_TRIALS: usize = 10_000;
const SWEEP_LAMBDA_20DB: [f64; 6] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05];
const PAIR_COUNTS: [usize; 4] = [2, 4, 6, 8];

fn tau_range(lo: i32, hi: i32, step: usize) -> Vec<f64> {
    (lo..=hi).step_by(step).map(f64::from).collect()
}

fn normalized(lambda_u: f64, n_pairs: usize, tau_db: f64) -> ExperimentConfig {
    ExperimentConfig {
        analytic: AnalyticParams {
            lambda_u,
            n_pairs,
            tau_db,
            ..AnalyticParams::default()
        },
        trials: FIGURE_TRIALS,
        ..ExperimentConfig::default()
    }
}

fn single(config: ExperimentConfig) -> Vec<Series> {
    vec![Series {
        label: String::new(),
        config,
    }]
}

fn per_pair_count(base: ExperimentConfig) -> Vec<Series> {
    PAIR_COUNTS
        .iter()
        .map(|&n| {
            let mut config = base.clone();
            config.analytic.n_pairs = n;
            Series {
                label: format!("N{n}"),
                config,
            }
        })
        .collect()
}

/// Named presets. Geometry is normalized to R = 1 so that the SIR tail stays
/// away from 0 and 1 over the swept densities.
pub fn preset(name: &str) -> Option<Vec<Series>> {
    let series = match name {
        "default" | "validation" => single(ExperimentConfig::default()),
        // SIR tail versus density, one curve per threshold
        "fig2" => single(ExperimentConfig {
            tau_grid_db: tau_range(-20, 20, 5),
            slots_cap: Some(200),
            sweep: Some(Sweep {
                axis: SweepAxis::LambdaU,
                values: vec![0.001, 0.01, 0.05, 0.1, 0.5, 1.0],
            }),
            ..normalized(0.1, 2, -10.0)
        }),
        // SIR tail versus threshold at two densities
        "fig3" => single(ExperimentConfig {
            tau_grid_db: tau_range(-20, 20, 2),
            slots_cap: Some(200),
            sweep: Some(Sweep {
                axis: SweepAxis::LambdaU,
                values: vec![0.5, 0.7],
            }),
            ..normalized(0.5, 2, -10.0)
        }),
        // success probability and required slots versus density, one series per N
        "fig4" | "fig6" => per_pair_count(ExperimentConfig {
            tau_grid_db: vec![20.0],
            sweep: Some(Sweep {
                axis: SweepAxis::LambdaU,
                values: SWEEP_LAMBDA_20DB.to_vec(),
            }),
            ..normalized(0.01, 2, 20.0)
        }),
        // slot CDF, one curve per N
        "fig5" => single(ExperimentConfig {
            tau_grid_db: vec![20.0],
            sweep: Some(Sweep {
                axis: SweepAxis::NPairs,
                values: PAIR_COUNTS.iter().map(|&n| n as f64).collect(),
            }),
            ..normalized(0.01, 2, 20.0)
        }),
        // literal units: R = 30, shadowing on, full signaling. The SIR tail
        // underflows to ~0 here.
        "table1" => single(ExperimentConfig {
            analytic: AnalyticParams {
                lambda_u: 0.01,
                n_pairs: 4,
                tau_db: 20.0,
                r: 30.0,
                alpha: 4.0,
                eta: 0.9,
                t_o: None,
            },
            channel: ChannelParams {
                shadowing_enabled: true,
                ..ChannelParams::default()
            },
            trials: 1000,
            slots_cap: Some(50),
            signaling: SignalingMode::FullSignaling,
            placement: Placement::NearestNeighbor,
            window_radius: Some(60.0),
            tau_grid_db: tau_range(-20, 20, 10),
            sweep: Some(Sweep {
                axis: SweepAxis::LambdaU,
                values: vec![0.001, 0.01, 0.1, 1.0],
            }),
            ..ExperimentConfig::default()
        }),
        _ => return None,
    };
    Some(series)
}
