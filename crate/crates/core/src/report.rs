//! CSV outputs.
//!
//! | file           | columns                                                          |
//! |----------------|------------------------------------------------------------------|
//! | `sir_ccdf.csv` | sweep_value, tau_db, empirical, analytic                         |
//! | `success.csv`  | sweep_value, p_success_emp, p_success_analytic, n_opportunities  |
//! | `slots.csv`    | sweep_value, n, cdf_emp, cdf_analytic, required_slots_analytic   |
//! | `meta.csv`     | key, value                                                       |
//!
//! Columns that a run did not compute are left empty, as is `sweep_value`
//! for unswept runs and `required_slots_analytic` when the target is
//! unreachable.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::config_echo;
use crate::montecarlo::{ExperimentConfig, MetricRecord};

pub const SIR_CCDF_HEADER: [&str; 4] = ["sweep_value", "tau_db", "empirical", "analytic"];
pub const SUCCESS_HEADER: [&str; 4] = ["sweep_value", "p_success_emp", "p_success_analytic", "n_opportunities"];
pub const SLOTS_HEADER: [&str; 5] = ["sweep_value", "n", "cdf_emp", "cdf_analytic", "required_slots_analytic"];
pub const META_HEADER: [&str; 2] = ["key", "value"];

/// Which halves of the paired columns to fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Columns {
    pub empirical: bool,
    pub analytic: bool,
}

impl Columns {
    pub const BOTH: Columns = Columns {
        empirical: true,
        analytic: true,
    };
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sweep_cell(r: &MetricRecord) -> String {
    cell(r.sweep_value)
}

pub fn write_sir_ccdf<W: Write>(records: &[MetricRecord], cols: Columns, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SIR_CCDF_HEADER)?;
    for r in records {
        for (i, tau) in r.tau_grid_db.iter().enumerate() {
            let emp = r
                .sir_ccdf_empirical
                .as_ref()
                .filter(|_| cols.empirical)
                .map(|c| c.fraction[i]);
            let ana = cols.analytic.then(|| r.sir_ccdf_analytic[i]);
            w.write_record([sweep_cell(r), tau.to_string(), cell(emp), cell(ana)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_success<W: Write>(records: &[MetricRecord], cols: Columns, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUCCESS_HEADER)?;
    for r in records {
        let emp = r.p_success_empirical.filter(|_| cols.empirical);
        let ana = cols.analytic.then_some(r.p_success_analytic);
        w.write_record([sweep_cell(r), cell(emp), cell(ana), r.n_opportunities.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slots<W: Write>(records: &[MetricRecord], cols: Columns, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SLOTS_HEADER)?;
    for r in records {
        let required = if cols.analytic {
            r.required_slots_analytic.map(|n| n.to_string()).unwrap_or_default()
        } else {
            String::new()
        };
        for n in r.slot_grid() {
            let emp = r.slots.as_ref().filter(|_| cols.empirical).map(|s| s.cdf.at(n as f64));
            let ana = cols.analytic.then(|| r.slots_cdf_analytic(n));
            w.write_record([sweep_cell(r), n.to_string(), cell(emp), cell(ana), required.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_meta<W: Write>(config: &ExperimentConfig, extra: &[(&str, String)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(META_HEADER)?;
    w.write_record(["version", env!("CARGO_PKG_VERSION")])?;
    for (k, v) in extra {
        w.write_record([*k, v.as_str()])?;
    }
    for (k, v) in config_echo(config) {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

/// Write all four CSVs into `dir`, creating it if needed.
pub fn write_all(
    dir: &Path,
    config: &ExperimentConfig,
    records: &[MetricRecord],
    cols: Columns,
    extra_meta: &[(&str, String)],
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let to_io = |e: csv::Error| std::io::Error::other(e);
    write_sir_ccdf(records, cols, fs::File::create(dir.join("sir_ccdf.csv"))?).map_err(to_io)?;
    write_success(records, cols, fs::File::create(dir.join("success.csv"))?).map_err(to_io)?;
    write_slots(records, cols, fs::File::create(dir.join("slots.csv"))?).map_err(to_io)?;
    write_meta(config, extra_meta, fs::File::create(dir.join("meta.csv"))?).map_err(to_io)?;
    Ok(())
}
