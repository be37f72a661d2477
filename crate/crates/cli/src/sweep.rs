//! Grid sweeps over the molecule budget. Rows are evaluated in parallel and
//! emitted in grid order.

use molcom_core::channel::to_db;
use molcom_core::tradeoff::balance_value;
use molcom_core::{LinkModel, NormalizationContext, Result};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::csv::{Cell, Table};

pub const SNR_HEADER: &[&str] = &["n_m", "snr_linear", "snr_db"];
pub const BER_HEADER: &[&str] = &["n_m", "p_miss", "p_false_alarm", "p_error"];
pub const BALANCE_HEADER: &[&str] = &["n_m", "p_error", "n_hat", "p_hat", "f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Snr,
    Ber,
    BerNoIsi,
    Balance,
}

fn rows_in_order<F>(grid: &[f64], f: F) -> Result<Vec<Vec<Cell>>>
where
    F: Fn(f64) -> Result<Vec<Cell>> + Sync,
{
    grid.par_iter().map(|&n| f(n)).collect()
}

/// SNR at the peak time, one block of rows per configured distance.
pub fn snr_sweep(cfg: &RunConfig) -> Result<Table> {
    let grid = cfg.grid();
    let mut table = Table::new(SNR_HEADER);
    for &d in &cfg.distances {
        let params = cfg.params.with_distance(d)?;
        table.rows.extend(rows_in_order(&grid, |n| {
            let snr = params.snr_at_peak(n)?;
            Ok(vec![n.into(), snr.into(), to_db(snr).into()])
        })?);
    }
    Ok(table)
}

/// Error probabilities with the configured memory length, or none at all.
pub fn ber_sweep(cfg: &RunConfig, with_isi: bool) -> Result<Table> {
    let memory = if with_isi { cfg.memory_length } else { 0 };
    let model = LinkModel::new(cfg.params, memory, cfg.threshold)?;
    let mut table = Table::new(BER_HEADER);
    table.rows = rows_in_order(&cfg.grid(), |n| {
        let b = model.ber(n)?;
        Ok(vec![
            n.into(),
            b.p_miss.into(),
            b.p_false_alarm.into(),
            b.p_error.into(),
        ])
    })?;
    Ok(table)
}

/// Balance function over the grid, one block per weight pair. All blocks
/// share the normalization taken from the same grid.
pub fn balance_sweep(cfg: &RunConfig) -> Result<Table> {
    let model = LinkModel::new(cfg.params, cfg.memory_length, cfg.threshold)?;
    let grid = cfg.grid();
    let (ctx, _) = NormalizationContext::from_grid(&grid, &model)?;
    let mut table = Table::new(BALANCE_HEADER);
    for w in &cfg.weight_pairs {
        table.rows.extend(rows_in_order(&grid, |n| {
            let (f, p_error) = balance_value(n, &ctx, w, &model)?;
            Ok(vec![
                n.into(),
                p_error.into(),
                ctx.n_hat(n).into(),
                ctx.p_hat(p_error).into(),
                f.into(),
            ])
        })?);
    }
    Ok(table)
}

pub fn run_sweep(kind: SweepKind, cfg: &RunConfig) -> Result<Table> {
    match kind {
        SweepKind::Snr => snr_sweep(cfg),
        SweepKind::Ber => ber_sweep(cfg, true),
        SweepKind::BerNoIsi => ber_sweep(cfg, false),
        SweepKind::Balance => balance_sweep(cfg),
    }
}
