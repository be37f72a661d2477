use std::fmt;

use molcom_core::tradeoff::{grid_search_oracle, optimize_tradeoff};
use molcom_core::{LinkModel, NormalizationContext, Result, TradeoffResult};

use crate::config::RunConfig;
use crate::csv::{Cell, Table};

pub const TRACE_HEADER: &[&str] = &["iteration", "n_m", "f", "learning_rate", "event"];

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub result: TradeoffResult,
    /// Grid-search minimizer and its balance value.
    pub grid_n_star: f64,
    pub grid_f_star: f64,
    pub grid_step: f64,
}

impl OptimizeReport {
    pub fn trace_table(&self) -> Table {
        let mut t = Table::new(TRACE_HEADER);
        for p in &self.result.trace {
            t.push(vec![
                Cell::Int(p.iteration as u64),
                p.n_m.into(),
                p.value.into(),
                p.learning_rate.into(),
                p.event.as_str().into(),
            ]);
        }
        t
    }
}

impl fmt::Display for OptimizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.result;
        writeln!(f, "n_star          {:.16e}", r.n_star)?;
        writeln!(f, "n_star_rounded  {}", r.n_star_rounded)?;
        writeln!(f, "p_error_star    {:.16e}", r.p_e_star)?;
        writeln!(f, "f_star          {:.16e}", r.f_star)?;
        writeln!(f, "iterations      {}", r.iterations)?;
        writeln!(f, "converged       {}", r.converged)?;
        writeln!(
            f,
            "grid_n_star     {:.16e} (step {:e})",
            self.grid_n_star, self.grid_step
        )
    }
}

pub fn run_optimize(cfg: &RunConfig) -> Result<OptimizeReport> {
    let model = LinkModel::new(cfg.params, cfg.memory_length, cfg.threshold)?;
    let grid = cfg.grid();
    let (ctx, _) = NormalizationContext::from_grid(&grid, &model)?;
    let result = optimize_tradeoff(&cfg.optimizer, &ctx, &cfg.weights, &model)?;
    let (grid_n_star, grid_f_star) = if grid.len() >= molcom_core::tradeoff::MIN_ORACLE_POINTS {
        grid_search_oracle(&grid, &ctx, &cfg.weights, &model)?
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(OptimizeReport {
        result,
        grid_n_star,
        grid_f_star,
        grid_step: cfg.grid_step(),
    })
}
