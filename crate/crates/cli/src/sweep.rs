//! Distortion grids and bound sweeps.

use rateloss_core::bounds::{d_min_gaussian, Agents, BoundEvaluator, BoundResult, BoundsError, FormulaId};
use rayon::prelude::*;

use crate::table::{Cell, SweepTable};
use crate::{CliError, Units, VERSION};

pub const DEFAULT_POINTS: usize = 400;

/// `n` log-spaced points from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Default sweep range: `(D_min·1.01, 0.999σ²)`, or from `0.01σ²` when
/// the number of agents is unbounded and `D_min` is zero.
pub fn default_range(sigma2: f64, sigma_w2: f64, agents: Agents) -> (f64, f64) {
    let lo = match agents {
        Agents::Finite(m) => d_min_gaussian(sigma2, sigma_w2, m) * 1.01,
        Agents::Infinite => 0.01 * sigma2,
    };
    (lo, 0.999 * sigma2)
}

/// Converts one evaluation to a table cell. Structural failures other than
/// infinite Fisher information are errors.
pub fn cell(result: Result<BoundResult, BoundsError>, units: Units) -> Result<Cell, CliError> {
    match result {
        Ok(r) => Ok(match (r.value, r.region.marker()) {
            (Some(v), None) => Cell::Value(units.scale(v)),
            (_, Some(m)) => Cell::Marker(m),
            (None, None) => Cell::Marker("degenerate:no value".into()),
        }),
        Err(BoundsError::InfiniteFisher) => Ok(Cell::Marker("inf_fisher".into())),
        Err(e) => Err(e.into()),
    }
}

/// Evaluates `formulas` on every grid point. Rows are computed in parallel
/// and kept in grid order.
pub fn sweep_rows(
    ev: &BoundEvaluator,
    formulas: &[FormulaId],
    grid: &[f64],
    units: Units,
) -> Result<Vec<Vec<Cell>>, CliError> {
    grid.par_iter()
        .map(|&d| {
            let mut row = Vec::with_capacity(formulas.len() + 1);
            row.push(Cell::Value(d));
            for &id in formulas {
                row.push(cell(ev.evaluate(id, d), units)?);
            }
            Ok(row)
        })
        .collect()
}

/// A table of every formula that applies to the evaluator's agent count.
pub fn sweep_table(
    ev: &BoundEvaluator,
    source_name: &str,
    grid: &[f64],
    units: Units,
    seed: u64,
) -> Result<SweepTable, CliError> {
    let formulas = ev.formulas();
    let mut columns = vec!["D"];
    columns.extend(formulas.iter().map(|f| f.as_str()));
    let mut table = SweepTable::new(&columns);
    table = with_meta(table, source_name, ev, units, seed)
        .meta("grid", format!("{} log-spaced points on [{}, {}]", grid.len(), grid[0], grid[grid.len() - 1]));
    table.rows = sweep_rows(ev, &formulas, grid, units)?;
    Ok(table)
}

pub fn with_meta(table: SweepTable, source_name: &str, ev: &BoundEvaluator, units: Units, seed: u64) -> SweepTable {
    table
        .meta("source", source_name)
        .meta("sigma_x2", ev.info().sigma2)
        .meta("sigma_w2", ev.sigma_w2())
        .meta("M", ev.agents())
        .meta("units", units)
        .meta("version", VERSION)
        .meta("seed", seed)
}
