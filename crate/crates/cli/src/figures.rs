//! Tables behind the four comparison figures, at σ_X² = σ_W² = 1.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use rateloss_core::asymptotics::dstar_solve;
use rateloss_core::bounds::{Agents, BoundEvaluator, FormulaId};
use rateloss_core::smoothing::QuadConfig;
use rateloss_core::sources::{make_source, SourceKind};

use crate::sweep::{default_range, log_grid, sweep_rows, with_meta, DEFAULT_POINTS};
use crate::table::{Cell, SweepTable};
use crate::{CliError, Units, VERSION};

pub const FIG2_SNRS: [f64; 3] = [0.1, 1.0, 10.0];
pub const FIG5_AGENTS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    All,
}

impl Figure {
    pub fn expand(self) -> Vec<Figure> {
        match self {
            Figure::All => vec![Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5],
            f => vec![f],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::All => "all",
        }
    }
}

/// Column label for one snr in fig2.
pub fn snr_label(snr: f64) -> String {
    format!("snr{snr}")
}

/// D* against N(X) on 0.01, 0.02, ..., 1 for each snr. Each snr has a
/// D* column and a flag telling whether the curves actually cross inside
/// (0, N(X)); otherwise D* is the region end N(X).
pub fn fig2(seed: u64) -> Result<SweepTable, CliError> {
    let mut columns = vec!["N_X".to_string()];
    for snr in FIG2_SNRS {
        columns.push(format!("dstar_{}", snr_label(snr)));
        columns.push(format!("crossover_{}", snr_label(snr)));
    }
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = SweepTable::new(&refs)
        .meta("figure", "fig2")
        .meta("sigma_x2", 1)
        .meta("snr", "0.1 1 10 (sigma_w2 = 1/snr)")
        .meta("M", "inf")
        .meta("units", "distortion")
        .meta("version", VERSION)
        .meta("seed", seed);
    for i in 1..=100 {
        let n_x = i as f64 / 100.0;
        let mut row = vec![Cell::Value(n_x)];
        for snr in FIG2_SNRS {
            let r = dstar_solve(n_x, snr)?;
            row.push(Cell::Value(r.d_star));
            row.push(Cell::Marker(if r.crossover { "crossover" } else { "boundary" }.into()));
        }
        table.rows.push(row);
    }
    Ok(table)
}

fn source_table(
    figure: Figure,
    kind: SourceKind,
    config: QuadConfig,
    units: Units,
    seed: u64,
) -> Result<SweepTable, CliError> {
    let source = make_source(kind, 1.0)?;
    let (agents, columns): (Agents, &[(&str, FormulaId)]) = match figure {
        Figure::Fig3 => (
            Agents::Infinite,
            &[
                ("prevBound", FormulaId::UbPrevInf),
                ("newBound", FormulaId::UbNew),
                ("L_N_inf", FormulaId::ExactGaussInf),
            ],
        ),
        Figure::Fig4 => (
            Agents::Infinite,
            &[
                ("prevBound", FormulaId::UbPrevInf),
                ("newBound", FormulaId::UbNew),
                ("L_N_inf", FormulaId::ExactGaussInf),
                ("lb_infM", FormulaId::LbInf),
            ],
        ),
        _ => (
            Agents::Finite(FIG5_AGENTS),
            &[
                ("prevupperbound", FormulaId::UbPrev),
                ("tightub", FormulaId::UbTight),
                ("exactGauss", FormulaId::ExactGauss),
                ("lowerbnd1", FormulaId::Lb),
            ],
        ),
    };
    let ev = BoundEvaluator::new(&source, 1.0, agents, config)?;
    let (lo, hi) = default_range(1.0, 1.0, agents);
    let grid = log_grid(lo, hi, DEFAULT_POINTS);
    let mut names = vec!["D"];
    names.extend(columns.iter().map(|c| c.0));
    let ids: Vec<FormulaId> = columns.iter().map(|c| c.1).collect();
    let mut table = with_meta(
        SweepTable::new(&names).meta("figure", figure.as_str()),
        kind.as_str(),
        &ev,
        units,
        seed,
    )
    .meta("grid", format!("{DEFAULT_POINTS} log-spaced points on [{lo}, {hi}]"));
    table.rows = sweep_rows(&ev, &ids, &grid, units)?;
    Ok(table)
}

/// All tables of one figure as `(file name, table)` pairs.
pub fn build(figure: Figure, config: QuadConfig, units: Units, seed: u64) -> Result<Vec<(String, SweepTable)>, CliError> {
    let mut out = Vec::new();
    for f in figure.expand() {
        if f == Figure::Fig2 {
            out.push(("fig2.csv".to_string(), fig2(seed)?));
            continue;
        }
        for kind in SourceKind::BUILT_IN {
            let table = source_table(f, kind, config, units, seed)?;
            out.push((format!("{}_{}.csv", f.as_str(), kind.as_str()), table));
        }
    }
    Ok(out)
}

/// Builds the figure and writes one CSV per table into `dir`.
pub fn write(figure: Figure, dir: &Path, config: QuadConfig, units: Units, seed: u64) -> Result<Vec<String>, CliError> {
    let tables = build(figure, config, units, seed).map_err(CliError::into_figure)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Figure(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, table) in tables {
        let path = dir.join(&name);
        fs::write(&path, table.to_csv_string())
            .map_err(|e| CliError::Figure(format!("{}: {e}", path.display())))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}
