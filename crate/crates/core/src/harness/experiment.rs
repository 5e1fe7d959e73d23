//! Restriction-lifting experiments against a long-run reference state.

use std::io::Write;

use rayon::prelude::*;

use super::config::{Cell, ExperimentConfig, Method, NormKind};
use crate::constrained_runs::{newton_full_state, SmoothnessOrder};
use crate::error::{Error, Result};
use crate::expansion::{CoefficientSet, ExpansionBasis};
use crate::lattice::{fmt17, DistributionField, MacroFields};
use crate::lbm::EquilibriumModel;
use crate::newton::{NewtonOptions, NewtonReport};
use crate::solver::{coefficient_newton_options, solve_coefficients, HContext};

/// Reference state `f_c`: `reference_steps` BGK steps from the equilibrium
/// lift of the configured initial data.
pub fn make_reference(cfg: &ExperimentConfig) -> Result<(EquilibriumModel, DistributionField)> {
    let model = cfg.equilibrium_model()?;
    let start = model.equilibrium(&cfg.initial_fields()?)?;
    let fc = model.advance(&start, cfg.reference_steps)?;
    Ok((model, fc))
}

/// Conserved moments of `f`.
pub fn restrict(f: &DistributionField, model: &EquilibriumModel) -> MacroFields {
    model.conserved_moments(f)
}

/// Euclidean norm of `f - g` over every site and velocity.
pub fn norm2(f: &DistributionField, g: &DistributionField) -> Result<f64> {
    f.check_same_shape(g)?;
    Ok(f.as_slice().iter().zip(g.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Euclidean norm of `f_i - g_i` over sites, one entry per velocity.
pub fn norm2_per_velocity(f: &DistributionField, g: &DistributionField) -> Result<Vec<f64>> {
    f.check_same_shape(g)?;
    Ok((0..f.spec().q())
        .map(|i| f.population(i).iter().zip(g.population(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect())
}

/// Error of a lifted state against the reference, in the report's layout:
/// one `all` entry for D1Q3, one entry per velocity for D2Q5.
pub fn lifting_errors(f: &DistributionField, fc: &DistributionField, norm: NormKind) -> Result<Vec<(String, f64)>> {
    let spec = fc.spec();
    let per_velocity = spec.dimension() == 2;
    let scale = |entries: usize| match norm {
        NormKind::Raw => 1.0,
        NormKind::Scaled => (entries as f64).sqrt().recip(),
    };
    if per_velocity {
        let s = scale(spec.sites());
        Ok(norm2_per_velocity(f, fc)?.into_iter().enumerate().map(|(i, e)| (i.to_string(), e * s)).collect())
    } else {
        Ok(vec![("all".to_string(), norm2(f, fc)? * scale(spec.sites() * spec.q()))])
    }
}

/// One report row: a lifting operator evaluated against `f_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub basis: String,
    /// `None` for the equilibrium lift baseline.
    pub m: Option<usize>,
    pub errors: Vec<(String, f64)>,
    pub newton: Option<NewtonReport>,
    /// Set when the cell failed; `errors` is empty then.
    pub failure: Option<String>,
}

impl ReportRow {
    pub fn converged(&self) -> bool {
        self.failure.is_none() && self.newton.is_none_or(|r| r.converged)
    }

    pub fn error(&self, velocity: &str) -> Option<f64> {
        self.errors.iter().find(|(v, _)| v == velocity).map(|(_, e)| *e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(ReportRow::converged)
    }

    pub fn baseline(&self) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.m.is_none())
    }

    /// The row for expansion order `basis_order` (0 for full-state CR) and smoothness `m`.
    pub fn cell(&self, basis_order: usize, m: usize) -> Option<&ReportRow> {
        let tag = basis_tag(basis_order);
        self.rows.iter().find(|r| r.m == Some(m) && r.basis.starts_with(&tag))
    }

    /// CSV with header `experiment,basis,order_m,velocity,error,iters,residual,converged,cond`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "experiment,basis,order_m,velocity,error,iters,residual,converged,cond")?;
        for row in &self.rows {
            let order = row.m.map(|m| m.to_string()).unwrap_or_default();
            let (iters, residual, cond) = match &row.newton {
                Some(r) => (
                    r.iterations.to_string(),
                    fmt17(r.residual),
                    r.cond.map(fmt17).unwrap_or_default(),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            let converged = row.converged();
            if row.errors.is_empty() {
                writeln!(out, "{},{},{order},all,NaN,{iters},{residual},{converged},{cond}", self.experiment, row.basis)?;
            }
            for (velocity, error) in &row.errors {
                writeln!(
                    out,
                    "{},{},{order},{velocity},{},{iters},{residual},{converged},{cond}",
                    self.experiment,
                    row.basis,
                    fmt17(*error)
                )?;
            }
        }
        Ok(())
    }
}

/// Row labels start with `K<order>:`, e.g. `K2:feq+dx1_rho+...`, or `cr` for full-state CR.
fn basis_tag(basis_order: usize) -> String {
    if basis_order == 0 {
        "cr".to_string()
    } else {
        format!("K{basis_order}:")
    }
}

/// Outcome of training coefficients on one macroscopic state.
#[derive(Clone, Debug)]
pub struct TrainedLift {
    pub basis: ExpansionBasis,
    pub coefficients: CoefficientSet,
    pub lifted: DistributionField,
    pub report: NewtonReport,
}

/// Solve for the expansion coefficients on `targets` and lift them.
pub fn train_and_lift(
    cfg: &ExperimentConfig,
    model: &EquilibriumModel,
    targets: &MacroFields,
    basis_order: usize,
    m: usize,
) -> Result<TrainedLift> {
    let basis = ExpansionBasis::for_model(model, basis_order, false)?.with_accuracy(cfg.stencil_order)?;
    let ctx = HContext::new(*model, basis.clone(), targets.clone(), SmoothnessOrder::new(m)?, &cfg.sampling)?;
    let (coefficients, report) = solve_coefficients(&ctx, &coefficient_newton_options())?;
    let lifted = ctx.lift(&coefficients)?;
    Ok(TrainedLift { basis, coefficients, lifted, report })
}

fn cell_label(cfg: &ExperimentConfig, model: &EquilibriumModel, basis_order: usize) -> String {
    match cfg.method {
        Method::Nce => match ExpansionBasis::for_model(model, basis_order, false) {
            Ok(basis) => format!("{}{}", basis_tag(basis_order), basis.describe()),
            Err(_) => format!("{}?", basis_tag(basis_order)),
        },
        Method::FullStateCr => basis_tag(0),
    }
}

fn run_cell(cfg: &ExperimentConfig, model: &EquilibriumModel, targets: &MacroFields, fc: &DistributionField, cell: Cell) -> ReportRow {
    let basis = cell_label(cfg, model, cell.basis_order);
    let outcome = match cfg.method {
        Method::Nce => train_and_lift(cfg, model, targets, cell.basis_order, cell.m)
            .and_then(|t| Ok((lifting_errors(&t.lifted, fc, cfg.norm)?, t.report))),
        Method::FullStateCr => SmoothnessOrder::new(cell.m)
            .and_then(|m| newton_full_state(model, targets, m, &NewtonOptions::default()))
            .and_then(|sol| Ok((lifting_errors(&sol.field, fc, cfg.norm)?, sol.report))),
    };
    match outcome {
        Ok((errors, newton)) => ReportRow { basis, m: Some(cell.m), errors, newton: Some(newton), failure: None },
        Err(e) => {
            let newton = match e {
                Error::Convergence { iterations, residual } => {
                    Some(NewtonReport { iterations, residual, converged: false, cond: None, unknowns: 0 })
                }
                _ => None,
            };
            ReportRow { basis, m: Some(cell.m), errors: Vec::new(), newton, failure: Some(e.to_string()) }
        }
    }
}

/// Run every configured cell against the reference. Cell failures are
/// recorded in their rows; rows keep configuration order.
pub fn run_table(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (model, fc) = make_reference(cfg)?;
    run_table_with_reference(cfg, &model, &fc)
}

pub fn run_table_with_reference(cfg: &ExperimentConfig, model: &EquilibriumModel, fc: &DistributionField) -> Result<ExperimentReport> {
    let targets = restrict(fc, model);
    let feq = model.equilibrium(&targets)?;
    let mut rows = vec![ReportRow {
        basis: "feq".to_string(),
        m: None,
        errors: lifting_errors(&feq, fc, cfg.norm)?,
        newton: None,
        failure: None,
    }];
    let cells: Vec<ReportRow> = cfg.cells.par_iter().map(|&cell| run_cell(cfg, model, &targets, fc, cell)).collect();
    rows.extend(cells);
    Ok(ExperimentReport { experiment: cfg.name.clone(), rows })
}
