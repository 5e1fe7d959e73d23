//! Coefficients of the numerical Chapman-Enskog expansion as the fixed point
//! of `h = extract . CR sweep . lift`.

use nalgebra::DVector;

use crate::constrained_runs::{cr_map_to, cr_moment_sweep, SmoothnessOrder};
use crate::error::{Error, Result};
use crate::expansion::{evaluate_terms, lift_with, CoefficientSet, ExpansionBasis, Extractor, SamplingPolicy, TermFields};
use crate::lattice::{distributions_from_moments, moments_from_distributions, DistributionField, MacroFields};
use crate::lbm::{EquilibriumKind, EquilibriumModel};
use crate::newton::{self, NewtonOptions, NewtonReport};

/// Everything `h` holds fixed: model, basis, macroscopic targets, smoothness
/// order and sampling. Derivative fields, equilibrium and the extraction
/// pseudo-inverse are computed once here.
#[derive(Clone, Debug)]
pub struct HContext {
    model: EquilibriumModel,
    basis: ExpansionBasis,
    targets: MacroFields,
    order: SmoothnessOrder,
    terms: TermFields,
    equilibrium: DistributionField,
    extractor: Extractor,
}

impl HContext {
    pub fn new(
        model: EquilibriumModel,
        basis: ExpansionBasis,
        targets: MacroFields,
        order: SmoothnessOrder,
        sampling: &SamplingPolicy,
    ) -> Result<Self> {
        if targets.spec() != model.spec() {
            return Err(Error::Structure("macroscopic targets live on a different lattice".into()));
        }
        if targets.momentum.len() < model.momentum_components() {
            return Err(Error::Structure(format!("{:?} needs momentum targets", model.kind())));
        }
        let terms = evaluate_terms(&basis, &targets)?;
        let extractor = Extractor::new(&terms, model.spec(), sampling)?;
        let equilibrium = model.equilibrium(&targets)?;
        Ok(Self { model, basis, targets, order, terms, equilibrium, extractor })
    }

    pub fn model(&self) -> &EquilibriumModel {
        &self.model
    }

    pub fn basis(&self) -> &ExpansionBasis {
        &self.basis
    }

    pub fn targets(&self) -> &MacroFields {
        &self.targets
    }

    pub fn order(&self) -> SmoothnessOrder {
        self.order
    }

    /// Coefficient unknowns, `q * T`.
    pub fn unknowns(&self) -> usize {
        self.model.spec().q() * self.basis.len()
    }

    pub fn condition_number(&self) -> f64 {
        self.extractor.condition_number()
    }

    pub fn lift(&self, theta: &CoefficientSet) -> Result<DistributionField> {
        lift_with(theta, &self.terms, &self.equilibrium)
    }

    /// Lift, push toward the slow manifold with one CR sweep, re-extract.
    ///
    /// The density-only model sweeps in moment space; the others sweep on
    /// the distributions. Both reset the conserved moments to the targets.
    pub fn h(&self, theta: &CoefficientSet) -> Result<CoefficientSet> {
        let f = self.lift(theta)?;
        let swept = match self.model.kind() {
            EquilibriumKind::DensityOnly1D => {
                let mm = moments_from_distributions(&f);
                let (mom, xi) = cr_moment_sweep(
                    &self.model,
                    &self.targets.rho,
                    &mm.momentum[0],
                    mm.energy.as_ref().expect("D1Q3 has an energy moment"),
                    self.order,
                )?;
                let next = MacroFields::new(*self.model.spec(), self.targets.rho.clone(), vec![mom], Some(xi))?;
                distributions_from_moments(&next)?
            }
            _ => cr_map_to(&self.model, &f, &self.targets, self.order)?,
        };
        self.extractor.extract(&swept, &self.equilibrium)
    }
}

/// Function-style alias for [`HContext::h`].
pub fn h(ctx: &HContext, theta: &CoefficientSet) -> Result<CoefficientSet> {
    ctx.h(theta)
}

/// Newton settings for the coefficient fixed point.
pub fn coefficient_newton_options() -> NewtonOptions {
    NewtonOptions { abs_tolerance: 1e-12, rel_tolerance: 1e-10, ..NewtonOptions::default() }
}

/// Solve `h(theta) = theta` by Newton from `theta = 0` (the equilibrium lift).
pub fn solve_coefficients(ctx: &HContext, opts: &NewtonOptions) -> Result<(CoefficientSet, NewtonReport)> {
    let (q, t) = (ctx.model.spec().q(), ctx.basis.len());
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let theta = CoefficientSet::from_vec(q, t, x.as_slice().to_vec())?;
        Ok(ctx.h(&theta)?.to_dvector() - x)
    };
    let (x, mut report) = newton::solve(residual, DVector::zeros(q * t), opts)?;
    report.cond = Some(ctx.condition_number());
    let theta = CoefficientSet::from_vec(q, t, x.as_slice().to_vec())?.with_lattice(*ctx.model.spec());
    Ok((theta, report))
}

/// Apply trained coefficients to new macroscopic fields without solving.
///
/// Coefficients depend only on `dx`, `dt` and `omega`, so the new lattice
/// must share them.
pub fn lift_new_state(
    theta: &CoefficientSet,
    basis: &ExpansionBasis,
    fields: &MacroFields,
    model: &EquilibriumModel,
) -> Result<DistributionField> {
    if fields.spec() != model.spec() {
        return Err(Error::Structure("fields and model live on different lattices".into()));
    }
    if let Some(trained) = theta.trained_on() {
        if !trained.same_discretization(fields.spec()) {
            return Err(Error::Contract(format!(
                "coefficients trained with dx={}, dt={}, omega={} applied to dx={}, dt={}, omega={}",
                trained.dx(),
                trained.dt(),
                trained.omega(),
                fields.spec().dx(),
                fields.spec().dt(),
                fields.spec().omega()
            )));
        }
    }
    let terms = evaluate_terms(basis, fields)?;
    lift_with(theta, &terms, &model.equilibrium(fields)?)
}
