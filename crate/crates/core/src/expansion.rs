//! Truncated spatial Chapman-Enskog series
//!
//! ```text
//! f_i = f_i^eq + sum_t theta[i][t] * D_t
//! ```
//!
//! where each `D_t` is a finite-difference derivative of a conserved moment
//! (`rho` or a momentum component `rho u_k`). This module evaluates the
//! series for given coefficients and extracts coefficients from a
//! distribution field by least squares.
//!
//! Term order is moment-major, then axis, then derivative order. Mixed
//! `x`/`y` terms, when requested, follow the pure terms of their moment.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::calculus::{derivative, Axis, StencilSpec};
use crate::error::{Error, Result};
use crate::lattice::{fmt17, DistributionField, LatticeSpec, MacroFields};
use crate::lbm::EquilibriumModel;

/// Condition numbers above this make the extraction system singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Moment {
    Density,
    MomentumX,
    MomentumY,
}

impl Moment {
    fn name(self, dimension: usize) -> &'static str {
        match (self, dimension) {
            (Moment::Density, _) => "rho",
            (Moment::MomentumX, 1) => "rhou",
            (Moment::MomentumX, _) => "rhoux",
            (Moment::MomentumY, _) => "rhouy",
        }
    }
}

/// One derivative `d^a/dx^a d^b/dy^b` of a conserved moment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub moment: Moment,
    pub x_order: usize,
    pub y_order: usize,
}

impl Term {
    pub fn pure(moment: Moment, axis: Axis, order: usize) -> Self {
        match axis {
            Axis::X => Term { moment, x_order: order, y_order: 0 },
            Axis::Y => Term { moment, x_order: 0, y_order: order },
        }
    }

    pub fn order(&self) -> usize {
        self.x_order + self.y_order
    }

    /// Names such as `dx1_rho`, `dy3_rhouy` or `dx1dy1_rhoux`.
    pub fn name(&self, dimension: usize) -> String {
        let mut s = String::new();
        if self.x_order > 0 {
            s.push_str(&format!("dx{}", self.x_order));
        }
        if self.y_order > 0 {
            s.push_str(&format!("dy{}", self.y_order));
        }
        format!("{s}_{}", self.moment.name(dimension))
    }
}

/// Ordered derivative terms of the series plus the stencil accuracy used to
/// evaluate them.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionBasis {
    terms: Vec<Term>,
    dimension: usize,
    accuracy: usize,
}

impl ExpansionBasis {
    /// All pure-axis terms of order `1..=max_order` for every moment the model
    /// conserves, optionally with mixed `x`/`y` derivatives (2D only).
    pub fn for_model(model: &EquilibriumModel, max_order: usize, include_cross_terms: bool) -> Result<Self> {
        if !(1..=4).contains(&max_order) {
            return Err(Error::Invalid(format!("expansion order {max_order} not in 1..=4")));
        }
        let dimension = model.spec().dimension();
        let moments: &[Moment] = match model.momentum_components() {
            0 => &[Moment::Density],
            1 => &[Moment::Density, Moment::MomentumX],
            _ => &[Moment::Density, Moment::MomentumX, Moment::MomentumY],
        };
        let axes: &[Axis] = if dimension == 1 { &[Axis::X] } else { &[Axis::X, Axis::Y] };
        let mut terms = Vec::new();
        for &moment in moments {
            for &axis in axes {
                for k in 1..=max_order {
                    terms.push(Term::pure(moment, axis, k));
                }
            }
            if include_cross_terms && dimension == 2 {
                for k in 2..=max_order {
                    for a in (1..k).rev() {
                        terms.push(Term { moment, x_order: a, y_order: k - a });
                    }
                }
            }
        }
        Self::new(terms, dimension, 4)
    }

    pub fn new(terms: Vec<Term>, dimension: usize, accuracy: usize) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Structure("expansion basis has no terms".into()));
        }
        for (k, t) in terms.iter().enumerate() {
            if terms[..k].contains(t) {
                return Err(Error::Structure(format!("duplicate term {}", t.name(dimension))));
            }
            if t.order() == 0 || t.x_order > 4 || t.y_order > 4 {
                return Err(Error::Structure(format!("unsupported derivative term {}", t.name(dimension))));
            }
        }
        StencilSpec::new(1, accuracy, Axis::X)?;
        Ok(Self { terms, dimension, accuracy })
    }

    /// The same terms evaluated with a different stencil accuracy (2 or 4).
    pub fn with_accuracy(mut self, accuracy: usize) -> Result<Self> {
        StencilSpec::new(1, accuracy, Axis::X)?;
        self.accuracy = accuracy;
        Ok(self)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn accuracy(&self) -> usize {
        self.accuracy
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().map(Term::order).max().unwrap_or(0)
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name(self.dimension)).collect()
    }

    /// `feq+dx1_rho+dx1_rhou+...`, used as the row label in reports.
    pub fn describe(&self) -> String {
        std::iter::once("feq".to_string()).chain(self.term_names()).collect::<Vec<_>>().join("+")
    }
}

/// Coefficient matrix `theta[i][t]`: velocity `i`, term `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    q: usize,
    terms: usize,
    values: Vec<f64>,
    /// Lattice the coefficients were determined on.
    trained_on: Option<LatticeSpec>,
}

impl CoefficientSet {
    pub fn zeros(q: usize, terms: usize) -> Self {
        Self { q, terms, values: vec![0.0; q * terms], trained_on: None }
    }

    /// Velocity-major values: `values[i * terms + t]`.
    pub fn from_vec(q: usize, terms: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != q * terms {
            return Err(Error::Structure(format!("{} coefficients for {q} x {terms}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite coefficient".into()));
        }
        Ok(Self { q, terms, values, trained_on: None })
    }

    pub fn with_lattice(mut self, spec: LatticeSpec) -> Self {
        self.trained_on = Some(spec);
        self
    }

    pub fn trained_on(&self) -> Option<&LatticeSpec> {
        self.trained_on.as_ref()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn term_count(&self) -> usize {
        self.terms
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.terms + t]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.values[i * self.terms..(i + 1) * self.terms]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum_i theta[i][t]` and, per momentum axis, `sum_i v_i theta[i][t]`.
    /// All vanish when the series leaves the conserved moments untouched.
    pub fn moment_sums(&self, spec: &LatticeSpec) -> Vec<Vec<f64>> {
        let c = spec.c();
        let dirs = spec.velocities().directions();
        let mut sums = vec![vec![0.0; self.terms]; 1 + spec.dimension()];
        for (i, dir) in dirs.iter().enumerate().take(self.q) {
            for t in 0..self.terms {
                let v = self.get(i, t);
                sums[0][t] += v;
                for k in 0..spec.dimension() {
                    sums[k + 1][t] += c * dir[k] as f64 * v;
                }
            }
        }
        sums
    }

    /// CSV with header `velocity,term,coefficient`.
    pub fn write_csv<W: Write>(&self, basis: &ExpansionBasis, mut out: W) -> Result<()> {
        if basis.len() != self.terms {
            return Err(Error::Structure("basis does not match coefficient set".into()));
        }
        writeln!(out, "velocity,term,coefficient")?;
        let names = basis.term_names();
        for i in 0..self.q {
            for (t, name) in names.iter().enumerate() {
                writeln!(out, "{i},{name},{}", fmt17(self.get(i, t)))?;
            }
        }
        Ok(())
    }
}

/// Derivative field `D_t` for every term of a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TermFields {
    fields: Vec<Vec<f64>>,
}

impl TermFields {
    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn get(&self, t: usize) -> &[f64] {
        &self.fields[t]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Evaluate `D_t` for every term with the basis' stencil accuracy.
pub fn evaluate_terms(basis: &ExpansionBasis, m: &MacroFields) -> Result<TermFields> {
    let spec = m.spec();
    let dx = spec.dx();
    let mut fields = Vec::with_capacity(basis.len());
    for term in basis.terms() {
        let name = term.name(spec.dimension());
        let target: &[f64] = match term.moment {
            Moment::Density => &m.rho,
            Moment::MomentumX => m
                .momentum
                .first()
                .ok_or_else(|| Error::Structure(format!("term {name} needs a momentum field")))?,
            Moment::MomentumY => {
                if spec.dimension() < 2 {
                    return Err(Error::Structure(format!("term {name} on a 1D lattice")));
                }
                m.momentum
                    .get(1)
                    .ok_or_else(|| Error::Structure(format!("term {name} needs a y momentum field")))?
            }
        };
        if term.y_order > 0 && spec.dimension() < 2 {
            return Err(Error::Structure(format!("term {name} on a 1D lattice")));
        }
        let mut field = target.to_vec();
        if term.x_order > 0 {
            field = derivative(&field, spec, StencilSpec::new(term.x_order, basis.accuracy(), Axis::X)?, dx)?;
        }
        if term.y_order > 0 {
            field = derivative(&field, spec, StencilSpec::new(term.y_order, basis.accuracy(), Axis::Y)?, dx)?;
        }
        fields.push(field);
    }
    Ok(TermFields { fields })
}

/// `feq + sum_t theta[., t] D_t` from precomputed pieces.
pub fn lift_with(theta: &CoefficientSet, terms: &TermFields, equilibrium: &DistributionField) -> Result<DistributionField> {
    let q = equilibrium.spec().q();
    if theta.q() != q || theta.term_count() != terms.len() {
        return Err(Error::Structure(format!(
            "coefficients are {} x {}, lift needs {q} x {}",
            theta.q(),
            theta.term_count(),
            terms.len()
        )));
    }
    let mut f = equilibrium.clone();
    for i in 0..q {
        let pop = f.population_mut(i);
        for (t, d) in terms.fields().iter().enumerate() {
            let coeff = theta.get(i, t);
            if coeff != 0.0 {
                for (p, v) in pop.iter_mut().zip(d) {
                    *p += coeff * v;
                }
            }
        }
    }
    Ok(f)
}

/// Lifting operator: equilibrium plus the truncated derivative series.
pub fn lift(
    basis: &ExpansionBasis,
    theta: &CoefficientSet,
    m: &MacroFields,
    model: &EquilibriumModel,
) -> Result<DistributionField> {
    let terms = evaluate_terms(basis, m)?;
    let feq = model.equilibrium(m)?;
    lift_with(theta, &terms, &feq)
}

/// Which sites enter the coefficient extraction.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum SamplingPolicy {
    /// Least squares over the whole grid.
    #[default]
    AllSites,
    /// Only the listed sites; with as many sites as terms this is a square solve.
    Subset(Vec<usize>),
}

impl SamplingPolicy {
    fn sites(&self, total: usize) -> Result<Vec<usize>> {
        match self {
            SamplingPolicy::AllSites => Ok((0..total).collect()),
            SamplingPolicy::Subset(list) => {
                if let Some(bad) = list.iter().find(|&&s| s >= total) {
                    return Err(Error::Structure(format!("sample site {bad} outside grid of {total} sites")));
                }
                Ok(list.clone())
            }
        }
    }
}

/// Least-squares extraction of coefficients with a fixed design matrix.
///
/// Every velocity shares the design matrix `A[s][t] = D_t(x_s)` over the
/// sampled sites, so the `q` systems are solved with one pseudo-inverse.
#[derive(Clone, Debug)]
pub struct Extractor {
    sites: Vec<usize>,
    design: DMatrix<f64>,
    /// `T x p` pseudo-inverse of the design matrix.
    pinv: DMatrix<f64>,
    cond: f64,
    q: usize,
}

impl Extractor {
    pub fn new(terms: &TermFields, spec: &LatticeSpec, sampling: &SamplingPolicy) -> Result<Self> {
        let sites = sampling.sites(spec.sites())?;
        let t_count = terms.len();
        let p = sites.len();
        if p < t_count {
            return Err(Error::Structure(format!("{p} sample sites cannot determine {t_count} terms")));
        }
        let design = DMatrix::from_fn(p, t_count, |r, t| terms.get(t)[sites[r]]);
        // Column scaling leaves the least-squares solution unchanged and keeps
        // the condition number about geometry, not units.
        let scales: Vec<f64> = (0..t_count).map(|t| design.column(t).norm()).collect();
        if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Singular { cond: f64::INFINITY });
        }
        let mut scaled = design.clone();
        for (t, s) in scales.iter().enumerate() {
            scaled.column_mut(t).scale_mut(1.0 / s);
        }
        let svd = scaled.svd(true, true);
        let sv = &svd.singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Singular { cond });
        }
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let mut v_sigma = v_t.transpose();
        for (j, s) in sv.iter().enumerate() {
            v_sigma.column_mut(j).scale_mut(1.0 / s);
        }
        let mut pinv = v_sigma * u.transpose();
        for (t, s) in scales.iter().enumerate() {
            pinv.row_mut(t).scale_mut(1.0 / s);
        }
        Ok(Self { sites, design, pinv, cond, q: spec.q() })
    }

    /// Condition number of the column-normalized design matrix.
    pub fn condition_number(&self) -> f64 {
        self.cond
    }

    pub fn sample_sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn design_matrix(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Coefficients minimizing `sum_s sum_i (f_i - f_i^eq - sum_t theta[i][t] D_t)^2`.
    pub fn extract(&self, f: &DistributionField, equilibrium: &DistributionField) -> Result<CoefficientSet> {
        f.check_same_shape(equilibrium)?;
        let t_count = self.pinv.nrows();
        let mut values = Vec::with_capacity(self.q * t_count);
        let mut rhs = DVector::zeros(self.sites.len());
        for i in 0..self.q {
            let (fi, ei) = (f.population(i), equilibrium.population(i));
            for (r, &s) in self.sites.iter().enumerate() {
                rhs[r] = fi[s] - ei[s];
            }
            values.extend((&self.pinv * &rhs).iter());
        }
        Ok(CoefficientSet::from_vec(self.q, t_count, values)?.with_lattice(*f.spec()))
    }

    /// The coupled `(q p) x (q T)` system with rows ordered by site then
    /// velocity and unknowns ordered by term then velocity; entry
    /// `[(s, i), (t, i)] = D_t(x_s)`.
    pub fn block_system(&self) -> DMatrix<f64> {
        let (p, t_count, q) = (self.design.nrows(), self.design.ncols(), self.q);
        let mut a = DMatrix::zeros(q * p, q * t_count);
        for r in 0..p {
            for t in 0..t_count {
                for i in 0..q {
                    a[(r * q + i, t * q + i)] = self.design[(r, t)];
                }
            }
        }
        a
    }
}

/// One-shot extraction with a freshly built design matrix.
pub fn extract_coefficients(
    basis: &ExpansionBasis,
    f: &DistributionField,
    m: &MacroFields,
    model: &EquilibriumModel,
    sampling: &SamplingPolicy,
) -> Result<CoefficientSet> {
    let terms = evaluate_terms(basis, m)?;
    let extractor = Extractor::new(&terms, m.spec(), sampling)?;
    extractor.extract(f, &model.equilibrium(m)?)
}
