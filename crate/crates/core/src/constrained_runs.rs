//! Constrained Runs: find the non-conserved content of a state so that its
//! evolution is smooth of order `m`, i.e. the `(m+1)`-th time difference of
//! the populations vanishes at `t = 0`.
//!
//! One sweep runs `m + 1` BGK steps, extrapolates the snapshots back to the
//! initial time and resets the conserved moments. The fixed point of that
//! sweep is solved either with Newton ([`newton_full_state`]) or, for low
//! orders, by plain repetition ([`explicit_cr`]).

use nalgebra::{DVector, Matrix3};

use crate::error::{Error, Result};
use crate::lattice::{distributions_from_moments, moments_from_distributions, DistributionField, MacroFields};
use crate::lbm::{EquilibriumKind, EquilibriumModel, Trajectory};
use crate::newton::{self, NewtonOptions, NewtonReport};

/// Largest supported smoothness order.
pub const MAX_SMOOTHNESS_ORDER: usize = 6;

/// Unknown count above which the full-state Newton solve is refused.
pub const FULL_STATE_LIMIT: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SmoothnessOrder(usize);

impl SmoothnessOrder {
    pub fn new(m: usize) -> Result<Self> {
        if m > MAX_SMOOTHNESS_ORDER {
            return Err(Error::Invalid(format!("smoothness order {m} exceeds {MAX_SMOOTHNESS_ORDER}")));
        }
        Ok(Self(m))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Number of BGK steps one sweep needs, `m + 1`.
    pub fn steps(self) -> usize {
        self.0 + 1
    }
}

/// Weights `w_j = (-1)^(j+1) C(m+1, j)` for snapshots `j = 1..=m+1`.
pub fn extrapolation_weights(m: SmoothnessOrder) -> Vec<f64> {
    let top = m.steps();
    let mut binom = 1.0;
    (1..=top)
        .map(|j| {
            binom = binom * (top + 1 - j) as f64 / j as f64;
            if j % 2 == 1 {
                binom
            } else {
                -binom
            }
        })
        .collect()
}

/// Value at step 0 that makes the `(m+1)`-th forward difference over
/// `f^prev, f^1, ..., f^(m+1)` vanish. Snapshot 0 of `traj` is not used.
pub fn backward_extrapolation(traj: &Trajectory, m: SmoothnessOrder) -> Result<DistributionField> {
    if traj.len() < m.steps() + 1 {
        return Err(Error::Structure(format!(
            "order {} extrapolation needs snapshots 1..={}, trajectory has {}",
            m.get(),
            m.steps(),
            traj.len()
        )));
    }
    let weights = extrapolation_weights(m);
    let first = traj.get(1).unwrap();
    let mut out = DistributionField::zeros(*first.spec());
    for (w, snap) in weights.iter().zip(&traj.snapshots()[1..]) {
        for (o, v) in out.as_mut_slice().iter_mut().zip(snap.as_slice()) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn extrapolate_series(series: &[Vec<f64>], m: SmoothnessOrder) -> Vec<f64> {
    let weights = extrapolation_weights(m);
    let mut out = vec![0.0; series[1].len()];
    for (w, s) in weights.iter().zip(&series[1..]) {
        for (o, v) in out.iter_mut().zip(s) {
            *o += w * v;
        }
    }
    out
}

/// Projector onto the conserved-moment content of a population vector.
///
/// For D1Q3 this is `M^-1 M^0`, where `M^0` keeps the conserved rows of the
/// moment matrix. For D2Q5 the conserved increments are carried by the
/// (linear) equilibrium increment, which reproduces them exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedProjector {
    model: EquilibriumModel,
}

impl ConservedProjector {
    pub fn new(model: EquilibriumModel) -> Self {
        Self { model }
    }

    /// Population increment whose conserved moments are `(d_rho, d_mom)`.
    fn increment(&self, d_rho: f64, d_mom: &[f64], out: &mut [f64; 5]) {
        let spec = self.model.spec();
        let half_inv_c = 0.5 / spec.c();
        match self.model.kind() {
            EquilibriumKind::DensityOnly1D => *out = [d_rho, 0.0, 0.0, 0.0, 0.0],
            EquilibriumKind::DensityMomentum1D => {
                *out = [d_rho, d_mom[0] * half_inv_c, -d_mom[0] * half_inv_c, 0.0, 0.0];
            }
            EquilibriumKind::DensityMomentum2D => {
                let w = d_rho / 5.0;
                let (ax, ay) = (d_mom[0] * half_inv_c, d_mom[1] * half_inv_c);
                *out = [w, w + ax, w + ay, w - ax, w - ay];
            }
        }
    }

    /// Explicit 3x3 projector for the D1Q3 models, in `(f_0, f_+, f_-)` order.
    pub fn matrix(&self) -> Option<Matrix3<f64>> {
        let spec = self.model.spec();
        let (m, inv) = (spec.moment_matrix().ok()?, spec.inverse_moment_matrix().ok()?);
        let keep = match self.model.kind() {
            EquilibriumKind::DensityOnly1D => Matrix3::from_diagonal(&[1.0, 0.0, 0.0].into()),
            EquilibriumKind::DensityMomentum1D => Matrix3::from_diagonal(&[1.0, 1.0, 0.0].into()),
            EquilibriumKind::DensityMomentum2D => return None,
        };
        Some(inv * keep * m)
    }

    /// `P delta`: the part of `delta` that carries its conserved moments.
    pub fn apply(&self, delta: &DistributionField) -> Result<DistributionField> {
        let moments = self.model.conserved_moments(delta);
        self.reset_to(&DistributionField::zeros(*delta.spec()), &moments)
    }

    /// Replace the conserved moments of `f` by `targets`, keeping the rest.
    pub fn reset_to(&self, f: &DistributionField, targets: &MacroFields) -> Result<DistributionField> {
        let spec = *self.model.spec();
        if *f.spec() != spec || *targets.spec() != spec {
            return Err(Error::Structure("projector applied on a different lattice".into()));
        }
        let d = self.model.momentum_components();
        if targets.momentum.len() < d {
            return Err(Error::Structure("reset targets lack momentum fields".into()));
        }
        let current = self.model.conserved_moments(f);
        let q = spec.q();
        let mut out = f.clone();
        let mut inc = [0.0; 5];
        let mut d_mom = [0.0; 2];
        for s in 0..spec.sites() {
            let d_rho = targets.rho[s] - current.rho[s];
            for k in 0..d {
                d_mom[k] = targets.momentum[k][s] - current.momentum[k][s];
            }
            self.increment(d_rho, &d_mom[..d], &mut inc);
            for (i, v) in inc.iter().enumerate().take(q) {
                out.set(s, i, f.get(s, i) + v);
            }
        }
        Ok(out)
    }
}

/// `f^next = f^prev + P (f^0 - f^prev)`.
pub fn cr_reset(f_prev: &DistributionField, f0: &DistributionField, proj: &ConservedProjector) -> Result<DistributionField> {
    f_prev.check_same_shape(f0)?;
    proj.reset_to(f_prev, &proj.model.conserved_moments(f0))
}

/// One CR sweep from `f0`, resetting the conserved moments to `targets`.
pub fn cr_map_to(
    model: &EquilibriumModel,
    f0: &DistributionField,
    targets: &MacroFields,
    m: SmoothnessOrder,
) -> Result<DistributionField> {
    let traj = model.run_steps(f0, m.steps())?;
    let prev = backward_extrapolation(&traj, m)?;
    ConservedProjector::new(*model).reset_to(&prev, targets)
}

/// One CR sweep; the output keeps `f0`'s conserved moments.
pub fn cr_map(model: &EquilibriumModel, f0: &DistributionField, m: SmoothnessOrder) -> Result<DistributionField> {
    cr_map_to(model, f0, &model.conserved_moments(f0), m)
}

/// Result of a full-state CR solve.
#[derive(Clone, Debug)]
pub struct FullStateSolution {
    pub field: DistributionField,
    pub report: NewtonReport,
}

impl FullStateSolution {
    /// Side length of the square Jacobian, `q * sites`.
    pub fn jacobian_size(&self) -> (usize, usize) {
        (self.report.unknowns, self.report.unknowns)
    }
}

/// Solve `f = cr_map(f)` over every population of every site, with the
/// conserved moments pinned to `targets`. Starts from the equilibrium lift.
pub fn newton_full_state(
    model: &EquilibriumModel,
    targets: &MacroFields,
    m: SmoothnessOrder,
    opts: &NewtonOptions,
) -> Result<FullStateSolution> {
    let spec = *model.spec();
    let unknowns = spec.q() * spec.sites();
    if unknowns > FULL_STATE_LIMIT {
        return Err(Error::TooLarge { unknowns, limit: FULL_STATE_LIMIT });
    }
    let start = model.equilibrium(targets)?;
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let f = DistributionField::from_vec(spec, x.as_slice().to_vec())?;
        let next = cr_map_to(model, &f, targets, m)?;
        Ok(DVector::from_vec(next.into_vec()) - x)
    };
    let (x, report) = newton::solve(residual, DVector::from_vec(start.into_vec()), opts)?;
    Ok(FullStateSolution { field: DistributionField::from_vec(spec, x.as_slice().to_vec())?, report })
}

/// Plain repetition of the CR sweep, for `m <= 1` only.
///
/// Fails when the update norm grows over a window of 10 sweeps.
pub fn explicit_cr(
    model: &EquilibriumModel,
    targets: &MacroFields,
    m: SmoothnessOrder,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<(DistributionField, usize)> {
    if m.get() > 1 {
        return Err(Error::Unsupported(format!(
            "explicit CR iteration is only offered for m <= 1 (got {}); use Newton",
            m.get()
        )));
    }
    let mut f = model.equilibrium(targets)?;
    let mut history: Vec<f64> = Vec::new();
    for sweep in 1..=max_sweeps {
        let next = cr_map_to(model, &f, targets, m)?;
        let change = next
            .as_slice()
            .iter()
            .zip(f.as_slice())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        f = next;
        if change <= tolerance {
            return Ok((f, sweep));
        }
        history.push(change);
        if history.len() > 10 && change > history[history.len() - 11] {
            return Err(Error::Convergence { iterations: sweep, residual: change });
        }
    }
    Err(Error::Convergence { iterations: max_sweeps, residual: *history.last().unwrap_or(&f64::NAN) })
}

fn require_density_only(model: &EquilibriumModel) -> Result<()> {
    if model.kind() != EquilibriumKind::DensityOnly1D {
        return Err(Error::Unsupported("moment-space CR is defined for the density-only D1Q3 model".into()));
    }
    Ok(())
}

/// One moment-space CR sweep: given `rho0` and a guess for `(rho u, xi)`,
/// run `m + 1` steps and extrapolate `rho u` and `xi` back to step 0.
pub fn cr_moment_sweep(
    model: &EquilibriumModel,
    rho0: &[f64],
    momentum: &[f64],
    energy: &[f64],
    m: SmoothnessOrder,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_density_only(model)?;
    let spec = *model.spec();
    let start = MacroFields::new(spec, rho0.to_vec(), vec![momentum.to_vec()], Some(energy.to_vec()))?;
    let traj = model.run_steps(&distributions_from_moments(&start)?, m.steps())?;
    let (mut mom, mut xi) = (Vec::with_capacity(traj.len()), Vec::with_capacity(traj.len()));
    for snap in traj.snapshots() {
        let mut mm = moments_from_distributions(snap);
        mom.push(std::mem::take(&mut mm.momentum[0]));
        xi.push(mm.energy.take().unwrap());
    }
    Ok((extrapolate_series(&mom, m), extrapolate_series(&xi, m)))
}

/// Fixed point of the moment-space CR sweep for given `rho0`, by Newton.
///
/// Unknowns are `rho u / c` and `xi / c^2`, so the residual is measured in
/// lattice units.
pub fn cr_moment_fixed_point(
    model: &EquilibriumModel,
    rho0: &[f64],
    m: SmoothnessOrder,
    opts: &NewtonOptions,
) -> Result<(MacroFields, NewtonReport)> {
    require_density_only(model)?;
    let spec = *model.spec();
    let n = spec.sites();
    if rho0.len() != n {
        return Err(Error::Structure(format!("density has {} sites, lattice has {n}", rho0.len())));
    }
    let c = spec.c();
    let c2 = c * c;
    let mut x0 = DVector::zeros(2 * n);
    for s in 0..n {
        x0[n + s] = rho0[s] / 3.0;
    }
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let mom: Vec<f64> = x.rows(0, n).iter().map(|v| v * c).collect();
        let xi: Vec<f64> = x.rows(n, n).iter().map(|v| v * c2).collect();
        let (mom_next, xi_next) = cr_moment_sweep(model, rho0, &mom, &xi, m)?;
        Ok(DVector::from_iterator(
            2 * n,
            mom_next.iter().map(|v| v / c).chain(xi_next.iter().map(|v| v / c2)),
        ) - x)
    };
    let (x, report) = newton::solve(residual, x0, opts)?;
    let mom = x.rows(0, n).iter().map(|v| v * c).collect();
    let xi = x.rows(n, n).iter().map(|v| v * c2).collect();
    Ok((MacroFields::new(spec, rho0.to_vec(), vec![mom], Some(xi))?, report))
}
