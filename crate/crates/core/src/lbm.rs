//! Equilibrium models and the BGK stream-collide update.

use crate::error::{Error, Result};
use crate::lattice::{stream, DistributionField, LatticeSpec, MacroFields, VelocitySet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EquilibriumKind {
    /// `f_i^eq = rho / 3`; conserves density only.
    DensityOnly1D,
    /// `f_{+-}^eq = (1/3 +- u/(2c)) rho`, `f_0^eq = rho / 3`.
    DensityMomentum1D,
    /// `f_0^eq = rho / 5`, `f_{+-x}^eq = (1/5 +- u_x/(2c)) rho`, same for `y`.
    DensityMomentum2D,
}

/// An equilibrium distribution bound to a lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumModel {
    kind: EquilibriumKind,
    spec: LatticeSpec,
}

impl EquilibriumModel {
    pub fn new(kind: EquilibriumKind, spec: LatticeSpec) -> Result<Self> {
        let expected = match kind {
            EquilibriumKind::DensityOnly1D | EquilibriumKind::DensityMomentum1D => VelocitySet::D1Q3,
            EquilibriumKind::DensityMomentum2D => VelocitySet::D2Q5,
        };
        if spec.velocities() != expected {
            return Err(Error::Structure(format!("{kind:?} needs a {expected:?} lattice")));
        }
        Ok(Self { kind, spec })
    }

    pub fn kind(&self) -> EquilibriumKind {
        self.kind
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn conserves_momentum(&self) -> bool {
        self.kind != EquilibriumKind::DensityOnly1D
    }

    /// Number of momentum components this model conserves.
    pub fn momentum_components(&self) -> usize {
        if self.conserves_momentum() {
            self.spec.dimension()
        } else {
            0
        }
    }

    /// Rest weight: `1/3` in D1Q3, `1/5` in D2Q5.
    fn weight(&self) -> f64 {
        1.0 / self.spec.q() as f64
    }

    fn check_lattice(&self, spec: &LatticeSpec) -> Result<()> {
        if *spec != self.spec {
            return Err(Error::Structure("field lattice differs from the model lattice".into()));
        }
        Ok(())
    }

    /// Equilibrium populations at one site, written to `out[..q]`.
    ///
    /// `momentum` holds `rho u_k` and is ignored by the density-only model.
    #[inline]
    pub fn site_equilibrium(&self, rho: f64, momentum: &[f64], out: &mut [f64]) -> std::result::Result<(), ()> {
        let w = self.weight();
        if !self.conserves_momentum() {
            out[..3].fill(w * rho);
            return Ok(());
        }
        if rho == 0.0 {
            return Err(());
        }
        let half_inv_c = 0.5 / self.spec.c();
        out[0] = w * rho;
        for (i, dir) in self.spec.velocities().directions().iter().enumerate().skip(1) {
            let cu: f64 = dir.iter().zip(momentum).map(|(&d, &m)| d as f64 * (m / rho)).sum();
            out[i] = (w + cu * half_inv_c) * rho;
        }
        Ok(())
    }

    /// Equilibrium lift of macroscopic fields.
    pub fn equilibrium(&self, m: &MacroFields) -> Result<DistributionField> {
        self.check_lattice(m.spec())?;
        let d = self.momentum_components();
        if m.momentum.len() < d {
            return Err(Error::Structure(format!("{:?} needs momentum fields", self.kind)));
        }
        let q = self.spec.q();
        let mut f = DistributionField::zeros(self.spec);
        let mut mom = [0.0; 2];
        let mut feq = [0.0; 5];
        for s in 0..self.spec.sites() {
            for (k, slot) in mom.iter_mut().enumerate().take(d) {
                *slot = m.momentum[k][s];
            }
            self.site_equilibrium(m.rho[s], &mom[..d], &mut feq)
                .map_err(|_| Error::ZeroDensity { site: s })?;
            for (i, v) in feq.iter().enumerate().take(q) {
                f.set(s, i, *v);
            }
        }
        Ok(f)
    }

    /// The moments this model conserves (density, plus momentum if conserved).
    pub fn conserved_moments(&self, f: &DistributionField) -> MacroFields {
        let mut m = crate::lattice::moments_from_distributions(f);
        m.energy = None;
        if !self.conserves_momentum() {
            m.momentum.clear();
        }
        m
    }

    /// BGK relaxation toward the equilibrium of `f`'s own moments.
    pub fn collide(&self, f: &DistributionField) -> Result<DistributionField> {
        self.check_lattice(f.spec())?;
        let omega = self.spec.omega();
        let c = self.spec.c();
        let q = self.spec.q();
        let d = self.momentum_components();
        let dirs = self.spec.velocities().directions();
        let mut out = f.clone();
        let mut pops = [0.0; 5];
        let mut feq = [0.0; 5];
        for s in 0..self.spec.sites() {
            let mut rho = 0.0;
            let mut mom = [0.0; 2];
            for i in 0..q {
                pops[i] = f.get(s, i);
                rho += pops[i];
                for k in 0..d {
                    mom[k] += c * dirs[i][k] as f64 * pops[i];
                }
            }
            self.site_equilibrium(rho, &mom[..d], &mut feq)
                .map_err(|_| Error::ZeroDensity { site: s })?;
            for i in 0..q {
                out.set(s, i, (1.0 - omega) * pops[i] + omega * feq[i]);
            }
        }
        Ok(out)
    }

    /// One lattice Boltzmann step: collide, then stream.
    pub fn bgk_step(&self, f: &DistributionField) -> Result<DistributionField> {
        Ok(stream(&self.collide(f)?))
    }

    /// `steps` BGK steps, keeping every snapshot (including `f` itself).
    pub fn run_steps(&self, f: &DistributionField, steps: usize) -> Result<Trajectory> {
        let mut snapshots = Vec::with_capacity(steps + 1);
        snapshots.push(f.clone());
        for _ in 0..steps {
            let next = self.bgk_step(snapshots.last().unwrap())?;
            snapshots.push(next);
        }
        Ok(Trajectory { snapshots })
    }

    /// Final state after `steps` BGK steps, without keeping intermediates.
    pub fn advance(&self, f: &DistributionField, steps: usize) -> Result<DistributionField> {
        let mut state = f.clone();
        for _ in 0..steps {
            state = self.bgk_step(&state)?;
        }
        Ok(state)
    }
}

/// Successive snapshots `f^0, f^1, ..., f^K` of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    snapshots: Vec<DistributionField>,
}

impl Trajectory {
    pub fn new(snapshots: Vec<DistributionField>) -> Result<Self> {
        let Some(first) = snapshots.first() else {
            return Err(Error::Structure("a trajectory needs at least one snapshot".into()));
        };
        for s in &snapshots[1..] {
            first.check_same_shape(s)?;
        }
        Ok(Self { snapshots })
    }

    /// Number of snapshots, `K + 1`.
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&DistributionField> {
        self.snapshots.get(k)
    }

    pub fn last(&self) -> &DistributionField {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn snapshots(&self) -> &[DistributionField] {
        &self.snapshots
    }
}
