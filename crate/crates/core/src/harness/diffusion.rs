//! Diffusion-equivalence diagnostic for the density-only D1Q3 model.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, MacroFields, VelocitySet};
use crate::lbm::{EquilibriumKind, EquilibriumModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionCheck {
    pub length: f64,
    pub n: usize,
    pub dt: f64,
    pub omega: f64,
    pub amplitude: f64,
    pub steps: usize,
}

impl Default for DiffusionCheck {
    fn default() -> Self {
        DiffusionCheck { length: 10.0, n: 200, dt: 0.001, omega: 0.9091, amplitude: 0.01, steps: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionResult {
    /// `(2 - omega) / (3 omega) dx^2 / dt`.
    pub predicted_d: f64,
    /// Decay rate of the sine mode divided by `k^2`.
    pub fitted_d: f64,
    pub relative_error: f64,
}

impl DiffusionResult {
    pub fn within(&self, tolerance: f64) -> bool {
        self.relative_error <= tolerance
    }
}

impl DiffusionCheck {
    pub fn predicted_d(&self) -> f64 {
        let dx = self.length / self.n as f64;
        (2.0 - self.omega) / (3.0 * self.omega) * dx * dx / self.dt
    }

    /// Start from the equilibrium of `rho = 1 + a sin(kx)`, project the density
    /// on the sine mode after every step and fit the log-amplitude slope by
    /// least squares.
    pub fn run(&self) -> Result<DiffusionResult> {
        if self.steps < 2 {
            return Err(Error::Invalid("diffusion check needs at least 2 steps".into()));
        }
        let spec = LatticeSpec::new(VelocitySet::D1Q3, self.n, self.length, self.dt, self.omega)?;
        let model = EquilibriumModel::new(EquilibriumKind::DensityOnly1D, spec)?;
        let k = 2.0 * PI / self.length;
        let mode: Vec<f64> = (0..self.n).map(|s| (k * spec.position(s).0).sin()).collect();
        let rho = mode.iter().map(|m| 1.0 + self.amplitude * m).collect();
        let mut f = model.equilibrium(&MacroFields::density(spec, rho)?)?;

        let project = |rho: &[f64]| 2.0 / self.n as f64 * rho.iter().zip(&mode).map(|(r, m)| r * m).sum::<f64>();
        let mut times = Vec::with_capacity(self.steps + 1);
        let mut logs = Vec::with_capacity(self.steps + 1);
        for step in 0..=self.steps {
            if step > 0 {
                f = model.bgk_step(&f)?;
            }
            let amp = project(&model.conserved_moments(&f).rho);
            if amp <= 0.0 {
                return Err(Error::Invalid("sine mode amplitude vanished".into()));
            }
            times.push(step as f64 * self.dt);
            logs.push(amp.ln());
        }
        let count = times.len() as f64;
        let tm = times.iter().sum::<f64>() / count;
        let lm = logs.iter().sum::<f64>() / count;
        let cov: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
        let var: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
        let fitted_d = -(cov / var) / (k * k);
        let predicted_d = self.predicted_d();
        Ok(DiffusionResult { predicted_d, fitted_d, relative_error: ((fitted_d - predicted_d) / predicted_d).abs() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicted_coefficient_is_one() {
        assert!((DiffusionCheck::default().predicted_d() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn decay_matches_diffusion_rate() {
        let r = DiffusionCheck::default().run().unwrap();
        assert!(r.within(0.02), "{r:?}");
    }

    #[test]
    fn too_few_steps() {
        let check = DiffusionCheck { steps: 1, ..DiffusionCheck::default() };
        assert!(check.run().is_err());
    }
}
