//! Experiment configuration: named presets plus a flat `key = value` file.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::expansion::SamplingPolicy;
use crate::lattice::{LatticeSpec, MacroFields, VelocitySet};
use crate::lbm::{EquilibriumKind, EquilibriumModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// D1Q3 density+momentum, numerical Chapman-Enskog lifting.
    Exp1,
    /// Same problem lifted with full-state Constrained Runs.
    Exp1Cr,
    /// D2Q5 density+momentum, numerical Chapman-Enskog lifting.
    Exp2,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Preset::Exp1),
            "exp1-cr" => Ok(Preset::Exp1Cr),
            "exp2" => Ok(Preset::Exp2),
            _ => Err(Error::Config(format!("unknown preset `{s}` (exp1, exp1-cr, exp2)"))),
        }
    }
}

/// Named initial conditions on `[0, L)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialData {
    /// `rho = exp(-(x - L/2)^2) + 0.1`, `u = 0.03 sin(2 pi x / L)`.
    Exp1,
    /// `rho = exp(-(x - L/2)^2 - (y - L/2)^2) + 0.4`,
    /// `u_x = 0.03 sin(2 pi x / L)`, `u_y = 0.03 sin(2 pi y / L)`.
    Exp2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Numerical Chapman-Enskog expansion with Newton on the coefficients.
    Nce,
    /// Constrained Runs with Newton on every population.
    FullStateCr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Plain Euclidean norm over all entries.
    Raw,
    /// Euclidean norm divided by the square root of the entry count.
    Scaled,
}

/// One table cell: expansion order (ignored for full-state CR) and smoothness order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub basis_order: usize,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: EquilibriumKind,
    pub length: f64,
    pub n: usize,
    pub dt: f64,
    pub omega: f64,
    pub initial: InitialData,
    pub reference_steps: usize,
    pub method: Method,
    pub cells: Vec<Cell>,
    pub sampling: SamplingPolicy,
    pub stencil_order: usize,
    pub norm: NormKind,
}

fn grid(orders: impl IntoIterator<Item = usize> + Clone, ms: impl IntoIterator<Item = usize> + Clone) -> Vec<Cell> {
    orders
        .into_iter()
        .flat_map(|basis_order| ms.clone().into_iter().map(move |m| Cell { basis_order, m }))
        .collect()
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let exp1 = ExperimentConfig {
            name: "exp1".into(),
            model: EquilibriumKind::DensityMomentum1D,
            length: 10.0,
            n: 200,
            dt: 0.001,
            omega: 0.9091,
            initial: InitialData::Exp1,
            reference_steps: 1000,
            method: Method::Nce,
            cells: grid(1..=4, 0..=6),
            sampling: SamplingPolicy::AllSites,
            stencil_order: 4,
            norm: NormKind::Raw,
        };
        match preset {
            Preset::Exp1 => exp1,
            Preset::Exp1Cr => ExperimentConfig {
                name: "exp1-cr".into(),
                method: Method::FullStateCr,
                cells: grid([0], 0..=6),
                ..exp1
            },
            Preset::Exp2 => ExperimentConfig {
                name: "exp2".into(),
                model: EquilibriumKind::DensityMomentum2D,
                initial: InitialData::Exp2,
                cells: grid(1..=3, 0..=6),
                ..exp1
            },
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        let velocities = match self.model {
            EquilibriumKind::DensityMomentum2D => VelocitySet::D2Q5,
            _ => VelocitySet::D1Q3,
        };
        LatticeSpec::new(velocities, self.n, self.length, self.dt, self.omega)
    }

    pub fn equilibrium_model(&self) -> Result<EquilibriumModel> {
        EquilibriumModel::new(self.model, self.lattice()?)
    }

    /// Initial macroscopic fields; momentum is `rho * u` formed pointwise.
    pub fn initial_fields(&self) -> Result<MacroFields> {
        let spec = self.lattice()?;
        let model = self.equilibrium_model()?;
        let l = self.length;
        let pos: Vec<(f64, f64)> = (0..spec.sites()).map(|s| spec.position(s)).collect();
        let wave = |x: f64| 0.03 * (2.0 * PI * x / l).sin();
        let (rho, velocity): (Vec<f64>, Vec<Vec<f64>>) = match (self.initial, spec.dimension()) {
            (InitialData::Exp1, 1) => (
                pos.iter().map(|(x, _)| (-(x - l / 2.0).powi(2)).exp() + 0.1).collect(),
                vec![pos.iter().map(|(x, _)| wave(*x)).collect()],
            ),
            (InitialData::Exp2, 2) => (
                pos.iter().map(|(x, y)| (-(x - l / 2.0).powi(2) - (y - l / 2.0).powi(2)).exp() + 0.4).collect(),
                vec![pos.iter().map(|(x, _)| wave(*x)).collect(), pos.iter().map(|(_, y)| wave(*y)).collect()],
            ),
            (init, d) => return Err(Error::Config(format!("initial data {init:?} does not fit a {d}D lattice"))),
        };
        if model.conserves_momentum() {
            MacroFields::from_velocity(spec, rho, velocity)
        } else {
            MacroFields::density(spec, rho)
        }
    }

    /// Parse a config file. A `preset` key selects the base values (default
    /// `exp1`); every other key overrides the preset.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let base = pairs
            .iter()
            .find(|(k, _)| k == "preset")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(Preset::Exp1);
        let mut cfg = Self::preset(base);
        let mut orders: Option<Vec<usize>> = None;
        let mut ms: Option<Vec<usize>> = None;
        for (key, value) in &pairs {
            cfg.set(key, value, &mut orders, &mut ms)?;
        }
        if orders.is_some() || ms.is_some() {
            let current_orders: Vec<usize> = dedup(cfg.cells.iter().map(|c| c.basis_order));
            let current_ms: Vec<usize> = dedup(cfg.cells.iter().map(|c| c.m));
            cfg.cells = grid(orders.unwrap_or(current_orders), ms.unwrap_or(current_ms));
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, orders: &mut Option<Vec<usize>>, ms: &mut Option<Vec<usize>>) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {key} `{value}`: {what}"));
        match key {
            "preset" => {}
            "name" => self.name = value.to_string(),
            "model" => {
                self.model = match value {
                    "density-only-1d" => EquilibriumKind::DensityOnly1D,
                    "density-momentum-1d" => EquilibriumKind::DensityMomentum1D,
                    "density-momentum-2d" => EquilibriumKind::DensityMomentum2D,
                    _ => return Err(bad("expected density-only-1d, density-momentum-1d or density-momentum-2d")),
                }
            }
            "length" => self.length = value.parse().map_err(|_| bad("not a number"))?,
            "n" => self.n = value.parse().map_err(|_| bad("not an integer"))?,
            "dt" => self.dt = value.parse().map_err(|_| bad("not a number"))?,
            "omega" => self.omega = value.parse().map_err(|_| bad("not a number"))?,
            "initial" => {
                self.initial = match value {
                    "exp1" => InitialData::Exp1,
                    "exp2" => InitialData::Exp2,
                    _ => return Err(bad("expected exp1 or exp2")),
                }
            }
            "reference_steps" => self.reference_steps = value.parse().map_err(|_| bad("not an integer"))?,
            "method" => {
                self.method = match value {
                    "nce" => Method::Nce,
                    "cr" => Method::FullStateCr,
                    _ => return Err(bad("expected nce or cr")),
                }
            }
            "basis_orders" => *orders = Some(parse_list(value).map_err(|e| bad(&e))?),
            "orders_m" => *ms = Some(parse_list(value).map_err(|e| bad(&e))?),
            "cells" => {
                self.cells = value
                    .split(',')
                    .map(|c| {
                        let (k, m) = c.trim().split_once(':').ok_or("expected order:m")?;
                        Ok(Cell {
                            basis_order: k.trim().parse().map_err(|_| "bad order")?,
                            m: m.trim().parse().map_err(|_| "bad m")?,
                        })
                    })
                    .collect::<std::result::Result<_, &str>>()
                    .map_err(bad)?
            }
            "sampling" => self.sampling = parse_sampling(value)?,
            "stencil_order" => {
                self.stencil_order = match value {
                    "2" => 2,
                    "4" => 4,
                    _ => return Err(bad("expected 2 or 4")),
                }
            }
            "norm" => self.norm = parse_norm(value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

fn dedup(values: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// `0-6` or `0,1,4`.
fn parse_list(value: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| "bad range")?, b.trim().parse().map_err(|_| "bad range")?);
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad entry `{part}`"))?);
        }
    }
    Ok(out)
}

/// `all` or `subset:i,j,...`.
pub fn parse_sampling(value: &str) -> Result<SamplingPolicy> {
    if value == "all" {
        return Ok(SamplingPolicy::AllSites);
    }
    let list = value
        .strip_prefix("subset:")
        .ok_or_else(|| Error::Config(format!("sampling `{value}`: expected all or subset:i,j,...")))?;
    let sites = list
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("sampling `{value}`: {e}")))?;
    Ok(SamplingPolicy::Subset(sites))
}

pub fn parse_norm(value: &str) -> Result<NormKind> {
    match value {
        "raw" => Ok(NormKind::Raw),
        "scaled" => Ok(NormKind::Scaled),
        _ => Err(Error::Config(format!("norm `{value}`: expected raw or scaled"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let e1 = ExperimentConfig::preset(Preset::Exp1);
        assert_eq!((e1.n, e1.length, e1.dt, e1.omega, e1.reference_steps), (200, 10.0, 0.001, 0.9091, 1000));
        assert_eq!(e1.lattice().unwrap().dx(), 0.05);
        assert_eq!(e1.cells.len(), 28);
        let cr = ExperimentConfig::preset(Preset::Exp1Cr);
        assert_eq!(cr.method, Method::FullStateCr);
        assert_eq!(cr.cells.len(), 7);
        let e2 = ExperimentConfig::preset(Preset::Exp2);
        assert_eq!(e2.lattice().unwrap().sites(), 40_000);
        assert_eq!(e2.cells.len(), 21);
    }

    #[test]
    fn initial_fields_exp1() {
        let cfg = ExperimentConfig::preset(Preset::Exp1);
        let m = cfg.initial_fields().unwrap();
        assert!((m.rho[100] - 1.1).abs() < 1e-15);
        assert!((m.rho[0] - ((-25.0f64).exp() + 0.1)).abs() < 1e-15);
        // u(x = 2.5) = 0.03
        assert!((m.momentum[0][50] - 0.03 * m.rho[50]).abs() < 1e-15);
    }

    #[test]
    fn parse_overrides_preset() {
        let cfg = ExperimentConfig::parse(
            "# small run\npreset = exp2\nn = 32   # coarse\nreference_steps = 50\nbasis_orders = 2\norders_m = 1-3\nsampling = subset:1,2,3\nnorm = scaled\n",
        )
        .unwrap();
        assert_eq!(cfg.model, EquilibriumKind::DensityMomentum2D);
        assert_eq!(cfg.n, 32);
        assert_eq!(cfg.reference_steps, 50);
        assert_eq!(cfg.cells, vec![Cell { basis_order: 2, m: 1 }, Cell { basis_order: 2, m: 2 }, Cell { basis_order: 2, m: 3 }]);
        assert_eq!(cfg.sampling, SamplingPolicy::Subset(vec![1, 2, 3]));
        assert_eq!(cfg.norm, NormKind::Scaled);
        let cfg = ExperimentConfig::parse("cells = 1:0, 4:6\nmethod = cr").unwrap();
        assert_eq!(cfg.cells, vec![Cell { basis_order: 1, m: 0 }, Cell { basis_order: 4, m: 6 }]);
        assert_eq!(cfg.method, Method::FullStateCr);
    }

    #[test]
    fn parse_errors() {
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("n 12").is_err());
        assert!(ExperimentConfig::parse("preset = exp9").is_err());
        assert!(ExperimentConfig::parse("stencil_order = 6").is_err());
        assert!(parse_sampling("some").is_err());
    }
}
