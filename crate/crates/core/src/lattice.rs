//! Grids, velocity sets, field containers and the transform between
//! populations and velocity moments.
//!
//! Sites are stored row-major over `(y, x)`: site `s = iy * n + ix`. A
//! distribution field stores each population as one contiguous grid, so
//! population `i` at site `s` lives at `i * sites + s`.
//!
//! Velocity indices put the rest particle first. D1Q3 uses directions
//! `[0, +1, -1]`; D2Q5 uses `(0,0), (1,0), (0,1), (-1,0), (0,-1)`.
//!
//! Moments are in physical units: `rho = sum f_i`, `rho u = sum v_i f_i` and
//! `xi = 1/2 sum |v_i|^2 f_i` with `v_i = c * c_i`. With `c = 1` the D1Q3 map is
//! exactly the matrix `[[1,1,1],[1,0,-1],[1/2,0,1/2]]` acting on `(f_+, f_0, f_-)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::Matrix3;

use crate::error::{Error, Result};

const D1Q3_DIRECTIONS: [[i32; 2]; 3] = [[0, 0], [1, 0], [-1, 0]];
const D2Q5_DIRECTIONS: [[i32; 2]; 5] = [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]];

/// Smallest supported number of grid points per dimension.
pub const MIN_GRID_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VelocitySet {
    D1Q3,
    D2Q5,
}

impl VelocitySet {
    pub fn dimension(self) -> usize {
        match self {
            VelocitySet::D1Q3 => 1,
            VelocitySet::D2Q5 => 2,
        }
    }

    pub fn q(self) -> usize {
        self.directions().len()
    }

    /// Dimensionless lattice directions `c_i` as `(x, y)` pairs.
    pub fn directions(self) -> &'static [[i32; 2]] {
        match self {
            VelocitySet::D1Q3 => &D1Q3_DIRECTIONS,
            VelocitySet::D2Q5 => &D2Q5_DIRECTIONS,
        }
    }
}

/// Grid geometry and BGK parameters for a periodic lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSpec {
    velocities: VelocitySet,
    n: usize,
    length: f64,
    dt: f64,
    omega: f64,
}

impl LatticeSpec {
    /// A periodic lattice with `n` points per dimension on a domain of
    /// length `length` (square in 2D, so `dx = dy`).
    pub fn new(velocities: VelocitySet, n: usize, length: f64, dt: f64, omega: f64) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(Error::Invalid(format!("need at least {MIN_GRID_POINTS} grid points, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Invalid(format!("domain length must be positive, got {length}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
        }
        if !(omega > 0.0 && omega < 2.0) {
            return Err(Error::Invalid(format!("relaxation rate must lie in (0, 2), got {omega}")));
        }
        Ok(Self { velocities, n, length, dt, omega })
    }

    pub fn velocities(&self) -> VelocitySet {
        self.velocities
    }

    pub fn dimension(&self) -> usize {
        self.velocities.dimension()
    }

    pub fn q(&self) -> usize {
        self.velocities.q()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Lattice speed `c = dx / dt`.
    pub fn c(&self) -> f64 {
        self.dx() / self.dt
    }

    pub fn sites(&self) -> usize {
        self.n.pow(self.dimension() as u32)
    }

    pub fn site_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Grid indices `(ix, iy)` of a site; `iy = 0` in 1D.
    pub fn site_coords(&self, site: usize) -> (usize, usize) {
        (site % self.n, site / self.n)
    }

    /// Physical position of a site, `x = ix * dx`.
    pub fn position(&self, site: usize) -> (f64, f64) {
        let (ix, iy) = self.site_coords(site);
        (ix as f64 * self.dx(), iy as f64 * self.dx())
    }

    /// Site reached from `site` after moving `(sx, sy)` cells with periodic wrap.
    pub fn shifted(&self, site: usize, sx: i64, sy: i64) -> usize {
        let n = self.n as i64;
        let (ix, iy) = self.site_coords(site);
        let nx = (ix as i64 + sx).rem_euclid(n) as usize;
        let ny = if self.dimension() == 1 { 0 } else { (iy as i64 + sy).rem_euclid(n) as usize };
        self.site_index(nx, ny)
    }

    /// True when `dx`, `dt` and `omega` agree to relative precision `1e-12`.
    pub fn same_discretization(&self, other: &LatticeSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        self.velocities == other.velocities
            && close(self.dx(), other.dx())
            && close(self.dt, other.dt)
            && close(self.omega, other.omega)
    }

    /// Physical moment matrix for D1Q3, mapping `(f_0, f_+, f_-)` to `(rho, rho u, xi)`.
    pub fn moment_matrix(&self) -> Result<Matrix3<f64>> {
        self.require_d1q3("moment matrix")?;
        let c = self.c();
        Ok(Matrix3::new(
            1.0, 1.0, 1.0, //
            0.0, c, -c, //
            0.0, 0.5 * c * c, 0.5 * c * c,
        ))
    }

    /// Closed-form inverse of [`LatticeSpec::moment_matrix`].
    pub fn inverse_moment_matrix(&self) -> Result<Matrix3<f64>> {
        self.require_d1q3("inverse moment matrix")?;
        let c = self.c();
        let inv_c2 = 1.0 / (c * c);
        Ok(Matrix3::new(
            1.0, 0.0, -2.0 * inv_c2, //
            0.0, 0.5 / c, inv_c2, //
            0.0, -0.5 / c, inv_c2,
        ))
    }

    fn require_d1q3(&self, what: &str) -> Result<()> {
        if self.velocities != VelocitySet::D1Q3 {
            return Err(Error::Unsupported(format!(
                "{what} needs D1Q3; the D2Q5 moment map is not square"
            )));
        }
        Ok(())
    }
}

/// Populations `f_i` on every site of a periodic lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField {
    spec: LatticeSpec,
    data: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(spec: LatticeSpec) -> Self {
        Self { data: vec![0.0; spec.sites() * spec.q()], spec }
    }

    pub fn from_fn(spec: LatticeSpec, mut value: impl FnMut(usize, usize) -> f64) -> Self {
        let sites = spec.sites();
        let mut data = Vec::with_capacity(sites * spec.q());
        for i in 0..spec.q() {
            for s in 0..sites {
                data.push(value(s, i));
            }
        }
        Self { spec, data }
    }

    /// Wrap population-major data (`data[i * sites + s]`).
    pub fn from_vec(spec: LatticeSpec, data: Vec<f64>) -> Result<Self> {
        let expected = spec.sites() * spec.q();
        if data.len() != expected {
            return Err(Error::Structure(format!(
                "distribution data has {} entries, lattice needs {expected}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite population at flat index {k}")));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn get(&self, site: usize, i: usize) -> f64 {
        self.data[i * self.spec.sites() + site]
    }

    pub fn set(&mut self, site: usize, i: usize, value: f64) {
        let sites = self.spec.sites();
        self.data[i * sites + site] = value;
    }

    pub fn population(&self, i: usize) -> &[f64] {
        let sites = self.spec.sites();
        &self.data[i * sites..(i + 1) * sites]
    }

    pub fn population_mut(&mut self, i: usize) -> &mut [f64] {
        let sites = self.spec.sites();
        &mut self.data[i * sites..(i + 1) * sites]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_same_shape(&self, other: &DistributionField) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Structure("distribution fields live on different lattices".into()));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &DistributionField, b: f64) -> Result<DistributionField> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(DistributionField { spec: self.spec, data })
    }

    /// Field dump: one row per site, columns `x[,y],f_0..f_{q-1}`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let q = self.spec.q();
        let mut header = String::from("x");
        if self.spec.dimension() == 2 {
            header.push_str(",y");
        }
        for i in 0..q {
            write!(header, ",f_{i}").unwrap();
        }
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for s in 0..self.spec.sites() {
            line.clear();
            let (x, y) = self.spec.position(s);
            write!(line, "{}", fmt17(x)).unwrap();
            if self.spec.dimension() == 2 {
                write!(line, ",{}", fmt17(y)).unwrap();
            }
            for i in 0..q {
                write!(line, ",{}", fmt17(self.get(s, i))).unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Read a dump written by [`DistributionField::write_csv`] for `spec`.
    pub fn read_csv<R: BufRead>(spec: LatticeSpec, input: R) -> Result<Self> {
        let coord_cols = spec.dimension();
        let q = spec.q();
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Structure("empty field dump".into()))??;
        if header.split(',').count() != coord_cols + q {
            return Err(Error::Structure(format!("field dump header `{header}` does not match lattice")));
        }
        let mut field = DistributionField::zeros(spec);
        let mut site = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if site >= spec.sites() {
                return Err(Error::Structure("field dump has too many rows".into()));
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != coord_cols + q {
                return Err(Error::Structure(format!("row {site} has {} columns", cols.len())));
            }
            for i in 0..q {
                let v: f64 = cols[coord_cols + i]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Structure(format!("row {site}: {e}")))?;
                field.set(site, i, v);
            }
            site += 1;
        }
        if site != spec.sites() {
            return Err(Error::Structure(format!("field dump has {site} rows, lattice needs {}", spec.sites())));
        }
        Ok(field)
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Conserved (and for D1Q3, energy) moment fields.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroFields {
    spec: LatticeSpec,
    pub rho: Vec<f64>,
    /// `rho u_k`, one field per dimension.
    pub momentum: Vec<Vec<f64>>,
    /// `xi = 1/2 sum |v_i|^2 f_i`; only materialized for D1Q3.
    pub energy: Option<Vec<f64>>,
}

impl MacroFields {
    pub fn new(
        spec: LatticeSpec,
        rho: Vec<f64>,
        momentum: Vec<Vec<f64>>,
        energy: Option<Vec<f64>>,
    ) -> Result<Self> {
        let sites = spec.sites();
        if rho.len() != sites {
            return Err(Error::Structure(format!("density has {} sites, lattice has {sites}", rho.len())));
        }
        if !momentum.is_empty() && momentum.len() != spec.dimension() {
            return Err(Error::Structure(format!(
                "{} momentum components for a {}D lattice",
                momentum.len(),
                spec.dimension()
            )));
        }
        if momentum.iter().chain(energy.iter()).any(|f| f.len() != sites) {
            return Err(Error::Structure("moment field size does not match lattice".into()));
        }
        Ok(Self { spec, rho, momentum, energy })
    }

    /// Density only.
    pub fn density(spec: LatticeSpec, rho: Vec<f64>) -> Result<Self> {
        Self::new(spec, rho, Vec::new(), None)
    }

    /// Density and velocity; momentum is formed pointwise as `rho * u`.
    pub fn from_velocity(spec: LatticeSpec, rho: Vec<f64>, velocity: Vec<Vec<f64>>) -> Result<Self> {
        let momentum = velocity
            .iter()
            .map(|u| rho.iter().zip(u).map(|(r, u)| r * u).collect())
            .collect();
        Self::new(spec, rho, momentum, None)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn has_momentum(&self) -> bool {
        !self.momentum.is_empty()
    }
}

/// Velocity moments of every site.
///
/// D1Q3 yields `(rho, rho u, xi)`; D2Q5 yields `(rho, rho u_x, rho u_y)`.
pub fn moments_from_distributions(f: &DistributionField) -> MacroFields {
    let spec = *f.spec();
    let sites = spec.sites();
    let c = spec.c();
    let dirs = spec.velocities().directions();
    let mut rho = vec![0.0; sites];
    let mut momentum = vec![vec![0.0; sites]; spec.dimension()];
    for (i, dir) in dirs.iter().enumerate() {
        let pop = f.population(i);
        for (r, v) in rho.iter_mut().zip(pop) {
            *r += v;
        }
        for (k, mom) in momentum.iter_mut().enumerate() {
            if dir[k] != 0 {
                let ck = c * dir[k] as f64;
                for (m, v) in mom.iter_mut().zip(pop) {
                    *m += ck * v;
                }
            }
        }
    }
    let energy = match spec.velocities() {
        VelocitySet::D1Q3 => {
            let half_c2 = 0.5 * c * c;
            Some(f.population(1).iter().zip(f.population(2)).map(|(a, b)| half_c2 * (a + b)).collect())
        }
        VelocitySet::D2Q5 => None,
    };
    MacroFields { spec, rho, momentum, energy }
}

/// Inverse moment transform; D1Q3 only, and all three moments must be present.
pub fn distributions_from_moments(m: &MacroFields) -> Result<DistributionField> {
    let spec = *m.spec();
    if spec.velocities() != VelocitySet::D1Q3 {
        return Err(Error::Unsupported("the D2Q5 moment map is not invertible".into()));
    }
    let (Some(energy), Some(momentum)) = (m.energy.as_ref(), m.momentum.first()) else {
        return Err(Error::Structure("inverse transform needs rho, rho u and xi".into()));
    };
    let c = spec.c();
    let inv_c2 = 1.0 / (c * c);
    let half_inv_c = 0.5 / c;
    let mut f = DistributionField::zeros(spec);
    for s in 0..spec.sites() {
        let (rho, phi, xi) = (m.rho[s], momentum[s], energy[s]);
        f.set(s, 0, rho - 2.0 * xi * inv_c2);
        f.set(s, 1, xi * inv_c2 + phi * half_inv_c);
        f.set(s, 2, xi * inv_c2 - phi * half_inv_c);
    }
    Ok(f)
}

/// Periodic streaming: `out(x, i) = in(x - c_i, i)`.
pub fn stream(f: &DistributionField) -> DistributionField {
    let spec = *f.spec();
    let n = spec.n();
    let mut out = DistributionField::zeros(spec);
    for (i, dir) in spec.velocities().directions().iter().enumerate() {
        let src = f.population(i);
        let dst = out.population_mut(i);
        let (sx, sy) = (dir[0].rem_euclid(n as i32) as usize, dir[1].rem_euclid(n as i32) as usize);
        match spec.dimension() {
            1 => {
                for (x, d) in dst.iter_mut().enumerate() {
                    *d = src[(x + n - sx) % n];
                }
            }
            _ => {
                for y in 0..n {
                    let src_row = &src[((y + n - sy) % n) * n..][..n];
                    let dst_row = &mut dst[y * n..][..n];
                    for (x, d) in dst_row.iter_mut().enumerate() {
                        *d = src_row[(x + n - sx) % n];
                    }
                }
            }
        }
    }
    out
}
