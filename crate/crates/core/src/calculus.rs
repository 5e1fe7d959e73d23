//! Periodic central finite differences on grid fields.

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }
}

/// Derivative order 1..=4 at accuracy order 2 or 4 along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StencilSpec {
    order: usize,
    accuracy: usize,
    axis: Axis,
}

// Central weights from offset -w to +w.
const ACC2: [&[f64]; 4] = [
    &[-0.5, 0.0, 0.5],
    &[1.0, -2.0, 1.0],
    &[-0.5, 1.0, 0.0, -1.0, 0.5],
    &[1.0, -4.0, 6.0, -4.0, 1.0],
];
const ACC4: [&[f64]; 4] = [
    &[1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0],
    &[-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
    &[1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0],
    &[-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0],
];

impl StencilSpec {
    pub fn new(order: usize, accuracy: usize, axis: Axis) -> Result<Self> {
        if !(1..=4).contains(&order) {
            return Err(Error::Invalid(format!("derivative order {order} not in 1..=4")));
        }
        if accuracy != 2 && accuracy != 4 {
            return Err(Error::Invalid(format!("stencil accuracy must be 2 or 4, got {accuracy}")));
        }
        Ok(Self { order, accuracy, axis })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn accuracy(&self) -> usize {
        self.accuracy
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Weights for offsets `-half_width..=half_width`, before dividing by `h^k`.
    pub fn weights(&self) -> &'static [f64] {
        match self.accuracy {
            2 => ACC2[self.order - 1],
            _ => ACC4[self.order - 1],
        }
    }

    pub fn half_width(&self) -> usize {
        self.weights().len() / 2
    }

    pub fn width(&self) -> usize {
        self.weights().len()
    }
}

/// Apply a central stencil with periodic wrap along `stencil.axis()`.
pub fn derivative(field: &[f64], grid: &LatticeSpec, stencil: StencilSpec, spacing: f64) -> Result<Vec<f64>> {
    let n = grid.n();
    if field.len() != grid.sites() {
        return Err(Error::Structure(format!("field has {} sites, grid has {}", field.len(), grid.sites())));
    }
    if n < stencil.width() {
        return Err(Error::Structure(format!("grid of {n} points is narrower than a {}-point stencil", stencil.width())));
    }
    if stencil.axis() == Axis::Y && grid.dimension() < 2 {
        return Err(Error::Structure("y derivative on a 1D grid".into()));
    }
    let scale = spacing.powi(stencil.order() as i32).recip();
    let w = stencil.half_width();
    let weights = stencil.weights();
    // distance between neighbours along the axis in flat storage
    let (stride, lines, line_step) = match stencil.axis() {
        Axis::X => (1, grid.sites() / n, n),
        Axis::Y => (n, n, 1),
    };
    let mut out = vec![0.0; field.len()];
    for line in 0..lines {
        let base = line * line_step;
        for j in 0..n {
            let mut acc = 0.0;
            for (k, &c) in weights.iter().enumerate() {
                if c != 0.0 {
                    let idx = (j + n + k - w) % n;
                    acc += c * field[base + idx * stride];
                }
            }
            out[base + j * stride] = acc * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::VelocitySet;
    use std::f64::consts::PI;

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|v| v as f64).product()
    }

    /// Taylor moment conditions: sum_j w_j j^p / p! = [p == k] for p < k + a.
    #[test]
    fn weights_satisfy_taylor_conditions() {
        for accuracy in [2, 4] {
            for order in 1..=4 {
                let s = StencilSpec::new(order, accuracy, Axis::X).unwrap();
                let w = s.half_width() as i64;
                for p in 0..order + accuracy {
                    let moment: f64 = s
                        .weights()
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * ((k as i64 - w) as f64).powi(p as i32))
                        .sum::<f64>()
                        / factorial(p);
                    let expected = if p == order { 1.0 } else { 0.0 };
                    assert!((moment - expected).abs() < 1e-13, "k={order} a={accuracy} p={p}: {moment}");
                }
                // symmetric for even k, antisymmetric for odd k
                let ws = s.weights();
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                for k in 0..ws.len() {
                    assert_eq!(ws[k], sign * ws[ws.len() - 1 - k]);
                }
            }
        }
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let grid = LatticeSpec::new(VelocitySet::D2Q5, 10, 1.0, 0.1, 1.0).unwrap();
        let field = vec![3.7; grid.sites()];
        for order in 1..=4 {
            for axis in [Axis::X, Axis::Y] {
                let d = derivative(&field, &grid, StencilSpec::new(order, 4, axis).unwrap(), grid.dx()).unwrap();
                assert!(d.iter().all(|v| v.abs() < 1e-9));
            }
        }
    }

    #[test]
    fn first_derivative_error_within_taylor_bound() {
        let length = 10.0;
        let grid = LatticeSpec::new(VelocitySet::D1Q3, 200, length, 0.001, 1.0).unwrap();
        let dx = grid.dx();
        let k = 2.0 * PI / length;
        let field: Vec<f64> = (0..200).map(|j| (k * j as f64 * dx).sin()).collect();
        let d = derivative(&field, &grid, StencilSpec::new(1, 2, Axis::X).unwrap(), dx).unwrap();
        let max_err = (0..200).map(|j| (d[j] - k * (k * j as f64 * dx).cos()).abs()).fold(0.0, f64::max);
        let bound = k.powi(3) * dx * dx / 6.0 * 1.01;
        assert!(max_err <= bound, "{max_err:e} > {bound:e}");
    }

    #[test]
    fn second_derivative_fourier_eigenvalue() {
        let length = 1.0;
        let n = 16;
        let grid = LatticeSpec::new(VelocitySet::D1Q3, n, length, 0.1, 1.0).unwrap();
        let dx = grid.dx();
        let k = 2.0 * PI / length;
        let field: Vec<f64> = (0..n).map(|j| (k * j as f64 * dx).sin()).collect();
        let d = derivative(&field, &grid, StencilSpec::new(2, 2, Axis::X).unwrap(), dx).unwrap();
        let lambda = -(2.0 / (dx * dx)) * (1.0 - (k * dx).cos());
        for j in 0..n {
            assert!((d[j] - lambda * field[j]).abs() < 1e-12 * lambda.abs());
        }
    }

    #[test]
    fn error_decays_at_stencil_order() {
        let length = 10.0;
        let k = 2.0 * PI / length;
        for accuracy in [2, 4] {
            for order in 1..=4 {
                let err = |n: usize| {
                    let grid = LatticeSpec::new(VelocitySet::D1Q3, n, length, 0.001, 1.0).unwrap();
                    let dx = grid.dx();
                    let field: Vec<f64> = (0..n).map(|j| (k * j as f64 * dx).sin()).collect();
                    let d = derivative(&field, &grid, StencilSpec::new(order, accuracy, Axis::X).unwrap(), dx).unwrap();
                    // d^k/dx^k sin(kx) = k^order sin(kx + order pi/2)
                    (0..n)
                        .map(|j| (d[j] - k.powi(order as i32) * (k * j as f64 * dx + order as f64 * PI / 2.0).sin()).abs())
                        .fold(0.0, f64::max)
                };
                let rate = (err(40) / err(80)).log2();
                assert!((rate - accuracy as f64).abs() < 0.1, "k={order} a={accuracy}: rate {rate}");
            }
        }
    }

    #[test]
    fn commutes_with_periodic_shift_and_is_linear() {
        let grid = LatticeSpec::new(VelocitySet::D2Q5, 12, 1.0, 0.1, 1.0).unwrap();
        let f: Vec<f64> = (0..grid.sites()).map(|s| ((s * 37) % 11) as f64 - 0.3 * s as f64).collect();
        let g: Vec<f64> = (0..grid.sites()).map(|s| (s as f64 * 0.1).cos()).collect();
        let shift = |v: &[f64]| -> Vec<f64> { (0..grid.sites()).map(|s| v[grid.shifted(s, -2, 1)]).collect() };
        for axis in [Axis::X, Axis::Y] {
            let st = StencilSpec::new(3, 4, axis).unwrap();
            let a = derivative(&shift(&f), &grid, st, 0.5).unwrap();
            let b = shift(&derivative(&f, &grid, st, 0.5).unwrap());
            assert_eq!(a, b);
            let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| 2.0 * x - y).collect();
            let lhs = derivative(&combo, &grid, st, 0.5).unwrap();
            let df = derivative(&f, &grid, st, 0.5).unwrap();
            let dg = derivative(&g, &grid, st, 0.5).unwrap();
            for s in 0..grid.sites() {
                assert!((lhs[s] - (2.0 * df[s] - dg[s])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn parity_annihilation() {
        // symmetric about grid point 0 (and n/2): f(j) = f(-j)
        let n = 16;
        let grid = LatticeSpec::new(VelocitySet::D1Q3, n, 1.0, 0.1, 1.0).unwrap();
        let even: Vec<f64> = (0..n).map(|j| { let m = j.min(n - j) as f64; m * m - 0.2 * m }).collect();
        let odd: Vec<f64> = (0..n).map(|j| (2.0 * PI * j as f64 / n as f64).sin() + (6.0 * PI * j as f64 / n as f64).sin()).collect();
        for accuracy in [2, 4] {
            for order in 1..=4 {
                let st = StencilSpec::new(order, accuracy, Axis::X).unwrap();
                let (field, centre) = if order % 2 == 1 { (&even, [0, n / 2]) } else { (&odd, [0, n / 2]) };
                let d = derivative(field, &grid, st, 1.0).unwrap();
                for c in centre {
                    assert!(d[c].abs() < 1e-12, "k={order} a={accuracy}: {}", d[c]);
                }
            }
        }
    }

    #[test]
    fn structural_errors() {
        let grid = LatticeSpec::new(VelocitySet::D1Q3, 8, 1.0, 0.1, 1.0).unwrap();
        assert!(derivative(&[0.0; 7], &grid, StencilSpec::new(1, 2, Axis::X).unwrap(), 1.0).is_err());
        assert!(derivative(&[0.0; 8], &grid, StencilSpec::new(1, 2, Axis::Y).unwrap(), 1.0).is_err());
        assert!(StencilSpec::new(5, 2, Axis::X).is_err());
        assert!(StencilSpec::new(1, 3, Axis::X).is_err());
    }
}
