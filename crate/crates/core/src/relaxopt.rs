//! Interface operators and optimal relaxation parameters for the 1D
//! Dirichlet-Neumann heat model problem (implicit Euler, matching grids).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{MaterialParams, Shape};
use crate::par::{self, Execution};
use crate::timeint::LMMethod;

/// Optimal relaxation for the three local shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxTable {
    pub theta_jacobi: f64,
    pub theta_gs_dn: f64,
    pub theta_gs_nd: f64,
    /// Predicted spectral radius of relaxed Jacobi WR.
    pub rho_jacobi: f64,
}

impl RelaxTable {
    /// `(theta_v, theta_w)`: relaxation applied to the exchanged v data
    /// (flux) and w data (interface temperature) for a shape.
    pub fn pair(&self, shape: Shape) -> (f64, f64) {
        match shape {
            Shape::Jacobi => (self.theta_jacobi, self.theta_jacobi),
            Shape::GsDn => (1.0, self.theta_gs_dn),
            Shape::GsNd => (self.theta_gs_nd, 1.0),
        }
    }
}

/// Both interface operators and the table derived from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxReport {
    pub s1: f64,
    pub s2: f64,
    pub table: RelaxTable,
}

/// Interior node count `1/dx - 1` of a unit subdomain.
pub fn interior_nodes(dx: f64) -> Result<usize> {
    let m = (1.0 / dx).round();
    if !(dx > 0.0) || (m * dx - 1.0).abs() > 1e-9 || m < 2.0 {
        return Err(Error::Mesh(format!(
            "1/dx = {} must be an integer >= 2",
            1.0 / dx
        )));
    }
    Ok(m as usize - 1)
}

/// Scalar interface operator `S` of one subdomain.
pub fn s_operator(mat: &MaterialParams, dt: f64, dx: f64, n: usize) -> Result<f64> {
    s_operator_with(Execution::default(), mat, dt, dx, n)
}

pub fn s_operator_with(
    exec: Execution,
    mat: &MaterialParams,
    dt: f64,
    dx: f64,
    n: usize,
) -> Result<f64> {
    if !(dt > 0.0 && dx > 0.0) {
        return Err(Error::InvalidParameter("dt and dx must be positive".into()));
    }
    let (a, l) = (mat.alpha, mat.lambda);
    let p = a * dx * dx;
    let terms = par::map_range(exec, n, |k| {
        let c = ((k + 1) as f64 * PI * dx).cos();
        let sn = ((k + 1) as f64 * PI * dx).sin();
        let den = 2.0 * p + 6.0 * l * dt + (p - 6.0 * l * dt) * c;
        (3.0 * dt * dx * dx * sn * sn, den)
    });
    let scale = p + 6.0 * l * dt;
    let mut s = 0.0;
    for (k, (num, den)) in terms.into_iter().enumerate() {
        if den.abs() <= 1e-14 * scale {
            return Err(Error::InvalidParameter(format!(
                "vanishing denominator in term {}",
                k + 1
            )));
        }
        s += num / den;
    }
    let q = p - 6.0 * l * dt;
    Ok((6.0 * dt * dx * (p + 3.0 * l * dt) - q * q * s) / (18.0 * dt * dx.powi(3)))
}

/// Optimal parameters from the two interface operators.
pub fn optimal_thetas(s1: f64, s2: f64) -> Result<RelaxTable> {
    let r = s1 / s2;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "S1/S2 = {r} must be positive"
        )));
    }
    let theta = 1.0 / (1.0 + r);
    Ok(RelaxTable {
        theta_jacobi: theta,
        theta_gs_dn: 1.0 / (1.0 + r).abs(),
        theta_gs_nd: 1.0 / (1.0 + r).abs(),
        rho_jacobi: (r / (1.0 + r)).sqrt(),
    })
}

/// Interface operators and optimal table for a material pair.
pub fn relax_report(
    materials: &(MaterialParams, MaterialParams),
    dt: f64,
    dx: f64,
) -> Result<RelaxReport> {
    let n = interior_nodes(dx)?;
    let s1 = s_operator(&materials.0, dt, dx, n)?;
    let s2 = s_operator(&materials.1, dt, dx, n)?;
    Ok(RelaxReport {
        s1,
        s2,
        table: optimal_thetas(s1, s2)?,
    })
}

/// Implicit-Euler step with the same step matrix as `method` at `dt`:
/// `a_m M + dt b_m K` is proportional to `M + (dt b_m / a_m) K`.
pub fn effective_step(method: &LMMethod, dt: f64) -> f64 {
    let m = method.steps();
    dt * method.b()[m] / method.a()[m]
}

/// Table for runs of `method` at step `dt`.
pub fn relax_report_for(
    materials: &(MaterialParams, MaterialParams),
    method: &LMMethod,
    dt: f64,
    dx: f64,
) -> Result<RelaxReport> {
    relax_report(materials, effective_step(method, dt), dx)
}

/// 2x2 iteration matrix for `(u_Gamma, q)` of a shape with relaxation `theta`.
pub fn interface_matrix(shape: Shape, s1: f64, s2: f64, theta: f64) -> [[f64; 2]; 2] {
    match shape {
        Shape::GsDn => [[1.0 - theta - theta * s1 / s2, 0.0], [s1, 0.0]],
        Shape::GsNd => [[0.0, -1.0 / s2], [0.0, 1.0 - theta - theta * s1 / s2]],
        Shape::Jacobi => [[1.0 - theta, -theta / s2], [theta * s1, 1.0 - theta]],
    }
}

/// Spectral radius of a real 2x2 matrix.
pub fn spectral_radius_2x2(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        det.abs().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_case() {
        let t = optimal_thetas(3.0, 3.0).unwrap();
        assert_eq!(t.theta_jacobi, 0.5);
        assert!((t.rho_jacobi - 0.5f64.sqrt()).abs() < 1e-15);
        let s = s_operator(&MaterialParams::air(), 5.0, 1.0 / 32.0, 31).unwrap();
        let r = relax_report(
            &(MaterialParams::air(), MaterialParams::air()),
            5.0,
            1.0 / 32.0,
        )
        .unwrap();
        assert_eq!(r.s1, s);
        assert_eq!(r.table.theta_jacobi, 0.5);
    }

    #[test]
    fn nonpositive_ratio_rejected() {
        assert!(optimal_thetas(-1.0, 2.0).is_err());
        assert!(optimal_thetas(1.0, 0.0).is_err());
    }

    #[test]
    fn pairs_per_shape() {
        let t = optimal_thetas(1.0, 3.0).unwrap();
        assert_eq!(t.pair(Shape::GsDn), (1.0, 0.75));
        assert_eq!(t.pair(Shape::GsNd), (0.75, 1.0));
        assert_eq!(t.pair(Shape::Jacobi), (0.75, 0.75));
    }

    #[test]
    fn effective_steps() {
        assert_eq!(effective_step(&LMMethod::implicit_euler(), 8.0), 8.0);
        assert_eq!(effective_step(&LMMethod::trapezoidal(), 8.0), 4.0);
    }

    #[test]
    fn sequential_sum_matches_parallel() {
        let m = MaterialParams::water();
        let a = s_operator_with(Execution::Sequential, &m, 5.0, 1.0 / 513.0, 512).unwrap();
        let b = s_operator_with(Execution::Parallel, &m, 5.0, 1.0 / 513.0, 512).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
