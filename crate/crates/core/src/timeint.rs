//! Linear multistep time integration on constant-stepsize grids.

use std::cmp::Ordering;

use faer::Mat;

use crate::error::{Error, Result};
use crate::interp::Waveform;
use crate::linalg::{LuSolver, SparseMatrix};
use crate::model::MonolithicSystem;

/// A grid time stored as the fraction `num / den` of the horizon.
///
/// Points of different constant-stepsize grids compare exactly.
#[derive(Clone, Copy, Debug)]
pub struct GridTime {
    num: u64,
    den: u64,
}

impl GridTime {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Self { num, den }
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn end() -> Self {
        Self { num: 1, den: 1 }
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    /// Floating-point value, `num * tf / den`, matching `TimeGrid::time`.
    pub fn value(self, tf: f64) -> f64 {
        self.num as f64 * tf / self.den as f64
    }

    /// Index of the largest point `i / n <= self`.
    pub fn floor_index(self, n: usize) -> usize {
        ((self.num as u128 * n as u128) / self.den as u128) as usize
    }

    /// Index of the smallest point `i / n >= self`.
    pub fn ceil_index(self, n: usize) -> usize {
        (self.num as u128 * n as u128).div_ceil(self.den as u128) as usize
    }
}

impl PartialEq for GridTime {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GridTime {}

impl PartialOrd for GridTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GridTime {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

/// Uniform grid `t_n = n * tf / n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    tf: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(tf: f64, n: usize) -> Result<Self> {
        if !(tf > 0.0 && tf.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time {tf} must be positive"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter(
                "time grid needs at least one step".into(),
            ));
        }
        Ok(Self { tf, n })
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.tf / self.n as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.tf / self.n as f64
    }

    pub fn point(&self, i: usize) -> GridTime {
        GridTime::new(i as u64, self.n as u64)
    }

    pub fn points(&self) -> Vec<GridTime> {
        (0..=self.n).map(|i| self.point(i)).collect()
    }

    /// Grid index of `t` if it is a point of this grid.
    pub fn index_of(&self, t: GridTime) -> Option<usize> {
        let i = t.floor_index(self.n);
        (self.point(i) == t).then_some(i)
    }
}

/// Coefficients of an m-step linear multistep method.
#[derive(Clone, Debug, PartialEq)]
pub struct LMMethod {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LMMethod {
    /// Validates consistency and the root condition of `sum a_l z^l`.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() < 2 || a.len() != b.len() {
            return Err(Error::UnstableMethod(
                "need m+1 >= 2 coefficients in a and b".into(),
            ));
        }
        let m = a.len() - 1;
        if a[m] == 0.0 {
            return Err(Error::UnstableMethod(
                "leading coefficient a_m is zero".into(),
            ));
        }
        let rho1: f64 = a.iter().sum();
        let drho1: f64 = a.iter().enumerate().map(|(l, v)| l as f64 * v).sum();
        let sigma1: f64 = b.iter().sum();
        let scale = a.iter().chain(&b).fold(0.0f64, |s, v| s.max(v.abs()));
        if rho1.abs() > 1e-12 * scale || (drho1 - sigma1).abs() > 1e-12 * scale {
            return Err(Error::UnstableMethod("method is not consistent".into()));
        }
        let roots = characteristic_roots(&a)?;
        const TOL: f64 = 1e-7;
        for (i, r) in roots.iter().enumerate() {
            let mod_r = r.0.hypot(r.1);
            if mod_r > 1.0 + TOL {
                return Err(Error::UnstableMethod(format!(
                    "root of modulus {mod_r} outside unit disc"
                )));
            }
            if mod_r > 1.0 - TOL {
                for s in &roots[i + 1..] {
                    if (r.0 - s.0).hypot(r.1 - s.1) < 1e-4 {
                        return Err(Error::UnstableMethod(
                            "repeated root on the unit circle".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { a, b })
    }

    pub fn implicit_euler() -> Self {
        Self {
            a: vec![-1.0, 1.0],
            b: vec![0.0, 1.0],
        }
    }

    pub fn trapezoidal() -> Self {
        Self {
            a: vec![-1.0, 1.0],
            b: vec![0.5, 0.5],
        }
    }

    pub fn steps(&self) -> usize {
        self.a.len() - 1
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

/// Roots of `sum a_l z^l` as `(re, im)` pairs via the companion matrix.
fn characteristic_roots(a: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = a.len() - 1;
    let am = a[m];
    let comp = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == 0 {
            -a[m - 1 - j] / am
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let ev = comp
        .eigenvalues()
        .map_err(|e| Error::UnstableMethod(format!("root computation failed: {e:?}")))?;
    Ok(ev.iter().map(|z| (z.re, z.im)).collect())
}

/// Controls factorization caching of the step matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factorization {
    Reuse,
    PerStep,
}

/// Discrete monolithic solution for a one-step method (`m = 1`).
pub fn lmm_solve_monolithic(
    system: &MonolithicSystem,
    method: &LMMethod,
    grid: &TimeGrid,
) -> Result<Waveform> {
    lmm_solve_monolithic_with(system, method, grid, &[], Factorization::Reuse)
}

/// Discrete monolithic solution with explicit starting values `u_1..u_{m-1}`.
pub fn lmm_solve_monolithic_with(
    system: &MonolithicSystem,
    method: &LMMethod,
    grid: &TimeGrid,
    starting: &[Vec<f64>],
    factorization: Factorization,
) -> Result<Waveform> {
    let m = method.steps();
    if starting.len() + 1 != m {
        return Err(Error::InvalidParameter(format!(
            "{m}-step method needs {} starting values beyond u0, got {}",
            m - 1,
            starting.len()
        )));
    }
    if grid.steps() < m {
        return Err(Error::InvalidParameter(
            "grid shorter than the method".into(),
        ));
    }
    let d = system.dim();
    let dt = grid.dt();
    let stencil: Vec<SparseMatrix> = (0..=m)
        .map(|l| system.b.lin_comb(method.a[l], &system.a, method.b[l] * dt))
        .collect::<Result<_>>()?;
    let cached = match factorization {
        Factorization::Reuse => Some(LuSolver::new(&stencil[m])?),
        Factorization::PerStep => None,
    };

    let mut values: Vec<Vec<f64>> = Vec::with_capacity(grid.steps() + 1);
    values.push(system.u0.clone());
    for s in starting {
        if s.len() != d {
            return Err(Error::Dimension("starting value length".into()));
        }
        values.push(s.clone());
    }
    for n in 0..=(grid.steps() - m) {
        let mut rhs = vec![0.0; d];
        if system.has_forcing() {
            for l in 0..=m {
                if method.b[l] != 0.0 {
                    let f = system.forcing_at(grid.time(n + l));
                    for (r, fi) in rhs.iter_mut().zip(&f) {
                        *r += dt * method.b[l] * fi;
                    }
                }
            }
        }
        for l in 0..m {
            stencil[l].mul_vec_acc(-1.0, &values[n + l], &mut rhs);
        }
        match &cached {
            Some(lu) => lu.solve_in_place(&mut rhs)?,
            None => LuSolver::new(&stencil[m])?.solve_in_place(&mut rhs)?,
        }
        values.push(rhs);
    }
    Waveform::from_grid(grid, values)
}

/// One subproblem of a partitioned system, stepped against peer data.
///
/// Row and column sets are global indices into the monolithic system; the
/// peer enters only through its exchanged (gamma) components.
pub struct SplitStepper {
    own: Vec<usize>,
    grid: TimeGrid,
    method: LMMethod,
    own_stencil: Vec<SparseMatrix>,
    peer_stencil: Vec<SparseMatrix>,
    forcing: Option<crate::model::Forcing>,
    lu: LuSolver,
}

impl std::fmt::Debug for SplitStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStepper")
            .field("own", &self.own.len())
            .field("grid", &self.grid)
            .finish()
    }
}

impl SplitStepper {
    pub fn new(
        system: &MonolithicSystem,
        own: &[usize],
        peer_gamma: &[usize],
        method: &LMMethod,
        grid: TimeGrid,
    ) -> Result<Self> {
        let m = method.steps();
        let dt = grid.dt();
        let b_own = system.b.submatrix(own, own);
        let a_own = system.a.submatrix(own, own);
        let b_peer = system.b.submatrix(own, peer_gamma);
        let a_peer = system.a.submatrix(own, peer_gamma);
        let own_stencil: Vec<SparseMatrix> = (0..=m)
            .map(|l| b_own.lin_comb(method.a[l], &a_own, method.b[l] * dt))
            .collect::<Result<_>>()?;
        let peer_stencil: Vec<SparseMatrix> = (0..=m)
            .map(|l| b_peer.lin_comb(method.a[l], &a_peer, method.b[l] * dt))
            .collect::<Result<_>>()?;
        let lu = LuSolver::new(&own_stencil[m])?;
        Ok(Self {
            own: own.to_vec(),
            grid,
            method: method.clone(),
            own_stencil,
            peer_stencil,
            forcing: system.forcing.clone(),
            lu,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn method(&self) -> &LMMethod {
        &self.method
    }

    pub fn dim(&self) -> usize {
        self.own.len()
    }

    /// Computes `x_{n+m}` from own history `x_n..x_{n+m-1}` and peer gamma
    /// values at `t_n..t_{n+m}`.
    pub fn step(&self, n: usize, own_history: &[&[f64]], peer: &[&[f64]]) -> Result<Vec<f64>> {
        let m = self.method.steps();
        if own_history.len() != m || peer.len() != m + 1 {
            return Err(Error::Dimension(format!(
                "step needs {m} history values and {} peer values",
                m + 1
            )));
        }
        if n + m > self.grid.steps() {
            return Err(Error::IndexOutOfRange {
                index: n + m,
                len: self.grid.steps() + 1,
            });
        }
        let dt = self.grid.dt();
        let mut rhs = vec![0.0; self.own.len()];
        if let Some(f) = &self.forcing {
            for l in 0..=m {
                if self.method.b[l] != 0.0 {
                    let full = f(self.grid.time(n + l));
                    for (r, &gi) in rhs.iter_mut().zip(&self.own) {
                        *r += dt * self.method.b[l] * full[gi];
                    }
                }
            }
        }
        for l in 0..m {
            self.own_stencil[l].mul_vec_acc(-1.0, own_history[l], &mut rhs);
        }
        for (l, y) in peer.iter().enumerate() {
            self.peer_stencil[l].mul_vec_acc(-1.0, y, &mut rhs);
        }
        self.lu.solve_in_place(&mut rhs)?;
        Ok(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MonolithicSystem;

    fn scalar_decay() -> MonolithicSystem {
        MonolithicSystem::new(
            SparseMatrix::identity(1),
            SparseMatrix::identity(1),
            None,
            vec![1.0],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn implicit_euler_closed_form() {
        let sys = scalar_decay();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let w = lmm_solve_monolithic(&sys, &LMMethod::implicit_euler(), &grid).unwrap();
        for n in 0..=8 {
            let exact = (1.0 + grid.dt()).powi(-(n as i32));
            assert!((w.value(n)[0] - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn trapezoidal_closed_form() {
        let sys = scalar_decay();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let w = lmm_solve_monolithic(&sys, &LMMethod::trapezoidal(), &grid).unwrap();
        let dt = grid.dt();
        let g = (1.0 - dt / 2.0) / (1.0 + dt / 2.0);
        for n in 0..=10 {
            assert!((w.value(n)[0] - g.powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn double_root_rejected() {
        let err = LMMethod::new(vec![1.0, -2.0, 1.0], vec![0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::UnstableMethod(_)));
    }

    #[test]
    fn bdf2_accepted() {
        let m = LMMethod::new(vec![0.5, -2.0, 1.5], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.steps(), 2);
    }

    #[test]
    fn inconsistent_method_rejected() {
        assert!(LMMethod::new(vec![-1.0, 1.0], vec![0.0, 2.0]).is_err());
        assert!(LMMethod::new(vec![1.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn grid_time_ordering_is_exact() {
        let g10 = TimeGrid::new(3.0, 10).unwrap();
        let g5 = TimeGrid::new(3.0, 5).unwrap();
        assert_eq!(g10.point(4), g5.point(2));
        assert!(g10.point(3) < g5.point(2));
        assert_eq!(g5.index_of(g10.point(4)), Some(2));
        assert_eq!(g5.index_of(g10.point(3)), None);
        assert_eq!(g10.point(3).floor_index(5), 1);
        assert_eq!(g10.point(3).ceil_index(5), 2);
        assert_eq!(g10.point(10).value(3.0), 3.0);
    }

    #[test]
    fn factorization_reuse_is_bitwise_neutral() {
        let sys = MonolithicSystem::new(
            SparseMatrix::from_dense(&[vec![2.0, 0.1], vec![0.1, 1.0]]).unwrap(),
            SparseMatrix::from_dense(&[vec![1.0, -0.4], vec![-0.3, 0.7]]).unwrap(),
            None,
            vec![1.0, -2.0],
            2.0,
        )
        .unwrap();
        let grid = TimeGrid::new(2.0, 13).unwrap();
        let m = LMMethod::trapezoidal();
        let a = lmm_solve_monolithic_with(&sys, &m, &grid, &[], Factorization::Reuse).unwrap();
        let b = lmm_solve_monolithic_with(&sys, &m, &grid, &[], Factorization::PerStep).unwrap();
        for n in 0..=13 {
            for (x, y) in a.value(n).iter().zip(b.value(n)) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
