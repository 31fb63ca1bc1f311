//! Linear coupled systems `B u' + A u = f`, their partition, and WR splittings.

pub mod heat;
pub(crate) mod splitting;

use std::fmt;
use std::sync::Arc;

pub use heat::{
    assemble_heat, initial_flux, Dimension, HeatProblem, HeatProblemConfig, InitialTemperature,
};
pub use splitting::{splitting, splitting_with_pair, Shape, Splitting};

use crate::error::{Error, Result};
use crate::linalg::{LuSolver, SparseMatrix};

/// Time-dependent right-hand side `t -> f(t)`.
pub type Forcing = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams {
    pub name: String,
    /// Volumetric heat capacity `rho * c_p`.
    pub alpha: f64,
    /// Thermal conductivity.
    pub lambda: f64,
}

impl MaterialParams {
    pub fn new(name: &str, alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "material {name}: alpha and lambda must be positive"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            alpha,
            lambda,
        })
    }

    pub fn air() -> Self {
        Self {
            name: "air".into(),
            alpha: 1.293 * 1005.0,
            lambda: 0.0243,
        }
    }

    pub fn water() -> Self {
        Self {
            name: "water".into(),
            alpha: 999.7 * 4192.1,
            lambda: 0.58,
        }
    }

    pub fn steel() -> Self {
        Self {
            name: "steel".into(),
            alpha: 7836.0 * 443.0,
            lambda: 48.9,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "air" => Ok(Self::air()),
            "water" => Ok(Self::water()),
            "steel" => Ok(Self::steel()),
            other => Err(Error::Config(format!("unknown material `{other}`"))),
        }
    }

    pub fn diffusivity(&self) -> f64 {
        self.lambda / self.alpha
    }
}

/// Parses `air-steel`, `water-steel`, ... into (Omega_1, Omega_2) materials.
/// `same` gives air on both sides.
pub fn material_pair(name: &str) -> Result<(MaterialParams, MaterialParams)> {
    if name == "same" {
        return Ok((MaterialParams::air(), MaterialParams::air()));
    }
    let (a, b) = name
        .split_once('-')
        .ok_or_else(|| Error::Config(format!("material pair `{name}` is not of the form a-b")))?;
    Ok((MaterialParams::by_name(a)?, MaterialParams::by_name(b)?))
}

/// `B u' + A u = f(t)`, `u(0) = u0` on `[0, tf]`.
#[derive(Clone)]
pub struct MonolithicSystem {
    pub b: SparseMatrix,
    pub a: SparseMatrix,
    pub forcing: Option<Forcing>,
    pub u0: Vec<f64>,
    pub tf: f64,
}

impl fmt::Debug for MonolithicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonolithicSystem")
            .field("dim", &self.dim())
            .field("tf", &self.tf)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

impl MonolithicSystem {
    /// Checks shapes and that `B` factorizes.
    pub fn new(
        b: SparseMatrix,
        a: SparseMatrix,
        forcing: Option<Forcing>,
        u0: Vec<f64>,
        tf: f64,
    ) -> Result<Self> {
        let d = u0.len();
        if b.nrows() != d || b.ncols() != d || a.nrows() != d || a.ncols() != d {
            return Err(Error::Dimension(format!(
                "B is {}x{}, A is {}x{}, u0 has {d} entries",
                b.nrows(),
                b.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if !(tf > 0.0) {
            return Err(Error::InvalidParameter(
                "final time must be positive".into(),
            ));
        }
        LuSolver::new(&b).map_err(|_| Error::Singular("B".into()))?;
        Ok(Self {
            b,
            a,
            forcing,
            u0,
            tf,
        })
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn has_forcing(&self) -> bool {
        self.forcing.is_some()
    }

    pub fn forcing_at(&self, t: f64) -> Vec<f64> {
        match &self.forcing {
            Some(f) => f(t),
            None => vec![0.0; self.dim()],
        }
    }
}

/// 2x2 block partition into `v` (first subsystem) and `w` (second).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledPartition {
    pub v_indices: Vec<usize>,
    pub w_indices: Vec<usize>,
    /// v-unknowns the w-subsystem depends on.
    pub gamma_v: Vec<usize>,
    /// w-unknowns the v-subsystem depends on.
    pub gamma_w: Vec<usize>,
}

impl CoupledPartition {
    pub fn new(
        d: usize,
        v_indices: Vec<usize>,
        w_indices: Vec<usize>,
        gamma_v: Vec<usize>,
        gamma_w: Vec<usize>,
    ) -> Result<Self> {
        let mut seen = vec![0u8; d];
        for &i in v_indices.iter().chain(&w_indices) {
            if i >= d {
                return Err(Error::Dimension(format!("index {i} outside 0..{d}")));
            }
            seen[i] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::InvalidParameter(
                "v and w must partition 0..d".into(),
            ));
        }
        if !gamma_v.iter().all(|g| v_indices.contains(g))
            || !gamma_w.iter().all(|g| w_indices.contains(g))
        {
            return Err(Error::InvalidParameter(
                "gamma sets must lie in their subsystem".into(),
            ));
        }
        Ok(Self {
            v_indices,
            w_indices,
            gamma_v,
            gamma_w,
        })
    }

    pub fn dim(&self) -> usize {
        self.v_indices.len() + self.w_indices.len()
    }

    /// Positions of `gamma_v` within the v-vector.
    pub fn gamma_v_local(&self) -> Vec<usize> {
        local_positions(&self.v_indices, &self.gamma_v)
    }

    /// Positions of `gamma_w` within the w-vector.
    pub fn gamma_w_local(&self) -> Vec<usize> {
        local_positions(&self.w_indices, &self.gamma_w)
    }

    /// Splits a full vector into its (v, w) parts.
    pub fn split(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.v_indices.iter().map(|&i| u[i]).collect(),
            self.w_indices.iter().map(|&i| u[i]).collect(),
        )
    }

    /// Inverse of [`split`](Self::split).
    pub fn join(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.dim()];
        for (&i, x) in self.v_indices.iter().zip(v) {
            u[i] = *x;
        }
        for (&i, x) in self.w_indices.iter().zip(w) {
            u[i] = *x;
        }
        u
    }
}

fn local_positions(set: &[usize], subset: &[usize]) -> Vec<usize> {
    subset
        .iter()
        .map(|g| set.iter().position(|i| i == g).expect("subset of set"))
        .collect()
}
