use super::{CoupledPartition, MonolithicSystem};
use crate::error::{Error, Result};
use crate::linalg::{LuSolver, SparseMatrix};
use crate::relaxopt::RelaxTable;

/// Local data-dependency shape of a WR step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Jacobi,
    /// Dirichlet side (v) first; w consumes fresh v data.
    GsDn,
    /// Neumann side (w) first; v consumes fresh w data.
    GsNd,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Jacobi, Shape::GsDn, Shape::GsNd];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Jacobi => "jacobi",
            Shape::GsDn => "gs-dn",
            Shape::GsNd => "gs-nd",
        }
    }
}

/// `B = MB - NB`, `A = MA - NA` with relaxation of the exchanged unknowns
/// folded into the diagonal blocks.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub mb: SparseMatrix,
    pub nb: SparseMatrix,
    pub ma: SparseMatrix,
    pub na: SparseMatrix,
    pub kind: Shape,
    pub theta_v: f64,
    pub theta_w: f64,
}

/// Splitting for `kind` with the relaxation pair the table assigns to it.
pub fn splitting(
    system: &MonolithicSystem,
    partition: &CoupledPartition,
    kind: Shape,
    table: &RelaxTable,
) -> Result<Splitting> {
    let (tv, tw) = table.pair(kind);
    splitting_with_pair(system, partition, kind, tv, tw)
}

/// Splitting with explicit relaxation of v's and w's exchanged unknowns.
pub fn splitting_with_pair(
    system: &MonolithicSystem,
    partition: &CoupledPartition,
    kind: Shape,
    theta_v: f64,
    theta_w: f64,
) -> Result<Splitting> {
    let d = system.dim();
    if partition.dim() != d {
        return Err(Error::Dimension(
            "partition does not match the system".into(),
        ));
    }
    for t in [theta_v, theta_w] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "relaxation {t} must be positive"
            )));
        }
    }
    let (side, col_scale) = column_data(partition, d, theta_v, theta_w);
    let (fresh_w_in_v, fresh_v_in_w) = match kind {
        Shape::Jacobi => (false, false),
        Shape::GsDn => (false, true),
        Shape::GsNd => (true, false),
    };
    let (mb, nb) = split_matrix(&system.b, &side, &col_scale, fresh_w_in_v, fresh_v_in_w)?;
    let (ma, na) = split_matrix(&system.a, &side, &col_scale, fresh_w_in_v, fresh_v_in_w)?;
    LuSolver::new(&mb).map_err(|_| Error::Singular("M_B".into()))?;
    Ok(Splitting {
        mb,
        nb,
        ma,
        na,
        kind,
        theta_v,
        theta_w,
    })
}

/// Side of every unknown (false = v) and its inverse relaxation factor.
pub(crate) fn column_data(
    partition: &CoupledPartition,
    d: usize,
    theta_v: f64,
    theta_w: f64,
) -> (Vec<bool>, Vec<f64>) {
    let mut side = vec![false; d];
    for &i in &partition.w_indices {
        side[i] = true;
    }
    let mut scale = vec![1.0; d];
    for &i in &partition.gamma_v {
        scale[i] = 1.0 / theta_v;
    }
    for &i in &partition.gamma_w {
        scale[i] = 1.0 / theta_w;
    }
    (side, scale)
}

/// Splits one matrix given per-column inverse relaxation and which coupling
/// blocks move to the left-hand side.
pub(crate) fn split_matrix(
    x: &SparseMatrix,
    side: &[bool],
    col_scale: &[f64],
    fresh_w_in_v: bool,
    fresh_v_in_w: bool,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let mut tm = Vec::with_capacity(x.nnz());
    let mut tn = Vec::new();
    for (i, j, val) in x.triplets() {
        if side[i] == side[j] {
            let s = col_scale[j];
            if s == 1.0 {
                tm.push((i, j, val));
            } else {
                let m = val * s;
                tm.push((i, j, m));
                tn.push((i, j, m - val));
            }
        } else {
            let to_m = if side[i] { fresh_v_in_w } else { fresh_w_in_v };
            if to_m {
                tm.push((i, j, val));
            } else {
                tn.push((i, j, -val));
            }
        }
    }
    Ok((
        SparseMatrix::from_triplets(x.nrows(), x.ncols(), &tm)?,
        SparseMatrix::from_triplets(x.nrows(), x.ncols(), &tn)?,
    ))
}
