//! Discrete convergence theory of WR as a matrix iteration on the
//! all-at-once system, with per-step blocks
//! `C_{n,l} = a_l M_B + b_l dt M_A` and `D_{n,l} = a_l N_B + b_l dt N_A`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, spectral_norm, spectral_radius, LuSolver, SparseMatrix};
use crate::model::splitting::{column_data, split_matrix};
use crate::model::{splitting_with_pair, CoupledPartition, MonolithicSystem, Shape, Splitting};
use crate::par::{self, Execution};
use crate::timeint::LMMethod;
use crate::wr::{IterationRecord, RealizedSplitting, Relaxation};

/// Blocks of one block row `n`: `c[l]`, `d[l]` multiply `e_{n-m+l}`.
#[derive(Clone, Debug)]
pub struct StepBlocks {
    pub c: Vec<SparseMatrix>,
    pub d: Vec<SparseMatrix>,
}

impl StepBlocks {
    fn from_matrices(
        mb: &SparseMatrix,
        nb: &SparseMatrix,
        ma: &SparseMatrix,
        na: &SparseMatrix,
        method: &LMMethod,
        dt: f64,
    ) -> Result<Self> {
        let m = method.steps();
        let c = (0..=m)
            .map(|l| mb.lin_comb(method.a()[l], ma, method.b()[l] * dt))
            .collect::<Result<_>>()?;
        let d = (0..=m)
            .map(|l| nb.lin_comb(method.a()[l], na, method.b()[l] * dt))
            .collect::<Result<_>>()?;
        Ok(Self { c, d })
    }

    pub fn from_splitting(s: &Splitting, method: &LMMethod, dt: f64) -> Result<Self> {
        Self::from_matrices(&s.mb, &s.nb, &s.ma, &s.na, method, dt)
    }
}

/// `C_{n,l}`, `D_{n,l}` for block rows `n = m..=N`. Rows sharing a splitting
/// share storage.
#[derive(Clone, Debug)]
pub struct BlockPair {
    m: usize,
    dim: usize,
    rows: Vec<Arc<StepBlocks>>,
}

impl BlockPair {
    pub fn new(m: usize, rows: Vec<Arc<StepBlocks>>) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.c.first().map(|c| c.nrows()).unwrap_or(0))
            .ok_or_else(|| Error::InvalidParameter("no block rows".into()))?;
        for (i, r) in rows.iter().enumerate() {
            if r.c.len() != m + 1 || r.d.len() != m + 1 {
                return Err(Error::InvalidParameter(format!(
                    "block row {} misses a block",
                    i + m
                )));
            }
            if r.c
                .iter()
                .chain(&r.d)
                .any(|b| b.nrows() != dim || b.ncols() != dim)
            {
                return Err(Error::Dimension(format!(
                    "block row {} has wrong block size",
                    i + m
                )));
            }
        }
        Ok(Self { m, dim, rows })
    }

    /// The same splitting in every block row.
    pub fn constant(
        splitting: &Splitting,
        method: &LMMethod,
        dt: f64,
        steps: usize,
    ) -> Result<Self> {
        let m = method.steps();
        if steps < m {
            return Err(Error::InvalidParameter(
                "fewer steps than the method needs".into(),
            ));
        }
        let row = Arc::new(StepBlocks::from_splitting(splitting, method, dt)?);
        Self::new(m, vec![row; steps - m + 1])
    }

    /// Blocks of a recorded sweep: coupling enters `M` where the row consumed
    /// current-sweep data, and relaxation is taken per point.
    pub fn from_realized(
        system: &MonolithicSystem,
        partition: &CoupledPartition,
        method: &LMMethod,
        dt: f64,
        realized: &RealizedSplitting,
    ) -> Result<Self> {
        Ok(Self::from_realized_all(
            system,
            partition,
            method,
            dt,
            std::slice::from_ref(realized),
        )?
        .remove(0))
    }

    /// One block pair per recorded sweep; identical rows share storage across
    /// sweeps.
    pub fn from_realized_all(
        system: &MonolithicSystem,
        partition: &CoupledPartition,
        method: &LMMethod,
        dt: f64,
        sweeps: &[RealizedSplitting],
    ) -> Result<Vec<Self>> {
        type Key = (bool, bool, u64, u64);
        let m = method.steps();
        let d = system.dim();
        let mut splits: HashMap<Key, [SparseMatrix; 4]> = HashMap::new();
        let mut rows_cache: HashMap<Vec<Key>, Arc<StepBlocks>> = HashMap::new();
        let mut out = Vec::with_capacity(sweeps.len());
        for realized in sweeps {
            if realized.theta_v.len() < realized.steps.len() + m
                || realized.theta_w.len() < realized.steps.len() + m
            {
                return Err(Error::Dimension(
                    "relaxation record shorter than the grid".into(),
                ));
            }
            let mut rows = Vec::with_capacity(realized.steps.len());
            for (s, step) in realized.steps.iter().enumerate() {
                if step.fresh_v_row.len() != m + 1 || step.fresh_w_row.len() != m + 1 {
                    return Err(Error::Dimension(
                        "realized step does not match the method".into(),
                    ));
                }
                let keys: Vec<Key> = (0..=m)
                    .map(|l| {
                        let (tv, tw) = (realized.theta_v[s + l], realized.theta_w[s + l]);
                        (
                            step.fresh_v_row[l],
                            step.fresh_w_row[l],
                            tv.to_bits(),
                            tw.to_bits(),
                        )
                    })
                    .collect();
                if let Some(row) = rows_cache.get(&keys) {
                    rows.push(Arc::clone(row));
                    continue;
                }
                let mut c = Vec::with_capacity(m + 1);
                let mut dd = Vec::with_capacity(m + 1);
                for (l, key) in keys.iter().enumerate() {
                    if !splits.contains_key(key) {
                        let (side, scale) =
                            column_data(partition, d, f64::from_bits(key.2), f64::from_bits(key.3));
                        let (mb, nb) = split_matrix(&system.b, &side, &scale, key.0, key.1)?;
                        let (ma, na) = split_matrix(&system.a, &side, &scale, key.0, key.1)?;
                        splits.insert(*key, [mb, nb, ma, na]);
                    }
                    let [mb, nb, ma, na] = &splits[key];
                    c.push(mb.lin_comb(method.a()[l], ma, method.b()[l] * dt)?);
                    dd.push(nb.lin_comb(method.a()[l], na, method.b()[l] * dt)?);
                }
                let row = Arc::new(StepBlocks { c, d: dd });
                rows_cache.insert(keys, Arc::clone(&row));
                rows.push(row);
            }
            out.push(Self::new(m, rows)?);
        }
        Ok(out)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of block rows `N - m + 1`.
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// Time steps `N`.
    pub fn steps(&self) -> usize {
        self.rows.len() + self.m - 1
    }

    pub fn row(&self, r: usize) -> &StepBlocks {
        &self.rows[r]
    }
}

/// All-at-once matrices over the unknowns `e_m..e_N`; starting errors vanish.
pub fn build_all_at_once(blocks: &BlockPair) -> Result<(SparseMatrix, SparseMatrix)> {
    let (m, d, r) = (blocks.m, blocks.dim, blocks.rows());
    let mut tc = Vec::new();
    let mut td = Vec::new();
    for (row, b) in blocks.rows.iter().enumerate() {
        for l in 0..=m {
            // e_{n-m+l} with n = row + m sits in block column row + l - m.
            let Some(col) = (row + l).checked_sub(m) else {
                continue;
            };
            for (i, j, v) in b.c[l].triplets() {
                tc.push((row * d + i, col * d + j, v));
            }
            for (i, j, v) in b.d[l].triplets() {
                td.push((row * d + i, col * d + j, v));
            }
        }
    }
    Ok((
        SparseMatrix::from_triplets(d * r, d * r, &tc)?,
        SparseMatrix::from_triplets(d * r, d * r, &td)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Two,
    Inf,
}

/// Norms of one diagonal block `C_{n,m}^{-1} D_{n,m}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockNorms {
    pub n: usize,
    /// Whether `C_{n,m}` factorized with finite solves.
    pub nonsingular: bool,
    pub norm2: f64,
    pub norm_inf: f64,
    pub spectral_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Report {
    pub norm: NormKind,
    pub blocks: Vec<BlockNorms>,
    pub max_norm2: f64,
    pub max_norm_inf: f64,
    pub max_spectral_radius: f64,
    pub pass: bool,
}

impl Theorem1Report {
    pub fn max_norm(&self) -> f64 {
        match self.norm {
            NormKind::Two => self.max_norm2,
            NormKind::Inf => self.max_norm_inf,
        }
    }
}

impl fmt::Display for Theorem1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "blocks = {}", self.blocks.len())?;
        writeln!(
            f,
            "singular_blocks = {}",
            self.blocks.iter().filter(|b| !b.nonsingular).count()
        )?;
        writeln!(f, "max_norm2 = {:.6e}", self.max_norm2)?;
        writeln!(f, "max_norm_inf = {:.6e}", self.max_norm_inf)?;
        writeln!(f, "max_spectral_radius = {:.6e}", self.max_spectral_radius)?;
        write!(f, "pass = {}", self.pass)
    }
}

/// `C^{-1} D` restricted to the nonzero columns of `D`, plus those columns.
fn reduced_block(c: &SparseMatrix, d: &SparseMatrix) -> Result<(Mat<f64>, Vec<usize>)> {
    let nz = d.nonzero_columns();
    let lu = LuSolver::new(c)?;
    let mut x = Mat::<f64>::zeros(d.nrows(), nz.len());
    for i in 0..d.nrows() {
        for (j, v) in d.row(i) {
            if let Ok(pos) = nz.binary_search(&j) {
                x[(i, pos)] = v;
            }
        }
    }
    lu.solve_mat(&mut x)?;
    Ok((x, nz))
}

fn block_norms(n: usize, b: &StepBlocks, m: usize, weights: Option<&[f64]>) -> Result<BlockNorms> {
    match reduced_block(&b.c[m], &b.d[m]) {
        Ok((mut x, nz)) => {
            if let Some(w) = weights {
                for j in 0..nz.len() {
                    for i in 0..x.nrows() {
                        x[(i, j)] *= w[i] / w[nz[j]];
                    }
                }
            }
            let sq = Mat::<f64>::from_fn(nz.len(), nz.len(), |i, j| x[(nz[i], j)]);
            Ok(BlockNorms {
                n,
                nonsingular: true,
                norm2: spectral_norm(&x)?,
                norm_inf: inf_norm(&x),
                spectral_radius: spectral_radius(&sq)?,
            })
        }
        Err(Error::Singular(_)) => Ok(BlockNorms {
            n,
            nonsingular: false,
            norm2: f64::INFINITY,
            norm_inf: f64::INFINITY,
            spectral_radius: f64::INFINITY,
        }),
        Err(e) => Err(e),
    }
}

/// Diagonal-block norms; passes iff every block is nonsingular with norm < 1.
/// Runs on the calling thread; `theorem1_check_with` can fan out.
pub fn theorem1_check(blocks: &BlockPair, norm: NormKind) -> Result<Theorem1Report> {
    theorem1_check_with(Execution::Sequential, blocks, norm)
}

pub fn theorem1_check_with(
    exec: Execution,
    blocks: &BlockPair,
    norm: NormKind,
) -> Result<Theorem1Report> {
    theorem1_check_weighted(exec, blocks, norm, None)
}

/// Norms in the weighted coordinates `W e`, `W = diag(weights)`: the induced
/// norm is `||W C^{-1} D W^{-1}||`. Radii are unaffected.
pub fn theorem1_check_weighted(
    exec: Execution,
    blocks: &BlockPair,
    norm: NormKind,
    weights: Option<&[f64]>,
) -> Result<Theorem1Report> {
    if let Some(w) = weights {
        if w.len() != blocks.dim || w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(
                "weights must be positive, one per unknown".into(),
            ));
        }
    }
    // Evaluate each distinct block once.
    let mut unique: Vec<usize> = Vec::new();
    let mut which = Vec::with_capacity(blocks.rows());
    for r in 0..blocks.rows() {
        let found = unique
            .iter()
            .position(|&u| Arc::ptr_eq(&blocks.rows[u], &blocks.rows[r]));
        which.push(match found {
            Some(i) => i,
            None => {
                unique.push(r);
                unique.len() - 1
            }
        });
    }
    let computed: Vec<Result<BlockNorms>> = par::map(exec, &unique, |&r| {
        block_norms(r + blocks.m, &blocks.rows[r], blocks.m, weights)
    });
    let computed: Vec<BlockNorms> = computed.into_iter().collect::<Result<_>>()?;
    let list: Vec<BlockNorms> = which
        .iter()
        .enumerate()
        .map(|(r, &u)| BlockNorms {
            n: r + blocks.m,
            ..computed[u]
        })
        .collect();
    let max = |f: fn(&BlockNorms) -> f64| list.iter().map(f).fold(0.0, f64::max);
    let (max_norm2, max_norm_inf, max_spectral_radius) = (
        max(|b| b.norm2),
        max(|b| b.norm_inf),
        max(|b| b.spectral_radius),
    );
    let chosen = match norm {
        NormKind::Two => max_norm2,
        NormKind::Inf => max_norm_inf,
    };
    Ok(Theorem1Report {
        norm,
        pass: list.iter().all(|b| b.nonsingular) && chosen < 1.0,
        blocks: list,
        max_norm2,
        max_norm_inf,
        max_spectral_radius,
    })
}

fn weighted_norm2(x: &Mat<f64>, nz: &[usize], w: &[f64]) -> Result<f64> {
    let y = Mat::<f64>::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i] / w[nz[j]]);
    spectral_norm(&y)
}

/// Diagonal weights for which Theorem 1 is checked: exchanged w data keeps
/// weight 1, exchanged v data gets `s` and all other unknowns `eps`, with
/// `(s, eps)` minimizing the largest weighted 2-norm over the given blocks.
/// The raw 2-norm depends on the units of the exchanged quantities; this is
/// the tightest norm of that family.
pub fn balanced_weights(partition: &CoupledPartition, blocks: &[&BlockPair]) -> Result<Vec<f64>> {
    let d = partition.dim();
    let mut reduced = Vec::new();
    let mut seen: Vec<&Arc<StepBlocks>> = Vec::new();
    for b in blocks {
        for r in &b.rows {
            if seen.iter().any(|s| Arc::ptr_eq(s, r)) {
                continue;
            }
            seen.push(r);
            match reduced_block(&r.c[b.m], &r.d[b.m]) {
                Ok(x) => reduced.push(x),
                Err(Error::Singular(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let weights = |log_s: f64, log_eps: f64| {
        let mut w = vec![10f64.powf(log_eps); d];
        for &g in &partition.gamma_v {
            w[g] = 10f64.powf(log_s);
        }
        for &g in &partition.gamma_w {
            w[g] = 1.0;
        }
        w
    };
    let worst = |log_s: f64, log_eps: f64| -> Result<f64> {
        let w = weights(log_s, log_eps);
        reduced
            .iter()
            .try_fold(0.0f64, |m, (x, nz)| Ok(m.max(weighted_norm2(x, nz, &w)?)))
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for ie in 0..=24 {
        for is in -48..=48 {
            let (ls, le) = (is as f64 * 0.25, -(ie as f64) * 0.5);
            let v = worst(ls, le)?;
            if v < best.0 {
                best = (v, ls, le);
            }
        }
    }
    let mut step = (0.125, 0.25);
    for _ in 0..6 {
        let (_, ls, le) = best;
        for ds in [-1.0, 0.0, 1.0] {
            for de in [-1.0, 0.0, 1.0] {
                let (s2, e2) = (ls + ds * step.0, (le + de * step.1).min(0.0));
                let v = worst(s2, e2)?;
                if v < best.0 {
                    best = (v, s2, e2);
                }
            }
        }
        step = (step.0 / 2.0, step.1 / 2.0);
    }
    Ok(weights(best.1, best.2))
}

/// Constant block pairs of the three shapes under `relax`.
pub fn shape_blocks(
    system: &MonolithicSystem,
    partition: &CoupledPartition,
    method: &LMMethod,
    dt: f64,
    steps: usize,
    relax: &Relaxation,
) -> Result<Vec<(Shape, BlockPair)>> {
    Shape::ALL
        .iter()
        .map(|&shape| {
            let (tv, tw) = relax.pair(shape);
            let s = splitting_with_pair(system, partition, shape, tv, tw)?;
            Ok((shape, BlockPair::constant(&s, method, dt, steps)?))
        })
        .collect()
}

/// Theorem-1 reports for the three constant shapes, optionally in weighted
/// coordinates.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_shapes(
    system: &MonolithicSystem,
    partition: &CoupledPartition,
    method: &LMMethod,
    dt: f64,
    steps: usize,
    relax: &Relaxation,
    norm: NormKind,
    weights: Option<&[f64]>,
) -> Result<Vec<(Shape, Theorem1Report)>> {
    shape_blocks(system, partition, method, dt, steps, relax)?
        .into_iter()
        .map(|(shape, b)| {
            Ok((
                shape,
                theorem1_check_weighted(Execution::Sequential, &b, norm, weights)?,
            ))
        })
        .collect()
}

/// Error iterates `e^(0), e^(1), ...` on points `0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorHistory {
    pub errors: Vec<Vec<Vec<f64>>>,
}

impl ErrorHistory {
    /// `||e_n^(k)||_2` indexed `[k][n]`.
    pub fn norms(&self) -> Vec<Vec<f64>> {
        self.errors
            .iter()
            .map(|e| e.iter().map(|x| crate::linalg::norm2(x)).collect())
            .collect()
    }
}

/// Forward substitution of `C e^(k+1) = D e^(k)` with a fresh block pair per
/// iteration. Starting errors `e_0..e_{m-1}` of every new iterate are zero.
pub fn error_recursion_seq(sweeps: &[BlockPair], e0: &[Vec<f64>]) -> Result<ErrorHistory> {
    let mut errors = vec![e0.to_vec()];
    let mut lus: Vec<(Arc<StepBlocks>, Arc<LuSolver>)> = Vec::new();
    for blocks in sweeps {
        let (m, d) = (blocks.m, blocks.dim);
        if e0.len() != blocks.steps() + 1 || e0.iter().any(|x| x.len() != d) {
            return Err(Error::Dimension(
                "initial error does not match the blocks".into(),
            ));
        }
        let prev = errors.last().unwrap();
        let mut next = vec![vec![0.0; d]; blocks.steps() + 1];
        for (row, b) in blocks.rows.iter().enumerate() {
            let n = row + m;
            let mut rhs = vec![0.0; d];
            for l in 0..=m {
                b.d[l].mul_vec_acc(1.0, &prev[n - m + l], &mut rhs);
            }
            for l in 0..m {
                b.c[l].mul_vec_acc(-1.0, &next[n - m + l], &mut rhs);
            }
            let lu = match lus.iter().find(|(k, _)| Arc::ptr_eq(k, b)) {
                Some((_, lu)) => Arc::clone(lu),
                None => {
                    let lu = Arc::new(LuSolver::new(&b.c[m])?);
                    lus.push((Arc::clone(b), Arc::clone(&lu)));
                    lu
                }
            };
            lu.solve_in_place(&mut rhs)?;
            next[n] = rhs;
        }
        errors.push(next);
    }
    Ok(ErrorHistory { errors })
}

/// Error recursion for a constant splitting over `iterations` sweeps.
pub fn error_recursion(
    blocks: &BlockPair,
    e0: &[Vec<f64>],
    iterations: usize,
) -> Result<ErrorHistory> {
    error_recursion_seq(&vec![blocks.clone(); iterations], e0)
}

/// Dense `C_full^{-1} D_full`; refuses dimensions above `cap`.
pub fn iteration_matrix(blocks: &BlockPair, cap: usize) -> Result<Mat<f64>> {
    let dim = blocks.dim * blocks.rows();
    if dim > cap {
        return Err(Error::TooLarge { dim, cap });
    }
    let (c, d) = build_all_at_once(blocks)?;
    let mut x = d.to_dense();
    LuSolver::new(&c)?.solve_mat(&mut x)?;
    Ok(x)
}

/// Spectral radius of the full iteration matrix (dense; capped dimension).
pub fn iteration_spectral_radius(blocks: &BlockPair, cap: usize) -> Result<f64> {
    spectral_radius(&iteration_matrix(blocks, cap)?)
}

/// Geometric mean of the last (up to four) ratios of successive update
/// norms, ignoring updates at roundoff level. An even window averages out the
/// period-two oscillation typical of Jacobi sweeps.
pub fn observed_contraction(records: &[IterationRecord]) -> Option<f64> {
    let first = records.first()?.update_norm;
    let floor = first * 1e-12;
    let ratios: Vec<f64> = records
        .windows(2)
        .filter(|w| w[1].update_norm > floor && w[0].update_norm > 0.0)
        .map(|w| w[1].update_norm / w[0].update_norm)
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(4)..];
    if tail.is_empty() {
        return None;
    }
    Some((tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp())
}
