//! P1 finite-element semi-discretization of two heat equations coupled
//! through temperature and flux continuity at `x = 0`.
//!
//! Unknown layout: `v = [Omega_1 interior, Q]`, `w = [Omega_2 interior, u_Gamma]`,
//! where `Q` is the time-integrated interface flux (`Q' = q`). Its row reads
//! `Q' - [M1 u' + K1 u]_Gamma = 0`; Omega_2's interface rows receive `+Q'`.

use std::fmt;
use std::sync::Arc;

use super::{CoupledPartition, MaterialParams, MonolithicSystem};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    One,
    Two,
}

impl std::str::FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "1d" | "1D" => Ok(Self::One),
            "2" | "2d" | "2D" => Ok(Self::Two),
            other => Err(Error::Config(format!("unknown dimension `{other}`"))),
        }
    }
}

/// Initial temperature `u0(x)`; `x` has one or two coordinates.
#[derive(Clone)]
pub enum InitialTemperature {
    /// `a sin(pi/2 (x1 + 1))`, times `sin(pi x2)` in 2D.
    Sine {
        amplitude: f64,
    },
    Constant(f64),
    Custom {
        value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        /// Derivative with respect to `x1`.
        grad_x: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for InitialTemperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sine { amplitude } => write!(f, "Sine({amplitude})"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Default for InitialTemperature {
    fn default() -> Self {
        Self::Sine { amplitude: 500.0 }
    }
}

impl InitialTemperature {
    pub fn value(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            Self::Sine { amplitude } => {
                let base = amplitude * (PI / 2.0 * (x[0] + 1.0)).sin();
                if x.len() > 1 {
                    base * (PI * x[1]).sin()
                } else {
                    base
                }
            }
            Self::Constant(c) => *c,
            Self::Custom { value, .. } => value(x),
        }
    }

    pub fn grad_x(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            Self::Sine { amplitude } => {
                let base = amplitude * PI / 2.0 * (PI / 2.0 * (x[0] + 1.0)).cos();
                if x.len() > 1 {
                    base * (PI * x[1]).sin()
                } else {
                    base
                }
            }
            Self::Constant(_) => 0.0,
            Self::Custom { grad_x, .. } => grad_x(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeatProblemConfig {
    pub dimension: Dimension,
    pub dx: f64,
    /// Materials of (Omega_1, Omega_2).
    pub materials: (MaterialParams, MaterialParams),
    pub tf: f64,
    pub nv: usize,
    pub nw: usize,
    pub initial: InitialTemperature,
}

impl HeatProblemConfig {
    pub fn new(
        dimension: Dimension,
        dx: f64,
        materials: (MaterialParams, MaterialParams),
        tf: f64,
        steps: usize,
    ) -> Self {
        Self {
            dimension,
            dx,
            materials,
            tf,
            nv: steps,
            nw: steps,
            initial: InitialTemperature::default(),
        }
    }

    /// Cells per unit length, checking that `1/dx` is an integer >= 2.
    pub fn cells(&self) -> Result<usize> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Mesh(format!("dx = {} must be positive", self.dx)));
        }
        let m = (1.0 / self.dx).round();
        if (m * self.dx - 1.0).abs() > 1e-9 {
            return Err(Error::Mesh(format!(
                "1/dx = {} is not an integer",
                1.0 / self.dx
            )));
        }
        if m < 2.0 {
            return Err(Error::Mesh("need at least two cells per subdomain".into()));
        }
        Ok(m as usize)
    }

    fn validate(&self) -> Result<usize> {
        let m = self.cells()?;
        if self.nv == 0 || self.nw == 0 {
            return Err(Error::InvalidParameter("step counts must be >= 1".into()));
        }
        if !(self.tf > 0.0) {
            return Err(Error::InvalidParameter(
                "final time must be positive".into(),
            ));
        }
        for mat in [&self.materials.0, &self.materials.1] {
            MaterialParams::new(&mat.name, mat.alpha, mat.lambda)?;
        }
        Ok(m)
    }
}

/// Assembled benchmark plus the layout needed by the solvers.
#[derive(Clone, Debug)]
pub struct HeatProblem {
    pub config: HeatProblemConfig,
    pub system: MonolithicSystem,
    pub partition: CoupledPartition,
    /// Quadrature weight of the discrete interface L2 norm (1 in 1D, `dx` in 2D).
    pub interface_weight: f64,
    pub n_interior_1: usize,
    pub n_interior_2: usize,
    pub n_interface: usize,
}

impl HeatProblem {
    /// Discrete interface L2 norm.
    pub fn interface_norm(&self, x: &[f64]) -> f64 {
        crate::linalg::weighted_norm(x, self.interface_weight)
    }

    /// Monolithic matrices with the flux unknown eliminated, ordered as
    /// `[Omega_1 interior, Omega_2 interior, u_Gamma]`.
    pub fn eliminate_flux(&self) -> (SparseMatrix, SparseMatrix) {
        let p = &self.partition;
        let keep: Vec<usize> = (0..self.n_interior_1)
            .chain(p.w_indices.iter().copied())
            .collect();
        let reduce = |m: &SparseMatrix| {
            let mut t = m.triplets();
            for (&q, &ug) in p.gamma_v.iter().zip(&p.gamma_w) {
                for (j, val) in m.row(q) {
                    t.push((ug, j, -val));
                }
            }
            let full = SparseMatrix::from_triplets(m.nrows(), m.ncols(), &t).expect("in range");
            full.submatrix(&keep, &keep)
        };
        (reduce(&self.system.b), reduce(&self.system.a))
    }
}

enum Node {
    Dirichlet,
    Interior1(usize),
    Interface(usize),
    Interior2(usize),
}

struct Layout {
    n1: usize,
    g: usize,
    n2: usize,
}

impl Layout {
    fn v_interior(&self, k: usize) -> usize {
        k
    }
    fn q(&self, j: usize) -> usize {
        self.n1 + j
    }
    fn w_interior(&self, k: usize) -> usize {
        self.n1 + self.g + k
    }
    fn u_gamma(&self, j: usize) -> usize {
        self.n1 + self.g + self.n2 + j
    }
    fn dim(&self) -> usize {
        self.n1 + 2 * self.g + self.n2
    }
    fn unknown(&self, node: &Node) -> Option<usize> {
        match *node {
            Node::Dirichlet => None,
            Node::Interior1(k) => Some(self.v_interior(k)),
            Node::Interface(j) => Some(self.u_gamma(j)),
            Node::Interior2(k) => Some(self.w_interior(k)),
        }
    }
}

/// An element: node list, subdomain (1 or 2), local mass and stiffness.
struct Element {
    nodes: Vec<Node>,
    side: u8,
    mass: Vec<Vec<f64>>,
    stiff: Vec<Vec<f64>>,
}

pub fn assemble_heat(config: &HeatProblemConfig) -> Result<HeatProblem> {
    let m = config.validate()?;
    let (layout, elements, coords) = match config.dimension {
        Dimension::One => mesh_1d(m, config),
        Dimension::Two => mesh_2d(m, config),
    };
    let d = layout.dim();
    let mut tb = Vec::new();
    let mut ta = Vec::new();
    for el in &elements {
        for (a, na) in el.nodes.iter().enumerate() {
            let (row, sign) = match *na {
                Node::Dirichlet => continue,
                Node::Interior1(k) => (layout.v_interior(k), 1.0),
                // Omega_1's interface test functions define the flux row.
                Node::Interface(j) if el.side == 1 => (layout.q(j), -1.0),
                Node::Interface(j) => (layout.u_gamma(j), 1.0),
                Node::Interior2(k) => (layout.w_interior(k), 1.0),
            };
            for (b, nb) in el.nodes.iter().enumerate() {
                if let Some(col) = layout.unknown(nb) {
                    tb.push((row, col, sign * el.mass[a][b]));
                    ta.push((row, col, sign * el.stiff[a][b]));
                }
            }
        }
    }
    for j in 0..layout.g {
        tb.push((layout.q(j), layout.q(j), 1.0));
        tb.push((layout.u_gamma(j), layout.q(j), 1.0));
    }
    let b = SparseMatrix::from_triplets(d, d, &tb)?;
    let a = SparseMatrix::from_triplets(d, d, &ta)?;

    let mut u0 = vec![0.0; d];
    for (idx, x) in &coords {
        u0[*idx] = config.initial.value(x);
    }
    let system = MonolithicSystem::new(b, a, None, u0, config.tf)?;

    let v_indices: Vec<usize> = (0..layout.n1 + layout.g).collect();
    let w_indices: Vec<usize> = (layout.n1 + layout.g..d).collect();
    let gamma_v: Vec<usize> = (0..layout.g).map(|j| layout.q(j)).collect();
    let gamma_w: Vec<usize> = (0..layout.g).map(|j| layout.u_gamma(j)).collect();
    let partition = CoupledPartition::new(d, v_indices, w_indices, gamma_v, gamma_w)?;
    let interface_weight = match config.dimension {
        Dimension::One => 1.0,
        Dimension::Two => config.dx,
    };
    Ok(HeatProblem {
        config: config.clone(),
        system,
        partition,
        interface_weight,
        n_interior_1: layout.n1,
        n_interior_2: layout.n2,
        n_interface: layout.g,
    })
}

type Mesh = (Layout, Vec<Element>, Vec<(usize, Vec<f64>)>);

fn mesh_1d(m: usize, config: &HeatProblemConfig) -> Mesh {
    let h = config.dx;
    let layout = Layout {
        n1: m - 1,
        g: 1,
        n2: m - 1,
    };
    let node = |i: usize| -> Node {
        if i == 0 || i == 2 * m {
            Node::Dirichlet
        } else if i < m {
            Node::Interior1(i - 1)
        } else if i == m {
            Node::Interface(0)
        } else {
            Node::Interior2(i - m - 1)
        }
    };
    let x = |i: usize| -1.0 + i as f64 * h;
    let mut elements = Vec::with_capacity(2 * m);
    for i in 0..2 * m {
        let (side, mat) = if i < m {
            (1, &config.materials.0)
        } else {
            (2, &config.materials.1)
        };
        let mm = mat.alpha * h / 6.0;
        let kk = mat.lambda / h;
        elements.push(Element {
            nodes: vec![node(i), node(i + 1)],
            side,
            mass: vec![vec![2.0 * mm, mm], vec![mm, 2.0 * mm]],
            stiff: vec![vec![kk, -kk], vec![-kk, kk]],
        });
    }
    let coords = (1..2 * m)
        .filter_map(|i| layout.unknown(&node(i)).map(|u| (u, vec![x(i)])))
        .collect();
    (layout, elements, coords)
}

fn mesh_2d(m: usize, config: &HeatProblemConfig) -> Mesh {
    let h = config.dx;
    let g = m - 1;
    let layout = Layout {
        n1: (m - 1) * (m - 1),
        g,
        n2: (m - 1) * (m - 1),
    };
    let node = |i: usize, j: usize| -> Node {
        if i == 0 || i == 2 * m || j == 0 || j == m {
            Node::Dirichlet
        } else if i < m {
            Node::Interior1((j - 1) * (m - 1) + (i - 1))
        } else if i == m {
            Node::Interface(j - 1)
        } else {
            Node::Interior2((j - 1) * (m - 1) + (i - m - 1))
        }
    };
    let pos = |i: usize, j: usize| [-1.0 + i as f64 * h, j as f64 * h];
    let mut elements = Vec::with_capacity(4 * m * m);
    for j in 0..m {
        for i in 0..2 * m {
            let (side, mat) = if i < m {
                (1, &config.materials.0)
            } else {
                (2, &config.materials.1)
            };
            for tri in [
                [(i, j), (i + 1, j), (i + 1, j + 1)],
                [(i, j), (i + 1, j + 1), (i, j + 1)],
            ] {
                let p: Vec<[f64; 2]> = tri.iter().map(|&(a, b)| pos(a, b)).collect();
                let (mass, stiff) = p1_triangle(&p, mat);
                elements.push(Element {
                    nodes: tri.iter().map(|&(a, b)| node(a, b)).collect(),
                    side,
                    mass,
                    stiff,
                });
            }
        }
    }
    let mut coords = Vec::new();
    for j in 1..m {
        for i in 1..2 * m {
            if let Some(u) = layout.unknown(&node(i, j)) {
                coords.push((u, pos(i, j).to_vec()));
            }
        }
    }
    (layout, elements, coords)
}

fn p1_triangle(p: &[[f64; 2]], mat: &MaterialParams) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = det.abs() / 2.0;
    // grad phi_a = (y_b - y_c, x_c - x_b) / det for (a, b, c) cyclic.
    let grads: Vec<[f64; 2]> = (0..3)
        .map(|a| {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det]
        })
        .collect();
    let mut mass = vec![vec![0.0; 3]; 3];
    let mut stiff = vec![vec![0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let f = if a == b { 2.0 } else { 1.0 };
            mass[a][b] = mat.alpha * area * f / 12.0;
            stiff[a][b] =
                mat.lambda * area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
        }
    }
    (mass, stiff)
}

/// `q0_j = lambda_1 * int_Gamma (grad u0 . n1) phi_j dS` on the interface nodes.
pub fn initial_flux(config: &HeatProblemConfig) -> Result<Vec<f64>> {
    let m = config.cells()?;
    let lambda1 = config.materials.0.lambda;
    match config.dimension {
        Dimension::One => Ok(vec![lambda1 * config.initial.grad_x(&[0.0])]),
        Dimension::Two => {
            let h = config.dx;
            // 5-point Gauss-Legendre on each half of the hat support.
            const X: [f64; 5] = [
                -0.906_179_845_938_664,
                -0.538_469_310_105_683,
                0.0,
                0.538_469_310_105_683,
                0.906_179_845_938_664,
            ];
            const W: [f64; 5] = [
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ];
            let mut q = Vec::with_capacity(m - 1);
            for j in 1..m {
                let yj = j as f64 * h;
                let mut s = 0.0;
                for (lo, hi) in [(yj - h, yj), (yj, yj + h)] {
                    for (xi, wi) in X.iter().zip(W) {
                        let y = 0.5 * (lo + hi) + 0.5 * h * xi;
                        let phi = 1.0 - (y - yj).abs() / h;
                        s += 0.5 * h * wi * config.initial.grad_x(&[0.0, y]) * phi;
                    }
                }
                q.push(lambda1 * s);
            }
            Ok(q)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: Dimension, dx: f64, pair: (MaterialParams, MaterialParams)) -> HeatProblemConfig {
        HeatProblemConfig::new(dim, dx, pair, 1e4, 10)
    }

    #[test]
    fn sizes() {
        let p = assemble_heat(&cfg(
            Dimension::One,
            0.25,
            (MaterialParams::air(), MaterialParams::steel()),
        ))
        .unwrap();
        assert_eq!(p.system.dim(), 8);
        let p2 = assemble_heat(&cfg(
            Dimension::Two,
            0.25,
            (MaterialParams::air(), MaterialParams::steel()),
        ))
        .unwrap();
        assert_eq!(p2.system.dim(), 9 + 3 + 9 + 3);
        assert_eq!(p2.n_interface, 3);
    }

    #[test]
    fn bad_mesh_rejected() {
        let pair = (MaterialParams::air(), MaterialParams::steel());
        assert!(matches!(
            assemble_heat(&cfg(Dimension::One, 0.3, pair.clone())),
            Err(Error::Mesh(_))
        ));
        assert!(assemble_heat(&cfg(Dimension::One, 1.0, pair.clone())).is_err());
        assert!(assemble_heat(&cfg(Dimension::One, 0.0, pair)).is_err());
    }

    #[test]
    fn constant_initial_gives_zero_flux() {
        let mut c = cfg(
            Dimension::Two,
            0.125,
            (MaterialParams::air(), MaterialParams::water()),
        );
        c.initial = InitialTemperature::Constant(3.0);
        assert!(initial_flux(&c).unwrap().iter().all(|&q| q == 0.0));
    }

    #[test]
    fn node_away_from_boundary_2d() {
        // Node (6, 2) of the 8x4 mesh touches no Dirichlet node: its mass row
        // integrates the hat function (alpha h^2) and its stiffness row sums to 0.
        let c = cfg(
            Dimension::Two,
            0.25,
            (MaterialParams::steel(), MaterialParams::steel()),
        );
        let p = assemble_heat(&c).unwrap();
        let a2 = MaterialParams::steel().alpha;
        let row = p.partition.w_indices[4];
        let s: f64 = p.system.b.row(row).map(|(_, v)| v).sum();
        assert!((s - a2 * 0.0625).abs() < 1e-9 * a2);
        let k: f64 = p.system.a.row(row).map(|(_, v)| v).sum();
        assert!(k.abs() < 1e-12);
        assert!((p.system.a.get(row, row) - 4.0 * 48.9).abs() < 1e-12);
    }
}
