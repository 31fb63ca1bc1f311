//! Experiment configuration: flat `key = value` files, overridable per key.

use std::path::PathBuf;
use std::str::FromStr;

use wrelax::model::{material_pair, Dimension};
use wrelax::rma::ScheduleMode;
use wrelax::timeint::LMMethod;
use wrelax::wr::Method;
use wrelax::{Error, Result};

/// Relaxation used by every method of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelaxChoice {
    /// Per-shape optimal parameters for the run's `dx` and `dt`.
    Optimal,
    None,
    Constant(f64),
}

impl FromStr for RelaxChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opt" | "optimal" => Ok(Self::Optimal),
            "none" | "1" => Ok(Self::None),
            x => x.parse::<f64>().map(Self::Constant).map_err(|_| {
                Error::Config(format!("relax must be opt, none or a number, got `{x}`"))
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    ImplicitEuler,
    Trapezoidal,
}

impl Integrator {
    pub fn method(self) -> LMMethod {
        match self {
            Self::ImplicitEuler => LMMethod::implicit_euler(),
            Self::Trapezoidal => LMMethod::trapezoidal(),
        }
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-euler" | "ie" => Ok(Self::ImplicitEuler),
            "trapezoidal" | "trap" | "cn" => Ok(Self::Trapezoidal),
            other => Err(Error::Config(format!("unknown integrator `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Material pair such as `air-steel`; `same` couples air to air.
    pub materials: String,
    pub dimension: Dimension,
    pub dx: f64,
    /// Time steps on each side.
    pub steps: usize,
    pub tf: f64,
    pub integrator: Integrator,
    pub methods: Vec<Method>,
    pub relax: RelaxChoice,
    pub tol: f64,
    pub kmax: usize,
    /// Schedule of the asynchronous method; a seeded schedule takes `seed`.
    pub schedule: ScheduleMode,
    pub seed: u64,
    pub repeat: usize,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub replay: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            materials: "air-steel".into(),
            dimension: Dimension::One,
            dx: 1.0 / 64.0,
            steps: 50,
            tf: 1e4,
            integrator: Integrator::Trapezoidal,
            methods: Method::ALL.to_vec(),
            relax: RelaxChoice::Optimal,
            tol: 1e-10,
            kmax: 100,
            schedule: ScheduleMode::seeded(0),
            seed: 0,
            repeat: 1,
            out: None,
            plot: None,
            trace: None,
            replay: None,
        }
    }
}

/// Parses `0.015625`, `1/64` or `1e-2`.
pub fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("`{s}` is not a number"));
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (
                a.trim().parse::<f64>().map_err(|_| bad())?,
                b.trim().parse::<f64>().map_err(|_| bad())?,
            );
            if b == 0.0 {
                return Err(bad());
            }
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

fn parse_int<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("{key}: `{s}` is not a non-negative integer")))
}

/// `all` or a comma-separated list of method names.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let out: Vec<Method> = s
        .split(',')
        .map(|m| m.trim().parse())
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Config("empty method list".into()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Large discretization: `dx = 1/513`, `N = 200`.
    pub fn large_scale(mut self) -> Self {
        self.dx = 1.0 / 513.0;
        self.steps = 200;
        self
    }

    pub fn dt(&self) -> f64 {
        self.tf / self.steps as f64
    }

    /// Sets one key; unknown keys and malformed values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "materials" | "material_pair" => {
                material_pair(v)?;
                self.materials = v.to_string();
            }
            "dimension" => self.dimension = v.parse()?,
            "dx" => self.dx = parse_number(v)?,
            "steps" | "N" => self.steps = parse_int("steps", v)?,
            "tf" => self.tf = parse_number(v)?,
            "integrator" => self.integrator = v.parse()?,
            "method" | "methods" => self.methods = parse_methods(v)?,
            "relax" => self.relax = v.parse()?,
            "tol" => self.tol = parse_number(v)?,
            "kmax" => self.kmax = parse_int("kmax", v)?,
            "schedule" => self.schedule = v.parse()?,
            "seed" => self.seed = parse_int("seed", v)?,
            "repeat" => self.repeat = parse_int("repeat", v)?,
            "out" | "output" => self.out = Some(v.into()),
            "plot" => self.plot = Some(v.into()),
            "trace" => self.trace = Some(v.into()),
            "replay" => self.replay = Some(v.into()),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }

    /// Schedule with the configured seed substituted.
    pub fn effective_schedule(&self) -> ScheduleMode {
        match self.schedule.clone() {
            ScheduleMode::Seeded { jitter, costs, .. } => ScheduleMode::Seeded {
                seed: self.seed,
                jitter,
                costs,
            },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        material_pair(&self.materials)?;
        if self.steps == 0 || self.kmax == 0 || self.repeat == 0 {
            return Err(Error::Config(
                "steps, kmax and repeat must be positive".into(),
            ));
        }
        if !(self.tf > 0.0 && self.tol > 0.0 && self.dx > 0.0) {
            return Err(Error::Config("tf, tol and dx must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.replay.is_some() && self.trace.is_some() {
            return Err(Error::Config(
                "trace and replay are mutually exclusive".into(),
            ));
        }
        if let RelaxChoice::Constant(t) = self.relax {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("relaxation {t} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_with_comments() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# desk run\nmaterials = water-steel\ndx = 1/32  # fraction\nmethod = jacobi, async\nschedule = lockstep\n\n")
            .unwrap();
        assert_eq!(c.materials, "water-steel");
        assert_eq!(c.dx, 1.0 / 32.0);
        assert_eq!(c.methods, vec![Method::Jacobi, Method::Async]);
        assert_eq!(c.schedule, ScheduleMode::Lockstep);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let mut c = ExperimentConfig::default();
        assert!(c.apply_text("colour = red").is_err());
        assert!(c.apply_text("kmax = -3").is_err());
        assert!(c.apply_text("materials = air-lava").is_err());
        assert!(c.apply_text("no equals sign").is_err());
    }

    #[test]
    fn seed_reaches_the_schedule() {
        let c = ExperimentConfig {
            seed: 9,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            c.effective_schedule(),
            ScheduleMode::Seeded { seed: 9, .. }
        ));
    }
}
