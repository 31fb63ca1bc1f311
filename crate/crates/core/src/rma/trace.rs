use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use super::schedule::Action;
use super::RmaError;

/// One granted decision point: `actor,action,target,step,iteration`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub actor: usize,
    pub action: Action,
    /// Owner of the window acted on (the actor itself for barriers).
    pub target: usize,
    pub step: usize,
    pub iteration: usize,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.actor, self.action, self.target, self.step, self.iteration
        )
    }
}

/// Ordered log of decision points, headed by the schedule mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub mode: String,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# mode={}", self.mode)?;
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for e in &self.events {
            w.write_record([
                e.actor.to_string(),
                e.action.to_string(),
                e.target.to_string(),
                e.step.to_string(),
                e.iteration.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self, RmaError> {
        let mut header = String::new();
        input
            .read_line(&mut header)
            .map_err(|e| RmaError::TraceFormat(e.to_string()))?;
        let mode = header
            .trim()
            .strip_prefix("# mode=")
            .ok_or_else(|| RmaError::TraceFormat("missing `# mode=` header".into()))?
            .to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut events = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| RmaError::TraceFormat(e.to_string()))?;
            if rec.len() != 5 {
                return Err(RmaError::TraceFormat(format!(
                    "expected 5 fields, got {}",
                    rec.len()
                )));
            }
            let num = |i: usize| {
                rec[i]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| RmaError::TraceFormat(format!("bad number `{}`", &rec[i])))
            };
            events.push(TraceEvent {
                actor: num(0)?,
                action: rec[1].trim().parse()?,
                target: num(2)?,
                step: num(3)?,
                iteration: num(4)?,
            });
        }
        Ok(Self { mode, events })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, RmaError> {
        let f = std::fs::File::open(path).map_err(|e| RmaError::TraceFormat(e.to_string()))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

impl FromStr for Action {
    type Err = RmaError;
    fn from_str(s: &str) -> Result<Self, RmaError> {
        match s {
            "sync" => Ok(Action::Sync),
            "put" => Ok(Action::Put),
            "barrier" => Ok(Action::Barrier),
            other => Err(RmaError::TraceFormat(format!("unknown action `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = Trace {
            mode: "lockstep".into(),
            events: vec![
                TraceEvent {
                    actor: 0,
                    action: Action::Sync,
                    target: 0,
                    step: 3,
                    iteration: 1,
                },
                TraceEvent {
                    actor: 1,
                    action: Action::Put,
                    target: 0,
                    step: 3,
                    iteration: 1,
                },
            ],
        };
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# mode=lockstep\n0,sync,0,3,1\n"));
        assert_eq!(Trace::read_from(&buf[..]).unwrap(), t);
    }

    #[test]
    fn malformed_rejected() {
        assert!(Trace::read_from(&b"0,sync,0,0,0\n"[..]).is_err());
        assert!(Trace::read_from(&b"# mode=free\n0,jump,0,0,0\n"[..]).is_err());
        assert!(Trace::read_from(&b"# mode=free\n0,sync,0\n"[..]).is_err());
    }
}
