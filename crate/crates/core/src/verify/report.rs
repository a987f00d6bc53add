//! Line-oriented check reports:
//! `CHECK <name> <location> <value> <threshold> <PASS|FAIL|SKIP>`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The check did not apply at this location (e.g. stencil off the domain).
    Skip,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    /// Free-form location without spaces, e.g. `w=1.5,a=0.25`.
    pub location: String,
    pub value: f64,
    pub threshold: f64,
    pub status: Status,
}

impl CheckLine {
    pub fn new(name: &str, location: String, value: f64, threshold: f64, status: Status) -> Self {
        CheckLine {
            name: name.to_string(),
            location: location.replace(' ', ""),
            value,
            threshold,
            status,
        }
    }

    /// Passes when `value <= threshold` (a NaN value fails).
    pub fn at_most(name: &str, location: String, value: f64, threshold: f64) -> Self {
        Self::new(
            name,
            location,
            value,
            threshold,
            Status::from_bool(value <= threshold),
        )
    }

    /// Passes when `value >= threshold` (a NaN value fails).
    pub fn at_least(name: &str, location: String, value: f64, threshold: f64) -> Self {
        Self::new(
            name,
            location,
            value,
            threshold,
            Status::from_bool(value >= threshold),
        )
    }

    pub fn skip(name: &str, location: String, threshold: f64) -> Self {
        Self::new(name, location, f64::NAN, threshold, Status::Skip)
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {} {} {:.6e} {:.3e} {}",
            self.name, self.location, self.value, self.threshold, self.status
        )
    }
}

pub fn state_location(w: f64, a: f64) -> String {
    format!("w={w:.6},a={a:.6}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub lines: Vec<CheckLine>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, line: CheckLine) {
        self.lines.push(line);
    }

    pub fn extend(&mut self, other: Report) {
        self.lines.extend(other.lines);
    }

    pub fn count(&self, status: Status) -> usize {
        self.lines.iter().filter(|l| l.status == status).count()
    }

    /// No line failed and at least one line was actually checked.
    pub fn passed(&self) -> bool {
        self.count(Status::Fail) == 0 && self.count(Status::Pass) > 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.lines.iter().filter(|l| l.status == Status::Fail)
    }

    /// Largest value among checked (non-skipped) lines.
    pub fn max_value(&self) -> f64 {
        self.lines
            .iter()
            .filter(|l| l.status != Status::Skip)
            .map(|l| l.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
