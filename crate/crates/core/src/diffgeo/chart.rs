use serde::Serialize;

use crate::error::{Error, Result};

/// A closed coordinate interval, optionally identified at its ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            periodic: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// A single coordinate chart: labelled coordinates over a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chart {
    names: Vec<String>,
    intervals: Vec<Interval>,
}

impl Chart {
    pub fn new<S: Into<String>>(names: Vec<S>, intervals: Vec<Interval>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidChart(
                "chart needs at least one coordinate".into(),
            ));
        }
        if names.len() != intervals.len() {
            return Err(Error::InvalidChart(format!(
                "{} coordinate names but {} intervals",
                names.len(),
                intervals.len()
            )));
        }
        for (name, iv) in names.iter().zip(&intervals) {
            if iv.lo.is_nan() || iv.hi.is_nan() || iv.lo >= iv.hi {
                return Err(Error::InvalidChart(format!("empty interval for {name}")));
            }
            if iv.periodic && !(iv.lo.is_finite() && iv.hi.is_finite()) {
                return Err(Error::InvalidChart(format!(
                    "periodic coordinate {name} must be finite"
                )));
            }
        }
        Ok(Chart { names, intervals })
    }

    /// The unit torus `[0, 1]^dim` with coordinates `{prefix}0, {prefix}1, ...`.
    pub fn unit_torus(prefix: &str, dim: usize) -> Result<Self> {
        Chart::new(
            (0..dim).map(|i| format!("{prefix}{i}")).collect(),
            vec![Interval::periodic(0.0, 1.0); dim],
        )
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn interval(&self, i: usize) -> Interval {
        self.intervals[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::center).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.intervals.iter().zip(p).all(|(iv, &x)| iv.contains(x))
    }

    /// Cartesian product; coordinates of `other` follow those of `self`.
    /// Repeated names get a suffix.
    pub fn product(&self, other: &Chart) -> Chart {
        let mut names = self.names.clone();
        for name in &other.names {
            let mut candidate = name.clone();
            let mut k = 2;
            while names.contains(&candidate) {
                candidate = format!("{name}_{k}");
                k += 1;
            }
            names.push(candidate);
        }
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        Chart { names, intervals }
    }

    /// Drops the listed coordinates (sorted, unique).
    pub fn without(&self, drop: &[usize]) -> Result<Chart> {
        let keep: Vec<usize> = (0..self.dim()).filter(|i| !drop.contains(i)).collect();
        Chart::new(
            keep.iter().map(|&i| self.names[i].clone()).collect(),
            keep.iter().map(|&i| self.intervals[i]).collect(),
        )
    }

    pub(crate) fn describe(&self) -> String {
        format!("({})", self.names.join(", "))
    }

    pub(crate) fn ensure_same(&self, other: &Chart) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ChartMismatch {
                left: self.describe(),
                right: other.describe(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_charts() {
        assert!(Chart::new(vec!["x"], vec![]).is_err());
        assert!(Chart::new(vec!["x"], vec![Interval::new(1.0, 0.0)]).is_err());
        assert!(Chart::new(vec!["x"], vec![Interval::periodic(0.0, f64::INFINITY)]).is_err());
        assert!(Chart::new(vec!["x"], vec![Interval::new(0.0, f64::INFINITY)]).is_ok());
    }

    #[test]
    fn product_renames_clashes() {
        let a = Chart::unit_torus("x", 4).unwrap();
        let p = a.product(&a);
        assert_eq!(p.dim(), 8);
        assert_eq!(p.names()[4], "x0_2");
    }
}
