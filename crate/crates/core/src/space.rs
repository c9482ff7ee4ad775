//! Parameter spaces, points and metric vectors.
//!
//! A [`ParameterSpace`] is a named rectangular box: the prior region over
//! which calibration happens. All emulation internally works on coordinates
//! affinely mapped to `[-1, 1]` per dimension so that parameters with very
//! different units are commensurate; [`ParameterSpace::map_to_unit`] and
//! [`ParameterSpace::map_from_unit`] are that mapping and its inverse.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Result;

/// One named, bounded parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// A rectangular parameter space with named axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct ParameterSpace {
    params: Vec<Parameter>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    params: Vec<Parameter>,
}

impl TryFrom<RawSpace> for ParameterSpace {
    type Error = CoreError;
    fn try_from(raw: RawSpace) -> Result<Self> {
        ParameterSpace::new(raw.params)
    }
}

impl From<ParameterSpace> for RawSpace {
    fn from(s: ParameterSpace) -> Self {
        RawSpace { params: s.params }
    }
}

impl ParameterSpace {
    /// Builds a space, validating that every bound pair is finite and
    /// ordered, names are unique and non-empty, and the dimension is at
    /// least one.
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(CoreError::InvalidArgument(
                "parameter space needs at least one parameter".into(),
            ));
        }
        for p in &params {
            if p.name.is_empty() {
                return Err(CoreError::InvalidArgument(
                    "parameter names must be non-empty".into(),
                ));
            }
            if !p.lower.is_finite() || !p.upper.is_finite() || p.lower >= p.upper {
                return Err(CoreError::InvalidArgument(format!(
                    "parameter `{}` needs finite bounds with lower < upper, got [{}, {}]",
                    p.name, p.lower, p.upper
                )));
            }
        }
        for i in 1..params.len() {
            if params[..i].iter().any(|q| q.name == params[i].name) {
                return Err(CoreError::InvalidArgument(format!(
                    "duplicate parameter name `{}`",
                    params[i].name
                )));
            }
        }
        Ok(Self { params })
    }

    /// Convenience constructor from `(name, lower, upper)` tuples.
    pub fn from_bounds(bounds: &[(&str, f64, f64)]) -> Result<Self> {
        Self::new(
            bounds
                .iter()
                .map(|&(n, lo, hi)| Parameter {
                    name: n.to_string(),
                    lower: lo,
                    upper: hi,
                })
                .collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    /// Midpoint of every range.
    pub fn center(&self) -> Point {
        Point::new(
            self.params
                .iter()
                .map(|p| 0.5 * (p.lower + p.upper))
                .collect(),
        )
    }

    /// Checks membership (closed box) and coordinate count.
    pub fn check_contains(&self, point: &Point) -> Result<()> {
        if point.dimension() != self.dimension() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dimension(),
                got: point.dimension(),
            });
        }
        for (p, &v) in self.params.iter().zip(point.coords()) {
            if !(v >= p.lower && v <= p.upper) {
                return Err(CoreError::OutOfDomain {
                    name: p.name.clone(),
                    value: v,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &Point) -> bool {
        self.check_contains(point).is_ok()
    }

    /// Maps a point of this space onto `[-1, 1]^k`: each coordinate goes
    /// affinely with `lower -> -1` and `upper -> +1`. Errors if the point
    /// lies outside the box.
    pub fn map_to_unit(&self, point: &Point) -> Result<Vec<f64>> {
        self.check_contains(point)?;
        Ok(self
            .params
            .iter()
            .zip(point.coords())
            .map(|(p, &v)| 2.0 * (v - p.lower) / (p.upper - p.lower) - 1.0)
            .collect())
    }

    /// Inverse of [`map_to_unit`](Self::map_to_unit). Coordinates are not
    /// clamped; callers own the `[-1, 1]` invariant.
    pub fn map_from_unit(&self, unit: &[f64]) -> Result<Point> {
        if unit.len() != self.dimension() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dimension(),
                got: unit.len(),
            });
        }
        Ok(Point::new(
            self.params
                .iter()
                .zip(unit)
                .map(|(p, &u)| p.lower + 0.5 * (u + 1.0) * (p.upper - p.lower))
                .collect(),
        ))
    }
}

/// A location in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    /// Exact bitwise coordinate equality, the notion used to reject
    /// duplicate design points.
    pub fn bit_eq(&self, other: &Point) -> bool {
        self.coords.len() == other.coords.len()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point::new(coords)
    }
}

/// One simulator output vector, one entry per declared metric.
///
/// Entries are always finite; a run that produced NaN or infinity is
/// recorded as failed, not as a metric vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MetricVector {
    values: Vec<f64>,
}

impl MetricVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "metric values must be finite; record the run as failed instead".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<Vec<f64>> for MetricVector {
    type Error = CoreError;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        MetricVector::new(values)
    }
}

impl From<MetricVector> for Vec<f64> {
    fn from(m: MetricVector) -> Self {
        m.values
    }
}
