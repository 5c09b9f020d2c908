//! Frameworks (graph plus reference configuration) and scenario files.
//!
//! Node indices are 0-based everywhere in the library. Scenario files use
//! 1-based node labels; conversion happens only in [`Scenario::from_json_str`]
//! and [`Scenario::to_json_string`].

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected graph with a stacked reference configuration `p*` in `R^{nd}`.
///
/// Edges are stored as `(i, j)` with `i < j`, sorted lexicographically. That order
/// is the row order of every edge-indexed vector and matrix in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Framework {
    n: usize,
    d: usize,
    edges: Vec<(usize, usize)>,
    positions: DVector<f64>,
}

impl Framework {
    /// Builds a framework from 0-based edges, canonicalizing their order.
    pub fn new(n: usize, d: usize, edges: Vec<(usize, usize)>, positions: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("n", "agent count must be positive"));
        }
        if d < 2 {
            return Err(Error::validation(
                "d",
                format!("ambient dimension must be >= 2, got {d}"),
            ));
        }
        if positions.len() != n * d {
            return Err(Error::validation(
                "positions",
                format!(
                    "positions length must be n*d = {}, got {}",
                    n * d,
                    positions.len()
                ),
            ));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("positions", "non-finite coordinate"));
        }

        let mut canonical = Vec::with_capacity(edges.len());
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::validation(
                    "edges",
                    format!("edge #{} references node outside 1..={n}", k + 1),
                ));
            }
            if a == b {
                return Err(Error::validation(
                    "edges",
                    format!("self-loop at node {} (edge #{})", a + 1, k + 1),
                ));
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(
                "edges",
                format!("duplicate edge ({}, {})", w[0].0 + 1, w[0].1 + 1),
            ));
        }

        let positions = DVector::from_vec(positions);
        for &(i, j) in &canonical {
            let pi = positions.rows(i * d, d);
            let pj = positions.rows(j * d, d);
            if pi == pj {
                return Err(Error::validation(
                    "positions",
                    format!("zero-length edge ({}, {})", i + 1, j + 1),
                ));
            }
        }

        Ok(Self {
            n,
            d,
            edges: canonical,
            positions,
        })
    }

    /// Convenience constructor from a list of points.
    pub fn from_points(points: &[Vec<f64>], edges: Vec<(usize, usize)>) -> Result<Self> {
        let d = points.first().map_or(2, Vec::len);
        if let Some(bad) = points.iter().position(|p| p.len() != d) {
            return Err(Error::validation(
                "positions",
                format!(
                    "positions length: agent {} has {} coordinates, expected {d}",
                    bad + 1,
                    points[bad].len()
                ),
            ));
        }
        let flat = points.iter().flatten().copied().collect();
        Self::new(points.len(), d, edges, flat)
    }

    /// The complete graph on the given points.
    pub fn complete(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::from_points(points, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// State dimension `n * d`.
    pub fn dim(&self) -> usize {
        self.n * self.d
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn positions(&self) -> &DVector<f64> {
        &self.positions
    }

    /// Position of agent `i` in the reference configuration.
    pub fn point(&self, i: usize) -> Result<&[f64]> {
        block(self.positions.as_slice(), i, self.d)
    }

    /// `p*_i - p*_j` for edge `k = (i, j)`.
    pub fn edge_vector(&self, k: usize) -> Result<DVector<f64>> {
        let &(i, j) = self.edges.get(k).ok_or(Error::IndexOutOfRange {
            what: "edge",
            index: k,
            len: self.edges.len(),
        })?;
        Ok(self.positions.rows(i * self.d, self.d) - self.positions.rows(j * self.d, self.d))
    }

    /// Sorted neighbors of node `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| match () {
                _ if a == i => Some(b),
                _ if b == i => Some(a),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn is_complete(&self) -> bool {
        self.m() == self.n * (self.n - 1) / 2
    }

    pub fn check_node(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "node",
                index: i,
                len: self.n,
            })
        }
    }

    pub fn check_state(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            })
        }
    }

    /// Stable-within-a-build fingerprint of graph and configuration.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n.hash(&mut h);
        self.d.hash(&mut h);
        self.edges.hash(&mut h);
        for x in self.positions.iter() {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// The `d` entries of agent `i` in a stacked vector.
pub fn block(v: &[f64], i: usize, d: usize) -> Result<&[f64]> {
    let n = v.len() / d;
    if i >= n {
        return Err(Error::IndexOutOfRange {
            what: "node",
            index: i,
            len: n,
        });
    }
    Ok(&v[i * d..(i + 1) * d])
}

/// Integration scheme for the fixed-step simulators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub method: Method,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 50.0,
            method: Method::Rk4,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("sim.dt", "step size must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::validation("sim.t_end", "horizon must be positive"));
        }
        Ok(())
    }

    /// Number of integration steps; the last step lands on or just past `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

pub const DEFAULT_SUBSPACE_TOL: f64 = 1e-8;

/// Numerical tolerances. `rank = None` selects the SVD policy
/// `max(rows, cols) * sigma_max * eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default)]
    pub rank: Option<f64>,
    #[serde(default = "default_subspace_tol")]
    pub subspace: f64,
}

fn default_subspace_tol() -> f64 {
    DEFAULT_SUBSPACE_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: None,
            subspace: DEFAULT_SUBSPACE_TOL,
        }
    }
}

/// A framework together with actuator/sensor placement, an impulse, and
/// simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub framework: Framework,
    pub actuator: usize,
    pub sensor: usize,
    pub w0: Vec<f64>,
    pub impulse: f64,
    pub sim: SimSettings,
    pub tol: Tolerances,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PositionsRepr {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    n: usize,
    d: usize,
    edges: Vec<[usize; 2]>,
    positions: PositionsRepr,
    actuator: usize,
    sensor: usize,
    w0: Vec<f64>,
    #[serde(default = "default_impulse")]
    impulse: f64,
    #[serde(default)]
    sim: SimSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<TolFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subspace: Option<f64>,
}

fn default_impulse() -> f64 {
    1.0
}

fn one_based(field: &'static str, label: usize, n: usize) -> Result<usize> {
    if label == 0 || label > n {
        Err(Error::validation(field, format!("node {label} outside 1..={n}")))
    } else {
        Ok(label - 1)
    }
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        let n = file.n;
        let d = file.d;

        let positions = match file.positions {
            PositionsRepr::Flat(v) => v,
            PositionsRepr::Nested(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != d) {
                    let total: usize = rows.iter().map(Vec::len).sum();
                    return Err(Error::validation(
                        "positions",
                        format!(
                            "positions length must be {n} rows of {d} coordinates, got {} rows ({total} coordinates)",
                            rows.len()
                        ),
                    ));
                }
                rows.into_iter().flatten().collect()
            }
        };

        let mut edges = Vec::with_capacity(file.edges.len());
        for (k, [a, b]) in file.edges.into_iter().enumerate() {
            if a == b {
                return Err(Error::validation(
                    "edges",
                    format!("self-loop at node {a} (edge #{})", k + 1),
                ));
            }
            edges.push((one_based("edges", a, n)?, one_based("edges", b, n)?));
        }
        let framework = Framework::new(n, d, edges, positions)?;

        let actuator = one_based("actuator", file.actuator, n)?;
        let sensor = one_based("sensor", file.sensor, n)?;
        if file.w0.len() != d {
            return Err(Error::validation(
                "w0",
                format!("w0 length must be d = {d}, got {}", file.w0.len()),
            ));
        }
        if file.w0.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("w0", "non-finite component"));
        }
        if !(file.impulse > 0.0 && file.impulse.is_finite()) {
            return Err(Error::validation("impulse", "impulse magnitude must be positive"));
        }
        file.sim.validate()?;

        let mut tol = Tolerances::default();
        if let Some(t) = file.tol {
            if let Some(r) = t.rank {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::validation("tol.rank", "must be non-negative"));
                }
                tol.rank = Some(r);
            }
            if let Some(s) = t.subspace {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::validation("tol.subspace", "must be positive"));
                }
                tol.subspace = s;
            }
        }

        Ok(Self {
            framework,
            actuator,
            sensor,
            w0: file.w0,
            impulse: file.impulse,
            sim: file.sim,
            tol,
        })
    }

    /// Serializes back to the 1-based file schema with canonical edge order.
    pub fn to_json_string(&self) -> String {
        let fw = &self.framework;
        let file = ScenarioFile {
            n: fw.n,
            d: fw.d,
            edges: fw.edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            positions: PositionsRepr::Nested(
                fw.positions
                    .as_slice()
                    .chunks(fw.d)
                    .map(<[f64]>::to_vec)
                    .collect(),
            ),
            actuator: self.actuator + 1,
            sensor: self.sensor + 1,
            w0: self.w0.clone(),
            impulse: self.impulse,
            sim: self.sim,
            tol: if self.tol == Tolerances::default() {
                None
            } else {
                Some(TolFile {
                    rank: self.tol.rank,
                    subspace: Some(self.tol.subspace),
                })
            },
        };
        serde_json::to_string_pretty(&file).expect("scenario serialization is infallible")
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json_str(&text)
}
