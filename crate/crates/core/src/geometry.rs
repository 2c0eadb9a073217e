//! Points, distances, the UFL objective, nets and doubling-dimension
//! diagnostics.

use crate::error::{invalid, Error, Result};

/// Relative tolerance used when comparing costs.
pub const COST_RTOL: f64 = 1e-9;

/// Euclidean distance between two coordinate vectors.
pub fn dist(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(euclid(p, q))
}

/// Euclidean distance without the dimension check.
#[inline]
pub(crate) fn euclid(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `true` when `a` and `b` agree within [`COST_RTOL`] relative tolerance.
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// Pairwise distance queries over the ids `0..len()`.
pub trait DistanceOracle {
    fn len(&self) -> usize;
    fn distance(&self, a: usize, b: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: DistanceOracle + ?Sized> DistanceOracle for &T {
    fn len(&self) -> usize {
        (**self).len()
    }
    fn distance(&self, a: usize, b: usize) -> f64 {
        (**self).distance(a, b)
    }
}

/// Dense `d`-dimensional points with ids `0..n` given by position.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::TooFewPoints { need: 1, got: 0 })?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            coords.extend_from_slice(r);
        }
        Self::new(dim, coords)
    }

    /// Points on the real line.
    pub fn from_line(xs: &[f64]) -> Self {
        Self {
            dim: 1,
            coords: xs.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// The points with the given ids, as owned rows.
    pub fn rows(&self, ids: &[usize]) -> Vec<Vec<f64>> {
        ids.iter().map(|&i| self.point(i).to_vec()).collect()
    }

    /// A new point set made of the listed points, re-indexed from zero.
    pub fn subset(&self, ids: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            coords.extend_from_slice(self.point(i));
        }
        PointSet {
            dim: self.dim,
            coords,
        }
    }

    /// Multiply every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> PointSet {
        PointSet {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * factor).collect(),
        }
    }
}

impl DistanceOracle for PointSet {
    fn len(&self) -> usize {
        PointSet::len(self)
    }
    fn distance(&self, a: usize, b: usize) -> f64 {
        euclid(self.point(a), self.point(b))
    }
}

/// A symmetric matrix of precomputed distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Build from a row-major `n * n` table. Entries must be finite.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("distances must be finite"));
        }
        Ok(Self { n, values })
    }

    pub fn from_oracle(oracle: &impl DistanceOracle) -> Self {
        let n = oracle.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = oracle.distance(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self { n, values }
    }
}

impl DistanceOracle for DistanceMatrix {
    fn len(&self) -> usize {
        self.n
    }
    fn distance(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }
}

/// Index of the nearest facility, ties broken by the lowest index.
pub(crate) fn nearest(p: &[f64], facilities: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, f) in facilities.iter().enumerate() {
        let d = euclid(p, f);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// A UFL solution with facilities anywhere in the ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct UflSolution {
    pub facilities: Vec<Vec<f64>>,
    /// `assignment[x]` is the facility index serving point `x`.
    pub assignment: Vec<usize>,
    pub opening_cost: f64,
    pub connection_cost: f64,
    pub total: f64,
}

impl UflSolution {
    /// Distance from point `x` to its assigned facility.
    pub fn distance_of(&self, points: &PointSet, x: usize) -> f64 {
        euclid(points.point(x), &self.facilities[self.assignment[x]])
    }

    /// Recompute all costs from scratch and compare with the stored values.
    pub fn is_consistent(&self, points: &PointSet) -> bool {
        if self.assignment.len() != points.len()
            || self.assignment.iter().any(|&a| a >= self.facilities.len())
        {
            return false;
        }
        let conn: f64 = (0..points.len()).map(|x| self.distance_of(points, x)).sum();
        approx_eq(conn, self.connection_cost)
            && approx_eq(self.facilities.len() as f64, self.opening_cost)
            && approx_eq(self.opening_cost + self.connection_cost, self.total)
    }
}

/// Evaluate the UFL objective `|F| + sum_x dist(x, F)` with nearest-facility
/// assignment.
pub fn ufl_cost(points: &PointSet, facilities: &[Vec<f64>]) -> Result<UflSolution> {
    if facilities.is_empty() {
        return Err(Error::NoFacilities);
    }
    if points.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    if let Some(f) = facilities.iter().find(|f| f.len() != points.dim()) {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            found: f.len(),
        });
    }
    let mut assignment = Vec::with_capacity(points.len());
    let mut connection_cost = 0.0;
    for p in points.iter() {
        let (j, d) = nearest(p, facilities);
        assignment.push(j);
        connection_cost += d;
    }
    let opening_cost = facilities.len() as f64;
    Ok(UflSolution {
        facilities: facilities.to_vec(),
        assignment,
        opening_cost,
        connection_cost,
        total: opening_cost + connection_cost,
    })
}

/// A UFL solution whose facilities are ids of the underlying metric.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolution {
    pub clients: Vec<usize>,
    pub facilities: Vec<usize>,
    /// `assignment[k]` is the index into `facilities` serving `clients[k]`.
    pub assignment: Vec<usize>,
    pub opening_cost: f64,
    pub connection_cost: f64,
    pub total: f64,
}

impl DiscreteSolution {
    /// The clusters induced by the assignment, as lists of client ids.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.facilities.len()];
        for (k, &a) in self.assignment.iter().enumerate() {
            out[a].push(self.clients[k]);
        }
        out
    }

    /// Convert to an ambient-space solution over `points` (clients must be
    /// all of `0..points.len()`).
    pub fn to_ufl_solution(&self, points: &PointSet) -> Result<UflSolution> {
        let facilities: Vec<Vec<f64>> =
            self.facilities.iter().map(|&f| points.point(f).to_vec()).collect();
        ufl_cost(points, &facilities)
    }

    /// Map from client id to the id of its facility. Clients must be
    /// exactly `0..n`.
    pub fn facility_map(&self) -> FacilityMap {
        let mut map = vec![usize::MAX; self.clients.len()];
        for (k, &c) in self.clients.iter().enumerate() {
            map[c] = self.facilities[self.assignment[k]];
        }
        FacilityMap(map)
    }
}

/// Cost of serving `clients` from `facilities` (ids of `oracle`), nearest
/// facility with lowest-index ties.
pub fn ufl_cost_discrete(
    oracle: &impl DistanceOracle,
    clients: &[usize],
    facilities: &[usize],
) -> Result<DiscreteSolution> {
    if facilities.is_empty() {
        return Err(Error::NoFacilities);
    }
    let mut assignment = Vec::with_capacity(clients.len());
    let mut connection_cost = 0.0;
    for &c in clients {
        let mut best = (0, f64::INFINITY);
        for (j, &f) in facilities.iter().enumerate() {
            let d = oracle.distance(c, f);
            if d < best.1 {
                best = (j, d);
            }
        }
        assignment.push(best.0);
        connection_cost += best.1;
    }
    let opening_cost = facilities.len() as f64;
    Ok(DiscreteSolution {
        clients: clients.to_vec(),
        facilities: facilities.to_vec(),
        assignment,
        opening_cost,
        connection_cost,
        total: opening_cost + connection_cost,
    })
}

/// Point id to the id of the facility serving it (`F0(x)`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FacilityMap(pub Vec<usize>);

impl FacilityMap {
    pub fn of(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every point is its own facility.
    pub fn identity(n: usize) -> Self {
        FacilityMap((0..n).collect())
    }
}

/// A greedy net: a packing at `radius` that also covers `covered`.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub radius: f64,
    pub members: Vec<usize>,
    pub covered: Vec<usize>,
}

impl Net {
    /// Pairwise distances between members are at least `radius`.
    pub fn is_packing(&self, oracle: &impl DistanceOracle) -> bool {
        self.members.iter().enumerate().all(|(i, &a)| {
            self.members[i + 1..]
                .iter()
                .all(|&b| oracle.distance(a, b) >= self.radius)
        })
    }

    /// Every covered point is within `radius` of a member.
    pub fn is_covering(&self, oracle: &impl DistanceOracle) -> bool {
        self.covered.iter().all(|&x| {
            self.members
                .iter()
                .any(|&m| oracle.distance(x, m) <= self.radius)
        })
    }
}

/// Greedy net over `subset`, scanning ids in ascending order: a point joins
/// iff it is at distance at least `radius` from every member so far.
pub fn greedy_net(oracle: &impl DistanceOracle, subset: &[usize], radius: f64) -> Result<Net> {
    if !(radius > 0.0) {
        return Err(invalid("net radius must be positive"));
    }
    let mut covered = subset.to_vec();
    covered.sort_unstable();
    covered.dedup();
    let mut members: Vec<usize> = Vec::new();
    for &x in &covered {
        if members.iter().all(|&m| oracle.distance(x, m) >= radius) {
            members.push(x);
        }
    }
    Ok(Net {
        radius,
        members,
        covered,
    })
}

/// Upper bound `(2 * diam / radius)^ddim` on the size of a `radius`-packing.
pub fn packing_bound(diam: f64, radius: f64, ddim: f64) -> f64 {
    (2.0 * diam / radius).powf(ddim)
}

/// All ids within `radius` of some member of `set` (the neighborhood
/// `B(set, radius)`), in ascending order.
pub fn neighborhood(oracle: &impl DistanceOracle, set: &[usize], radius: f64) -> Vec<usize> {
    (0..oracle.len())
        .filter(|&y| set.iter().any(|&c| oracle.distance(y, c) <= radius))
        .collect()
}

/// Scale statistics of a point set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricStats {
    /// Minimum pairwise distance.
    pub gamma: f64,
    pub diameter: f64,
    /// Aspect ratio `diameter / gamma`.
    pub aspect: f64,
    /// `ceil(log2(aspect))`.
    pub top_level: usize,
}

pub fn metric_stats(oracle: &impl DistanceOracle) -> Result<MetricStats> {
    let n = oracle.len();
    if n < 2 {
        return Err(Error::TooFewPoints { need: 2, got: n });
    }
    let mut gamma = f64::INFINITY;
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = oracle.distance(i, j);
            gamma = gamma.min(d);
            diameter = diameter.max(d);
        }
    }
    if !(gamma > 0.0) {
        return Err(Error::ZeroMinDistance);
    }
    let aspect = diameter / gamma;
    let top_level = aspect.log2().ceil().max(0.0) as usize;
    Ok(MetricStats {
        gamma,
        diameter,
        aspect,
        top_level,
    })
}

/// Largest number of ball centers probed per scale by [`estimate_ddim`].
const DDIM_MAX_CENTERS: usize = 128;

/// Doubling-dimension diagnostic.
///
/// For `scales` radii spaced geometrically between the minimum distance and
/// the diameter, every probed center `x` contributes `log2` of the size of a
/// greedy `r/2`-net of `B(x, r)`. The maximum over radii and centers is
/// returned. This is an estimate, not a certified value.
pub fn estimate_ddim(oracle: &impl DistanceOracle, scales: usize) -> Result<f64> {
    let stats = metric_stats(oracle)?;
    let n = oracle.len();
    let scales = scales.max(1);
    let stride = n.div_ceil(DDIM_MAX_CENTERS);
    let centers: Vec<usize> = (0..n).step_by(stride).collect();
    let mut best: f64 = 0.0;
    for s in 0..scales {
        let r = if scales == 1 {
            stats.diameter
        } else {
            stats.gamma * stats.aspect.powf(s as f64 / (scales - 1) as f64)
        };
        for &x in &centers {
            let ball: Vec<usize> = (0..n).filter(|&y| oracle.distance(x, y) <= r).collect();
            let net = greedy_net(oracle, &ball, r / 2.0)?;
            best = best.max((net.members.len() as f64).log2());
        }
    }
    Ok(best)
}
