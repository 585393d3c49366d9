//! Sampling the trace of random interlacements in a box.
//!
//! Trajectories hitting the window `W` arrive as a Poisson(u cap(W)) number, enter
//! at a point drawn from the normalized equilibrium measure, and continue as simple
//! random walks. Only window visits are materialized. When the walk steps out of `W`
//! to `y`, exact mode draws its next entrance point directly from the harmonic
//! measure `H(y, .)` (mass `P_y[H_W < inf]`, the remainder meaning escape); truncated
//! mode keeps walking step by step and kills the walk on leaving an enlarged box.
//! Backward paths never return to `W` and contribute only their first step.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{BondField, SiteField};
use crate::lattice::{BoxSymmetry, LatticeWindow, Point};
use crate::potential::{EquilibriumProfile, Potential};

/// How excursions outside the window are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SamplingMode {
    /// Exact re-entry law; requires a dense solve on the window boundary.
    Exact,
    /// Step-by-step excursions killed on leaving `B(center, R_s)`; `None` means `4 * radius`.
    Truncated { safety_radius: Option<usize> },
}

impl SamplingMode {
    pub fn name(&self) -> &'static str {
        match self {
            SamplingMode::Exact => "exact",
            SamplingMode::Truncated { .. } => "truncated",
        }
    }
}

/// Draws an index with probability proportional to given weights.
#[derive(Debug, Clone)]
pub struct WeightedIndex {
    cdf: Vec<f64>,
}

impl WeightedIndex {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(invalid("weights", format!("{w} is not a finite nonnegative weight")));
            }
            acc += w;
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(invalid("weights", "total weight is zero"));
        }
        Ok(Self { cdf })
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().expect("nonempty")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total();
        self.locate(u)
    }

    fn locate(&self, u: f64) -> usize {
        // first index whose cumulative weight exceeds u; zero-weight cells are never hit
        let j = self.cdf.partition_point(|&c| c <= u);
        j.min(self.cdf.len() - 1)
    }
}

/// `N_K ~ Poisson(u cap(K))`.
pub fn sample_count<R: Rng + ?Sized>(u: f64, capacity: f64, rng: &mut R) -> Result<u64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(invalid("u", format!("level {u} must be positive")));
    }
    if !(capacity > 0.0) {
        return Err(invalid("capacity", format!("{capacity} must be positive")));
    }
    let p = Poisson::new(u * capacity).map_err(|e| invalid("u", e.to_string()))?;
    Ok(p.sample(rng) as u64)
}

/// Entrance law `e_K / cap(K)` of a finite set.
#[derive(Debug, Clone)]
pub struct EntryLaw {
    points: Vec<Point>,
    index: WeightedIndex,
}

impl EntryLaw {
    pub fn new(profile: &EquilibriumProfile) -> Result<Self> {
        Ok(Self {
            points: profile.support().to_vec(),
            index: WeightedIndex::new(profile.weights())?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.points[self.index.sample(rng)]
    }
}

/// One trajectory of the cloud, as seen from the window.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    mark: f64,
    path: Vec<u32>,
    breaks: Vec<u32>,
    backward: Vec<Point>,
    truncated: bool,
}

impl Trajectory {
    /// Coupling mark, uniform on `(0, u]`.
    pub fn mark(&self) -> f64 {
        self.mark
    }

    /// Window index of `X(0)`.
    pub fn anchor(&self) -> usize {
        self.path[0] as usize
    }

    /// Window indices visited by the forward path in order, `X(0)` first.
    pub fn forward(&self) -> &[u32] {
        &self.path
    }

    /// Positions `i` in `forward()` reached by re-entering the window rather than by
    /// an internal step from position `i - 1`.
    pub fn reentries(&self) -> &[u32] {
        &self.breaks
    }

    /// Materialized backward steps (`X(-1)`; the rest never meets the window).
    pub fn backward(&self) -> &[Point] {
        &self.backward
    }

    /// Whether the forward path was killed by truncation.
    pub fn truncated_forward(&self) -> bool {
        self.truncated
    }

    /// Backward paths never need truncation.
    pub fn truncated_backward(&self) -> bool {
        false
    }

    /// Internal edges traversed, in path order (with repetitions).
    pub fn edges<'a>(&'a self, window: &'a LatticeWindow) -> impl Iterator<Item = usize> + 'a {
        let mut next_break = 0;
        (1..self.path.len()).filter_map(move |i| {
            while next_break < self.breaks.len() && (self.breaks[next_break] as usize) < i {
                next_break += 1;
            }
            if next_break < self.breaks.len() && self.breaks[next_break] as usize == i {
                return None;
            }
            window.edge_between(self.path[i - 1] as usize, self.path[i] as usize)
        })
    }
}

/// Trace of the interlacement at level `u` in a window.
#[derive(Debug, Clone)]
pub struct InterlacementSample {
    window: LatticeWindow,
    level: f64,
    mode: SamplingMode,
    trajectories: Vec<Trajectory>,
    occupied: SiteField,
    traversed: BondField,
    error_bound: f64,
}

impl InterlacementSample {
    fn assemble(
        window: &LatticeWindow,
        level: f64,
        mode: SamplingMode,
        trajectories: Vec<Trajectory>,
        error_bound: f64,
    ) -> Self {
        let mut occupied = SiteField::filled(window, false);
        let mut traversed = BondField::filled(window, false);
        for t in &trajectories {
            for &v in &t.path {
                occupied.set(v as usize, true);
            }
            for e in t.edges(window) {
                traversed.set(e, true);
            }
        }
        Self {
            window: window.clone(),
            level,
            mode,
            trajectories,
            occupied,
            traversed,
            error_bound,
        }
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// `N_W`, the number of trajectories meeting the window.
    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn marks(&self) -> Vec<f64> {
        self.trajectories.iter().map(|t| t.mark).collect()
    }

    /// `I^u` restricted to the window.
    pub fn occupied(&self) -> &SiteField {
        &self.occupied
    }

    /// Traversed internal edges.
    pub fn traversed(&self) -> &BondField {
        &self.traversed
    }

    /// `V^u` restricted to the window.
    pub fn vacant(&self) -> SiteField {
        self.occupied.complement()
    }

    /// Bound on the total variation distance to the exact window law (zero in exact mode).
    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    /// The coupled sample at level `u' <= u`: trajectories with mark at most `u'`.
    pub fn thin(&self, level: f64) -> Result<InterlacementSample> {
        if !(level > 0.0) || level > self.level {
            return Err(invalid(
                "u",
                format!("thinning level {level} must lie in (0, {}]", self.level),
            ));
        }
        let kept = self
            .trajectories
            .iter()
            .filter(|t| t.mark <= level)
            .cloned()
            .collect();
        let bound = self.error_bound * level / self.level;
        Ok(Self::assemble(&self.window, level, self.mode, kept, bound))
    }
}

/// `V^u` as a field; same as [`InterlacementSample::vacant`].
pub fn vacant(sample: &InterlacementSample) -> SiteField {
    sample.vacant()
}

#[derive(Debug)]
struct ExactReentry {
    boundary: Vec<u32>,
    rows: HashMap<Point, usize>,
    cdfs: Vec<Vec<f64>>,
    hit: Vec<f64>,
}

#[derive(Debug)]
struct Truncation {
    kill_box: LatticeWindow,
    safety_radius: usize,
    outer_hit: HashMap<Point, f64>,
    max_shell_hit: f64,
}

#[derive(Debug)]
enum Excursions {
    Exact(ExactReentry),
    Truncated(Truncation),
}

/// Precomputed sampler for one window; reusable across levels and replicas.
#[derive(Debug)]
pub struct WindowSampler {
    window: LatticeWindow,
    mode: SamplingMode,
    sym: BoxSymmetry,
    equilibrium: Vec<f64>,
    capacity: f64,
    entry_vertices: Vec<u32>,
    entry: WeightedIndex,
    excursions: Excursions,
}

impl WindowSampler {
    pub fn new(potential: &Potential, window: &LatticeWindow, mode: SamplingMode) -> Result<Self> {
        if window.dim() != potential.dim() {
            return Err(invalid("window", "dimension differs from the Green function"));
        }
        let sym = BoxSymmetry::new(window);
        let outer = outer_orbits(window, &sym);
        let (equilibrium, excursions) = match mode {
            SamplingMode::Exact => {
                let pts: Vec<Point> = window.iter().collect();
                let sys = potential.boundary_system(&pts)?;
                let mut equilibrium = vec![0.0; window.len()];
                let boundary: Vec<u32> = sys
                    .points()
                    .iter()
                    .map(|p| window.index(p).expect("boundary lies in window") as u32)
                    .collect();
                for (&i, &w) in boundary.iter().zip(sys.weights()) {
                    equilibrium[i as usize] = w;
                }
                let laws = sys.entrance_laws(&outer)?;
                let mut cdfs = Vec::with_capacity(laws.len());
                let mut hit = Vec::with_capacity(laws.len());
                for law in laws {
                    let mut acc = 0.0;
                    let cdf: Vec<f64> = law
                        .iter()
                        .map(|&p| {
                            acc += p;
                            acc
                        })
                        .collect();
                    if acc > 1.0 + 1e-9 {
                        return Err(Error::Singular(format!("entrance mass {acc} exceeds one")));
                    }
                    hit.push(acc.min(1.0));
                    cdfs.push(cdf);
                }
                let rows = outer.iter().enumerate().map(|(i, p)| (*p, i)).collect();
                (
                    equilibrium,
                    Excursions::Exact(ExactReentry {
                        boundary,
                        rows,
                        cdfs,
                        hit,
                    }),
                )
            }
            SamplingMode::Truncated { safety_radius } => {
                let radius = window.radius();
                let rs = safety_radius.unwrap_or(4 * radius);
                if rs < radius {
                    return Err(invalid(
                        "safety_radius",
                        format!("{rs} is smaller than the window radius {radius}"),
                    ));
                }
                let margin = (rs - radius) as i64;
                let d = window.dim();
                let kill_corner = window.corner() - Point::new(&vec![margin; d]);
                let kill_sides: Vec<usize> =
                    window.sides().iter().map(|&s| s + 2 * margin as usize).collect();
                let kill_box = LatticeWindow::new(kill_corner, &kill_sides)?;
                let max_side = *window.sides().iter().max().unwrap();
                let table = potential.table_for_extent(max_side + margin as usize)?;
                let prof = potential.box_equilibrium_with_table(window, Some(&table))?;
                let mut equilibrium = vec![0.0; window.len()];
                let mut charged = Vec::new();
                for (p, &w) in prof.support().iter().zip(prof.weights()) {
                    if w > 0.0 {
                        charged.push((*p, w));
                    }
                    equilibrium[window.index(p).expect("support is the window")] = w;
                }
                let hit_at = |x: &Point| -> Result<f64> {
                    let mut s = 0.0;
                    for (y, w) in &charged {
                        s += table.between(x, y)? * w;
                    }
                    Ok(s.min(1.0))
                };
                let mut outer_hit = HashMap::new();
                for y in &outer {
                    outer_hit.insert(*y, hit_at(y)?);
                }
                let mut max_shell_hit: f64 = 0.0;
                for x in shell_orbits(&kill_box, &sym) {
                    max_shell_hit = max_shell_hit.max(hit_at(&x)?);
                }
                (
                    equilibrium,
                    Excursions::Truncated(Truncation {
                        kill_box,
                        safety_radius: rs,
                        outer_hit,
                        max_shell_hit,
                    }),
                )
            }
        };
        let capacity: f64 = equilibrium.iter().sum();
        let entry_vertices: Vec<u32> = (0..window.len())
            .filter(|&i| equilibrium[i] > 0.0)
            .map(|i| i as u32)
            .collect();
        let weights: Vec<f64> = entry_vertices.iter().map(|&i| equilibrium[i as usize]).collect();
        let entry = WeightedIndex::new(&weights)?;
        Ok(Self {
            window: window.clone(),
            mode,
            sym,
            equilibrium,
            capacity,
            entry_vertices,
            entry,
            excursions,
        })
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// `e_W` per window vertex.
    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    /// Safety radius in truncated mode.
    pub fn safety_radius(&self) -> Option<usize> {
        match &self.excursions {
            Excursions::Exact(_) => None,
            Excursions::Truncated(t) => Some(t.safety_radius),
        }
    }

    /// `cap(W) * max P_x[H_W < inf]` over the kill shell; the error bound is `u` times this.
    pub fn error_rate(&self) -> f64 {
        match &self.excursions {
            Excursions::Exact(_) => 0.0,
            Excursions::Truncated(t) => self.capacity * t.max_shell_hit,
        }
    }

    pub fn sample_count<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> Result<u64> {
        sample_count(u, self.capacity, rng)
    }

    /// A draw from `e_W / cap(W)`.
    pub fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.window.point(self.entry_vertices[self.entry.sample(rng)] as usize)
    }

    /// Trace of the interlacement at level `u` in the window.
    pub fn sample<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> Result<InterlacementSample> {
        let n = self.sample_count(u, rng)?;
        let mut trajectories = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let mark = u * (1.0 - rng.random::<f64>());
            let anchor = self.entry_vertices[self.entry.sample(rng)];
            let backward = vec![self.backward_step(anchor as usize, rng)];
            let mut path = vec![anchor];
            let mut breaks = Vec::new();
            let truncated = self.walk(anchor as usize, rng, &mut path, &mut breaks);
            trajectories.push(Trajectory {
                mark,
                path,
                breaks,
                backward,
                truncated,
            });
        }
        Ok(InterlacementSample::assemble(
            &self.window,
            u,
            self.mode,
            trajectories,
            u * self.error_rate(),
        ))
    }

    fn outer_hit(&self, y: &Point) -> f64 {
        let (c, _) = self.sym.canonical(y);
        match &self.excursions {
            Excursions::Exact(ex) => ex.hit[ex.rows[&c]],
            Excursions::Truncated(t) => t.outer_hit[&c],
        }
    }

    /// `X(-1)`, drawn proportionally to the escape probability of each outside neighbor.
    fn backward_step<R: Rng + ?Sized>(&self, anchor: usize, rng: &mut R) -> Point {
        let x = self.window.point(anchor);
        let dirs: Vec<(Point, f64)> = (0..2 * self.window.dim())
            .filter(|&dir| self.window.neighbor_index(anchor, dir).is_none())
            .map(|dir| {
                let y = x.step(dir);
                (y, (1.0 - self.outer_hit(&y)).max(0.0))
            })
            .collect();
        let weights: Vec<f64> = dirs.iter().map(|d| d.1).collect();
        match WeightedIndex::new(&weights) {
            Ok(w) => dirs[w.sample(rng)].0,
            // a charged vertex always has an outside neighbor with positive escape probability
            Err(_) => dirs[0].0,
        }
    }

    /// Runs the forward path; returns whether it was killed by truncation.
    fn walk<R: Rng + ?Sized>(&self, start: usize, rng: &mut R, path: &mut Vec<u32>, breaks: &mut Vec<u32>) -> bool {
        let w = &self.window;
        let two_d = 2 * w.dim();
        let mut v = start;
        loop {
            let dir = rng.random_range(0..two_d);
            if let Some(n) = w.neighbor_index(v, dir) {
                v = n;
                path.push(n as u32);
                continue;
            }
            let y = w.point(v).step(dir);
            let next = match &self.excursions {
                Excursions::Exact(ex) => {
                    let (c, iso) = self.sym.canonical(&y);
                    let row = ex.rows[&c];
                    let u = rng.random::<f64>();
                    if u >= ex.hit[row] {
                        None
                    } else {
                        let cdf = &ex.cdfs[row];
                        let j = cdf.partition_point(|&q| q <= u).min(cdf.len() - 1);
                        let entry_c = w.point(ex.boundary[j] as usize);
                        let entry = self.sym.apply(&iso, &entry_c);
                        Some(w.index(&entry).expect("isometry preserves the window"))
                    }
                }
                Excursions::Truncated(t) => {
                    let mut y = y;
                    loop {
                        y = y.step(rng.random_range(0..two_d));
                        if let Some(i) = w.index(&y) {
                            break Some(i);
                        }
                        if !t.kill_box.contains(&y) {
                            return true;
                        }
                    }
                }
            };
            match next {
                Some(n) => {
                    breaks.push(path.len() as u32);
                    path.push(n as u32);
                    v = n;
                }
                None => return false,
            }
        }
    }
}

/// Convenience wrapper building a sampler for one draw.
pub fn sample_interlacement<R: Rng + ?Sized>(
    potential: &Potential,
    u: f64,
    window: &LatticeWindow,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<InterlacementSample> {
    WindowSampler::new(potential, window, mode)?.sample(u, rng)
}

/// Canonical representatives of the outer vertex boundary of a box.
fn outer_orbits(window: &LatticeWindow, sym: &BoxSymmetry) -> Vec<Point> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for v in 0..window.len() {
        if !window.on_inner_boundary(v) {
            continue;
        }
        for dir in 0..2 * window.dim() {
            if window.neighbor_index(v, dir).is_none() {
                let (c, _) = sym.canonical(&window.point(v).step(dir));
                if seen.insert(c) {
                    out.push(c);
                }
            }
        }
    }
    out.sort();
    out
}

/// Canonical representatives of the outer boundary of `kill_box`, which shares its symmetry.
fn shell_orbits(kill_box: &LatticeWindow, sym: &BoxSymmetry) -> Vec<Point> {
    let mut seen = std::collections::HashSet::new();
    let d = kill_box.dim();
    // enumerate faces: fix one coordinate just outside, the others range over the box
    for axis in 0..d {
        for side in [-1i64, kill_box.sides()[axis] as i64] {
            let mut sides: Vec<usize> = kill_box.sides().to_vec();
            sides[axis] = 1;
            let corner = kill_box.corner().with(axis, kill_box.corner().get(axis) + side);
            let face = LatticeWindow::new(corner, &sides).expect("face is a valid box");
            for p in face.iter() {
                seen.insert(sym.canonical(&p).0);
            }
        }
    }
    let mut out: Vec<Point> = seen.into_iter().collect();
    out.sort();
    out
}
