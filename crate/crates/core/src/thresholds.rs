//! Density formula and finite-size Monte Carlo estimators of the critical levels.
//!
//! Every replica samples the interlacement once at `u_max` on a ball and obtains all lower
//! levels by thinning marks, so crossing indicators are monotone in `u` per replica. For
//! monotone events a replica is summarized by its critical level: the supremum of levels at
//! which the event holds, found exactly by deleting trajectories in decreasing mark order
//! on an incremental union-find.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{GreenFunction, LatticeWindow, Point};
use crate::noise::CoupledNoise;
use crate::parallel::try_map_indexed;
use crate::percolation::{crossing, local_uniqueness_event, Configuration, UnionFind};
use crate::potential::Potential;
use crate::sampler::{InterlacementSample, SamplingMode, WindowSampler};
use crate::seed::stream;
use crate::stats::{binomial_ci, quantile, quantile_ci};

/// `m(u) = 1 - exp(-u / g(0))`, the occupied density.
pub fn density(green: &GreenFunction, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(invalid("u", format!("{u} must be nonnegative")));
    }
    Ok(-(-u / green.g0()).exp_m1())
}

/// The estimated quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    UStarEps,
    UStarStar,
    UBar,
    Eta,
}

impl Parameter {
    pub fn name(&self) -> &'static str {
        match self {
            Parameter::UStarEps => "u_star_eps",
            Parameter::UStarStar => "u_star_star",
            Parameter::UBar => "u_bar",
            Parameter::Eta => "eta",
        }
    }
}

/// One row of an empirical probability curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub event: &'static str,
    pub size: usize,
    pub eps: f64,
    pub u: f64,
    pub successes: u64,
    pub replicas: u64,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurvePoint {
    fn new(event: &'static str, size: usize, eps: f64, u: f64, successes: u64, replicas: u64, level: f64) -> Self {
        let (ci_low, ci_high) = binomial_ci(successes, replicas, level);
        Self {
            event,
            size,
            eps,
            u,
            successes,
            replicas,
            probability: successes as f64 / replicas as f64,
            ci_low,
            ci_high,
        }
    }
}

/// A threshold estimate with the raw curves it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub parameter: Parameter,
    /// `None` when the estimator failed; see `failure`.
    pub value: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub eps: f64,
    /// Size `L` the value was read from.
    pub size: usize,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    /// Probability level defining the finite-size proxy.
    pub target_probability: f64,
    pub protocol: String,
    pub curve: Vec<CurvePoint>,
    pub failure: Option<String>,
}

/// Supremum of the levels at which a decreasing event holds in one replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalLevel {
    pub level: f64,
    /// The event still holds at the sampled top level, so `level` is only a lower bound.
    pub censored: bool,
}

impl CriticalLevel {
    /// Whether the event holds at level `u` (for `u` up to the sampled level).
    pub fn holds_at(&self, u: f64) -> bool {
        self.censored || u < self.level
    }

    fn as_value(&self) -> f64 {
        self.level
    }
}

struct Growth<'a> {
    window: &'a LatticeWindow,
    dist: Vec<u32>,
    inner: u32,
    outer: u32,
    vacant: Vec<bool>,
    uf: UnionFind,
}

impl Growth<'_> {
    fn add(&mut self, v: usize) {
        self.vacant[v] = true;
        for dir in 0..2 * self.window.dim() {
            if let Some(u) = self.window.neighbor_index(v, dir) {
                if self.vacant[u] {
                    self.uf.union(v, u);
                }
            }
        }
        let n = self.vacant.len();
        if self.dist[v] <= self.inner {
            self.uf.union(v, n);
        }
        if self.dist[v] == self.outer {
            self.uf.union(v, n + 1);
        }
    }

    fn connected(&mut self) -> bool {
        let n = self.vacant.len();
        self.uf.find(n) == self.uf.find(n + 1)
    }
}

/// Critical level of the crossing `B(center, inner) <-> dB(center, outer)` in `V^{u,eps}`
/// (or in `V^u` without noise), paths confined to `B(center, outer)`.
pub fn critical_level(
    sample: &InterlacementSample,
    noise: Option<(&CoupledNoise, f64)>,
    center: &Point,
    inner: usize,
    outer: usize,
) -> Result<CriticalLevel> {
    let w = sample.window();
    if inner > outer {
        return Err(invalid("inner", format!("{inner} exceeds outer radius {outer}")));
    }
    let ball = LatticeWindow::ball(*center, outer)?;
    if !w.contains_window(&ball) {
        return Err(Error::Coverage(format!("{w:?} does not contain B({center}, {outer})")));
    }
    if let Some((nz, eps)) = noise {
        if nz.window() != w {
            return Err(invalid("noise", "noise lives on a different window"));
        }
        if !(0.0..=0.5).contains(&eps) {
            return Err(invalid("eps", format!("{eps} is not in [0, 1/2]")));
        }
    }
    let n = w.len();
    let dist: Vec<u32> = (0..n)
        .map(|v| {
            let d = w.point(v).dist_inf(center) as usize;
            if d <= outer {
                d as u32
            } else {
                u32::MAX
            }
        })
        .collect();
    let vacant_if = |v: usize, occupied: bool| match noise {
        None => !occupied,
        Some((nz, eps)) => !nz.occupied_at(v, occupied, eps),
    };

    let trajs = sample.trajectories();
    let mut count = vec![0u32; n];
    let mut stamp = vec![u32::MAX; n];
    for (k, t) in trajs.iter().enumerate() {
        for &v in t.forward() {
            if stamp[v as usize] != k as u32 {
                stamp[v as usize] = k as u32;
                count[v as usize] += 1;
            }
        }
    }
    let mut g = Growth {
        window: w,
        dist,
        inner: inner as u32,
        outer: outer as u32,
        vacant: vec![false; n],
        uf: UnionFind::new(n + 2),
    };
    for v in 0..n {
        if g.dist[v] != u32::MAX && vacant_if(v, count[v] > 0) {
            g.add(v);
        }
    }
    if g.connected() {
        return Ok(CriticalLevel {
            level: sample.level(),
            censored: true,
        });
    }
    let mut order: Vec<usize> = (0..trajs.len()).collect();
    order.sort_by(|&a, &b| trajs[b].mark().total_cmp(&trajs[a].mark()).then(a.cmp(&b)));
    stamp.fill(u32::MAX);
    for k in order {
        for &v in trajs[k].forward() {
            let v = v as usize;
            if stamp[v] == k as u32 {
                continue;
            }
            stamp[v] = k as u32;
            count[v] -= 1;
            if count[v] == 0 && g.dist[v] != u32::MAX && !g.vacant[v] && vacant_if(v, false) {
                g.add(v);
            }
        }
        if g.connected() {
            return Ok(CriticalLevel {
                level: trajs[k].mark(),
                censored: false,
            });
        }
    }
    Ok(CriticalLevel {
        level: 0.0,
        censored: false,
    })
}

/// Shared settings of the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Top level of every replica; all curves live on `[0, u_max]`.
    pub u_max: f64,
    /// Lower end of tabulated curve grids.
    pub u_min: f64,
    pub replicas: usize,
    pub seed: u64,
    pub threads: usize,
    pub mode: SamplingMode,
    /// Largest window (in vertices) a replica may use.
    pub max_window: usize,
    /// Confidence level of reported intervals.
    pub confidence: f64,
    /// Number of grid levels in `(0, u_max]` for tabulated curves.
    pub curve_points: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            u_max: 8.0,
            u_min: 0.0,
            replicas: 200,
            seed: 0,
            threads: 1,
            mode: SamplingMode::Exact,
            max_window: 1 << 20,
            confidence: 0.95,
            curve_points: 24,
        }
    }
}

impl EstimatorConfig {
    fn validate(&self) -> Result<()> {
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(invalid("u_max", format!("{} must be positive and finite", self.u_max)));
        }
        if !(self.u_min >= 0.0 && self.u_min < self.u_max) {
            return Err(invalid("u_min", format!("{} is not in [0, u_max)", self.u_min)));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(invalid("confidence", format!("{} is not in (0, 1)", self.confidence)));
        }
        if self.curve_points == 0 {
            return Err(invalid("curve_points", "must be at least 1"));
        }
        Ok(())
    }

    /// `u_min + (u_max - u_min) * i / curve_points` for `i = 1..=curve_points`.
    pub fn grid(&self) -> Vec<f64> {
        (1..=self.curve_points)
            .map(|i| self.u_min + (self.u_max - self.u_min) * i as f64 / self.curve_points as f64)
            .collect()
    }
}

/// Per-replica samples on centered balls, shared by all estimators through the seed.
pub struct ThresholdEstimator {
    potential: Potential,
    config: EstimatorConfig,
    samplers: Mutex<HashMap<usize, Arc<WindowSampler>>>,
}

/// Crossing threshold of the `u_*(eps)` proxy.
pub const CROSSING_TARGET: f64 = 0.5;
/// Crossing probability at which the `u_**` proxy declares decay.
pub const DECAY_TARGET: f64 = 0.1;
/// Probability of the local-uniqueness events at the `ū` proxy onset.
pub const ONSET_TARGET: f64 = 0.5;

impl ThresholdEstimator {
    pub fn new(potential: Potential, config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            potential,
            config,
            samplers: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn check_window(&self, radius: usize) -> Result<()> {
        let size = (2 * radius + 1).pow(self.dim() as u32);
        if size > self.config.max_window {
            return Err(Error::TooLarge {
                what: "window",
                size,
                cap: self.config.max_window,
            });
        }
        Ok(())
    }

    fn sampler(&self, radius: usize) -> Result<Arc<WindowSampler>> {
        self.check_window(radius)?;
        if let Some(s) = self.samplers.lock().expect("sampler cache").get(&radius) {
            return Ok(s.clone());
        }
        let w = LatticeWindow::ball(Point::origin(self.dim()), radius)?;
        let s = Arc::new(WindowSampler::new(&self.potential, &w, self.config.mode)?);
        self.samplers.lock().expect("sampler cache").insert(radius, s.clone());
        Ok(s)
    }

    /// Replica `r` on `B(0, radius)` at `level`, plus its frozen noise uniforms.
    pub fn replica(&self, radius: usize, r: usize, level: f64) -> Result<(InterlacementSample, CoupledNoise)> {
        let s = self.sampler(radius)?;
        let mut rng = stream(self.config.seed, r as u64, &format!("thresholds/ball/{radius}"));
        let sample = s.sample(level, &mut rng)?;
        let noise = CoupledNoise::draw(s.window(), &mut rng);
        Ok((sample, noise))
    }

    /// Critical levels of `B(0, inner) <-> dB(0, 2L)` in `V^{u,eps}` for every replica.
    pub fn critical_levels(&self, eps: f64, size: usize, inner: usize) -> Result<Vec<CriticalLevel>> {
        if size == 0 {
            return Err(invalid("L", "must be positive"));
        }
        self.sampler(2 * size)?;
        let o = Point::origin(self.dim());
        try_map_indexed(self.config.replicas, self.config.threads, |r| {
            let (sample, noise) = self.replica(2 * size, r, self.config.u_max)?;
            let nz = if eps > 0.0 { Some((&noise, eps)) } else { None };
            critical_level(&sample, nz, &o, inner, 2 * size)
        })
    }

    fn curve_from_levels(&self, event: &'static str, size: usize, eps: f64, levels: &[CriticalLevel], grid: &[f64]) -> Vec<CurvePoint> {
        grid.iter()
            .map(|&u| {
                let hits = levels.iter().filter(|l| l.holds_at(u)).count() as u64;
                CurvePoint::new(event, size, eps, u, hits, levels.len() as u64, self.config.confidence)
            })
            .collect()
    }

    /// Empirical `P[B(0,L) <-> dB(0,2L) in V^{u,eps}]` on a grid of levels and sizes.
    pub fn crossing_curve(&self, u_grid: &[f64], eps: f64, sizes: &[usize]) -> Result<Vec<CurvePoint>> {
        if u_grid.is_empty() || sizes.is_empty() {
            return Err(invalid("grid", "level and size grids must be nonempty"));
        }
        if let Some(&u) = u_grid.iter().find(|&&u| !(0.0..=self.config.u_max).contains(&u)) {
            return Err(invalid("u", format!("{u} is outside [0, u_max = {}]", self.config.u_max)));
        }
        let mut out = Vec::new();
        for &l in sizes {
            let levels = self.critical_levels(eps, l, l)?;
            out.extend(self.curve_from_levels("crossing", l, eps, &levels, u_grid));
        }
        Ok(out)
    }

    /// Empirical `P[0 <-> dB(0,2L) in V^u]`, the finite-size proxy of `eta(u)`.
    pub fn eta_curve(&self, u_grid: &[f64], sizes: &[usize]) -> Result<Vec<CurvePoint>> {
        let mut out = Vec::new();
        for &l in sizes {
            let levels = self.critical_levels(0.0, l, 0)?;
            out.extend(self.curve_from_levels("eta", l, 0.0, &levels, u_grid));
        }
        Ok(out)
    }

    fn feasible(&self, sizes: &[usize]) -> Result<Vec<usize>> {
        if sizes.is_empty() {
            return Err(invalid("L", "size grid must be nonempty"));
        }
        let ok: Vec<usize> = sizes
            .iter()
            .copied()
            .filter(|&l| l > 0 && self.check_window(2 * l).is_ok())
            .collect();
        if ok.is_empty() {
            let l = *sizes.iter().min().expect("nonempty");
            self.check_window(2 * l)?;
            return Err(invalid("L", "sizes must be positive"));
        }
        Ok(ok)
    }

    fn quantile_estimate(
        &self,
        parameter: Parameter,
        eps: f64,
        sizes: &[usize],
        target: f64,
        tol: f64,
        protocol: String,
    ) -> Result<ThresholdEstimate> {
        if !(tol > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        let sizes = self.feasible(sizes)?;
        let grid = self.config.grid();
        let mut curve = Vec::new();
        let mut top = Vec::new();
        for &l in &sizes {
            let levels = self.critical_levels(eps, l, l)?;
            curve.extend(self.curve_from_levels("crossing", l, eps, &levels, &grid));
            top = levels;
        }
        let size = *sizes.last().expect("nonempty");
        let prob = |u: f64| top.iter().filter(|l| l.holds_at(u)).count() as f64 / top.len() as f64;
        let mut est = ThresholdEstimate {
            parameter,
            value: None,
            ci: None,
            eps,
            size,
            sizes: sizes.clone(),
            replicas: self.config.replicas,
            target_probability: target,
            protocol,
            curve,
            failure: None,
        };
        if let Some(bad) = non_monotone(&est.curve) {
            est.failure = Some(bad);
            return Ok(est);
        }
        match bisect(prob, target, self.config.u_max, tol) {
            None => {
                est.failure = Some(format!(
                    "crossing probability stays at or above {target} up to u_max = {}; the proxy diverges",
                    self.config.u_max
                ));
            }
            Some(v) => {
                let values: Vec<f64> = top.iter().map(CriticalLevel::as_value).collect();
                let (lo, hi) = quantile_ci(&values, 1.0 - target, self.config.confidence);
                est.value = Some(v);
                est.ci = Some((lo.min(v), hi.max(v)));
            }
        }
        Ok(est)
    }

    /// Level where the crossing probability in `V^{u,eps}` falls through 1/2, at the largest feasible size.
    pub fn estimate_u_star_eps(&self, eps: f64, sizes: &[usize], tol: f64) -> Result<ThresholdEstimate> {
        if !(0.0..=0.5).contains(&eps) {
            return Err(invalid("eps", format!("{eps} is not in [0, 1/2]")));
        }
        let protocol = format!(
            "bisection of P[B(0,L) <-> dB(0,2L) in V^(u,eps)] at {CROSSING_TARGET}; coupled replicas; sample level {}",
            self.config.u_max
        );
        self.quantile_estimate(Parameter::UStarEps, eps, sizes, CROSSING_TARGET, tol, protocol)
    }

    /// Level where the crossing probability in `V^u` decays below [`DECAY_TARGET`].
    pub fn estimate_u_star_star(&self, sizes: &[usize], tol: f64) -> Result<ThresholdEstimate> {
        let protocol = format!(
            "bisection of P[B(0,L) <-> dB(0,2L) in V^u] at {DECAY_TARGET}; coupled replicas; sample level {}",
            self.config.u_max
        );
        self.quantile_estimate(Parameter::UStarStar, 0.0, sizes, DECAY_TARGET, tol, protocol)
    }

    /// Local-uniqueness curves on `B(0, 2L)` with `n = floor(L/2)` on the level grid.
    pub fn local_uniqueness_curves(&self, size: usize, grid: &[f64]) -> Result<Vec<CurvePoint>> {
        let n = size / 2;
        if n == 0 {
            return Err(invalid("L", "needs L >= 2"));
        }
        if let Some(&u) = grid.iter().find(|&&u| !(u > 0.0 && u <= self.config.u_max)) {
            return Err(invalid("u", format!("{u} is outside (0, u_max = {}]", self.config.u_max)));
        }
        let o = Point::origin(self.dim());
        self.sampler(2 * size)?;
        let per_replica: Vec<Vec<(bool, bool)>> = try_map_indexed(self.config.replicas, self.config.threads, |r| {
            let (sample, _) = self.replica(2 * size, r, self.config.u_max)?;
            grid.iter()
                .map(|&u| {
                    let cfg = Configuration::sites(sample.thin(u)?.vacant());
                    Ok((crossing(&cfg, &o, n, 4 * n)?, local_uniqueness_event(&cfg, &o, n)?))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let reps = self.config.replicas as u64;
        let mut out = Vec::new();
        for (i, &u) in grid.iter().enumerate() {
            let conn = per_replica.iter().filter(|r| r[i].0).count() as u64;
            let uniq = per_replica.iter().filter(|r| r[i].1).count() as u64;
            let both = per_replica.iter().filter(|r| r[i].0 && r[i].1).count() as u64;
            let conf = self.config.confidence;
            out.push(CurvePoint::new("connection", size, 0.0, u, conn, reps, conf));
            out.push(CurvePoint::new("uniqueness", size, 0.0, u, uniq, reps, conf));
            out.push(CurvePoint::new("both", size, 0.0, u, both, reps, conf));
        }
        Ok(out)
    }

    /// Onset of failure of the local-uniqueness events: the last grid level before the joint
    /// probability drops below [`ONSET_TARGET`], linearly interpolated, at the largest feasible size.
    pub fn estimate_u_bar(&self, sizes: &[usize]) -> Result<ThresholdEstimate> {
        let sizes = self.feasible(sizes)?;
        let grid = self.config.grid();
        let mut curve = Vec::new();
        for &l in &sizes {
            curve.extend(self.local_uniqueness_curves(l, &grid)?);
        }
        let size = *sizes.last().expect("nonempty");
        let joint: Vec<&CurvePoint> = curve.iter().filter(|c| c.event == "both" && c.size == size).collect();
        let pick = |f: &dyn Fn(&CurvePoint) -> f64| {
            onset(&joint.iter().map(|c| (c.u, f(c))).collect::<Vec<_>>(), ONSET_TARGET)
        };
        let value = pick(&|c| c.probability);
        let ci = value.map(|v| {
            let lo = pick(&|c| c.ci_low).unwrap_or(v);
            let hi = pick(&|c| c.ci_high).unwrap_or(self.config.u_max);
            (lo.min(v), hi.max(v))
        });
        let failure = value.is_none().then(|| {
            format!(
                "joint probability stays at or above {ONSET_TARGET} up to u_max = {}",
                self.config.u_max
            )
        });
        let est = ThresholdEstimate {
            parameter: Parameter::UBar,
            value,
            ci,
            eps: 0.0,
            size,
            sizes: sizes.clone(),
            replicas: self.config.replicas,
            target_probability: ONSET_TARGET,
            protocol: format!(
                "onset below {ONSET_TARGET} of P[B(0,n) <-> dB(0,4n) and local uniqueness at n] with n = floor(L/2) on a {}-point grid up to {}",
                self.config.curve_points, self.config.u_max
            ),
            curve,
            failure,
        };
        Ok(est)
    }

    /// Local-uniqueness table at fixed `u` over a grid of `n` (windows `B(0, 4n)`).
    pub fn estimate_local_uniqueness(&self, u: f64, ns: &[usize]) -> Result<LocalUniquenessTable> {
        if !(u > 0.0) {
            return Err(invalid("u", format!("{u} must be positive")));
        }
        if ns.is_empty() || ns.contains(&0) {
            return Err(invalid("n", "grid must be nonempty and positive"));
        }
        let o = Point::origin(self.dim());
        let level = u.max(self.config.u_max);
        let mut rows = Vec::new();
        for &n in ns {
            self.sampler(4 * n)?;
            let hits: Vec<(bool, bool)> = try_map_indexed(self.config.replicas, self.config.threads, |r| {
                let (sample, _) = self.replica(4 * n, r, level)?;
                let at_u = if u < level { sample.thin(u)? } else { sample };
                let cfg = Configuration::sites(at_u.vacant());
                Ok((crossing(&cfg, &o, n, 4 * n)?, local_uniqueness_event(&cfg, &o, n)?))
            })?;
            let reps = self.config.replicas as u64;
            let conf = self.config.confidence;
            rows.push(LocalUniquenessRow {
                n,
                connection: CurvePoint::new("connection", n, 0.0, u, hits.iter().filter(|h| h.0).count() as u64, reps, conf),
                uniqueness: CurvePoint::new("uniqueness", n, 0.0, u, hits.iter().filter(|h| h.1).count() as u64, reps, conf),
            });
        }
        let exponent = stretched_exponent(
            &rows
                .iter()
                .map(|r| (r.n as f64, 1.0 - r.connection.probability.min(r.uniqueness.probability)))
                .collect::<Vec<_>>(),
        );
        Ok(LocalUniquenessTable {
            u,
            rows,
            stretched_exponent: exponent,
        })
    }
}

/// One size of [`ThresholdEstimator::estimate_local_uniqueness`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalUniquenessRow {
    pub n: usize,
    /// `B(0,n) <-> dB(0,4n)`.
    pub connection: CurvePoint,
    /// Components of diameter at least `n/10` in `B(0,n)` joined in `B(0,2n)`.
    pub uniqueness: CurvePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalUniquenessTable {
    pub u: f64,
    pub rows: Vec<LocalUniquenessRow>,
    /// Descriptive fit `c` of `P[failure] ~ C exp(-n^c)`; `None` when fewer than two usable points.
    pub stretched_exponent: Option<f64>,
}

/// Least-squares slope of `ln(-ln q_n)` against `ln n` over points with `0 < q_n < 1`.
pub fn stretched_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, q)| *n > 0.0 && *q > 0.0 && *q < 1.0)
        .map(|(n, q)| (n.ln(), (-q.ln()).ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Bisection for the level where a nonincreasing `prob` falls below `target`; `None` if
/// it never does on `[0, hi]`.
pub fn bisect(prob: impl Fn(f64) -> f64, target: f64, hi: f64, tol: f64) -> Option<f64> {
    if prob(hi) >= target {
        return None;
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if prob(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Last level before `(u, p)` points (sorted by `u`, with `p(0) = 1` implied) drop below
/// `target`, linearly interpolated.
pub fn onset(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let mut prev = (0.0, 1.0);
    for &(u, p) in points {
        if p < target {
            let t = (prev.1 - target) / (prev.1 - p);
            return Some(prev.0 + t * (u - prev.0));
        }
        prev = (u, p);
    }
    None
}

fn non_monotone(curve: &[CurvePoint]) -> Option<String> {
    for pair in curve.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.size == b.size && a.event == b.event && b.u > a.u && b.successes > a.successes {
            return Some(format!(
                "crossing curve increases between u = {} and u = {} at L = {}",
                a.u, b.u, a.size
            ));
        }
    }
    None
}

/// Order statistic of critical levels with `P[level > u] = p`, i.e. the `(1-p)`-quantile.
pub fn level_quantile(levels: &[CriticalLevel], p: f64) -> f64 {
    quantile(&levels.iter().map(CriticalLevel::as_value).collect::<Vec<_>>(), 1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GreenFunction;
    use crate::percolation::crossing;

    fn estimator(replicas: usize, u_max: f64) -> ThresholdEstimator {
        let g = Arc::new(GreenFunction::new(3).unwrap());
        ThresholdEstimator::new(
            Potential::new(g),
            EstimatorConfig {
                u_max,
                replicas,
                seed: 11,
                curve_points: 8,
                ..EstimatorConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn density_values() {
        let g = GreenFunction::new(3).unwrap();
        assert_eq!(density(&g, 0.0).unwrap(), 0.0);
        assert!(density(&g, 50.0).unwrap() > 1.0 - 1e-14);
        let oracle = 1.0 - (-1.0f64 / 1.516386059151978).exp();
        assert!((density(&g, 1.0).unwrap() - oracle).abs() < 1e-12);
        assert!((density(&g, 1.0).unwrap() - 0.4828).abs() < 1e-4);
        assert!(density(&g, -1.0).is_err());
    }

    #[test]
    fn critical_level_matches_direct_thinning() {
        let est = estimator(6, 4.0);
        let o = Point::origin(3);
        for r in 0..6 {
            let (sample, noise) = est.replica(6, r, 4.0).unwrap();
            for eps in [0.0, 0.1] {
                let nz = if eps > 0.0 { Some((&noise, eps)) } else { None };
                let cl = critical_level(&sample, nz, &o, 3, 6).unwrap();
                for k in 1..=16 {
                    let u = 4.0 * k as f64 / 16.0;
                    let occ = sample.thin(u).unwrap().occupied().clone();
                    let vac = noise.vacant(&occ, eps).unwrap();
                    let direct = crossing(&Configuration::sites(vac), &o, 3, 6).unwrap();
                    assert_eq!(cl.holds_at(u), direct, "replica {r} eps {eps} u {u} level {cl:?}");
                }
            }
        }
    }

    #[test]
    fn tiny_level_crosses() {
        let est = estimator(60, 0.01);
        let curve = est.crossing_curve(&[0.01], 0.0, &[5]).unwrap();
        assert!(curve[0].probability >= 0.99, "{curve:?}");
    }

    #[test]
    fn half_noise_diverges() {
        let est = estimator(40, 2.0);
        let e = est.estimate_u_star_eps(0.5, &[3], 1e-3).unwrap();
        assert!(e.value.is_none());
        assert!(e.failure.is_some());
        assert!(est.estimate_u_star_eps(0.6, &[3], 1e-3).is_err());
    }

    #[test]
    fn estimates_are_reproducible_and_bracketed() {
        let est = estimator(40, 8.0);
        let a = est.estimate_u_star_eps(0.0, &[3], 1e-3).unwrap();
        let b = est.estimate_u_star_eps(0.0, &[3], 1e-3).unwrap();
        assert_eq!(a, b);
        let v = a.value.unwrap();
        let (lo, hi) = a.ci.unwrap();
        assert!(lo <= v && v <= hi);
        let ss = est.estimate_u_star_star(&[3], 1e-3).unwrap();
        assert!(ss.value.unwrap() >= v);
    }

    #[test]
    fn threads_do_not_change_results() {
        let mut a = estimator(12, 4.0);
        let one = a.critical_levels(0.05, 3, 3).unwrap();
        a.config.threads = 3;
        assert_eq!(a.critical_levels(0.05, 3, 3).unwrap(), one);
    }

    #[test]
    fn local_uniqueness_limits() {
        let est = estimator(30, 1.0);
        let t = est.estimate_local_uniqueness(0.01, &[2]).unwrap();
        assert!(t.rows[0].connection.probability >= 0.95);
        assert!(t.rows[0].uniqueness.probability >= 0.95);
        let t = est.estimate_local_uniqueness(50.0, &[2]).unwrap();
        assert!(t.rows[0].connection.probability <= 0.05);
    }

    #[test]
    fn bisect_and_onset() {
        let step = |u: f64| if u < 1.3 { 1.0 } else { 0.0 };
        assert!((bisect(step, 0.5, 4.0, 1e-9).unwrap() - 1.3).abs() < 1e-8);
        assert!(bisect(|_| 1.0, 0.5, 4.0, 1e-9).is_none());
        assert_eq!(onset(&[(1.0, 0.9), (2.0, 0.1)], 0.5), Some(1.5));
        assert_eq!(onset(&[(1.0, 0.9)], 0.5), None);
        assert_eq!(onset(&[(1.0, 0.0)], 0.5), Some(0.5));
    }

    #[test]
    fn stretched_fit() {
        let pts: Vec<(f64, f64)> = [2.0f64, 4.0, 8.0].iter().map(|&n| (n, (-n.powf(0.5)).exp())).collect();
        assert!((stretched_exponent(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(stretched_exponent(&pts[..1]), None);
    }
}
