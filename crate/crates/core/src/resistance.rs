//! Effective resistance of random electric networks on interlacement graphs.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::BondField;
use crate::lattice::{LatticeWindow, Point};
use crate::linalg::conjugate_gradient;
use crate::noise::bernoulli_bond;
use crate::parallel::try_map_indexed;
use crate::percolation::{label_region, region_map, Adjacency, Configuration};
use crate::potential::Potential;
use crate::sampler::{SamplingMode, WindowSampler};
use crate::scalar::Scalar;
use crate::seed::stream;
use crate::stats::quantile;

/// Residual tolerance of the potential solve.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;

/// Law of the i.i.d. edge resistances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ResistanceLaw {
    Constant { c: f64 },
    Uniform { a: f64, b: f64 },
    /// `max(floor, Exp(lambda))`.
    ExponentialTruncated { lambda: f64, floor: f64 },
}

impl ResistanceLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ResistanceLaw::Constant { c } => c > 0.0 && c.is_finite(),
            ResistanceLaw::Uniform { a, b } => a > 0.0 && b >= a && b.is_finite(),
            ResistanceLaw::ExponentialTruncated { lambda, floor } => lambda > 0.0 && lambda.is_finite() && floor > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("law", format!("{self:?} does not have strictly positive finite support")))
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match *self {
            ResistanceLaw::Constant { c } => format!("constant({c})"),
            ResistanceLaw::Uniform { a, b } => format!("uniform({a},{b})"),
            ResistanceLaw::ExponentialTruncated { lambda, floor } => format!("exp({lambda},{floor})"),
        }
    }
}

/// `count` i.i.d. draws from `law`.
pub fn assign_resistances<T: Scalar, R: Rng + ?Sized>(count: usize, law: &ResistanceLaw, rng: &mut R) -> Result<Vec<T>> {
    law.validate()?;
    let out = match *law {
        ResistanceLaw::Constant { c } => vec![T::of(c); count],
        ResistanceLaw::Uniform { a, b } => {
            if a == b {
                vec![T::of(a); count]
            } else {
                let dist = Uniform::new(a, b).map_err(|e| invalid("law", e.to_string()))?;
                (0..count).map(|_| T::of(dist.sample(rng))).collect()
            }
        }
        ResistanceLaw::ExponentialTruncated { lambda, floor } => {
            let dist = Exp::new(lambda).map_err(|e| invalid("law", e.to_string()))?;
            (0..count).map(|_| T::of(dist.sample(rng).max(floor))).collect()
        }
    };
    Ok(out)
}

/// A finite network: vertices `0..n`, resistors on edges, unit potential at the source and
/// zero on the sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistorNetwork<T> {
    vertices: usize,
    edges: Vec<(u32, u32)>,
    resistances: Vec<T>,
    source: usize,
    sinks: Vec<usize>,
}

impl<T: Scalar> ResistorNetwork<T> {
    pub fn new(vertices: usize, edges: Vec<(u32, u32)>, resistances: Vec<T>, source: usize, sinks: Vec<usize>) -> Result<Self> {
        if edges.len() != resistances.len() {
            return Err(invalid("resistances", "one resistance per edge is required"));
        }
        if let Some(r) = resistances.iter().find(|r| !(**r > T::zero()) || !r.is_finite()) {
            return Err(invalid("resistances", format!("{r} is not strictly positive and finite")));
        }
        if let Some(e) = edges.iter().find(|(a, b)| *a as usize >= vertices || *b as usize >= vertices) {
            return Err(invalid("edges", format!("{e:?} references a missing vertex")));
        }
        if source >= vertices || sinks.iter().any(|&s| s >= vertices) {
            return Err(invalid("source", "source and sinks must be vertices"));
        }
        Ok(Self {
            vertices,
            edges,
            resistances,
            source,
            sinks,
        })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn resistances(&self) -> &[T] {
        &self.resistances
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    /// Same network with every resistance multiplied by `c`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(
            self.vertices,
            self.edges.clone(),
            self.resistances.iter().map(|&r| r * c).collect(),
            self.source,
            self.sinks.clone(),
        )
    }

    /// Same network without edge `e`.
    pub fn without_edge(&self, e: usize) -> Self {
        let mut out = self.clone();
        out.edges.remove(e);
        out.resistances.remove(e);
        out
    }
}

/// Result of a potential solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResistanceSolve<T> {
    /// `+inf` when the source cannot reach a sink.
    pub resistance: T,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Effective resistance between the source and the sink set.
pub fn effective_resistance<T: Scalar>(net: &ResistorNetwork<T>) -> Result<T> {
    let tol = DEFAULT_SOLVER_TOL.max(100.0 * T::EPS);
    Ok(solve_network(net, tol, 20 * net.vertices + 1000)?.resistance)
}

/// [`effective_resistance`] with explicit tolerance and iteration cap.
pub fn solve_network<T: Scalar>(net: &ResistorNetwork<T>, tol: f64, max_iter: usize) -> Result<ResistanceSolve<T>> {
    let n = net.vertices;
    let mut is_sink = vec![false; n];
    for &s in &net.sinks {
        is_sink[s] = true;
    }
    if is_sink[net.source] {
        return Ok(ResistanceSolve {
            resistance: T::zero(),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    // adjacency in compressed rows, self-loops dropped
    let mut deg = vec![0usize; n + 1];
    for &(a, b) in &net.edges {
        if a != b {
            deg[a as usize + 1] += 1;
            deg[b as usize + 1] += 1;
        }
    }
    for i in 0..n {
        deg[i + 1] += deg[i];
    }
    let start = deg;
    let mut fill = start.clone();
    let mut nbr = vec![0u32; start[n]];
    let mut cond = vec![T::zero(); start[n]];
    for (&(a, b), &r) in net.edges.iter().zip(&net.resistances) {
        if a == b {
            continue;
        }
        let c = T::one() / r;
        for (x, y) in [(a, b), (b, a)] {
            nbr[fill[x as usize]] = y;
            cond[fill[x as usize]] = c;
            fill[x as usize] += 1;
        }
    }

    // component of the source, stopping at sinks
    let mut seen = vec![false; n];
    let mut stack = vec![net.source];
    seen[net.source] = true;
    let mut reaches_sink = false;
    let mut interior = Vec::new();
    while let Some(v) = stack.pop() {
        if is_sink[v] {
            reaches_sink = true;
            continue;
        }
        if v != net.source {
            interior.push(v);
        }
        for k in start[v]..start[v + 1] {
            let u = nbr[k] as usize;
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    if !reaches_sink {
        return Ok(ResistanceSolve {
            resistance: T::infinity(),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    interior.sort_unstable();
    let mut slot = vec![u32::MAX; n];
    for (i, &v) in interior.iter().enumerate() {
        slot[v] = i as u32;
    }
    let m = interior.len();
    let mut diag = vec![T::zero(); m];
    let mut b = vec![T::zero(); m];
    for (i, &v) in interior.iter().enumerate() {
        for k in start[v]..start[v + 1] {
            diag[i] += cond[k];
            if nbr[k] as usize == net.source {
                b[i] += cond[k];
            }
        }
    }
    let apply = |x: &[T], y: &mut [T]| {
        for (i, &v) in interior.iter().enumerate() {
            let mut acc = diag[i] * x[i];
            for k in start[v]..start[v + 1] {
                let s = slot[nbr[k] as usize];
                if s != u32::MAX {
                    acc -= cond[k] * x[s as usize];
                }
            }
            y[i] = acc;
        }
    };
    let sol = conjugate_gradient(apply, &b, &diag, tol, max_iter)?;
    let mut current = T::zero();
    let s = net.source;
    for k in start[s]..start[s + 1] {
        let u = nbr[k] as usize;
        let phi = if slot[u] != u32::MAX { sol.x[slot[u] as usize] } else { T::zero() };
        current += cond[k] * (T::one() - phi);
    }
    if !(current > T::zero()) {
        return Err(Error::Singular(format!("nonpositive source current {current}")));
    }
    Ok(ResistanceSolve {
        resistance: T::one() / current,
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
    })
}

/// The full lattice ball `[-radius, radius]^d` (any `d >= 1`) as vertex count, edges and
/// l-infinity distances to the center; vertices are ordered with the first axis fastest.
pub fn lattice_ball(d: usize, radius: usize) -> Result<(usize, Vec<(u32, u32)>, Vec<usize>)> {
    if d == 0 {
        return Err(invalid("d", "must be positive"));
    }
    let side = 2 * radius + 1;
    let n = side
        .checked_pow(d as u32)
        .filter(|&n| n < u32::MAX as usize)
        .ok_or_else(|| invalid("radius", "ball too large"))?;
    let mut edges = Vec::with_capacity(d * n);
    let mut dist = Vec::with_capacity(n);
    for v in 0..n {
        let mut rest = v;
        let mut stride = 1;
        let mut far = 0usize;
        for _ in 0..d {
            let c = rest % side;
            rest /= side;
            far = far.max(c.abs_diff(radius));
            if c + 1 < side {
                edges.push((v as u32, (v + stride) as u32));
            }
            stride *= side;
        }
        dist.push(far);
    }
    Ok((n, edges, dist))
}

/// `R(0 <-> dB(0,N))` on the full lattice with unit resistors, for every `N` in `ns`.
pub fn lattice_profile(d: usize, ns: &[usize]) -> Result<Vec<f64>> {
    ns.iter()
        .map(|&radius| {
            let (n, edges, dist) = lattice_ball(d, radius)?;
            let sinks = (0..n).filter(|&v| dist[v] == radius).collect();
            let center = (0..n).find(|&v| dist[v] == 0).expect("center");
            let res = vec![1.0; edges.len()];
            effective_resistance(&ResistorNetwork::new(n, edges, res, center, sinks)?)
        })
        .collect()
}

/// Summary of one radius of a transience profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub radius: usize,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    /// Fraction of replicas whose source cannot reach `dB(0,N)`.
    pub infinite_fraction: f64,
}

/// Effective resistances from a cluster vertex near the origin to `dB(0,N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransienceProfile {
    pub level: f64,
    pub law: ResistanceLaw,
    pub dilution: f64,
    pub radii: Vec<usize>,
    /// `per_replica[r][i]` is the resistance of replica `r` at `radii[i]`.
    pub per_replica: Vec<Vec<f64>>,
    pub rows: Vec<ProfileRow>,
    /// Largest-radius resistances are lower bounds on the resistance to infinity; boundedness
    /// across radii is evidence of transience, not a proof.
    pub note: &'static str,
}

/// Parameters of [`transience_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    pub level: f64,
    pub radii: Vec<usize>,
    pub law: ResistanceLaw,
    /// Bernoulli retention of interlacement edges; 1 keeps all.
    pub dilution: f64,
    pub replicas: usize,
    pub seed: u64,
    pub threads: usize,
    pub mode: SamplingMode,
}

/// Resistance profile of the interlacement graph (optionally diluted) with i.i.d. resistors.
///
/// Each replica samples once on `B(0, N_max)`. The source is the vertex nearest the origin
/// (smallest index among ties) of the largest cluster of the graph restricted to
/// `B(0, N_min)`, so it is shared by all radii and the profile is nondecreasing.
pub fn transience_profile(potential: &Potential, cfg: &ProfileConfig) -> Result<TransienceProfile> {
    cfg.law.validate()?;
    if !(cfg.level > 0.0) {
        return Err(invalid("u", "must be positive"));
    }
    if cfg.replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&cfg.dilution) {
        return Err(invalid("dilution", format!("{} is not in [0, 1]", cfg.dilution)));
    }
    let mut radii = cfg.radii.clone();
    radii.sort_unstable();
    radii.dedup();
    if radii.is_empty() || radii[0] == 0 {
        return Err(invalid("N", "radii must be nonempty and positive"));
    }
    let d = potential.dim();
    let o = Point::origin(d);
    let big = *radii.last().expect("nonempty");
    let window = LatticeWindow::ball(o, big)?;
    let sampler = WindowSampler::new(potential, &window, cfg.mode)?;
    let per_replica = try_map_indexed(cfg.replicas, cfg.threads, |r| -> Result<Vec<f64>> {
        let mut rng = stream(cfg.seed, r as u64, "resistance/profile");
        let sample = sampler.sample(cfg.level, &mut rng)?;
        let dil = bernoulli_bond(&window, cfg.dilution, &mut rng)?;
        let graph = sample.traversed().and(&dil);
        let res: Vec<f64> = assign_resistances(window.edge_count(), &cfg.law, &mut rng)?;
        let source = cluster_source(&graph, radii[0])?;
        radii
            .iter()
            .map(|&n| match source {
                None => Ok(f64::INFINITY),
                Some(s) => ball_resistance(&graph, &res, s, n),
            })
            .collect()
    })?;
    let rows = radii
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let vals: Vec<f64> = per_replica.iter().map(|v| v[i]).collect();
            ProfileRow {
                radius: n,
                median: quantile(&vals, 0.5),
                lower_quartile: quantile(&vals, 0.25),
                upper_quartile: quantile(&vals, 0.75),
                infinite_fraction: vals.iter().filter(|v| v.is_infinite()).count() as f64 / vals.len() as f64,
            }
        })
        .collect();
    Ok(TransienceProfile {
        level: cfg.level,
        law: cfg.law,
        dilution: cfg.dilution,
        radii,
        per_replica,
        rows,
        note: "resistance to the boundary of B(0,N); each value is a lower bound on the resistance to infinity",
    })
}

fn cluster_source(graph: &BondField, radius: usize) -> Result<Option<usize>> {
    let w = graph.window();
    let d = w.dim();
    let ball = LatticeWindow::ball(Point::origin(d), radius)?;
    let cfg = Configuration::bonds(graph.clone());
    let lab = label_region(&cfg, &ball, Adjacency::Nearest)?;
    let Some(best) = lab
        .components()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.size > 1)
        .max_by(|a, b| a.1.size.cmp(&b.1.size).then(b.1.label.cmp(&a.1.label)))
        .map(|(i, _)| i)
    else {
        return Ok(None);
    };
    let o = Point::origin(d);
    let pick = (0..ball.len())
        .filter(|&r| lab.ordinal(r) == Some(best))
        .min_by_key(|&r| (ball.point(r).dist_inf(&o), r))
        .expect("component is nonempty");
    Ok(w.index(&ball.point(pick)))
}

fn ball_resistance(graph: &BondField, res: &[f64], source: usize, radius: usize) -> Result<f64> {
    let w = graph.window();
    let o = Point::origin(w.dim());
    let ball = LatticeWindow::ball(o, radius)?;
    let map = region_map(w, &ball);
    let mut local = vec![u32::MAX; w.len()];
    for (r, &g) in map.iter().enumerate() {
        local[g as usize] = r as u32;
    }
    let mut edges = Vec::new();
    let mut values = Vec::new();
    for e in graph.ones() {
        let (a, b) = w.edge_endpoints(e);
        if local[a] != u32::MAX && local[b] != u32::MAX {
            edges.push((local[a], local[b]));
            values.push(res[e]);
        }
    }
    let sinks = (0..ball.len()).filter(|&r| ball.point(r).dist_inf(&o) == radius as i64).collect();
    let net = ResistorNetwork::new(ball.len(), edges, values, local[source] as usize, sinks)?;
    effective_resistance(&net)
}
