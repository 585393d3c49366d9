//! Multiscale block renormalization: scale hierarchy, seed events, recursive bad events,
//! good/bad block classification, bad `*`-crossings, path lifting and the decoupling bound.
//!
//! Block fields are [`SiteField`]s over windows in block units: block `b` is the lattice
//! point `b * L_0` of `G_0`, and a set bit means the block is bad.

use std::collections::{HashSet, VecDeque};

use crate::error::{invalid, Error, Result};
use crate::field::{BondField, SiteField};
use crate::lattice::{check_dim, LatticeWindow, Point};
use crate::percolation::{label_region, region_map, Adjacency, Configuration};

/// Separation constant `30 * 4^d` of the recursion.
pub fn l_of_d(d: usize) -> u64 {
    30 * 4u64.pow(d as u32)
}

/// Scales `L_n = l_0^n L_0` with an optional override of the separation constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleHierarchy {
    d: usize,
    base: usize,
    l0: usize,
    separation: u64,
    overridden: bool,
}

impl ScaleHierarchy {
    /// `base` is `L_0`, `l0` the number of children per axis.
    pub fn new(d: usize, base: usize, l0: usize) -> Result<Self> {
        check_dim(d)?;
        if base == 0 {
            return Err(invalid("L0", "must be positive"));
        }
        if l0 < 2 {
            return Err(invalid("l0", format!("{l0} must be at least 2")));
        }
        Ok(Self {
            d,
            base,
            l0,
            separation: l_of_d(d),
            overridden: false,
        })
    }

    /// Replaces `l(d)` by a small constant for desk-scale experiments.
    pub fn with_separation(mut self, l: u64) -> Result<Self> {
        if l == 0 {
            return Err(invalid("l", "separation constant must be positive"));
        }
        self.overridden = l != l_of_d(self.d);
        self.separation = l;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn l0(&self) -> usize {
        self.l0
    }

    pub fn separation(&self) -> u64 {
        self.separation
    }

    /// Whether the parameters are in the regime where the quantitative bounds are claimed.
    pub fn proof_regime(&self) -> bool {
        let l = l_of_d(self.d);
        !self.overridden && self.l0 as u64 >= l && self.l0 as u64 % l == 0
    }

    /// `L_n / L_0 = l_0^n`.
    pub fn blocks_per_side(&self, n: usize) -> Result<u64> {
        (self.l0 as u64)
            .checked_pow(n as u32)
            .ok_or_else(|| invalid("n", format!("l0^{n} overflows")))
    }

    /// `L_n`.
    pub fn scale(&self, n: usize) -> Result<u64> {
        self.blocks_per_side(n)?
            .checked_mul(self.base as u64)
            .ok_or_else(|| invalid("n", format!("L_{n} overflows")))
    }

    /// `|x_1 - x_2|_inf > L_n / l` for level-`(n-1)` blocks given by block coordinates.
    pub fn separated(&self, a: &Point, b: &Point, n: usize) -> Result<bool> {
        let dist = a.dist_inf(b) as u128;
        Ok(self.separation as u128 * dist > self.blocks_per_side(n)? as u128)
    }

    /// Block coordinates of `Λ_{x,n}` for `x` in block coordinates.
    pub fn children(&self, x: &Point, n: usize) -> Result<Vec<Point>> {
        if n == 0 {
            return Err(invalid("n", "level-0 blocks have no children"));
        }
        let step = self.blocks_per_side(n - 1)? as i64;
        let sub = LatticeWindow::cube(Point::origin(self.d), self.l0)?;
        Ok(sub.iter().map(|j| *x + j.scale(step)).collect())
    }

    /// Block window of the `l_0^n` level-0 blocks under `x`.
    pub fn block_window(&self, x: &Point, n: usize) -> Result<LatticeWindow> {
        LatticeWindow::cube(*x, self.blocks_per_side(n)? as usize)
    }
}

/// Base side and density target of the seed events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedSpec {
    pub base: usize,
    /// `m(u)`, the target density.
    pub m: f64,
}

impl SeedSpec {
    pub fn new(base: usize, m: f64) -> Result<Self> {
        if base == 0 {
            return Err(invalid("L0", "must be positive"));
        }
        if !(m > 0.0 && m < 1.0) {
            return Err(invalid("m", format!("{m} is not in (0, 1)")));
        }
        Ok(Self { base, m })
    }

    fn volume(&self, d: usize) -> f64 {
        (self.base as f64).powi(d as i32)
    }

    /// Size at least `3/4 m L_0^d`.
    pub fn is_big(&self, size: usize, d: usize) -> bool {
        4.0 * size as f64 >= 3.0 * self.m * self.volume(d)
    }

    /// Count at most `5/4 m L_0^d`.
    pub fn is_sparse(&self, count: usize, d: usize) -> bool {
        4.0 * count as f64 <= 5.0 * self.m * self.volume(d)
    }
}

fn seed_box(cfg: &Configuration, x: &Point, base: usize) -> Result<LatticeWindow> {
    let b = LatticeWindow::cube(*x, 2 * base)?;
    if !cfg.window().contains_window(&b) {
        return Err(Error::Coverage(format!("{:?} does not contain the box at {x}", cfg.window())));
    }
    Ok(b)
}

fn subboxes(x: &Point, base: usize) -> Result<Vec<LatticeWindow>> {
    let d = x.dim();
    LatticeWindow::cube(Point::origin(d), 2)?
        .iter()
        .map(|e| LatticeWindow::cube(*x + e.scale(base as i64), base))
        .collect()
}

/// Good event `E_x`: every sub-box of side `L_0` has a component of size at least
/// `3/4 m L_0^d`, and one such choice per sub-box lies in a single component of the box.
pub fn eval_seed_e(cfg: &Configuration, x: &Point, spec: &SeedSpec) -> Result<bool> {
    let d = x.dim();
    let whole = seed_box(cfg, x, spec.base)?;
    let big = label_region(cfg, &whole, Adjacency::Nearest)?;
    let mut common: Option<HashSet<usize>> = None;
    for sub in subboxes(x, spec.base)? {
        let lab = label_region(cfg, &sub, Adjacency::Nearest)?;
        let map = region_map(&whole, &sub);
        let here: HashSet<usize> = lab
            .components()
            .iter()
            .filter(|c| spec.is_big(c.size, d))
            .filter_map(|c| big.ordinal(map[c.label] as usize))
            .collect();
        let next = match common {
            None => here,
            Some(prev) => prev.intersection(&here).copied().collect(),
        };
        if next.is_empty() {
            return Ok(false);
        }
        common = Some(next);
    }
    Ok(true)
}

/// Good event `F_x`: every sub-box has at most `5/4 m L_0^d` vertices with an open edge inside it.
pub fn eval_seed_f(cfg: &Configuration, x: &Point, spec: &SeedSpec) -> Result<bool> {
    let d = x.dim();
    seed_box(cfg, x, spec.base)?;
    let w = cfg.window();
    for sub in subboxes(x, spec.base)? {
        let map = region_map(w, &sub);
        let count = (0..sub.len())
            .filter(|&r| {
                (0..2 * d).any(|dir| sub.neighbor_index(r, dir).is_some() && cfg.is_open_step(map[r] as usize, dir))
            })
            .count();
        if !spec.is_sparse(count, d) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Bad event `D̄_x`: some edge with both endpoints in `x + [0, 2L_0)^d` is closed.
pub fn eval_seed_d(cfg: &Configuration, x: &Point, base: usize) -> Result<bool> {
    let b = seed_box(cfg, x, base)?;
    let map = region_map(cfg.window(), &b);
    for r in 0..b.len() {
        for axis in 0..b.dim() {
            if b.neighbor_index(r, 2 * axis).is_some() && !cfg.is_open_step(map[r] as usize, 2 * axis) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Evaluates `f` on every block of a block window.
pub fn seed_field(blocks: &LatticeWindow, mut f: impl FnMut(&Point) -> Result<bool>) -> Result<SiteField> {
    let bits = blocks.iter().map(|b| f(&b)).collect::<Result<Vec<bool>>>()?;
    Ok(SiteField::from_bits(blocks, bits))
}

/// Lattice point of a block coordinate.
pub fn block_corner(block: &Point, base: usize) -> Point {
    block.scale(base as i64)
}

/// Recursive bad event `Ḡ_{x,n}` from the level-0 bad field; `x` is in block coordinates
/// and every level is evaluated once, bottom up.
pub fn eval_recursive(bad: &SiteField, hier: &ScaleHierarchy, x: &Point, n: usize) -> Result<bool> {
    Ok(recursive_levels(bad, hier, x, n)?.pop().expect("level n")[0])
}

/// Bad indicators of all blocks of every level `0..=n` under `x`; level `k` is indexed
/// like a cube of side `l_0^{n-k}`, first axis fastest.
pub fn recursive_levels(bad: &SiteField, hier: &ScaleHierarchy, x: &Point, n: usize) -> Result<Vec<Vec<bool>>> {
    let d = hier.dim();
    if x.dim() != d {
        return Err(invalid("x", "dimension mismatch"));
    }
    let region = hier.block_window(x, n)?;
    if !bad.window().contains_window(&region) {
        return Err(Error::Coverage(format!(
            "bad field {:?} does not cover {region:?}",
            bad.window()
        )));
    }
    let map = region_map(bad.window(), &region);
    let mut levels = vec![map.iter().map(|&g| bad.get(g as usize)).collect::<Vec<bool>>()];
    let l0 = hier.l0();
    for k in 1..=n {
        let below = levels.last().expect("previous level");
        let side_below = hier.blocks_per_side(n - k + 1)? as usize;
        let side = side_below / l0;
        let grid_below = LatticeWindow::cube(Point::origin(d), side_below)?;
        let grid = LatticeWindow::cube(Point::origin(d), side)?;
        let kids = LatticeWindow::cube(Point::origin(d), l0)?;
        let spacing = hier.blocks_per_side(k - 1)? as i64;
        let mut level = vec![false; grid.len()];
        for (i, y) in grid.iter().enumerate() {
            let mut hits: Vec<Point> = Vec::new();
            'kids: for j in kids.iter() {
                let c = y.scale(l0 as i64) + j;
                if below[grid_below.index(&c).expect("child in grid")] {
                    let pos = c.scale(spacing);
                    for h in &hits {
                        if hier.separated(h, &pos, k)? {
                            level[i] = true;
                            break 'kids;
                        }
                    }
                    hits.push(pos);
                }
            }
        }
        levels.push(level);
    }
    Ok(levels)
}

/// Bad indicator per block: `D̄` of the dilution, or not `E`, or not `F` of the interlacement graph.
pub fn classify_blocks(
    interlacement: &BondField,
    dilution: &BondField,
    spec: &SeedSpec,
    blocks: &LatticeWindow,
) -> Result<SiteField> {
    let int_cfg = Configuration::bonds(interlacement.clone());
    let dil_cfg = Configuration::bonds(dilution.clone());
    seed_field(blocks, |b| {
        let x = block_corner(b, spec.base);
        Ok(eval_seed_d(&dil_cfg, &x, spec.base)?
            || !eval_seed_e(&int_cfg, &x, spec)?
            || !eval_seed_f(&int_cfg, &x, spec)?)
    })
}

/// `H̄*(x, M, N)`: a `*`-path of bad blocks inside `B(x, N)` joins `B(x, M)` to `dB(x, N)`.
/// `x` is a lattice point of `G_0`; `M < N` are multiples of `L_0`.
pub fn hstar_event(bad: &SiteField, base: usize, x: &Point, m: usize, n: usize) -> Result<bool> {
    if base == 0 || m >= n || m % base != 0 || n % base != 0 {
        return Err(invalid("M,N", format!("need M < N divisible by L0 = {base}, got M = {m}, N = {n}")));
    }
    if (0..x.dim()).any(|a| x.get(a).rem_euclid(base as i64) != 0) {
        return Err(invalid("x", format!("{x} is not on the block lattice")));
    }
    let c = Point::new(&x.coords().iter().map(|v| v / base as i64).collect::<Vec<_>>());
    let (rm, rn) = ((m / base) as i64, (n / base) as i64);
    let ball = LatticeWindow::ball(c, rn as usize)?;
    let w = bad.window();
    if !w.contains_window(&ball) {
        return Err(Error::Coverage(format!("bad field {w:?} does not cover {ball:?}")));
    }
    let cfg = Configuration::sites(bad.clone());
    let lab = label_region(&cfg, &ball, Adjacency::Star)?;
    let mut inner = HashSet::new();
    for (r, p) in ball.iter().enumerate() {
        if p.dist_inf(&c) <= rm {
            if let Some(o) = lab.ordinal(r) {
                inner.insert(o);
            }
        }
    }
    let crossed = ball
        .iter()
        .enumerate()
        .any(|(r, p)| p.dist_inf(&c) == rn && lab.ordinal(r).is_some_and(|o| inner.contains(&o)));
    Ok(crossed)
}

/// Output of a successful [`path_lift`].
#[derive(Debug, Clone, PartialEq)]
pub struct LiftReport {
    /// Size of the unique big component `C_z` of each block's base cube.
    pub component_sizes: Vec<usize>,
    /// Open nearest-neighbor path of the diluted graph from `C_{first}` to `C_{last}`.
    pub path: Vec<Point>,
}

/// Turns a nearest-neighbor path of good blocks into an open lattice path of the diluted
/// interlacement graph inside the union of the blocks' `2L_0` boxes.
pub fn path_lift(
    blocks: &[Point],
    interlacement: &BondField,
    dilution: &BondField,
    spec: &SeedSpec,
) -> Result<LiftReport> {
    if blocks.is_empty() {
        return Err(Error::Precondition("empty block path".into()));
    }
    if interlacement.window() != dilution.window() {
        return Err(invalid("dilution", "fields live on different windows"));
    }
    let d = blocks[0].dim();
    for pair in blocks.windows(2) {
        if (pair[1] - pair[0]).norm_1() != 1 {
            return Err(Error::Precondition(format!(
                "blocks {} and {} are not nearest neighbors",
                pair[0], pair[1]
            )));
        }
    }
    let int_cfg = Configuration::bonds(interlacement.clone());
    let dil_cfg = Configuration::bonds(dilution.clone());
    for b in blocks {
        let x = block_corner(b, spec.base);
        if eval_seed_d(&dil_cfg, &x, spec.base)? || !eval_seed_e(&int_cfg, &x, spec)? || !eval_seed_f(&int_cfg, &x, spec)? {
            return Err(Error::Precondition(format!("block {b} is bad")));
        }
    }
    let joint = Configuration::bonds(interlacement.and(dilution));
    let w = joint.window().clone();

    let mut comps: Vec<Vec<usize>> = Vec::with_capacity(blocks.len());
    for b in blocks {
        let cube = LatticeWindow::cube(block_corner(b, spec.base), spec.base)?;
        let lab = label_region(&joint, &cube, Adjacency::Nearest)?;
        let big: Vec<usize> = (0..lab.count())
            .filter(|&o| spec.is_big(lab.components()[o].size, d))
            .collect();
        if big.len() != 1 {
            return Err(Error::LiftFailure {
                block: b.to_string(),
                clause: format!("expected one big component in the base cube, found {}", big.len()),
            });
        }
        let map = region_map(&w, &cube);
        comps.push(
            (0..cube.len())
                .filter(|&r| lab.ordinal(r) == Some(big[0]))
                .map(|r| map[r] as usize)
                .collect(),
        );
    }

    let boxes: Vec<LatticeWindow> = blocks
        .iter()
        .map(|b| LatticeWindow::cube(block_corner(b, spec.base), 2 * spec.base))
        .collect::<Result<_>>()?;
    let mut path: Vec<usize> = vec![comps[0][0]];
    for i in 1..blocks.len() {
        let allowed = |p: &Point| boxes[i - 1].contains(p) || boxes[i].contains(p);
        // within C_{i-1} to the vertex where the crossing starts, then across to C_i
        let leg = bfs_path(&joint, &comps[i - 1], &comps[i], &allowed).ok_or_else(|| Error::LiftFailure {
            block: blocks[i].to_string(),
            clause: format!("big components of {} and {} are not joined", blocks[i - 1], blocks[i]),
        })?;
        let here = *path.last().expect("nonempty");
        let cube = LatticeWindow::cube(block_corner(&blocks[i - 1], spec.base), spec.base)?;
        let inside = |p: &Point| cube.contains(p);
        let stitch = bfs_path(&joint, &[here], &[leg[0]], &inside).ok_or_else(|| Error::LiftFailure {
            block: blocks[i - 1].to_string(),
            clause: "big component is not connected".into(),
        })?;
        path.extend_from_slice(&stitch[1..]);
        path.extend_from_slice(&leg[1..]);
    }

    let points: Vec<Point> = path.iter().map(|&v| w.point(v)).collect();
    for (k, step) in points.windows(2).enumerate() {
        let e = w.edge_between(path[k], path[k + 1]);
        if (step[1] - step[0]).norm_1() != 1 || !e.is_some_and(|e| joint.is_open_edge(e)) {
            return Err(Error::LiftFailure {
                block: step[0].to_string(),
                clause: "extracted path uses a closed edge".into(),
            });
        }
    }
    if !points.iter().all(|p| boxes.iter().any(|b| b.contains(p))) {
        return Err(Error::LiftFailure {
            block: blocks[0].to_string(),
            clause: "extracted path leaves the union of boxes".into(),
        });
    }
    Ok(LiftReport {
        component_sizes: comps.iter().map(Vec::len).collect(),
        path: points,
    })
}

/// Shortest open path from `sources` to `targets` through vertices accepted by `allowed`.
fn bfs_path(cfg: &Configuration, sources: &[usize], targets: &[usize], allowed: &dyn Fn(&Point) -> bool) -> Option<Vec<usize>> {
    let w = cfg.window();
    let target: HashSet<usize> = targets.iter().copied().collect();
    let mut parent = vec![usize::MAX; w.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if parent[s] == usize::MAX {
            parent[s] = s;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        if target.contains(&v) {
            let mut out = vec![v];
            let mut c = v;
            while parent[c] != c {
                c = parent[c];
                out.push(c);
            }
            out.reverse();
            return Some(out);
        }
        for dir in 0..2 * w.dim() {
            if !cfg.is_open_step(v, dir) {
                continue;
            }
            let u = w.neighbor_index(v, dir).expect("open step stays inside");
            if parent[u] == usize::MAX && allowed(&w.point(u)) {
                parent[u] = v;
                queue.push_back(u);
            }
        }
    }
    None
}

/// Natural log of `(l_0^{2d} p + 1/4)^{2^n}`.
pub fn ln_decoupling_bound(l0: usize, d: usize, n: usize, p_seed: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_seed) {
        return Err(invalid("p_seed", format!("{p_seed} is not in [0, 1]")));
    }
    let base = (l0 as f64).powi(2 * d as i32) * p_seed + 0.25;
    Ok(2f64.powi(n as i32) * base.ln())
}

/// `(l_0^{2d} p + 1/4)^{2^n}`, exact repeated squaring while it stays representable.
pub fn decoupling_bound(l0: usize, d: usize, n: usize, p_seed: f64) -> Result<f64> {
    let ln = ln_decoupling_bound(l0, d, n, p_seed)?;
    if n <= 10 {
        let mut v = (l0 as f64).powi(2 * d as i32) * p_seed + 0.25;
        for _ in 0..n {
            v *= v;
        }
        return Ok(v);
    }
    Ok(ln.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::bernoulli_bond;
    use crate::seed::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn hier() -> ScaleHierarchy {
        ScaleHierarchy::new(3, 1, 4).unwrap().with_separation(3).unwrap()
    }

    fn blocks(side: usize) -> LatticeWindow {
        LatticeWindow::cube(Point::origin(3), side).unwrap()
    }

    /// Literal expansion of the union over separated pairs, no memoization.
    fn brute(bad: &SiteField, h: &ScaleHierarchy, x: &Point, n: usize) -> bool {
        if n == 0 {
            return bad.at(x).unwrap();
        }
        let kids = h.children(x, n).unwrap();
        kids.iter().any(|a| {
            kids.iter()
                .any(|b| h.separated(a, b, n).unwrap() && brute(bad, h, a, n - 1) && brute(bad, h, b, n - 1))
        })
    }

    #[test]
    fn separation_constant() {
        assert_eq!(l_of_d(3), 1920);
        assert_eq!(l_of_d(4), 7680);
        assert_eq!(l_of_d(5), 30720);
        let h = ScaleHierarchy::new(3, 2, 1920).unwrap();
        assert!(h.proof_regime());
        assert!(!ScaleHierarchy::new(3, 2, 1000).unwrap().proof_regime());
        assert!(!hier().proof_regime());
        assert_eq!(h.scale(2).unwrap(), 2 * 1920 * 1920);
        assert_eq!(hier().children(&Point::origin(3), 1).unwrap().len(), 64);
    }

    #[test]
    fn recursion_base_cases() {
        let h = hier();
        let o = Point::origin(3);
        let mut bad = SiteField::filled(&blocks(4), false);
        assert!(!eval_recursive(&bad, &h, &o, 1).unwrap());
        bad.set(0, true);
        assert!(eval_recursive(&bad, &h, &o, 0).unwrap());
        assert!(!eval_recursive(&bad, &h, &o, 1).unwrap());
        // 3 * 1 > 4 fails, 3 * 2 > 4 holds
        let w = bad.window().clone();
        let mut near = bad.clone();
        near.set(w.index(&Point::new(&[1, 0, 0])).unwrap(), true);
        assert!(!eval_recursive(&near, &h, &o, 1).unwrap());
        bad.set(w.index(&Point::new(&[2, 1, 0])).unwrap(), true);
        assert!(eval_recursive(&bad, &h, &o, 1).unwrap());
        assert!(eval_recursive(&bad, &h, &Point::new(&[1, 0, 0]), 1).is_err());
    }

    #[test]
    fn decoupling_cases() {
        assert_eq!(decoupling_bound(4, 3, 0, 0.0).unwrap(), 0.25);
        assert_eq!(decoupling_bound(4, 3, 2, 0.0).unwrap(), 0.00390625);
        for n in 0..6 {
            let p = 0.25 / 4f64.powi(6);
            assert_eq!(decoupling_bound(4, 3, n, p).unwrap(), 0.5f64.powi(1 << n));
        }
        let ln = ln_decoupling_bound(4, 3, 40, 0.0).unwrap();
        assert!((ln - 2f64.powi(40) * 0.25f64.ln()).abs() < 1.0);
        assert_eq!(decoupling_bound(4, 3, 40, 0.0).unwrap(), 0.0);
        assert!(decoupling_bound(4, 3, 1, 1.5).is_err());
    }

    #[test]
    fn seed_events_trivial() {
        let w = blocks(4);
        let spec = SeedSpec::new(2, 0.5).unwrap();
        let o = Point::origin(3);
        let full = Configuration::bonds(BondField::filled(&w, true));
        let empty = Configuration::bonds(BondField::filled(&w, false));
        assert!(eval_seed_e(&full, &o, &spec).unwrap());
        assert!(!eval_seed_e(&empty, &o, &spec).unwrap());
        assert!(eval_seed_f(&empty, &o, &spec).unwrap());
        assert!(!eval_seed_f(&full, &o, &spec).unwrap());
        assert!(!eval_seed_d(&full, &o, 2).unwrap());
        let mut one = BondField::filled(&w, true);
        one.set(5, false);
        assert!(eval_seed_d(&Configuration::bonds(one), &o, 2).unwrap());
        assert!(eval_seed_d(&full, &Point::new(&[1, 0, 0]), 2).is_err());
    }

    #[test]
    fn classify_cases() {
        let base = 2;
        let w = blocks(6);
        let spec = SeedSpec::new(base, 0.7).unwrap();
        let bl = blocks(2);
        let full = BondField::filled(&w, true);
        // F fails when every vertex has an edge: 8 > 5/4 * 0.7 * 8
        let all = classify_blocks(&full, &full, &spec, &bl).unwrap();
        assert_eq!(all.count_ones(), 8);
        let loose = SeedSpec::new(base, 0.9).unwrap();
        assert_eq!(classify_blocks(&full, &full, &loose, &bl).unwrap().count_ones(), 0);
        let mut dil = full.clone();
        let e = w.edge_between(w.index(&Point::new(&[5, 5, 4])).unwrap(), w.index(&Point::new(&[5, 5, 5])).unwrap());
        dil.set(e.unwrap(), false);
        let c = classify_blocks(&full, &dil, &loose, &bl).unwrap();
        assert_eq!(c.count_ones(), 1);
        assert!(c.at(&Point::new(&[1, 1, 1])).unwrap());
    }

    #[test]
    fn hstar_cases() {
        let shifted = LatticeWindow::ball(Point::origin(3), 4).unwrap();
        let o = Point::origin(3);
        let good = SiteField::filled(&shifted, false);
        assert!(!hstar_event(&good, 2, &o, 2, 8).unwrap());
        let line = SiteField::from_fn(&shifted, |p| p.get(1) == 0 && p.get(2) == 0 && p.get(0) >= 1);
        assert!(hstar_event(&line, 2, &o, 2, 8).unwrap());
        let diag = SiteField::from_fn(&shifted, |p| p.get(0) == p.get(1) && p.get(1) == p.get(2) && p.get(0) >= 1);
        assert!(hstar_event(&diag, 2, &o, 2, 8).unwrap());
        let outside = SiteField::from_fn(&shifted, |p| p.norm_inf() == 4);
        assert!(!hstar_event(&outside, 2, &o, 2, 6).unwrap());
        assert!(hstar_event(&outside, 2, &o, 3, 8).is_err());
    }

    #[test]
    fn lift_two_good_blocks() {
        let base = 2;
        let w = blocks(6);
        let spec = SeedSpec::new(base, 0.9).unwrap();
        let full = BondField::filled(&w, true);
        let path = [Point::new(&[0, 0, 0]), Point::new(&[1, 0, 0]), Point::new(&[1, 1, 0])];
        let rep = path_lift(&path, &full, &full, &spec).unwrap();
        assert_eq!(rep.component_sizes, vec![8, 8, 8]);
        assert!(rep.path.len() >= 2);
        assert_eq!(rep.path[0], Point::origin(3));
        assert!(LatticeWindow::cube(Point::new(&[2, 2, 0]), 2).unwrap().contains(rep.path.last().unwrap()));
        let single = path_lift(&path[..1], &full, &full, &spec).unwrap();
        assert_eq!(single.component_sizes, vec![8]);
        let tight = SeedSpec::new(base, 0.5).unwrap();
        assert!(matches!(path_lift(&path, &full, &full, &tight), Err(Error::Precondition(_))));
        let gap = [Point::new(&[0, 0, 0]), Point::new(&[1, 1, 0])];
        assert!(matches!(path_lift(&gap, &full, &full, &spec), Err(Error::Precondition(_))));
    }

    #[test]
    fn bernoulli_seed_d_frequency() {
        let w = blocks(4);
        let p: f64 = 0.995;
        let edges = 3 * 4 * 4 * 3;
        let expect = 1.0 - p.powi(edges);
        let reps = 20_000;
        let mut rng = stream(3, 0, "seed-d");
        let cfgs = (0..reps).filter(|_| {
            let cfg = Configuration::bonds(bernoulli_bond(&w, p, &mut rng).unwrap());
            eval_seed_d(&cfg, &Point::origin(3), 2).unwrap()
        });
        let hits = cfgs.count() as f64 / reps as f64;
        let sigma = (expect * (1.0 - expect) / reps as f64).sqrt();
        assert!((hits - expect).abs() < 4.0 * sigma, "{hits} vs {expect}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn memoized_matches_brute(seed in 0u64..1_000_000, q in 0.02f64..0.3) {
            let h = hier();
            let mut rng = stream(seed, 0, "renorm");
            let bad = SiteField::from_bits(&blocks(4), (0..64).map(|_| rng.random::<f64>() < q * 3.0).collect());
            prop_assert_eq!(eval_recursive(&bad, &h, &Point::origin(3), 1).unwrap(), brute(&bad, &h, &Point::origin(3), 1));
            let big = SiteField::from_bits(&blocks(16), (0..4096).map(|_| rng.random::<f64>() < q).collect());
            prop_assert_eq!(eval_recursive(&big, &h, &Point::origin(3), 2).unwrap(), brute(&big, &h, &Point::origin(3), 2));
        }

        #[test]
        fn seed_monotone(seed in 0u64..1_000_000, p in 0.3f64..0.9) {
            let w = blocks(4);
            let spec = SeedSpec::new(2, 0.5).unwrap();
            let mut rng = stream(seed, 0, "mono");
            let a = bernoulli_bond(&w, p, &mut rng).unwrap();
            let b = a.or(&bernoulli_bond(&w, 0.3, &mut rng).unwrap());
            let (ca, cb) = (Configuration::bonds(a), Configuration::bonds(b));
            let o = Point::origin(3);
            if eval_seed_e(&ca, &o, &spec).unwrap() { prop_assert!(eval_seed_e(&cb, &o, &spec).unwrap()); }
            if eval_seed_f(&cb, &o, &spec).unwrap() { prop_assert!(eval_seed_f(&ca, &o, &spec).unwrap()); }
            if eval_seed_d(&cb, &o, 2).unwrap() { prop_assert!(eval_seed_d(&ca, &o, 2).unwrap()); }
        }

        #[test]
        fn hstar_monotone(seed in 0u64..1_000_000, q in 0.1f64..0.5) {
            let w = LatticeWindow::ball(Point::origin(3), 3).unwrap();
            let mut rng = stream(seed, 0, "hstar");
            let a = SiteField::from_bits(&w, (0..w.len()).map(|_| rng.random::<f64>() < q).collect());
            let b = a.or(&SiteField::from_bits(&w, (0..w.len()).map(|_| rng.random::<f64>() < 0.1).collect()));
            if hstar_event(&a, 1, &Point::origin(3), 1, 3).unwrap() {
                prop_assert!(hstar_event(&b, 1, &Point::origin(3), 1, 3).unwrap());
            }
        }
    }
}
