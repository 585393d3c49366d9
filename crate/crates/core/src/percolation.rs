//! Connectivity of site/bond configurations: component labeling, crossings, slabs,
//! diameter filters, planar blocking circuits and uniqueness events.

use std::collections::{HashSet, VecDeque};

use crate::error::{invalid, Error, Result};
use crate::field::{BondField, SiteField};
use crate::lattice::{LatticeWindow, Point, MAX_DIM};

/// Disjoint sets with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] as usize != r {
            r = self.parent[r] as usize;
        }
        let mut c = x;
        while self.parent[c] as usize != r {
            let next = self.parent[c] as usize;
            self.parent[c] = r as u32;
            c = next;
        }
        r
    }

    /// Merges the sets of `a` and `b`; returns the new root, or `None` if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        Some(ra)
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

/// How site and bond bits combine into an open graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjacencyRule {
    /// Active vertices are the set bits; an edge is open iff both endpoints are active.
    Site,
    /// Every vertex is active; an edge is open iff its bit is set.
    Bond,
    /// Active vertices are the set site bits; an edge is open iff its bit is set and both endpoints are active.
    SiteAndBond,
}

/// Nearest-neighbor or l-infinity (`*`) adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    Nearest,
    /// `3^d - 1` neighbors; bonds are ignored.
    Star,
}

/// A site and/or bond configuration over a window.
#[derive(Debug, Clone)]
pub struct Configuration {
    window: LatticeWindow,
    sites: Option<SiteField>,
    bonds: Option<BondField>,
    rule: AdjacencyRule,
}

impl Configuration {
    pub fn sites(sites: SiteField) -> Self {
        Self {
            window: sites.window().clone(),
            sites: Some(sites),
            bonds: None,
            rule: AdjacencyRule::Site,
        }
    }

    pub fn bonds(bonds: BondField) -> Self {
        Self {
            window: bonds.window().clone(),
            sites: None,
            bonds: Some(bonds),
            rule: AdjacencyRule::Bond,
        }
    }

    pub fn site_and_bond(sites: SiteField, bonds: BondField) -> Result<Self> {
        if sites.window() != bonds.window() {
            return Err(invalid("configuration", "site and bond fields live on different windows"));
        }
        Ok(Self {
            window: sites.window().clone(),
            sites: Some(sites),
            bonds: Some(bonds),
            rule: AdjacencyRule::SiteAndBond,
        })
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn rule(&self) -> AdjacencyRule {
        self.rule
    }

    pub fn site_field(&self) -> Option<&SiteField> {
        self.sites.as_ref()
    }

    pub fn bond_field(&self) -> Option<&BondField> {
        self.bonds.as_ref()
    }

    #[inline]
    pub fn is_active(&self, v: usize) -> bool {
        match &self.sites {
            Some(s) => s.get(v),
            None => true,
        }
    }

    /// Whether the internal edge from `v` in direction `dir` is open.
    #[inline]
    pub fn is_open_step(&self, v: usize, dir: usize) -> bool {
        let Some(n) = self.window.neighbor_index(v, dir) else {
            return false;
        };
        if !self.is_active(v) || !self.is_active(n) {
            return false;
        }
        match &self.bonds {
            Some(b) => {
                let lower = v.min(n);
                b.get(self.window.edge_index(lower, dir / 2).expect("internal edge"))
            }
            None => true,
        }
    }

    pub fn is_open_edge(&self, e: usize) -> bool {
        let (a, _) = self.window.edge_endpoints(e);
        self.is_open_step(a, 2 * self.window.edge_axis(e))
    }

    /// Same configuration with every vertex outside `mask` closed.
    pub fn with_site_mask(&self, mask: &SiteField) -> Result<Self> {
        if mask.window() != &self.window {
            return Err(invalid("mask", "mask lives on a different window"));
        }
        let sites = match &self.sites {
            Some(s) => s.and(mask),
            None => mask.clone(),
        };
        let rule = match self.rule {
            AdjacencyRule::Site => AdjacencyRule::Site,
            _ => AdjacencyRule::SiteAndBond,
        };
        Ok(Self {
            window: self.window.clone(),
            sites: Some(sites),
            bonds: self.bonds.clone(),
            rule,
        })
    }

    /// Number of active vertices.
    pub fn active_count(&self) -> usize {
        (0..self.window.len()).filter(|&v| self.is_active(v)).count()
    }
}

/// One connected component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    /// Smallest vertex index (of the labeled region) in the component.
    pub label: usize,
    pub size: usize,
    /// Largest coordinate extent, `max_a (max x_a - min x_a)`.
    pub diameter: usize,
}

/// Component labels over a region of a configuration.
#[derive(Debug, Clone)]
pub struct ComponentLabeling {
    region: LatticeWindow,
    comp_of: Vec<u32>,
    components: Vec<Component>,
}

const NONE: u32 = u32::MAX;

impl ComponentLabeling {
    pub fn region(&self) -> &LatticeWindow {
        &self.region
    }

    /// Label of the component of region vertex `v` (its smallest vertex index).
    pub fn label(&self, v: usize) -> Option<usize> {
        self.component_of(v).map(|c| c.label)
    }

    pub fn component_of(&self, v: usize) -> Option<&Component> {
        match self.comp_of[v] {
            NONE => None,
            c => Some(&self.components[c as usize]),
        }
    }

    /// Ordinal of the component of `v` in `components()`.
    pub fn ordinal(&self, v: usize) -> Option<usize> {
        match self.comp_of[v] {
            NONE => None,
            c => Some(c as usize),
        }
    }

    /// Components ordered by label.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn max_size(&self) -> usize {
        self.components.iter().map(|c| c.size).max().unwrap_or(0)
    }

    pub fn max_diameter(&self) -> usize {
        self.components.iter().map(|c| c.diameter).max().unwrap_or(0)
    }

    pub fn same_component(&self, a: usize, b: usize) -> bool {
        self.comp_of[a] != NONE && self.comp_of[a] == self.comp_of[b]
    }
}

/// Labels the whole window of a configuration.
pub fn components(cfg: &Configuration, adjacency: Adjacency) -> ComponentLabeling {
    label_region(cfg, cfg.window(), adjacency).expect("window covers itself")
}

/// Labels the configuration restricted to a sub-box (paths may not leave it).
pub fn label_region(cfg: &Configuration, region: &LatticeWindow, adjacency: Adjacency) -> Result<ComponentLabeling> {
    let w = cfg.window();
    if !w.contains_window(region) {
        return Err(Error::Coverage(format!("{region:?} is not inside {w:?}")));
    }
    let d = w.dim();
    let n = region.len();
    let map = region_map(w, region);
    let mut uf = UnionFind::new(n);
    let active: Vec<bool> = map.iter().map(|&g| cfg.is_active(g as usize)).collect();
    match adjacency {
        Adjacency::Nearest => {
            for r in 0..n {
                if !active[r] {
                    continue;
                }
                for axis in 0..d {
                    let dir = 2 * axis;
                    if let Some(rn) = region.neighbor_index(r, dir) {
                        if active[rn] && cfg.is_open_step(map[r] as usize, dir) {
                            uf.union(r, rn);
                        }
                    }
                }
            }
        }
        Adjacency::Star => {
            let offsets = star_offsets(d);
            for r in 0..n {
                if !active[r] {
                    continue;
                }
                let p = region.point(r);
                for off in &offsets {
                    let q = p + *off;
                    if let Some(rq) = region.index(&q) {
                        if active[rq] {
                            uf.union(r, rq);
                        }
                    }
                }
            }
        }
    }
    let mut comp_of = vec![NONE; n];
    let mut root_comp = vec![NONE; n];
    let mut components: Vec<Component> = Vec::new();
    let mut lo: Vec<[i64; MAX_DIM]> = Vec::new();
    let mut hi: Vec<[i64; MAX_DIM]> = Vec::new();
    for r in 0..n {
        if !active[r] {
            continue;
        }
        let root = uf.find(r);
        if root_comp[root] == NONE {
            root_comp[root] = components.len() as u32;
            components.push(Component {
                label: r,
                size: 0,
                diameter: 0,
            });
            lo.push([i64::MAX; MAX_DIM]);
            hi.push([i64::MIN; MAX_DIM]);
        }
        let c = root_comp[root] as usize;
        comp_of[r] = c as u32;
        components[c].size += 1;
        for a in 0..d {
            let x = region.local(r, a) as i64;
            lo[c][a] = lo[c][a].min(x);
            hi[c][a] = hi[c][a].max(x);
        }
    }
    for (c, comp) in components.iter_mut().enumerate() {
        comp.diameter = (0..d).map(|a| (hi[c][a] - lo[c][a]) as usize).max().unwrap_or(0);
    }
    Ok(ComponentLabeling {
        region: region.clone(),
        comp_of,
        components,
    })
}

/// Window index of each vertex of `region`, in region order.
pub fn region_map(window: &LatticeWindow, region: &LatticeWindow) -> Vec<u32> {
    let d = window.dim();
    let base = window.index(&region.corner()).expect("region inside window");
    (0..region.len())
        .map(|r| {
            let mut g = base;
            for a in 0..d {
                g += region.local(r, a) * window.stride(a);
            }
            g as u32
        })
        .collect()
}

fn star_offsets(d: usize) -> Vec<Point> {
    // half of {-1,0,1}^d \ {0}: those whose first nonzero coordinate is positive
    let mut out = Vec::new();
    let total = 3usize.pow(d as u32);
    for code in 0..total {
        let mut c = vec![0i64; d];
        let mut r = code;
        for v in c.iter_mut() {
            *v = (r % 3) as i64 - 1;
            r /= 3;
        }
        if let Some(first) = c.iter().find(|&&v| v != 0) {
            if *first > 0 {
                out.push(Point::new(&c));
            }
        }
    }
    out
}

fn ball_in(cfg: &Configuration, center: &Point, radius: usize) -> Result<LatticeWindow> {
    let b = LatticeWindow::ball(*center, radius)?;
    if !cfg.window().contains_window(&b) {
        return Err(Error::Coverage(format!(
            "window {:?} does not contain B({center}, {radius})",
            cfg.window()
        )));
    }
    Ok(b)
}

fn linf_from(region: &LatticeWindow, r: usize, center: &Point) -> usize {
    (0..region.dim())
        .map(|a| (region.corner().get(a) + region.local(r, a) as i64 - center.get(a)).unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

/// Whether an open nearest-neighbor path joins `B(center, inner)` to `dB(center, outer)`.
pub fn crossing(cfg: &Configuration, center: &Point, inner: usize, outer: usize) -> Result<bool> {
    if inner > outer {
        return Err(invalid("inner", format!("{inner} exceeds outer radius {outer}")));
    }
    let ball = ball_in(cfg, center, outer)?;
    let lab = label_region(cfg, &ball, Adjacency::Nearest)?;
    let mut touching_inner = HashSet::new();
    for r in 0..ball.len() {
        if let Some(c) = lab.ordinal(r) {
            if linf_from(&ball, r, center) <= inner {
                touching_inner.insert(c);
            }
        }
    }
    for r in 0..ball.len() {
        if let Some(c) = lab.ordinal(r) {
            if linf_from(&ball, r, center) == outer && touching_inner.contains(&c) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Closes every vertex outside the slab `Z^2 x [0, R)^{d-2}`, with `[0, R)` measured
/// from the window corner in the axes after the first two.
pub fn slab_restrict(cfg: &Configuration, thickness: usize) -> Result<Configuration> {
    let w = cfg.window();
    if thickness == 0 {
        return Err(invalid("R", "slab thickness must be positive"));
    }
    if let Some(a) = (2..w.dim()).find(|&a| thickness > w.sides()[a]) {
        return Err(invalid(
            "R",
            format!("thickness {thickness} exceeds the window extent {} along axis {a}", w.sides()[a]),
        ));
    }
    let mask = SiteField::from_bits(
        w,
        (0..w.len())
            .map(|v| (2..w.dim()).all(|a| w.local(v, a) < thickness))
            .collect(),
    );
    cfg.with_site_mask(&mask)
}

/// Active vertices lying in components of l-infinity diameter at least `k`.
pub fn diameter_filter(cfg: &Configuration, k: usize) -> SiteField {
    let lab = components(cfg, Adjacency::Nearest);
    let w = cfg.window();
    SiteField::from_bits(
        w,
        (0..w.len())
            .map(|v| lab.component_of(v).is_some_and(|c| c.diameter >= k))
            .collect(),
    )
}

/// Planar blocking test on a `width x height` grid of bad cells (row-major, `bad[y * width + x]`).
///
/// True iff no nearest-neighbor path of good cells joins the center region (cells within
/// l-infinity distance `center_radius` of the middle cell) to the grid boundary, which is
/// equivalent to a `*`-circuit of bad cells separating them.
pub fn dual_blocking_circuit(bad: &[bool], width: usize, height: usize, center_radius: usize) -> Result<bool> {
    if bad.len() != width * height || width == 0 || height == 0 {
        return Err(invalid("grid", "cell count does not match the dimensions"));
    }
    let (cx, cy) = ((width - 1) / 2, (height - 1) / 2);
    let mut seen = vec![false; bad.len()];
    let mut queue = VecDeque::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !bad[i] && x.abs_diff(cx) <= center_radius && y.abs_diff(cy) <= center_radius {
                seen[i] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
            return Ok(false);
        }
        for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            let i = ny * width + nx;
            if !bad[i] && !seen[i] {
                seen[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    Ok(true)
}

/// Every component of `V ∩ B(center, n)` with diameter at least `n/10` lies in a single
/// component of `V ∩ B(center, 2n)`.
pub fn local_uniqueness_event(cfg: &Configuration, center: &Point, n: usize) -> Result<bool> {
    let big = ball_in(cfg, center, 2 * n)?;
    let small = LatticeWindow::ball(*center, n)?;
    let lab_small = label_region(cfg, &small, Adjacency::Nearest)?;
    let lab_big = label_region(cfg, &big, Adjacency::Nearest)?;
    let to_big = region_map(&big, &small);
    let mut target: Option<u32> = None;
    for c in lab_small.components() {
        if 10 * c.diameter < n {
            continue;
        }
        let b = lab_big.comp_of[to_big[c.label] as usize];
        match target {
            None => target = Some(b),
            Some(t) if t != b => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}

/// Conjunction of: (a) `B(z,k)` is connected to `dB(z,4k)`; (b) every component of
/// `V ∩ B(z,3k)` joining `B(z,2k)` to `dB(z,3k)` lies in one component of `V ∩ B(z,6k)`.
pub fn annulus_uniqueness_event(cfg: &Configuration, z: &Point, k: usize) -> Result<bool> {
    let big = ball_in(cfg, z, 6 * k)?;
    if !crossing(cfg, z, k, 4 * k)? {
        return Ok(false);
    }
    let mid = LatticeWindow::ball(*z, 3 * k)?;
    let lab_mid = label_region(cfg, &mid, Adjacency::Nearest)?;
    let lab_big = label_region(cfg, &big, Adjacency::Nearest)?;
    let to_big = region_map(&big, &mid);
    let mut touches_inner = vec![false; lab_mid.count()];
    let mut touches_outer = vec![false; lab_mid.count()];
    for r in 0..mid.len() {
        if let Some(c) = lab_mid.ordinal(r) {
            let dist = linf_from(&mid, r, z);
            if dist <= 2 * k {
                touches_inner[c] = true;
            }
            if dist == 3 * k {
                touches_outer[c] = true;
            }
        }
    }
    let mut target: Option<u32> = None;
    for (c, comp) in lab_mid.components().iter().enumerate() {
        if touches_inner[c] && touches_outer[c] {
            let b = lab_big.comp_of[to_big[comp.label] as usize];
            match target {
                None => target = Some(b),
                Some(t) if t != b => return Ok(false),
                _ => {}
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{bernoulli_bond, bernoulli_site};
    use crate::seed::stream;
    use proptest::prelude::*;

    fn cube(side: usize) -> LatticeWindow {
        LatticeWindow::cube(Point::origin(3), side).unwrap()
    }

    fn centered(radius: usize) -> LatticeWindow {
        LatticeWindow::ball(Point::origin(3), radius).unwrap()
    }

    /// Breadth-first labeling used as an oracle.
    fn bfs_partition(cfg: &Configuration, adjacency: Adjacency) -> Vec<Option<usize>> {
        let w = cfg.window();
        let mut lab = vec![None; w.len()];
        for s in 0..w.len() {
            if !cfg.is_active(s) || lab[s].is_some() {
                continue;
            }
            lab[s] = Some(s);
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                let nbrs: Vec<usize> = match adjacency {
                    Adjacency::Nearest => (0..2 * w.dim())
                        .filter(|&dir| cfg.is_open_step(v, dir))
                        .map(|dir| w.neighbor_index(v, dir).unwrap())
                        .collect(),
                    Adjacency::Star => {
                        let p = w.point(v);
                        w.iter()
                            .filter(|q| *q != p && (*q - p).norm_inf() == 1)
                            .map(|q| w.index(&q).unwrap())
                            .filter(|&u| cfg.is_active(u))
                            .collect()
                    }
                };
                for u in nbrs {
                    if lab[u].is_none() {
                        lab[u] = Some(s);
                        q.push_back(u);
                    }
                }
            }
        }
        lab
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1).is_some());
        assert!(uf.union(1, 0).is_none());
        uf.union(3, 4);
        assert_eq!(uf.set_size(4), 2);
        assert_ne!(uf.find(0), uf.find(3));
        uf.union(1, 4);
        assert_eq!(uf.set_size(0), 4);
    }

    #[test]
    fn single_edge_and_empty_and_full() {
        let w = cube(3);
        let mut bonds = BondField::filled(&w, false);
        bonds.set(0, true);
        let mut sites = SiteField::filled(&w, false);
        let (a, b) = w.edge_endpoints(0);
        sites.set(a, true);
        sites.set(b, true);
        let cfg = Configuration::site_and_bond(sites, bonds).unwrap();
        let lab = components(&cfg, Adjacency::Nearest);
        assert_eq!(lab.count(), 1);
        assert_eq!(lab.max_size(), 2);
        let empty = Configuration::sites(SiteField::filled(&w, false));
        assert_eq!(components(&empty, Adjacency::Nearest).count(), 0);
        let full = Configuration::sites(SiteField::filled(&cube(5), true));
        let lab = components(&full, Adjacency::Nearest);
        assert_eq!((lab.count(), lab.max_size(), lab.max_diameter()), (1, 125, 4));
    }

    #[test]
    fn labels_are_smallest_index() {
        let w = cube(4);
        let mut rng = stream(1, 0, "perc");
        let cfg = Configuration::sites(bernoulli_site(&w, 0.5, &mut rng).unwrap());
        let lab = components(&cfg, Adjacency::Nearest);
        for v in 0..w.len() {
            if let Some(l) = lab.label(v) {
                assert!(l <= v);
                assert_eq!(lab.label(l), Some(l));
            }
        }
        let total: usize = lab.components().iter().map(|c| c.size).sum();
        assert_eq!(total, cfg.active_count());
    }

    #[test]
    fn crossing_cases() {
        let w = centered(6);
        let open = Configuration::sites(SiteField::filled(&w, true));
        assert!(crossing(&open, &Point::origin(3), 3, 6).unwrap());
        // closed annulus between radii 4 and 4
        let ring = SiteField::from_fn(&w, |p| p.norm_inf() != 4);
        assert!(!crossing(&Configuration::sites(ring), &Point::origin(3), 3, 6).unwrap());
        // single radial path
        let path = SiteField::from_fn(&w, |p| p.get(1) == 0 && p.get(2) == 0 && p.get(0) >= 0);
        assert!(crossing(&Configuration::sites(path.clone()), &Point::origin(3), 3, 6).unwrap());
        assert!(crossing(&Configuration::sites(path), &Point::origin(3), 3, 7).is_err());
    }

    #[test]
    fn slab_cases() {
        let w = cube(4);
        let full = Configuration::sites(SiteField::filled(&w, true));
        let same = slab_restrict(&full, 4).unwrap();
        assert_eq!(same.active_count(), 64);
        let layer = slab_restrict(&full, 1).unwrap();
        assert_eq!(layer.active_count(), 16);
        assert_eq!(components(&layer, Adjacency::Nearest).count(), 1);
        assert!(slab_restrict(&full, 5).is_err());
        let bonds = Configuration::bonds(BondField::filled(&w, true));
        let slab = slab_restrict(&bonds, 2).unwrap();
        assert_eq!(slab.rule(), AdjacencyRule::SiteAndBond);
        assert_eq!(components(&slab, Adjacency::Nearest).max_size(), 32);
    }

    #[test]
    fn diameter_filter_cases() {
        let w = cube(8);
        let seg = SiteField::from_fn(&w, |p| p.get(1) == 2 && p.get(2) == 2 && p.get(0) <= 4);
        let cfg = Configuration::sites(seg.clone());
        assert_eq!(diameter_filter(&cfg, 0), seg);
        assert_eq!(diameter_filter(&cfg, 4), seg);
        assert_eq!(diameter_filter(&cfg, 5).count_ones(), 0);
        assert_eq!(diameter_filter(&cfg, 100).count_ones(), 0);
    }

    #[test]
    fn dual_circuit_cases() {
        let n = 9;
        let good = vec![false; n * n];
        assert!(!dual_blocking_circuit(&good, n, n, 0).unwrap());
        let ring: Vec<bool> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as i64 - 4, (i / n) as i64 - 4);
                x.abs().max(y.abs()) == 2
            })
            .collect();
        assert!(dual_blocking_circuit(&ring, n, n, 0).unwrap());
        let mut gap = ring.clone();
        gap[4 * n + 6] = false;
        assert!(!dual_blocking_circuit(&gap, n, n, 0).unwrap());
        // a diagonal ring of bad cells still blocks nearest-neighbor good paths
        let diamond: Vec<bool> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as i64 - 4, (i / n) as i64 - 4);
                x.abs() + y.abs() == 3
            })
            .collect();
        assert!(dual_blocking_circuit(&diamond, n, n, 0).unwrap());
    }

    #[test]
    fn local_uniqueness_cases() {
        let n = 10;
        let w = centered(2 * n);
        let o = Point::origin(3);
        let open = Configuration::sites(SiteField::filled(&w, true));
        assert!(local_uniqueness_event(&open, &o, n).unwrap());
        let two = SiteField::from_fn(&w, |p| {
            p.get(2) == 0 && p.get(0).abs() <= n as i64 && (p.get(1) == -3 || p.get(1) == 3)
        });
        assert!(!local_uniqueness_event(&Configuration::sites(two), &o, n).unwrap());
        let dust = SiteField::from_fn(&w, |p| p == Point::origin(3));
        assert!(local_uniqueness_event(&Configuration::sites(dust), &o, n).unwrap());
    }

    #[test]
    fn annulus_cases() {
        let k = 2;
        let w = centered(6 * k);
        let z = Point::origin(3);
        assert!(annulus_uniqueness_event(&Configuration::sites(SiteField::filled(&w, true)), &z, k).unwrap());
        assert!(!annulus_uniqueness_event(&Configuration::sites(SiteField::filled(&w, false)), &z, k).unwrap());
        // two straight crossings on opposite sides, never joined inside B(z, 6k)
        let two = SiteField::from_fn(&w, |p| p.get(1) == 0 && p.get(2) == 0 && p.get(0) != 0);
        assert!(!annulus_uniqueness_event(&Configuration::sites(two), &z, k).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn union_find_matches_bfs(seed in 0u64..100_000, q in 0.2f64..0.8, star in any::<bool>(), bond in any::<bool>()) {
            let w = LatticeWindow::new(Point::origin(3), &[4, 3, 5]).unwrap();
            let mut rng = stream(seed, 0, "oracle");
            let sites = bernoulli_site(&w, q, &mut rng).unwrap();
            let cfg = if bond {
                Configuration::site_and_bond(sites, bernoulli_bond(&w, 0.6, &mut rng).unwrap()).unwrap()
            } else {
                Configuration::sites(sites)
            };
            let adj = if star { Adjacency::Star } else { Adjacency::Nearest };
            let lab = components(&cfg, adj);
            let oracle = bfs_partition(&cfg, adj);
            for v in 0..w.len() {
                prop_assert_eq!(lab.label(v), oracle[v]);
            }
        }

        #[test]
        fn opening_sites_is_monotone(seed in 0u64..100_000, q in 0.1f64..0.7) {
            let w = centered(4);
            let mut rng = stream(seed, 0, "mono");
            let a = bernoulli_site(&w, q, &mut rng).unwrap();
            let b = a.or(&bernoulli_site(&w, 0.2, &mut rng).unwrap());
            let (ca, cb) = (Configuration::sites(a), Configuration::sites(b));
            let (la, lb) = (components(&ca, Adjacency::Nearest), components(&cb, Adjacency::Nearest));
            for e in 0..w.edge_count() {
                let (x, y) = w.edge_endpoints(e);
                if la.same_component(x, y) {
                    prop_assert!(lb.same_component(x, y));
                }
            }
            let o = Point::origin(3);
            if crossing(&ca, &o, 1, 4).unwrap() {
                prop_assert!(crossing(&cb, &o, 1, 4).unwrap());
            }
            for k in 0..8 {
                prop_assert!(diameter_filter(&ca, k + 1).is_subset_of(&diameter_filter(&ca, k)));
            }
        }

        #[test]
        fn slab_then_label_matches_direct(seed in 0u64..100_000, r in 1usize..5) {
            let w = cube(5);
            let mut rng = stream(seed, 0, "slab");
            let cfg = Configuration::sites(bernoulli_site(&w, 0.6, &mut rng).unwrap());
            let slab = slab_restrict(&cfg, r).unwrap();
            let direct = Configuration::sites(SiteField::from_fn(&w, |p| {
                cfg.site_field().unwrap().at(&p).unwrap() && p.get(2) < r as i64
            }));
            prop_assert_eq!(
                components(&slab, Adjacency::Nearest).count(),
                components(&direct, Adjacency::Nearest).count()
            );
        }
    }
}
