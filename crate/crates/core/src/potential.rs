//! Equilibrium measure, capacity, hitting probabilities and h-transformed kernels.
//!
//! `e_K` vanishes at vertices of `K` whose neighbors all lie in `K`, so the linear
//! system `sum_y g(x - y) e(y) = 1` is only solved on the inner boundary of `K`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{BoxSymmetry, GreenFunction, GreenTable, LatticeWindow, Point};
use crate::linalg::Cholesky;

/// Default bound on the number of unknowns in a dense solve.
pub const DEFAULT_DENSE_CAP: usize = 8192;
/// Default bound on `||G e - 1||_inf`.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;
const TABLE_ENTRY_CAP: usize = 1 << 23;

/// Equilibrium measure of a finite set.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumProfile {
    support: Vec<Point>,
    weights: Vec<f64>,
    capacity: f64,
    residual: f64,
    #[serde(skip)]
    index: HashMap<Point, usize>,
}

impl EquilibriumProfile {
    fn build(support: Vec<Point>, weights: Vec<f64>, residual: f64) -> Self {
        let capacity = weights.iter().sum();
        let index = support.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        Self {
            support,
            weights,
            capacity,
            residual,
            index,
        }
    }

    /// The set `K`, sorted.
    pub fn support(&self) -> &[Point] {
        &self.support
    }

    /// `e_K(x)` for each point of `support()`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// `||G e - 1||_inf` achieved by the solve.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.capacity).collect()
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.index.contains_key(x)
    }

    /// `e_K(x)`, zero off `K`.
    pub fn weight_of(&self, x: &Point) -> f64 {
        self.index.get(x).map_or(0.0, |&i| self.weights[i])
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Which harmonic function drives a Doob transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMode {
    /// `h = P[H_K = inf]`: walk conditioned never to hit `K`.
    Avoid,
    /// `h = P[H_K < inf]`: walk conditioned to hit `K`.
    Hit,
}

/// Potential-theory computations over a shared Green function.
#[derive(Debug, Clone)]
pub struct Potential {
    green: Arc<GreenFunction>,
    dense_cap: usize,
    residual_tol: f64,
}

impl Potential {
    pub fn new(green: Arc<GreenFunction>) -> Self {
        Self {
            green,
            dense_cap: DEFAULT_DENSE_CAP,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn green(&self) -> &Arc<GreenFunction> {
        &self.green
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn dim(&self) -> usize {
        self.green.dim()
    }

    /// Table of `g` large enough for all differences within a set of given extent, when affordable.
    pub fn table_for_extent(&self, extent: usize) -> Result<GreenTable> {
        let d = self.dim();
        let mut r = extent;
        while r > 0 && (r + 1).checked_pow(d as u32).is_none_or(|n| n > TABLE_ENTRY_CAP) {
            r /= 2;
        }
        GreenTable::new(self.green.clone(), r)
    }

    fn normalize_set(&self, k: &[Point]) -> Result<Vec<Point>> {
        if k.is_empty() {
            return Err(invalid("K", "set is empty"));
        }
        let d = self.dim();
        if let Some(p) = k.iter().find(|p| p.dim() != d) {
            return Err(invalid("K", format!("{p} is not {d}-dimensional")));
        }
        let mut v = k.to_vec();
        v.sort();
        v.dedup();
        Ok(v)
    }

    /// Solves `G_K e = 1` for the equilibrium measure of `K`.
    pub fn equilibrium_measure(&self, k: &[Point]) -> Result<EquilibriumProfile> {
        let set = self.normalize_set(k)?;
        let members: std::collections::HashSet<Point> = set.iter().copied().collect();
        let boundary: Vec<usize> = (0..set.len())
            .filter(|&i| {
                crate::lattice::neighbors(set[i])
                    .iter()
                    .any(|y| !members.contains(y))
            })
            .collect();
        let pts: Vec<Point> = boundary.iter().map(|&i| set[i]).collect();
        let sys = self.boundary_system_of(pts)?;
        let mut weights = vec![0.0; set.len()];
        for (j, &i) in boundary.iter().enumerate() {
            weights[i] = sys.weights[j];
        }
        Ok(EquilibriumProfile::build(set, weights, sys.residual))
    }

    /// Dense factorization of `G_S` on the inner boundary `S` of a set.
    pub fn boundary_system(&self, k: &[Point]) -> Result<BoundarySystem> {
        let set = self.normalize_set(k)?;
        let members: std::collections::HashSet<Point> = set.iter().copied().collect();
        let pts: Vec<Point> = set
            .into_iter()
            .filter(|p| crate::lattice::neighbors(*p).iter().any(|y| !members.contains(y)))
            .collect();
        self.boundary_system_of(pts)
    }

    fn boundary_system_of(&self, pts: Vec<Point>) -> Result<BoundarySystem> {
        let n = pts.len();
        if n > self.dense_cap {
            return Err(Error::TooLarge {
                what: "dense equilibrium solve",
                size: n,
                cap: self.dense_cap,
            });
        }
        // one extra unit covers differences to points just outside the set
        let table = Arc::new(self.table_for_extent(extent(&pts) + 1)?);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                a[i * n + j] = table.between(&pts[i], &pts[j])?;
            }
        }
        let factor = Cholesky::factor(a, n)?;
        let mut e = factor.solve(&vec![1.0; n]);
        // residual against the assembled operator
        let mut residual: f64 = 0.0;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += table.between(&pts[i], &pts[j])? * e[j];
            }
            residual = residual.max((s - 1.0).abs());
        }
        if residual > self.residual_tol {
            return Err(Error::Singular(format!(
                "equilibrium residual {residual:e} exceeds {:e}",
                self.residual_tol
            )));
        }
        clamp_nonnegative(&mut e, "equilibrium weight")?;
        let index = pts.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        Ok(BoundarySystem {
            points: pts,
            index,
            factor,
            weights: e,
            residual,
            table,
        })
    }

    /// Equilibrium measure of a box, reduced to one unknown per symmetry orbit of its boundary.
    pub fn box_equilibrium(&self, window: &LatticeWindow) -> Result<EquilibriumProfile> {
        self.box_equilibrium_with_table(window, None)
    }

    pub(crate) fn box_equilibrium_with_table(
        &self,
        window: &LatticeWindow,
        table: Option<&GreenTable>,
    ) -> Result<EquilibriumProfile> {
        if window.dim() != self.dim() {
            return Err(invalid("window", "dimension differs from the Green function"));
        }
        let own;
        let table = match table {
            Some(t) => t,
            None => {
                own = self.table_for_extent(*window.sides().iter().max().unwrap())?;
                &own
            }
        };
        let sym = BoxSymmetry::new(window);
        let boundary: Vec<usize> = (0..window.len()).filter(|&i| window.on_inner_boundary(i)).collect();
        let mut orbit_of = Vec::with_capacity(boundary.len());
        let mut reps: Vec<Point> = Vec::new();
        let mut sizes: Vec<f64> = Vec::new();
        let mut lookup: HashMap<Point, usize> = HashMap::new();
        for &i in &boundary {
            let (c, _) = sym.canonical(&window.point(i));
            let o = *lookup.entry(c).or_insert_with(|| {
                reps.push(c);
                sizes.push(0.0);
                reps.len() - 1
            });
            sizes[o] += 1.0;
            orbit_of.push(o);
        }
        let m = reps.len();
        if m > self.dense_cap {
            return Err(Error::TooLarge {
                what: "orbit-reduced equilibrium solve",
                size: m,
                cap: self.dense_cap,
            });
        }
        // row o: sum over y in orbit o2 of g(rep_o - y)
        let mut row_sums = vec![0.0; m * m];
        let bpts: Vec<Point> = boundary.iter().map(|&i| window.point(i)).collect();
        for (o, rep) in reps.iter().enumerate() {
            for (y, &o2) in bpts.iter().zip(&orbit_of) {
                row_sums[o * m + o2] += table.between(rep, y)?;
            }
        }
        let mut a = vec![0.0; m * m];
        for o in 0..m {
            for o2 in 0..m {
                a[o * m + o2] = 0.5 * (sizes[o] * row_sums[o * m + o2] + sizes[o2] * row_sums[o2 * m + o]);
            }
        }
        let factor = Cholesky::factor(a, m)?;
        let mut e = factor.solve(&sizes);
        let mut residual: f64 = 0.0;
        for o in 0..m {
            let s: f64 = (0..m).map(|o2| row_sums[o * m + o2] * e[o2]).sum();
            residual = residual.max((s - 1.0).abs());
        }
        if residual > self.residual_tol {
            return Err(Error::Singular(format!(
                "orbit-reduced residual {residual:e} exceeds {:e}",
                self.residual_tol
            )));
        }
        clamp_nonnegative(&mut e, "equilibrium weight")?;
        let support: Vec<Point> = window.iter().collect();
        let mut weights = vec![0.0; window.len()];
        for (&i, &o) in boundary.iter().zip(&orbit_of) {
            weights[i] = e[o];
        }
        // profile expects sorted support; window order is first-axis-fastest
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| support[a].cmp(&support[b]));
        let support_sorted = order.iter().map(|&i| support[i]).collect();
        let weights_sorted = order.iter().map(|&i| weights[i]).collect();
        Ok(EquilibriumProfile::build(support_sorted, weights_sorted, residual))
    }

    /// `P_x[H_K < inf] = sum_y g(x - y) e_K(y)`, equal to 1 on `K`.
    pub fn hitting_probability(&self, x: &Point, profile: &EquilibriumProfile) -> Result<f64> {
        if profile.contains(x) {
            return Ok(1.0);
        }
        let mut s = 0.0;
        for (y, &w) in profile.support.iter().zip(&profile.weights) {
            if w > 0.0 {
                s += self.green.value(&(*x - *y))? * w;
            }
        }
        Ok(s.min(1.0))
    }

    /// Doob transform of the walk step at `x` by the hitting or escape probability of `K`.
    ///
    /// Entries follow the order of [`crate::lattice::neighbors`].
    pub fn conditioned_kernel(
        &self,
        x: &Point,
        profile: &EquilibriumProfile,
        mode: KernelMode,
    ) -> Result<Vec<f64>> {
        let mut w = Vec::with_capacity(2 * self.dim());
        for y in crate::lattice::neighbors(*x) {
            let hit = self.hitting_probability(&y, profile)?;
            w.push(match mode {
                KernelMode::Hit => hit,
                KernelMode::Avoid => (1.0 - hit).max(0.0),
            });
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Precondition(format!(
                "h vanishes on every neighbor of {x} ({mode:?} mode)"
            )));
        }
        for v in &mut w {
            *v /= total;
        }
        Ok(w)
    }
}

/// Factorized `G_S` on the inner boundary `S` of a set, with its equilibrium weights.
#[derive(Debug)]
pub struct BoundarySystem {
    points: Vec<Point>,
    index: HashMap<Point, usize>,
    factor: Cholesky<f64>,
    weights: Vec<f64>,
    residual: f64,
    table: Arc<GreenTable>,
}

impl BoundarySystem {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn capacity(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn index_of(&self, x: &Point) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn table(&self) -> &Arc<GreenTable> {
        &self.table
    }

    /// Harmonic measure from each `x` outside the set: `H(x, .) = G_S^{-1} g(x - .)`.
    ///
    /// Row `i` is the law of the first entrance point for a walk from `xs[i]`, restricted
    /// to the event that the set is hit; its sum is `P_x[H_K < inf]`.
    pub fn entrance_laws(&self, xs: &[Point]) -> Result<Vec<Vec<f64>>> {
        let n = self.points.len();
        let r = xs.len();
        let mut b = vec![0.0; n * r];
        for (c, x) in xs.iter().enumerate() {
            for (i, y) in self.points.iter().enumerate() {
                b[i * r + c] = self.table.between(x, y)?;
            }
        }
        self.factor.solve_many(&mut b, r);
        let mut out = Vec::with_capacity(r);
        for c in 0..r {
            let mut row: Vec<f64> = (0..n).map(|i| b[i * r + c]).collect();
            clamp_nonnegative(&mut row, "entrance probability")?;
            out.push(row);
        }
        Ok(out)
    }
}

fn extent(pts: &[Point]) -> usize {
    let d = pts[0].dim();
    (0..d)
        .map(|a| {
            let lo = pts.iter().map(|p| p.get(a)).min().unwrap();
            let hi = pts.iter().map(|p| p.get(a)).max().unwrap();
            (hi - lo) as usize
        })
        .max()
        .unwrap_or(0)
}

/// Rounding can leave tiny negative entries; anything below `-1e-10` is a genuine failure.
fn clamp_nonnegative(v: &mut [f64], what: &str) -> Result<()> {
    for x in v.iter_mut() {
        if *x < -1e-10 || !x.is_finite() {
            return Err(Error::Singular(format!("{what} {x} is negative")));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn pot() -> &'static Potential {
        static P: OnceLock<Potential> = OnceLock::new();
        P.get_or_init(|| Potential::new(Arc::new(GreenFunction::new(3).unwrap())))
    }

    fn p(c: &[i64]) -> Point {
        Point::new(c)
    }

    #[test]
    fn singleton_capacity() {
        let prof = pot().equilibrium_measure(&[Point::origin(3)]).unwrap();
        let g0 = pot().green().g0();
        assert!((prof.capacity() - 1.0 / g0).abs() < 1e-14);
        assert!((prof.capacity() - 0.659_462_670_449_001).abs() < 1e-12);
    }

    #[test]
    fn pair_capacity_and_symmetry() {
        let prof = pot().equilibrium_measure(&[p(&[0, 0, 0]), p(&[1, 0, 0])]).unwrap();
        let g0 = pot().green().g0();
        assert!((prof.capacity() - 2.0 / (2.0 * g0 - 1.0)).abs() < 1e-13);
        let n = prof.normalized();
        assert!((n[0] - 0.5).abs() < 1e-13 && (n[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn interior_points_carry_no_weight() {
        let w = LatticeWindow::ball(Point::origin(3), 2).unwrap();
        let pts: Vec<Point> = w.iter().collect();
        let prof = pot().equilibrium_measure(&pts).unwrap();
        assert_eq!(prof.weight_of(&Point::origin(3)), 0.0);
        assert_eq!(prof.weight_of(&p(&[1, 1, 0])), 0.0);
        assert!(prof.weight_of(&p(&[2, 2, 2])) > prof.weight_of(&p(&[2, 0, 0])));
        assert!(prof.weights().iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(prof.residual() < 1e-10);
    }

    #[test]
    fn orbit_reduction_matches_dense_solve() {
        for w in [
            LatticeWindow::cube(p(&[3, -1, 0]), 4).unwrap(),
            LatticeWindow::new(p(&[0, 0, 0]), &[5, 3, 3]).unwrap(),
            LatticeWindow::new(p(&[0, 0, 0]), &[2, 3, 4]).unwrap(),
        ] {
            let pts: Vec<Point> = w.iter().collect();
            let dense = pot().equilibrium_measure(&pts).unwrap();
            let red = pot().box_equilibrium(&w).unwrap();
            assert_eq!(dense.support(), red.support());
            for (a, b) in dense.weights().iter().zip(red.weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hitting_probability_values() {
        let prof = pot().equilibrium_measure(&[Point::origin(3)]).unwrap();
        let g = pot().green();
        let h1 = pot().hitting_probability(&Point::unit(3, 0), &prof).unwrap();
        let g1 = g.value(&Point::unit(3, 0)).unwrap();
        assert!((h1 - g1 / g.g0()).abs() < 1e-14);
        assert!((h1 - 0.340_537_329_551).abs() < 1e-11);
        assert_eq!(pot().hitting_probability(&Point::origin(3), &prof).unwrap(), 1.0);
        let ray: Vec<f64> = (1..30)
            .map(|n| pot().hitting_probability(&Point::unit(3, 0).scale(n), &prof).unwrap())
            .collect();
        assert!(ray.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn kernels() {
        let prof = pot().equilibrium_measure(&[Point::origin(3)]).unwrap();
        let x = Point::unit(3, 0);
        let hit = pot().conditioned_kernel(&x, &prof, KernelMode::Hit).unwrap();
        assert!((hit.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // direction -e_1 leads to the origin
        assert!(hit[1] > 1.0 / 6.0);
        let avoid = pot().conditioned_kernel(&x, &prof, KernelMode::Avoid).unwrap();
        assert_eq!(avoid[1], 0.0);
        let far = Point::unit(3, 0).scale(200);
        let k = pot().conditioned_kernel(&far, &prof, KernelMode::Avoid).unwrap();
        assert!(k.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-5));
    }

    #[test]
    fn capacity_monotone_and_subadditive() {
        let a = vec![p(&[0, 0, 0]), p(&[1, 0, 0])];
        let b = vec![p(&[0, 0, 0]), p(&[1, 0, 0]), p(&[0, 2, 0])];
        let c = vec![p(&[5, 5, 5]), p(&[0, 2, 0])];
        let cap = |k: &[Point]| pot().equilibrium_measure(k).unwrap().capacity();
        assert!(cap(&a) <= cap(&b));
        let mut ab = a.clone();
        ab.extend(c.iter().copied());
        assert!(cap(&ab) <= cap(&a) + cap(&c));
    }

    #[test]
    fn dense_cap_is_enforced() {
        let w = LatticeWindow::cube(Point::origin(3), 5).unwrap();
        let pts: Vec<Point> = w.iter().collect();
        let small = Potential::new(pot().green().clone()).with_dense_cap(10);
        assert!(matches!(small.equilibrium_measure(&pts), Err(Error::TooLarge { .. })));
        assert!(small.equilibrium_measure(&[]).is_err());
    }

    #[test]
    fn entrance_laws_sum_to_hitting_probability() {
        let w = LatticeWindow::cube(Point::origin(3), 3).unwrap();
        let pts: Vec<Point> = w.iter().collect();
        let sys = pot().boundary_system(&pts).unwrap();
        let prof = pot().equilibrium_measure(&pts).unwrap();
        let xs = [p(&[-1, 0, 0]), p(&[3, 1, 1]), p(&[7, 2, -3])];
        let laws = sys.entrance_laws(&xs).unwrap();
        for (x, law) in xs.iter().zip(&laws) {
            let h = pot().hitting_probability(x, &prof).unwrap();
            assert!((law.iter().sum::<f64>() - h).abs() < 1e-12);
        }
        // from a neighbor of a face center most mass enters at that center
        let law = &laws[0];
        let best = (0..law.len()).max_by(|&a, &b| law[a].total_cmp(&law[b])).unwrap();
        assert_eq!(sys.points()[best], Point::origin(3));
    }
}
