//! Green function of the simple random walk on Z^d.
//!
//! Integrating the Fourier representation over each angle in closed form leaves
//! `g(x) = d * int_0^inf prod_i e^{-s} I_{|x_i|}(s) ds`. After `s = e^v` the
//! integrand is analytic in a strip around the real axis, so the trapezoid rule
//! converges geometrically in the step `h`. Every value is computed on the grid
//! with step `h` and on its even-indexed subgrid (step `2h`); the two must agree.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::bessel::scaled_bessel_i;
use super::{check_dim, Point, MAX_DIM};
use crate::error::{Error, Result};

/// Default relative agreement required between the two quadrature grids.
pub const DEFAULT_GREEN_TOL: f64 = 1e-8;

const V_MIN: f64 = -40.0;
const H_START: f64 = 0.5;
const H_MIN: f64 = 1.0 / 64.0;
const PROBE_MARGIN: f64 = 1e-4;

struct BesselTable {
    kmax: usize,
    data: Vec<f64>,
}

/// Cached, thread-safe evaluator of `g(x)` for a fixed dimension.
pub struct GreenFunction {
    d: usize,
    tol: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    table: RwLock<BesselTable>,
    cache: RwLock<HashMap<Point, f64>>,
}

impl std::fmt::Debug for GreenFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenFunction")
            .field("d", &self.d)
            .field("tol", &self.tol)
            .field("h", &self.h)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl GreenFunction {
    pub fn new(d: usize) -> Result<Self> {
        Self::with_tolerance(d, DEFAULT_GREEN_TOL)
    }

    /// Picks the coarsest step whose grid agrees with its half-density subgrid on
    /// probe points to `tol * 1e-4`, leaving headroom for the per-value check.
    pub fn with_tolerance(d: usize, tol: f64) -> Result<Self> {
        check_dim(d)?;
        if !(tol > 0.0 && tol < 1.0) {
            return Err(crate::error::invalid("tol", format!("{tol} is not in (0, 1)")));
        }
        let v_max = 80.0 / (d as f64 - 2.0) + 5.0;
        let probes: Vec<Point> = vec![
            Point::origin(d),
            Point::unit(d, 0),
            Point::new(&(0..d as i64).map(|i| 3 - i.min(3)).collect::<Vec<_>>()),
            Point::unit(d, 0).scale(12),
        ];
        let mut h = H_START;
        loop {
            let n = ((v_max - V_MIN) / h).ceil() as usize;
            let nodes: Vec<f64> = (0..=n).map(|j| (V_MIN + j as f64 * h).exp()).collect();
            let weights: Vec<f64> = nodes.iter().map(|s| d as f64 * h * s).collect();
            let g = Self {
                d,
                tol,
                h,
                nodes,
                weights,
                table: RwLock::new(BesselTable {
                    kmax: 0,
                    data: Vec::new(),
                }),
                cache: RwLock::new(HashMap::new()),
            };
            let worst = probes
                .iter()
                .map(|p| {
                    let (fine, coarse) = g.two_grids(&key_of(p));
                    ((fine - coarse) / fine).abs()
                })
                .fold(0.0, f64::max);
            if worst <= tol * PROBE_MARGIN {
                return Ok(g);
            }
            h *= 0.5;
            if h < H_MIN {
                return Err(Error::Quadrature(format!(
                    "grids still disagree by {worst:e} at step {}",
                    2.0 * h
                )));
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Quadrature step in log-scale.
    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn g0(&self) -> f64 {
        self.value(&Point::origin(self.d))
            .expect("origin value verified at construction")
    }

    /// `g(x)`, cached up to coordinate permutations and sign flips.
    pub fn value(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.d {
            return Err(crate::error::invalid(
                "x",
                format!("point {x} has dimension {}, expected {}", x.dim(), self.d),
            ));
        }
        let key = key_of(x);
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = self.uncached(&key)?;
        self.cache.write().expect("cache lock").insert(key, v);
        Ok(v)
    }

    /// Number of distinct symmetry classes evaluated so far.
    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    fn uncached(&self, key: &Point) -> Result<f64> {
        let (fine, coarse) = self.two_grids(key);
        let rel = ((fine - coarse) / fine).abs();
        if !fine.is_finite() || rel > self.tol {
            return Err(Error::Quadrature(format!(
                "g{key}: grids differ by {rel:e} (tolerance {:e})",
                self.tol
            )));
        }
        Ok(fine)
    }

    fn ensure_orders(&self, kmax: usize) {
        {
            let t = self.table.read().expect("table lock");
            if !t.data.is_empty() && t.kmax >= kmax {
                return;
            }
        }
        let mut t = self.table.write().expect("table lock");
        if t.kmax >= kmax && !t.data.is_empty() {
            return;
        }
        let new_kmax = kmax.max(t.kmax * 3 / 2).max(8);
        let stride = new_kmax + 1;
        let mut data = vec![0.0; self.nodes.len() * stride];
        for (j, &s) in self.nodes.iter().enumerate() {
            scaled_bessel_i(s, &mut data[j * stride..(j + 1) * stride]);
        }
        t.kmax = new_kmax;
        t.data = data;
    }

    /// Sums on the full grid and on its even subgrid.
    fn two_grids(&self, key: &Point) -> (f64, f64) {
        let ks: Vec<usize> = key.coords().iter().map(|&c| c as usize).collect();
        self.ensure_orders(ks[0]);
        let t = self.table.read().expect("table lock");
        let stride = t.kmax + 1;
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            let row = &t.data[j * stride..(j + 1) * stride];
            let mut p = *w;
            for &k in &ks {
                p *= row[k];
            }
            fine += p;
            if j % 2 == 0 {
                coarse += 2.0 * p;
            }
        }
        (fine, coarse)
    }
}

/// Symmetry class representative: absolute values sorted in decreasing order.
fn key_of(x: &Point) -> Point {
    let mut c: Vec<i64> = x.coords().iter().map(|v| v.abs()).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    Point::new(&c)
}

/// Dense table of `g` on `[-R, R]^d`, for inner loops over many differences.
pub struct GreenTable {
    green: Arc<GreenFunction>,
    radius: usize,
    strides: [usize; MAX_DIM],
    data: Vec<f64>,
}

impl std::fmt::Debug for GreenTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenTable")
            .field("d", &self.green.dim())
            .field("radius", &self.radius)
            .finish()
    }
}

impl GreenTable {
    pub fn new(green: Arc<GreenFunction>, radius: usize) -> Result<Self> {
        let d = green.dim();
        let side = radius + 1;
        let mut strides = [0; MAX_DIM];
        let mut len = 1usize;
        for s in strides.iter_mut().take(d) {
            *s = len;
            len *= side;
        }
        let mut data = vec![f64::NAN; len];
        green.ensure_orders(radius);
        // canonical (non-increasing) tuples first, then scatter to permutations
        let mut a = vec![0usize; d];
        for idx in 0..len {
            let mut r = idx;
            for v in a.iter_mut() {
                *v = r % side;
                r /= side;
            }
            if a.windows(2).all(|w| w[0] >= w[1]) {
                let key = Point::new(&a.iter().map(|&v| v as i64).collect::<Vec<_>>());
                data[idx] = green.uncached(&key)?;
            }
        }
        for idx in 0..len {
            if data[idx].is_nan() {
                let mut r = idx;
                for v in a.iter_mut() {
                    *v = r % side;
                    r /= side;
                }
                a.sort_unstable_by(|x, y| y.cmp(x));
                let canon: usize = a.iter().enumerate().map(|(i, &v)| v * strides[i]).sum();
                data[idx] = data[canon];
            }
        }
        Ok(Self {
            green,
            radius,
            strides,
            data,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn green(&self) -> &Arc<GreenFunction> {
        &self.green
    }

    /// `g` at the difference whose absolute coordinates are `abs`; all must be `<= radius`.
    #[inline]
    pub fn at_abs(&self, abs: &[usize]) -> f64 {
        let mut idx = 0;
        for (i, &a) in abs.iter().enumerate() {
            debug_assert!(a <= self.radius);
            idx += a * self.strides[i];
        }
        self.data[idx]
    }

    /// `g(x - y)`, falling back to direct quadrature outside the table.
    #[inline]
    pub fn between(&self, x: &Point, y: &Point) -> Result<f64> {
        let d = self.green.dim();
        let mut idx = 0;
        for i in 0..d {
            let a = (x.get(i) - y.get(i)).unsigned_abs() as usize;
            if a > self.radius {
                return self.green.value(&(*x - *y));
            }
            idx += a * self.strides[i];
        }
        Ok(self.data[idx])
    }
}
