//! Points, boxes and edges of Z^d, the simple random walk step, and the Green function.

mod bessel;
mod green;
mod symmetry;

pub use green::{GreenFunction, GreenTable, DEFAULT_GREEN_TOL};
pub use symmetry::{BoxSymmetry, Isometry};

use std::fmt;
use std::ops::{Add, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported dimension. Points are stored inline.
pub const MAX_DIM: usize = 6;

/// Rejects dimensions where the walk is recurrent or storage is exceeded.
pub fn check_dim(d: usize) -> Result<()> {
    if (3..=MAX_DIM).contains(&d) {
        Ok(())
    } else if d < 3 {
        Err(Error::Dimension(d))
    } else {
        Err(invalid("d", format!("at most {MAX_DIM} dimensions are supported")))
    }
}

/// A vertex of Z^d.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "point dimension must be in 1..={MAX_DIM}"
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn origin(d: usize) -> Self {
        Self::new(&vec![0; d])
    }

    /// The unit vector e_{axis+1}.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut p = Self::origin(d);
        p.coords[axis] = 1;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn get(&self, i: usize) -> i64 {
        self.coords()[i]
    }

    pub fn with(mut self, i: usize, v: i64) -> Self {
        assert!(i < self.dim());
        self.coords[i] = v;
        self
    }

    pub fn scale(mut self, k: i64) -> Self {
        for c in &mut self.coords[..self.dim as usize] {
            *c *= k;
        }
        self
    }

    pub fn norm_inf(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn norm_1(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    pub fn dist_inf(&self, other: &Point) -> i64 {
        (*self - *other).norm_inf()
    }

    /// Neighbor in direction `dir`: `2a` is `+e_a`, `2a + 1` is `-e_a`.
    pub fn step(mut self, dir: usize) -> Self {
        let axis = dir / 2;
        debug_assert!(axis < self.dim());
        self.coords[axis] += if dir % 2 == 0 { 1 } else { -1 };
        self
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for Point {
    type Output = Point;
    fn add(mut self, rhs: Point) -> Point {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for i in 0..self.dim() {
            self.coords[i] += rhs.coords[i];
        }
        self
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(mut self, rhs: Point) -> Point {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for i in 0..self.dim() {
            self.coords[i] -= rhs.coords[i];
        }
        self
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        self.scale(-1)
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom("point dimension out of range"));
        }
        Ok(Point::new(&v))
    }
}

/// An undirected nearest-neighbor edge, smaller endpoint (lexicographic) first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Edge {
    a: Point,
    b: Point,
}

impl Edge {
    pub fn new(x: Point, y: Point) -> Result<Self> {
        if x.dim() != y.dim() || (x - y).norm_1() != 1 {
            return Err(invalid("edge", format!("{x} and {y} are not adjacent")));
        }
        Ok(if x < y { Self { a: x, b: y } } else { Self { a: y, b: x } })
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (self.a, self.b)
    }

    /// Axis along which the edge points.
    pub fn axis(&self) -> usize {
        (0..self.a.dim())
            .find(|&i| self.a.get(i) != self.b.get(i))
            .expect("endpoints differ")
    }
}

/// The 2d neighbors of `x` in the order `+e_1, -e_1, ..., +e_d, -e_d`.
pub fn neighbors(x: Point) -> Vec<Point> {
    (0..2 * x.dim()).map(|dir| x.step(dir)).collect()
}

/// One step of the simple random walk.
pub fn srw_step<R: Rng + ?Sized>(x: Point, rng: &mut R) -> Point {
    x.step(rng.random_range(0..2 * x.dim()))
}

/// The box `corner + prod [0, side_i)` with a bijective vertex indexing (first axis fastest).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LatticeWindow {
    corner: Point,
    sides: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    len: usize,
    edge_offsets: [usize; MAX_DIM + 1],
}

impl fmt::Debug for LatticeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LatticeWindow({} + {:?})", self.corner, self.sides())
    }
}

impl LatticeWindow {
    pub fn new(corner: Point, sides: &[usize]) -> Result<Self> {
        let d = corner.dim();
        if sides.len() != d {
            return Err(invalid(
                "window",
                format!("{} side lengths for a {d}-dimensional corner", sides.len()),
            ));
        }
        if sides.contains(&0) {
            return Err(invalid("window", "side lengths must be positive"));
        }
        let mut s = [1; MAX_DIM];
        s[..d].copy_from_slice(sides);
        let mut strides = [0; MAX_DIM];
        let mut len = 1usize;
        for i in 0..d {
            strides[i] = len;
            len = len
                .checked_mul(s[i])
                .ok_or_else(|| invalid("window", "vertex count overflows"))?;
        }
        let mut edge_offsets = [0; MAX_DIM + 1];
        for a in 0..d {
            edge_offsets[a + 1] = edge_offsets[a] + len / s[a] * (s[a] - 1);
        }
        Ok(Self {
            corner,
            sides: s,
            strides,
            len,
            edge_offsets,
        })
    }

    /// The cube `corner + [0, side)^d`.
    pub fn cube(corner: Point, side: usize) -> Result<Self> {
        Self::new(corner, &vec![side; corner.dim()])
    }

    /// The closed l-infinity ball B(center, radius).
    pub fn ball(center: Point, radius: usize) -> Result<Self> {
        let r = radius as i64;
        let corner = center - Point::new(&vec![r; center.dim()]);
        Self::cube(corner, 2 * radius + 1)
    }

    /// The box `x + [m, n)^d`.
    pub fn box_at(x: Point, m: i64, n: i64) -> Result<Self> {
        if n <= m {
            return Err(invalid("window", format!("empty range [{m}, {n})")));
        }
        Self::cube(x + Point::new(&vec![m; x.dim()]), (n - m) as usize)
    }

    pub fn dim(&self) -> usize {
        self.corner.dim()
    }

    pub fn corner(&self) -> Point {
        self.corner
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides[..self.dim()]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Largest corner, `corner + side - 1`.
    pub fn far_corner(&self) -> Point {
        let mut p = self.corner;
        for i in 0..self.dim() {
            p.coords[i] += self.sides[i] as i64 - 1;
        }
        p
    }

    /// Central vertex (lower middle for even sides).
    pub fn center(&self) -> Point {
        let mut p = self.corner;
        for i in 0..self.dim() {
            p.coords[i] += (self.sides[i] as i64 - 1) / 2;
        }
        p
    }

    /// Max over vertices of the l-infinity distance to `center()`.
    pub fn radius(&self) -> usize {
        self.sides().iter().map(|&s| s / 2).max().unwrap_or(0)
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                let c = x.coords[i] - self.corner.coords[i];
                c >= 0 && (c as usize) < self.sides[i]
            })
    }

    pub fn contains_window(&self, other: &LatticeWindow) -> bool {
        self.contains(&other.corner) && self.contains(&other.far_corner())
    }

    pub fn index(&self, x: &Point) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(
            (0..self.dim())
                .map(|i| (x.coords[i] - self.corner.coords[i]) as usize * self.strides[i])
                .sum(),
        )
    }

    pub fn point(&self, idx: usize) -> Point {
        assert!(idx < self.len, "vertex index out of range");
        let mut p = self.corner;
        let mut r = idx;
        for i in 0..self.dim() {
            p.coords[i] += (r % self.sides[i]) as i64;
            r /= self.sides[i];
        }
        p
    }

    /// Local coordinate of vertex `idx` along `axis`.
    pub fn local(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.sides[axis]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Index of the neighbor of `idx` in direction `dir`, if it lies in the window.
    #[inline]
    pub fn neighbor_index(&self, idx: usize, dir: usize) -> Option<usize> {
        let axis = dir / 2;
        let c = self.local(idx, axis);
        if dir % 2 == 0 {
            (c + 1 < self.sides[axis]).then(|| idx + self.strides[axis])
        } else {
            (c > 0).then(|| idx - self.strides[axis])
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    /// Number of window-internal edges.
    pub fn edge_count(&self) -> usize {
        self.edge_offsets[self.dim()]
    }

    /// Index of the edge from vertex `lower` to `lower + e_axis`, if internal.
    pub fn edge_index(&self, lower: usize, axis: usize) -> Option<usize> {
        if self.local(lower, axis) + 1 >= self.sides[axis] {
            return None;
        }
        // mixed radix over the lower-endpoint box, where this axis has side - 1
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..self.dim() {
            let side = if i == axis { self.sides[i] - 1 } else { self.sides[i] };
            idx += self.local(lower, i) * stride;
            stride *= side;
        }
        Some(self.edge_offsets[axis] + idx)
    }

    /// Index of the internal edge joining two adjacent vertex indices.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let diff = hi - lo;
        let axis = (0..self.dim())
            .find(|&a| self.strides[a] == diff && self.neighbor_index(lo, 2 * a) == Some(hi))?;
        self.edge_index(lo, axis)
    }

    /// Vertex indices `(lower, upper)` of edge `e`.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        assert!(e < self.edge_count(), "edge index out of range");
        let axis = (0..self.dim())
            .find(|&a| e < self.edge_offsets[a + 1])
            .expect("edge offsets cover range");
        let mut r = e - self.edge_offsets[axis];
        let mut lower = 0;
        for i in 0..self.dim() {
            let side = if i == axis { self.sides[i] - 1 } else { self.sides[i] };
            lower += (r % side) * self.strides[i];
            r /= side;
        }
        (lower, lower + self.strides[axis])
    }

    pub fn edge_axis(&self, e: usize) -> usize {
        (0..self.dim())
            .find(|&a| e < self.edge_offsets[a + 1])
            .expect("edge index out of range")
    }

    pub fn edge(&self, e: usize) -> Edge {
        let (a, b) = self.edge_endpoints(e);
        Edge {
            a: self.point(a),
            b: self.point(b),
        }
    }

    pub fn edge_of(&self, edge: &Edge) -> Option<usize> {
        let lower = self.index(&edge.a)?;
        self.edge_index(lower, edge.axis())
    }

    /// Whether vertex `idx` has a neighbor outside the window.
    pub fn on_inner_boundary(&self, idx: usize) -> bool {
        (0..self.dim()).any(|a| {
            let c = self.local(idx, a);
            c == 0 || c + 1 == self.sides[a]
        })
    }

    /// Sub-window with absolute corner and sides, checked to lie inside.
    pub fn sub_window(&self, corner: Point, sides: &[usize]) -> Result<LatticeWindow> {
        let w = LatticeWindow::new(corner, sides)?;
        if !self.contains_window(&w) {
            return Err(Error::Coverage(format!("{w:?} is not inside {self:?}")));
        }
        Ok(w)
    }
}
