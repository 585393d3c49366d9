//! Lattice isometries that fix a box: reflections through its center and
//! permutations of axes with equal side lengths.

use super::{LatticeWindow, Point, MAX_DIM};

/// Map from the canonical frame back to the original one, acting on doubled
/// centered coordinates as `u_a = sign_a * c_{perm_a}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Isometry {
    perm: [u8; MAX_DIM],
    neg: [bool; MAX_DIM],
}

/// The symmetry group of a window, used to fold computations onto a fundamental domain.
#[derive(Clone, Debug)]
pub struct BoxSymmetry {
    corner: Point,
    sides: Vec<i64>,
    classes: Vec<Vec<usize>>,
}

impl BoxSymmetry {
    pub fn new(window: &LatticeWindow) -> Self {
        let sides: Vec<i64> = window.sides().iter().map(|&s| s as i64).collect();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for a in 0..sides.len() {
            match classes.iter_mut().find(|c| sides[c[0]] == sides[a]) {
                Some(c) => c.push(a),
                None => classes.push(vec![a]),
            }
        }
        Self {
            corner: window.corner(),
            sides,
            classes,
        }
    }

    fn doubled(&self, x: &Point) -> [i64; MAX_DIM] {
        let mut u = [0; MAX_DIM];
        for (a, s) in self.sides.iter().enumerate() {
            u[a] = 2 * (x.get(a) - self.corner.get(a)) - (s - 1);
        }
        u
    }

    fn undoubled(&self, u: &[i64; MAX_DIM]) -> Point {
        let d = self.sides.len();
        let mut c = [0; MAX_DIM];
        for a in 0..d {
            c[a] = self.corner.get(a) + (u[a] + self.sides[a] - 1) / 2;
        }
        Point::new(&c[..d])
    }

    /// Canonical representative of the orbit of `x` (any point of Z^d) and the
    /// isometry taking the representative back to `x`.
    pub fn canonical(&self, x: &Point) -> (Point, Isometry) {
        let u = self.doubled(x);
        let mut c = [0; MAX_DIM];
        let mut iso = Isometry {
            perm: [0; MAX_DIM],
            neg: [false; MAX_DIM],
        };
        for class in &self.classes {
            let mut order: Vec<usize> = class.clone();
            order.sort_by(|&a, &b| u[b].abs().cmp(&u[a].abs()).then(a.cmp(&b)));
            for (k, &a) in order.iter().enumerate() {
                let target = class[k];
                c[target] = u[a].abs();
                iso.perm[a] = target as u8;
                iso.neg[a] = u[a] < 0;
            }
        }
        (self.undoubled(&c), iso)
    }

    /// Applies `iso` to a point given in the canonical frame.
    pub fn apply(&self, iso: &Isometry, x: &Point) -> Point {
        let c = self.doubled(x);
        let mut u = [0; MAX_DIM];
        for a in 0..self.sides.len() {
            let v = c[iso.perm[a] as usize];
            u[a] = if iso.neg[a] { -v } else { v };
        }
        self.undoubled(&u)
    }

    /// Number of group elements.
    pub fn order(&self) -> usize {
        let d = self.sides.len();
        let fact = |k: usize| (1..=k).product::<usize>();
        (1usize << d) * self.classes.iter().map(|c| fact(c.len())).product::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cube_group_order() {
        let w = LatticeWindow::cube(Point::origin(3), 5).unwrap();
        assert_eq!(BoxSymmetry::new(&w).order(), 48);
        let w = LatticeWindow::new(Point::origin(3), &[4, 4, 2]).unwrap();
        assert_eq!(BoxSymmetry::new(&w).order(), 16);
    }

    #[test]
    fn orbit_of_corner_has_eight_points() {
        let w = LatticeWindow::cube(Point::new(&[1, 1, 1]), 4).unwrap();
        let sym = BoxSymmetry::new(&w);
        let reps: std::collections::HashSet<Point> =
            w.iter().filter(|p| w.on_inner_boundary(w.index(p).unwrap())).map(|p| sym.canonical(&p).0).collect();
        // corners, edge interiors, face interiors of a 4-cube
        assert_eq!(reps.len(), 3);
    }

    proptest! {
        #[test]
        fn canonical_roundtrip_preserves_window_and_distances(
            sides in proptest::collection::vec(1usize..6, 3..5),
            x in proptest::collection::vec(-8i64..8, 5),
            y in proptest::collection::vec(-8i64..8, 5),
        ) {
            let d = sides.len();
            let w = LatticeWindow::new(Point::new(&vec![-1; d]), &sides).unwrap();
            let sym = BoxSymmetry::new(&w);
            let px = Point::new(&x[..d]);
            let py = Point::new(&y[..d]);
            let (cx, iso) = sym.canonical(&px);
            prop_assert_eq!(sym.apply(&iso, &cx), px);
            prop_assert_eq!(w.contains(&cx), w.contains(&px));
            // the isometry preserves all lattice distances
            let (cy, _) = sym.canonical(&py);
            let iy = sym.apply(&iso, &cy);
            let mut dx: Vec<i64> = (cy - cx).coords().iter().map(|v| v.abs()).collect();
            let mut di: Vec<i64> = (iy - px).coords().iter().map(|v| v.abs()).collect();
            dx.sort();
            di.sort();
            prop_assert_eq!(dx, di);
            // canonical form is a class invariant
            let image = sym.apply(&iso, &py);
            prop_assert_eq!(sym.canonical(&image).0, sym.canonical(&py).0);
        }
    }
}
