//! Dense boolean fields over the vertices or internal edges of a window.

use crate::lattice::{LatticeWindow, Point};

/// One bit per window vertex.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SiteField {
    window: LatticeWindow,
    bits: Vec<bool>,
}

impl SiteField {
    pub fn filled(window: &LatticeWindow, value: bool) -> Self {
        Self {
            window: window.clone(),
            bits: vec![value; window.len()],
        }
    }

    pub fn from_bits(window: &LatticeWindow, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), window.len(), "one bit per vertex");
        Self {
            window: window.clone(),
            bits,
        }
    }

    pub fn from_fn(window: &LatticeWindow, mut f: impl FnMut(Point) -> bool) -> Self {
        let bits = window.iter().map(&mut f).collect();
        Self {
            window: window.clone(),
            bits,
        }
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: bool) {
        self.bits[idx] = v;
    }

    /// Bit at a point; `None` outside the window.
    pub fn at(&self, x: &Point) -> Option<bool> {
        self.window.index(x).map(|i| self.bits[i])
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            window: self.window.clone(),
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn and(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a || b)
    }

    pub fn xor(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a != b)
    }

    fn zip(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.window, other.window, "fields over different windows");
        Self {
            window: self.window.clone(),
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert_eq!(self.window, other.window, "fields over different windows");
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// One bit per window-internal edge, indexed as in [`LatticeWindow::edge_index`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BondField {
    window: LatticeWindow,
    bits: Vec<bool>,
}

impl BondField {
    pub fn filled(window: &LatticeWindow, value: bool) -> Self {
        Self {
            window: window.clone(),
            bits: vec![value; window.edge_count()],
        }
    }

    pub fn from_bits(window: &LatticeWindow, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), window.edge_count(), "one bit per edge");
        Self {
            window: window.clone(),
            bits,
        }
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, e: usize) -> bool {
        self.bits[e]
    }

    #[inline]
    pub fn set(&mut self, e: usize, v: bool) {
        self.bits[e] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.window, other.window, "fields over different windows");
        Self {
            window: self.window.clone(),
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn or(&self, other: &Self) -> Self {
        assert_eq!(self.window, other.window, "fields over different windows");
        Self {
            window: self.window.clone(),
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert_eq!(self.window, other.window, "fields over different windows");
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}
