//! Quenched Bernoulli noise: site and bond dilution, independent flips, and the
//! monotone max-coupling of flips with the occupied set.

use rand::Rng;

use crate::error::{check_probability, invalid, Result};
pub use crate::field::{BondField, SiteField};
use crate::lattice::LatticeWindow;

/// I.i.d. Bernoulli(`q`) vertex bits.
pub fn bernoulli_site<R: Rng + ?Sized>(window: &LatticeWindow, q: f64, rng: &mut R) -> Result<SiteField> {
    check_probability("q", q)?;
    let bits = (0..window.len()).map(|_| rng.random::<f64>() < q).collect();
    Ok(SiteField::from_bits(window, bits))
}

/// I.i.d. Bernoulli(`p`) bits on internal edges.
pub fn bernoulli_bond<R: Rng + ?Sized>(window: &LatticeWindow, p: f64, rng: &mut R) -> Result<BondField> {
    check_probability("p", p)?;
    let bits = (0..window.edge_count()).map(|_| rng.random::<f64>() < p).collect();
    Ok(BondField::from_bits(window, bits))
}

/// Each bit flipped independently with probability `eps`.
pub fn flip_noise<R: Rng + ?Sized>(occupied: &SiteField, eps: f64, rng: &mut R) -> Result<SiteField> {
    check_probability("eps", eps)?;
    let bits = occupied
        .bits()
        .iter()
        .map(|&b| b != (rng.random::<f64>() < eps))
        .collect();
    Ok(SiteField::from_bits(occupied.window(), bits))
}

/// Retention parameter of `eta` in the max-coupling, `(1 - 2 eps) / (1 - eps)`.
pub fn eta_parameter(eps: f64) -> f64 {
    (1.0 - 2.0 * eps) / (1.0 - eps)
}

/// Noisy occupation `max(xi, eta * 1_I)` with `xi ~ Bern(eps)`, `eta ~ Bern((1-2eps)/(1-eps))`.
///
/// Same marginal law as [`flip_noise`], but nondecreasing in the occupied set.
pub fn coupled_noise<R: Rng + ?Sized>(occupied: &SiteField, eps: f64, rng: &mut R) -> Result<SiteField> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", format!("{eps} is not in (0, 1/2)")));
    }
    CoupledNoise::draw(occupied.window(), rng).apply(occupied, eps)
}

/// Frozen uniforms behind the max-coupling, shared across levels and noise strengths.
#[derive(Debug, Clone)]
pub struct CoupledNoise {
    window: LatticeWindow,
    xi: Vec<f64>,
    eta: Vec<f64>,
}

impl CoupledNoise {
    pub fn draw<R: Rng + ?Sized>(window: &LatticeWindow, rng: &mut R) -> Self {
        let mut xi = Vec::with_capacity(window.len());
        let mut eta = Vec::with_capacity(window.len());
        for _ in 0..window.len() {
            xi.push(rng.random::<f64>());
            eta.push(rng.random::<f64>());
        }
        Self {
            window: window.clone(),
            xi,
            eta,
        }
    }

    /// Noisy occupation for `eps` in `[0, 1/2]`; the endpoints give the clean set and a
    /// Bernoulli(1/2) field independent of it.
    pub fn apply(&self, occupied: &SiteField, eps: f64) -> Result<SiteField> {
        if !(0.0..=0.5).contains(&eps) {
            return Err(invalid("eps", format!("{eps} is not in [0, 1/2]")));
        }
        if occupied.window() != &self.window {
            return Err(invalid("occupied", "field lives on a different window"));
        }
        let keep = eta_parameter(eps);
        let bits = occupied
            .bits()
            .iter()
            .zip(self.xi.iter().zip(&self.eta))
            .map(|(&b, (&x, &e))| x < eps || (b && e < keep))
            .collect();
        Ok(SiteField::from_bits(&self.window, bits))
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    /// Noisy occupation of vertex `v` given its clean occupation; `eps` is not checked.
    #[inline]
    pub fn occupied_at(&self, v: usize, occupied: bool, eps: f64) -> bool {
        self.xi[v] < eps || (occupied && self.eta[v] < eta_parameter(eps))
    }

    /// Noisy vacant set `V^{u,eps}`.
    pub fn vacant(&self, occupied: &SiteField, eps: f64) -> Result<SiteField> {
        Ok(self.apply(occupied, eps)?.complement())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Point;
    use crate::seed::stream;
    use proptest::prelude::*;

    fn win(side: usize) -> LatticeWindow {
        LatticeWindow::cube(Point::origin(3), side).unwrap()
    }

    #[test]
    fn degenerate_probabilities() {
        let w = win(4);
        let mut rng = stream(1, 0, "noise");
        assert_eq!(bernoulli_site(&w, 0.0, &mut rng).unwrap().count_ones(), 0);
        assert_eq!(bernoulli_site(&w, 1.0, &mut rng).unwrap().count_ones(), 64);
        assert_eq!(bernoulli_bond(&w, 1.0, &mut rng).unwrap().count_ones(), w.edge_count());
        assert_eq!(bernoulli_bond(&w, 0.0, &mut rng).unwrap().count_ones(), 0);
        assert!(bernoulli_site(&w, 1.5, &mut rng).is_err());
        assert!(bernoulli_bond(&w, -0.1, &mut rng).is_err());
    }

    #[test]
    fn site_and_bond_means() {
        let w = win(100);
        let mut rng = stream(2, 0, "noise");
        let f = bernoulli_site(&w, 0.3, &mut rng).unwrap();
        let n = w.len() as f64;
        let sigma = (0.3 * 0.7 / n).sqrt();
        assert!((f.count_ones() as f64 / n - 0.3).abs() < 3.0 * sigma);
        let b = bernoulli_bond(&w, 0.7, &mut rng).unwrap();
        let m = w.edge_count() as f64;
        assert!((b.count_ones() as f64 / m - 0.7).abs() < 3.0 * (0.21 / m).sqrt());
    }

    #[test]
    fn replay() {
        let w = win(6);
        let a = bernoulli_site(&w, 0.4, &mut stream(3, 1, "noise")).unwrap();
        let b = bernoulli_site(&w, 0.4, &mut stream(3, 1, "noise")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flip_extremes() {
        let w = win(5);
        let mut rng = stream(4, 0, "noise");
        let occ = bernoulli_site(&w, 0.5, &mut rng).unwrap();
        assert_eq!(flip_noise(&occ, 0.0, &mut rng).unwrap(), occ);
        assert_eq!(flip_noise(&occ, 1.0, &mut rng).unwrap(), occ.complement());
        assert!(flip_noise(&occ, 1.1, &mut rng).is_err());
    }

    #[test]
    fn coupling_parameter() {
        assert!((eta_parameter(0.25) - 2.0 / 3.0).abs() < 1e-15);
        let w = win(3);
        let occ = SiteField::filled(&w, true);
        let mut rng = stream(5, 0, "noise");
        assert!(coupled_noise(&occ, 0.5, &mut rng).is_err());
        assert!(coupled_noise(&occ, 0.0, &mut rng).is_err());
        let cn = CoupledNoise::draw(&w, &mut rng);
        assert_eq!(cn.apply(&occ, 0.0).unwrap(), occ);
        assert!(cn.apply(&occ, 0.6).is_err());
    }

    #[test]
    fn coupled_marginals() {
        // P[out = 1 | in = 1] = 1 - eps and P[out = 1 | in = 0] = eps
        let w = win(60);
        let mut rng = stream(6, 0, "noise");
        let eps = 0.2;
        let ones = SiteField::filled(&w, true);
        let zeros = SiteField::filled(&w, false);
        let n = w.len() as f64;
        let s = 3.0 * (eps * (1.0 - eps) / n).sqrt();
        let a = coupled_noise(&ones, eps, &mut rng).unwrap().count_ones() as f64 / n;
        let b = coupled_noise(&zeros, eps, &mut rng).unwrap().count_ones() as f64 / n;
        assert!((a - (1.0 - eps)).abs() < s, "{a}");
        assert!((b - eps).abs() < s, "{b}");
    }

    proptest! {
        #[test]
        fn coupled_noise_is_monotone(seed in 0u64..500, eps in 0.01f64..0.49, q in 0.0f64..1.0) {
            let w = win(4);
            let mut rng = stream(seed, 0, "prop");
            let a = bernoulli_site(&w, q, &mut rng).unwrap();
            let extra = bernoulli_site(&w, 0.5, &mut rng).unwrap();
            let b = a.or(&extra);
            let cn = CoupledNoise::draw(&w, &mut rng);
            prop_assert!(cn.apply(&a, eps).unwrap().is_subset_of(&cn.apply(&b, eps).unwrap()));
        }
    }
}
