//! Radial cutoffs `χ` and `φ(r) = χ(r/2) − χ(r)`.
//!
//! `χ` is a smooth non-increasing step: it equals 1 on `[0, 3/4]`, 0 on
//! `[4/3, ∞)`, and in between descends along the normalized primitive of the
//! bump `exp(−s / (4y(1−y)))` on `y ∈ (0, 1)`. The primitive is tabulated once
//! with Gauss-Legendre quadrature and evaluated by cubic Hermite interpolation
//! using the exact bump as derivative.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const CHI_FLAT_END: f64 = 0.75;
pub const CHI_SUPPORT_END: f64 = 4.0 / 3.0;
const TABLE_CELLS: usize = 4096;
const GAUSS_POINTS: usize = 10;

#[derive(Debug, Clone)]
pub struct DyadicCutoffs {
    sharpness: f64,
    norm: f64,
    primitive: Vec<f64>,
}

fn bump(sharpness: f64, y: f64) -> f64 {
    if y <= 0.0 || y >= 1.0 {
        0.0
    } else {
        (-sharpness / (4.0 * y * (1.0 - y))).exp()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

impl DyadicCutoffs {
    /// Builds the cutoffs; `sharpness > 0` controls how abruptly the step
    /// descends (1 is a good default).
    pub fn build(sharpness: f64) -> Result<Self> {
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "profile sharpness must be positive, got {sharpness}"
            )));
        }
        let (nodes, weights) = gauss_legendre(GAUSS_POINTS);
        let h = 1.0 / TABLE_CELLS as f64;
        let mut primitive = Vec::with_capacity(TABLE_CELLS + 1);
        primitive.push(0.0);
        let mut acc = 0.0;
        for cell in 0..TABLE_CELLS {
            let a = cell as f64 * h;
            let part: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * bump(sharpness, a + 0.5 * h * (x + 1.0)))
                .sum();
            acc += 0.5 * h * part;
            primitive.push(acc);
        }
        let norm = acc;
        for v in &mut primitive {
            *v /= norm;
        }
        let cutoffs = Self {
            sharpness,
            norm,
            primitive,
        };
        cutoffs.validate()?;
        Ok(cutoffs)
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    fn step(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        let h = 1.0 / TABLE_CELLS as f64;
        let pos = y / h;
        let cell = (pos.floor() as usize).min(TABLE_CELLS - 1);
        let t = pos - cell as f64;
        let (y0, y1) = (cell as f64 * h, (cell + 1) as f64 * h);
        let (s0, s1) = (self.primitive[cell], self.primitive[cell + 1]);
        let (d0, d1) = (
            bump(self.sharpness, y0) / self.norm,
            bump(self.sharpness, y1) / self.norm,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * s0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * s1
            + (t3 - t2) * h * d1;
        v.clamp(0.0, 1.0)
    }

    /// `χ(r)` for `r ≥ 0`.
    pub fn chi(&self, r: f64) -> f64 {
        if r <= CHI_FLAT_END {
            1.0
        } else if r >= CHI_SUPPORT_END {
            0.0
        } else {
            1.0 - self.step((r - CHI_FLAT_END) / (CHI_SUPPORT_END - CHI_FLAT_END))
        }
    }

    /// `φ(r) = χ(r/2) − χ(r)`, supported in `[3/4, 8/3]`.
    pub fn phi(&self, r: f64) -> f64 {
        self.chi(0.5 * r) - self.chi(r)
    }

    /// `φ(2^{-j} r)`.
    pub fn shell_weight(&self, j: i32, r: f64) -> f64 {
        self.phi(r * 2f64.powi(-j))
    }

    /// Indices `j` with `φ(2^{-j} r) > 0` (at most two).
    pub fn shells_containing(&self, r: f64) -> std::ops::RangeInclusive<i32> {
        if r <= 0.0 {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        let lo = (r * CHI_FLAT_END / 2.0).log2().floor() as i32 + 1;
        let hi = (r / CHI_FLAT_END).log2().ceil() as i32 - 1;
        lo..=hi
    }

    fn validate(&self) -> Result<()> {
        let tol = 1e-10;
        let samples = 20_000;
        let mut prev = 1.0;
        for i in 0..=samples {
            let r = 1.5 * i as f64 / samples as f64;
            let c = self.chi(r);
            if !(-tol..=1.0 + tol).contains(&c) {
                return Err(Error::Cutoff(format!("chi({r}) = {c} outside [0, 1]")));
            }
            if c > prev + tol {
                return Err(Error::Cutoff(format!("chi increases near r = {r}")));
            }
            if r <= CHI_FLAT_END && (c - 1.0).abs() > tol {
                return Err(Error::Cutoff(format!("chi({r}) = {c} but must be 1")));
            }
            if r >= CHI_SUPPORT_END && c.abs() > tol {
                return Err(Error::Cutoff(format!("chi({r}) = {c} but must vanish")));
            }
            prev = c;
        }
        Ok(())
    }

    /// Two-column text table `r chi(r)` on `samples + 1` equispaced radii in `[0, r_max]`.
    pub fn tabulate(&self, r_max: f64, samples: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dyadic cutoff chi, bump sharpness = {}", self.sharpness);
        let _ = writeln!(out, "# r chi");
        for i in 0..=samples {
            let r = r_max * i as f64 / samples as f64;
            let _ = writeln!(out, "{r:.12e} {:.17e}", self.chi(r));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_part_and_support() {
        let c = DyadicCutoffs::build(1.0).unwrap();
        assert_eq!(c.chi(0.5), 1.0);
        assert_eq!(c.chi(0.75), 1.0);
        assert_eq!(c.chi(4.0 / 3.0), 0.0);
        assert_eq!(c.phi(0.1), 0.0);
        assert_eq!(c.phi(2.7), 0.0);
        assert!(c.phi(1.0) > 0.0 && c.phi(2.0) > 0.0);
    }

    #[test]
    fn phi_on_inner_plateau_is_one() {
        let c = DyadicCutoffs::build(1.0).unwrap();
        for r in [4.0 / 3.0, 1.4, 1.5] {
            assert_eq!(c.phi(r), 1.0);
        }
    }

    #[test]
    fn partition_of_unity_at_sample_radii() {
        let c = DyadicCutoffs::build(1.0).unwrap();
        for r in [0.01, 1.0, 37.0] {
            let s: f64 = (-30..=30).map(|j| c.shell_weight(j, r)).sum();
            assert!((s - 1.0).abs() < 1e-12, "r = {r}: {s}");
        }
    }

    #[test]
    fn shells_containing_is_exact() {
        let c = DyadicCutoffs::build(1.0).unwrap();
        for i in 0..2000 {
            let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 2000.0);
            let listed: Vec<i32> = c.shells_containing(r).collect();
            for j in -20..20 {
                if c.shell_weight(j, r) > 0.0 {
                    assert!(listed.contains(&j), "r = {r} j = {j}");
                }
            }
            assert!(listed.len() <= 2);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((int - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_sharpness() {
        assert!(DyadicCutoffs::build(0.0).is_err());
        assert!(DyadicCutoffs::build(f64::NAN).is_err());
    }

    #[test]
    fn tabulation_has_two_columns() {
        let c = DyadicCutoffs::build(1.0).unwrap();
        let t = c.tabulate(2.0, 10);
        let rows: Vec<&str> = t.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.split_whitespace().count() == 2));
    }
}
