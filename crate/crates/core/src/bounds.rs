//! Density and peripheral-count upper bounds from the Fejes Tóth, Groemer and
//! Oler inequalities, and least-squares fits of the large-N behaviour.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RHO_PLANE;

/// Groemer's ϰ = (2 − √3)/2.
pub const GROEMER_KAPPA: f64 = 0.133_974_596_215_561_4;
/// Groemer's λ = √12 − π(√3 − 1).
pub const GROEMER_LAMBDA: f64 = 1.164_296_176_024_894_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// `N√12 < A` for the container measured in disk radii at `r_upper`.
    pub fejes_toth_ok: bool,
    /// `A − ϰP + λ − N√12` at `r_upper`; non-negative when Groemer's inequality holds.
    pub groemer_margin: f64,
    /// Right-hand side of Oler's inequality at `r_upper` (equals N there).
    pub oler_max_disks: f64,
    /// Largest convention II radius allowed by Oler's inequality.
    pub r_upper: f64,
    pub rho_upper: f64,
    pub rho_upper_asym: f64,
    /// Container perimeter over the disk diameter at `r_upper`.
    pub nb_upper: f64,
    pub groemer_kappa: f64,
    pub groemer_lambda: f64,
}

/// Convention II radius at which Oler's inequality becomes an equality.
pub fn r_upper(n: usize, sigma: u32) -> f64 {
    let s = sigma as f64;
    let a = PI / s;
    let m = n as f64 - 1.0;
    let sq3 = 3f64.sqrt();
    let root = (s * a.sin() * (8.0 * sq3 * m * a.cos() + 3.0 * s * a.sin())).sqrt();
    (sq3 * root + (3.0 - 2.0 * sq3) * s * a.sin()) / (12.0 * m - 2.0 * (sq3 - 3.0) * s * a.tan())
}

/// The denominator Δ(N, σ) of the density bound `4πN/Δ`.
pub fn delta(n: usize, sigma: u32) -> f64 {
    let s = sigma as f64;
    let a = PI / s;
    let m = n as f64 - 1.0;
    let sq3 = 3f64.sqrt();
    let root = (s * (2.0 * a).sin() * (8.0 * sq3 * m + 3.0 * s * a.tan())).sqrt();
    -(2f64.sqrt()) * (sq3 - 2.0) / a.cos() * root + 8.0 * sq3 * m + 2.0 * (5.0 - 2.0 * sq3) * s * a.tan()
}

pub fn rho_upper(n: usize, sigma: u32) -> f64 {
    4.0 * PI * n as f64 / delta(n, sigma)
}

/// Leading large-N behaviour of [`rho_upper`].
pub fn rho_upper_asym(n: usize, sigma: u32) -> f64 {
    let s = sigma as f64;
    let c = (0.5 * (7.0 * 3f64.sqrt() - 12.0)).sqrt();
    PI / (2.0 * 3f64.sqrt()) - PI / 6.0 * c * (s * (PI / s).tan() / n as f64).sqrt()
}

/// Right-hand side of Oler's inequality for convention II radius `r`, with the
/// polygon of admissible centers measured in disk diameters.
pub fn oler_rhs(sigma: u32, r: f64) -> f64 {
    let s = sigma as f64;
    let a = PI / s;
    let c = a.cos();
    let area = s * a.tan() * (c - r).powi(2) / (4.0 * r * r);
    let perimeter = s * a.tan() * (c - r) / r;
    2.0 / 3f64.sqrt() * area + 0.5 * perimeter + 1.0
}

/// Container perimeter over the disk diameter, for convention II radius `r`.
pub fn nb_upper_at(sigma: u32, r: f64) -> f64 {
    let s = sigma as f64;
    s * (PI / s).sin() / r
}

/// Large-N form of the peripheral-count bound, `√(2√3 σ tan(π/σ) N)`.
pub fn nb_upper_asym(n: usize, sigma: u32) -> f64 {
    let s = sigma as f64;
    (2.0 * 3f64.sqrt() * s * (PI / s).tan() * n as f64).sqrt()
}

/// Evaluates every bound for `n` disks in the σ-gon.
pub fn bounds_report(n: usize, sigma: u32) -> Result<BoundsReport> {
    if sigma < 3 {
        return Err(Error::InvalidSigma(sigma));
    }
    if n < 2 {
        return Err(Error::InvalidInput("bounds need n >= 2".into()));
    }
    let s = sigma as f64;
    let r = r_upper(n, sigma);
    // container of unit circumradius measured with unit disk radius
    let area = 0.5 * s * (2.0 * PI / s).sin() / (r * r);
    let perimeter = 2.0 * s * (PI / s).sin() / r;
    let lhs = n as f64 * 12f64.sqrt();
    Ok(BoundsReport {
        fejes_toth_ok: lhs < area,
        groemer_margin: area - GROEMER_KAPPA * perimeter + GROEMER_LAMBDA - lhs,
        oler_max_disks: oler_rhs(sigma, r),
        r_upper: r,
        rho_upper: rho_upper(n, sigma),
        rho_upper_asym: rho_upper_asym(n, sigma),
        nb_upper: nb_upper_at(sigma, r),
        groemer_kappa: GROEMER_KAPPA,
        groemer_lambda: GROEMER_LAMBDA,
    })
}

/// One observation for [`fit_asymptotics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub n: usize,
    pub rho: f64,
    pub border_count: usize,
}

/// `ρ(N) = π/√12 + a1/√N + a2/N` and `N_B(N) = √N (b1 + b2/√N + b3/N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub rho_residual: f64,
    pub nb_residual: f64,
}

impl AsymptoticFit {
    pub fn rho(&self, n: f64) -> f64 {
        RHO_PLANE + self.a1 / n.sqrt() + self.a2 / n
    }

    pub fn border_count(&self, n: f64) -> f64 {
        n.sqrt() * (self.b1 + self.b2 / n.sqrt() + self.b3 / n)
    }
}

fn least_squares(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let cols = design.ncols();
    let svd = design.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    if svd.rank(tol) < cols {
        return Err(Error::RankDeficient {
            distinct: svd.rank(tol),
            coefficients: cols,
        });
    }
    let coef = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::Degenerate(format!("least squares: {e}")))?;
    let residual = (design * &coef - rhs).norm();
    Ok((coef, residual))
}

/// Least-squares fit of the large-N corrections. Needs at least five records
/// and at least three distinct N.
pub fn fit_asymptotics(records: &[FitRecord]) -> Result<AsymptoticFit> {
    if records.len() < 5 {
        return Err(Error::InvalidInput("fit needs at least five records".into()));
    }
    if records.iter().any(|r| r.n == 0) {
        return Err(Error::InvalidInput("fit records need n >= 1".into()));
    }
    let mut distinct: Vec<usize> = records.iter().map(|r| r.n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::RankDeficient {
            distinct: distinct.len(),
            coefficients: 3,
        });
    }
    let m = records.len();
    let inv_sqrt = |r: &FitRecord| 1.0 / (r.n as f64).sqrt();
    let rho_design = DMatrix::from_fn(m, 2, |i, j| {
        let x = inv_sqrt(&records[i]);
        if j == 0 {
            x
        } else {
            x * x
        }
    });
    let rho_rhs = DVector::from_iterator(m, records.iter().map(|r| r.rho - RHO_PLANE));
    let (a, rho_residual) = least_squares(rho_design, rho_rhs)?;

    let nb_design = DMatrix::from_fn(m, 3, |i, j| (records[i].n as f64).sqrt().powi(1 - j as i32));
    let nb_rhs = DVector::from_iterator(m, records.iter().map(|r| r.border_count as f64));
    let (b, nb_residual) = least_squares(nb_design, nb_rhs)?;

    Ok(AsymptoticFit {
        a1: a[0],
        a2: a[1],
        b1: b[0],
        b2: b[1],
        b3: b[2],
        rho_residual,
        nb_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect_oler(n: usize, sigma: u32) -> f64 {
        // oler_rhs decreases in r on (0, cos(π/σ))
        let (mut lo, mut hi) = (1e-9, (PI / sigma as f64).cos());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if oler_rhs(sigma, mid) > n as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn constants() {
        assert!((GROEMER_KAPPA - (2.0 - 3f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((GROEMER_LAMBDA - (12f64.sqrt() - PI * (3f64.sqrt() - 1.0))).abs() < 1e-14);
    }

    #[test]
    fn r_upper_solves_oler_equality() {
        for sigma in [3, 4, 5, 6, 9, 16] {
            for n in [2, 10, 57, 400] {
                let r = r_upper(n, sigma);
                assert!((r - bisect_oler(n, sigma)).abs() < 1e-12, "σ={sigma} n={n}");
                assert!((oler_rhs(sigma, r) - n as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn density_bound_is_density_at_r_upper() {
        for sigma in [3, 5, 8] {
            for n in [3, 30, 300] {
                let r = r_upper(n, sigma);
                let s = sigma as f64;
                let container = 0.5 * s * (2.0 * PI / s).sin();
                let rho = n as f64 * PI * r * r / container;
                assert!((rho - rho_upper(n, sigma)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triangular_lattices_reach_the_bound() {
        // 10 disks in the triangle and 7 in the hexagon are lattice packings
        assert!((rho_upper(10, 3) - 0.810_010_124_797_737).abs() < 1e-12);
        assert!((rho_upper(7, 6) - 0.850_510_631_037_624).abs() < 1e-12);
    }

    #[test]
    fn report_is_consistent() {
        let rep = bounds_report(25, 7).unwrap();
        assert!(rep.fejes_toth_ok);
        assert!(rep.groemer_margin >= 0.0);
        assert!((rep.oler_max_disks - 25.0).abs() < 1e-9);
        assert!(rep.rho_upper <= RHO_PLANE);
        assert!(bounds_report(1, 7).is_err());
    }

    #[test]
    fn peripheral_bound_asymptote() {
        let (n, sigma) = (1_000_000, 6);
        let ratio = nb_upper_at(sigma, r_upper(n, sigma)) / nb_upper_asym(n, sigma);
        assert!((ratio - 1.0).abs() < 1e-3);
    }

    #[test]
    fn noiseless_fit_is_recovered() {
        let truth = AsymptoticFit {
            a1: -0.5,
            a2: 0.1,
            b1: 3.0,
            b2: -1.5,
            b3: 0.25,
            rho_residual: 0.0,
            nb_residual: 0.0,
        };
        // integer border counts only fit exactly when generated from the model
        let records: Vec<FitRecord> = [9usize, 16, 25, 49, 100, 400]
            .iter()
            .map(|&n| FitRecord {
                n,
                rho: truth.rho(n as f64),
                border_count: 0,
            })
            .collect();
        let fit = fit_asymptotics(&records).unwrap();
        assert!((fit.a1 + 0.5).abs() < 1e-10);
        assert!((fit.a2 - 0.1).abs() < 1e-10);
    }

    #[test]
    fn too_few_distinct_n_is_rank_deficient() {
        let records: Vec<FitRecord> = [10usize, 10, 10, 20, 20]
            .iter()
            .map(|&n| FitRecord {
                n,
                rho: 0.8,
                border_count: 5,
            })
            .collect();
        assert!(matches!(fit_asymptotics(&records), Err(Error::RankDeficient { .. })));
    }
}
