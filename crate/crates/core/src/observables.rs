use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fock::{OccupationState, SectorBasis};
use crate::linalg::hermitian_eigen;
use crate::lindblad::{DensityMatrix, POSITIVITY_TOL};

/// Fidelity values at output times (units of `1/J`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl FidelityTrace {
    /// Mean fidelity over output times inside `[from, to]`; `None` if none fall inside.
    pub fn window_mean(&self, from: f64, to: f64) -> Option<f64> {
        let inside: Vec<f64> =
            self.times.iter().zip(&self.values).filter(|(t, _)| **t >= from - 1e-9 && **t <= to + 1e-9).map(|(_, f)| *f).collect();
        (!inside.is_empty()).then(|| inside.iter().sum::<f64>() / inside.len() as f64)
    }
}

/// Real diagonal of a density matrix in basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalProfile {
    basis: SectorBasis,
    values: Vec<f64>,
}

impl DiagonalProfile {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a 1-based basis index.
    pub fn at(&self, index: usize) -> Option<f64> {
        index.checked_sub(1).and_then(|k| self.values.get(k).copied())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// The `k` largest entries as (1-based index, value), largest first; ties go to the lower index.
    pub fn top(&self, k: usize) -> Vec<(usize, f64)> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        order.into_iter().take(k).map(|i| (i + 1, self.values[i])).collect()
    }

    /// `index,bitstring,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,bitstring,value")?;
        for (k, (s, v)) in self.basis.states().iter().zip(&self.values).enumerate() {
            writeln!(out, "{},{},{:.17e}", k + 1, s.bitstring(), v)?;
        }
        Ok(())
    }
}

fn check_pair(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(invalid(format!("fidelity between dimensions {} and {}", rho.dim(), sigma.dim())));
    }
    for (name, m) in [("first", rho), ("second", sigma)] {
        let report = m.report(true);
        if !report.is_valid() {
            return Err(invalid(format!("{name} argument is not a density matrix: {}", report.describe())));
        }
    }
    Ok(())
}

/// Square root of a PSD matrix; eigenvalues below `d·ε·λ_max` are treated as zero so that
/// rounding noise in the null space does not contribute `O(√ε)` terms.
fn sqrt_psd(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (w, v) = hermitian_eigen(m);
    let top = w.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let cutoff = top * f64::EPSILON * w.len() as f64;
    let mut scaled = v.clone();
    for (j, e) in w.iter().enumerate() {
        let root = if *e > cutoff { e.sqrt() } else { 0.0 };
        scaled.column_mut(j).scale_mut(root);
    }
    scaled * v.adjoint()
}

/// `tr √(√ρ σ √ρ)`, evaluated as the sum of singular values of `√ρ √σ`. Both arguments are
/// validated; eigenvalues within tolerance below zero are clamped inside the square roots.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_pair(rho, sigma)?;
    let product = sqrt_psd(rho.matrix()) * sqrt_psd(sigma.matrix());
    Ok(product.singular_values().iter().sum())
}

/// `√⟨ψ0|ρ|ψ0⟩` for a basis state `ψ0`.
pub fn pure_reference_fidelity(rho: &DensityMatrix, basis: &SectorBasis, psi0: &OccupationState) -> Result<f64> {
    if rho.dim() != basis.dim() {
        return Err(invalid(format!("density matrix of dimension {} for a basis of {}", rho.dim(), basis.dim())));
    }
    let k = basis.index_of(psi0)? - 1;
    Ok(rho.matrix()[(k, k)].re.max(0.0).sqrt())
}

pub fn diagonal_profile(rho: &DensityMatrix, basis: &SectorBasis) -> Result<DiagonalProfile> {
    if rho.dim() != basis.dim() {
        return Err(invalid(format!("density matrix of dimension {} for a basis of {}", rho.dim(), basis.dim())));
    }
    let values = rho.populations();
    if let Some(v) = values.iter().find(|v| **v < -POSITIVITY_TOL) {
        return Err(invalid(format!("negative population {v}")));
    }
    Ok(DiagonalProfile { basis: basis.clone(), values })
}

/// `⟨n_j⟩` for sites `1..=L`, in site order.
pub fn occupation_profile(rho: &DensityMatrix, basis: &SectorBasis) -> Result<Vec<f64>> {
    let profile = diagonal_profile(rho, basis)?;
    let mut n = vec![0.0; basis.sites()];
    for (s, p) in basis.states().iter().zip(profile.values()) {
        for (j, nj) in n.iter_mut().enumerate() {
            if s.is_occupied(j + 1) {
                *nj += p;
            }
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(p: &[f64]) -> DensityMatrix {
        DensityMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(p.len(), p.iter().map(|x| c(*x))))).unwrap()
    }

    #[test]
    fn bhattacharyya_limit() {
        let p = [0.5f64, 0.3, 0.2];
        let q = [0.1, 0.6, 0.3];
        let expect: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
        assert!((uhlmann_fidelity(&diag(&p), &diag(&q)).unwrap() - expect).abs() < 1e-12);
        assert!((uhlmann_fidelity(&diag(&p), &diag(&p)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_against_maximally_mixed() {
        let b = SectorBasis::enumerate(10, 5).unwrap();
        let z2 = OccupationState::from_bitstring("1010101010").unwrap();
        let psi = DensityMatrix::pure(&b, &z2).unwrap();
        let mixed = DensityMatrix::maximally_mixed(252);
        let f = uhlmann_fidelity(&mixed, &psi).unwrap();
        assert!((f - 1.0 / 252f64.sqrt()).abs() < 1e-10);
        assert!((pure_reference_fidelity(&mixed, &b, &z2).unwrap() - f).abs() < 1e-10);
    }

    #[test]
    fn half_mixture() {
        let b = SectorBasis::enumerate(4, 2).unwrap();
        let a = OccupationState::from_bitstring("1010").unwrap();
        let z = OccupationState::from_bitstring("0101").unwrap();
        let m = (DensityMatrix::pure(&b, &a).unwrap().into_matrix() + DensityMatrix::pure(&b, &z).unwrap().into_matrix()) * c(0.5);
        let rho = DensityMatrix::new(m).unwrap();
        assert!((pure_reference_fidelity(&rho, &b, &a).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(occupation_profile(&rho, &b).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn profiles() {
        let b = SectorBasis::enumerate(10, 5).unwrap();
        let z2 = OccupationState::from_bitstring("1010101010").unwrap();
        let prof = diagonal_profile(&DensityMatrix::pure(&b, &z2).unwrap(), &b).unwrap();
        assert_eq!(prof.top(1), vec![(176, 1.0)]);
        assert_eq!(prof.at(176), Some(1.0));
        assert_eq!(prof.at(0), None);
        let flat = diagonal_profile(&DensityMatrix::maximally_mixed(252), &b).unwrap();
        assert!(flat.values().iter().all(|v| (v - 1.0 / 252.0).abs() < 1e-15));
        assert_eq!(flat.top(3).iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        let occ = occupation_profile(&DensityMatrix::pure(&b, &z2).unwrap(), &b).unwrap();
        assert_eq!(occ, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn csv_export() {
        let b = SectorBasis::enumerate(2, 1).unwrap();
        let prof = diagonal_profile(&DensityMatrix::maximally_mixed(2), &b).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("index,bitstring,value"));
        assert!(text.lines().nth(2).unwrap().starts_with("2,10,5"));
    }

    #[test]
    fn window_mean() {
        let tr = FidelityTrace { times: vec![0.0, 1.0, 2.0, 3.0], values: vec![1.0, 0.5, 0.3, 0.1] };
        assert!((tr.window_mean(1.0, 2.0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(tr.window_mean(5.0, 6.0), None);
    }
}
