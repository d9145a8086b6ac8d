//! Z2 lattice gauge model: the per-sector composite-fermion Hamiltonian and the
//! full fermion ⊗ link-spin Hamiltonian used to cross-check it at small sizes.
//!
//! In a charge sector `{q_j}` the composite fermions `c_j = τ^x_j f_j` see
//!
//! ```text
//! H(q) = -J Σ_j (c†_j c_{j+1} + h.c.) + 2h Σ_j q_j (n_j - 1/2)
//! ```
//!
//! while the full model lives on fermions plus one spin-1/2 per link:
//!
//! ```text
//! H = -J Σ_j σ^z_{j,j+1} (f†_j f_{j+1} + h.c.) - h Σ_j σ^x_{j-1,j} σ^x_{j,j+1}
//! ```
//!
//! Links are numbered so that link `j` joins sites `j` and `j + 1`; with
//! periodic boundaries link `L` joins sites `L` and `1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fock::{build_quadratic_operator, QuadraticTerm, SectorBasis};
use crate::linalg::sorted_symmetric_eigenvalues;
use crate::sparse::SparseOperator;

/// Largest chain length for full-space operators.
pub const MAX_FULL_SPACE_SITES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            "open" | "obc" => Ok(Boundary::Open),
            other => Err(invalid(format!("unknown boundary condition {other:?}"))),
        }
    }
}

impl Boundary {
    /// Nearest-neighbour bonds as one-based site pairs.
    pub fn bonds(&self, sites: usize) -> Vec<(usize, usize)> {
        match self {
            Boundary::Periodic => (1..=sites).map(|j| (j, j % sites + 1)).collect(),
            Boundary::Open => (1..sites).map(|j| (j, j + 1)).collect(),
        }
    }

    pub fn link_count(&self, sites: usize) -> usize {
        match self {
            Boundary::Periodic => sites,
            Boundary::Open => sites.saturating_sub(1),
        }
    }
}

/// Hopping `J` and gauge-field coupling `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub hopping: f64,
    pub field: f64,
    pub boundary: Boundary,
}

impl ModelParams {
    pub fn new(hopping: f64, field: f64, boundary: Boundary) -> Result<Self> {
        let p = Self { hopping, field, boundary };
        p.validate()?;
        Ok(p)
    }

    /// `J = 1`, periodic.
    pub fn with_field(field: f64) -> Result<Self> {
        Self::new(1.0, field, Boundary::Periodic)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hopping > 0.0) || !self.hopping.is_finite() {
            return Err(invalid(format!("hopping J must be positive, got {}", self.hopping)));
        }
        if !(self.field >= 0.0) || !self.field.is_finite() {
            return Err(invalid(format!("field h must be non-negative, got {}", self.field)));
        }
        Ok(())
    }
}

/// Eigenvalues `q_j = ±1` of the conserved charges: one gauge sector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChargeConfig(Vec<i8>);

impl ChargeConfig {
    pub fn new(charges: Vec<i8>) -> Result<Self> {
        if charges.is_empty() {
            return Err(invalid("charge configuration is empty"));
        }
        if let Some(bad) = charges.iter().find(|&&q| q != 1 && q != -1) {
            return Err(invalid(format!("charge {bad} is not ±1")));
        }
        Ok(Self(charges))
    }

    pub fn uniform(sites: usize) -> Self {
        Self(vec![1; sites])
    }

    pub fn charges(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Π_j q_j`
    pub fn product(&self) -> i8 {
        self.0.iter().product()
    }

    /// Moves the charge on site `j` to site `j + shift` (mod L).
    pub fn translate(&self, shift: usize) -> Self {
        let l = self.0.len();
        let mut out = vec![0; l];
        for (j, &q) in self.0.iter().enumerate() {
            out[(j + shift) % l] = q;
        }
        Self(out)
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|q| -q).collect())
    }
}

impl fmt::Debug for ChargeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChargeConfig({self})")
    }
}

impl fmt::Display for ChargeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in &self.0 {
            f.write_str(if *q > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for ChargeConfig {
    type Err = Error;
    /// Accepts `+-+-` or a comma separated list such as `1,-1,1,-1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let charges = if s.contains(',') {
            s.split(',').map(|t| t.trim().parse::<i8>().map_err(|_| invalid(format!("bad charge {t:?}")))).collect::<Result<Vec<_>>>()?
        } else {
            s.chars()
                .map(|c| match c {
                    '+' => Ok(1),
                    '-' => Ok(-1),
                    other => Err(invalid(format!("bad charge symbol {other:?}"))),
                })
                .collect::<Result<Vec<_>>>()?
        };
        Self::new(charges)
    }
}

fn check_ring(sites: usize, boundary: Boundary) -> Result<()> {
    if boundary == Boundary::Periodic && sites <= 2 {
        return Err(invalid(format!("periodic boundaries need at least 3 sites, got {sites}")));
    }
    Ok(())
}

/// Composite-fermion Hamiltonian of one charge sector.
pub fn build_sector_hamiltonian(basis: &SectorBasis, charges: &ChargeConfig, params: &ModelParams) -> Result<SparseOperator> {
    params.validate()?;
    let l = basis.sites();
    if charges.len() != l {
        return Err(invalid(format!("{} charges for {l} sites", charges.len())));
    }
    check_ring(l, params.boundary)?;
    let mut terms = Vec::new();
    for (j, k) in params.boundary.bonds(l) {
        terms.push(QuadraticTerm::new(-params.hopping, j, k));
        terms.push(QuadraticTerm::new(-params.hopping, k, j));
    }
    let hop = build_quadratic_operator(basis, &terms)?;
    let potential: Vec<Complex64> = basis
        .states()
        .iter()
        .map(|s| {
            let e: f64 =
                charges.charges().iter().enumerate().map(|(j, &q)| q as f64 * (if s.is_occupied(j + 1) { 0.5 } else { -0.5 })).sum();
            Complex64::new(2.0 * params.field * e, 0.0)
        })
        .collect();
    Ok(hop.add(&SparseOperator::diagonal(&potential)))
}

/// Tensor-product space (fermion sector basis) ⊗ (link spins in the σ^z basis).
///
/// Index `f · 2^links + m`, where bit `links - k` of `m` is set when link `k`
/// has `σ^z = -1`.
#[derive(Clone, Debug)]
pub struct FullSpace {
    basis: SectorBasis,
    links: usize,
    boundary: Boundary,
}

/// Operator on a [`FullSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct FullSpaceOperator {
    pub sites: usize,
    pub particles: usize,
    pub links: usize,
    pub op: SparseOperator,
}

impl FullSpaceOperator {
    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

impl FullSpace {
    pub fn new(sites: usize, particles: usize, boundary: Boundary) -> Result<Self> {
        if sites > MAX_FULL_SPACE_SITES {
            return Err(Error::Capacity(format!("full gauge-field space limited to {MAX_FULL_SPACE_SITES} sites, got {sites}")));
        }
        check_ring(sites, boundary)?;
        let basis = SectorBasis::enumerate(sites, particles)?;
        Ok(Self { basis, links: boundary.link_count(sites), boundary })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim() << self.links
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn links(&self) -> usize {
        self.links
    }

    fn link_mask(&self, link: usize) -> usize {
        1 << (self.links - link)
    }

    fn wrap(&self, op: SparseOperator) -> FullSpaceOperator {
        FullSpaceOperator { sites: self.basis.sites(), particles: self.basis.particles(), links: self.links, op }
    }

    fn link_before(&self, site: usize) -> Option<usize> {
        match (site, self.boundary) {
            (1, Boundary::Periodic) => Some(self.basis.sites()),
            (1, Boundary::Open) => None,
            (j, _) => Some(j - 1),
        }
    }

    fn link_after(&self, site: usize) -> Option<usize> {
        match self.boundary {
            Boundary::Periodic => Some(site),
            Boundary::Open if site < self.basis.sites() => Some(site),
            Boundary::Open => None,
        }
    }

    fn sz(&self, m: usize, link: usize) -> f64 {
        if m & self.link_mask(link) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn hamiltonian(&self, params: &ModelParams) -> Result<FullSpaceOperator> {
        params.validate()?;
        if params.boundary != self.boundary {
            return Err(invalid("model boundary differs from the full-space boundary"));
        }
        let nl = 1usize << self.links;
        let mut triplets = Vec::new();
        for (link, (j, k)) in self.boundary.bonds(self.basis.sites()).into_iter().enumerate() {
            let link = link + 1;
            let hop = build_quadratic_operator(
                &self.basis,
                &[QuadraticTerm::new(-params.hopping, j, k), QuadraticTerm::new(-params.hopping, k, j)],
            )?;
            for (fr, fc, v) in hop.iter() {
                for m in 0..nl {
                    triplets.push((fr * nl + m, fc * nl + m, v * self.sz(m, link)));
                }
            }
        }
        if params.field != 0.0 {
            for site in 1..=self.basis.sites() {
                let (Some(a), Some(b)) = (self.link_before(site), self.link_after(site)) else { continue };
                let flip = self.link_mask(a) | self.link_mask(b);
                for f in 0..self.basis.dim() {
                    for m in 0..nl {
                        triplets.push((f * nl + (m ^ flip), f * nl + m, Complex64::new(-params.field, 0.0)));
                    }
                }
            }
        }
        Ok(self.wrap(SparseOperator::from_triplets(self.dim(), triplets)))
    }

    /// `q̂_j = (-1)^{n_j} σ^x_{j-1,j} σ^x_{j,j+1}`.
    pub fn charge(&self, site: usize) -> Result<FullSpaceOperator> {
        let l = self.basis.sites();
        if site == 0 || site > l {
            return Err(invalid(format!("site {site} outside 1..={l}")));
        }
        let (Some(a), Some(b)) = (self.link_before(site), self.link_after(site)) else {
            return Err(Error::Unsupported(format!("charge at edge site {site} with open boundaries")));
        };
        let flip = self.link_mask(a) | self.link_mask(b);
        let nl = 1usize << self.links;
        let mut triplets = Vec::with_capacity(self.dim());
        for (f, s) in self.basis.states().iter().enumerate() {
            let sign = if s.is_occupied(site) { -1.0 } else { 1.0 };
            for m in 0..nl {
                triplets.push((f * nl + (m ^ flip), f * nl + m, Complex64::new(sign, 0.0)));
            }
        }
        Ok(self.wrap(SparseOperator::from_triplets(self.dim(), triplets)))
    }

    /// Wilson loop `W = Π_links σ^z` around the ring.
    pub fn wilson_loop(&self) -> Result<FullSpaceOperator> {
        if self.boundary != Boundary::Periodic {
            return Err(Error::Unsupported("Wilson loop needs periodic boundaries".into()));
        }
        let nl = 1usize << self.links;
        let diag: Vec<Complex64> = (0..self.dim())
            .map(|i| {
                let parity = (i % nl).count_ones() % 2;
                Complex64::new(if parity == 0 { 1.0 } else { -1.0 }, 0.0)
            })
            .collect();
        Ok(self.wrap(SparseOperator::diagonal(&diag)))
    }

    /// Orthonormal basis (columns) of `{q̂_j = q_j for all j} ∩ {W = flux}`.
    pub fn sector_projection(&self, charges: &ChargeConfig, flux: i8) -> Result<DMatrix<f64>> {
        if charges.len() != self.basis.sites() {
            return Err(invalid(format!("{} charges for {} sites", charges.len(), self.basis.sites())));
        }
        let projectors: Vec<SparseOperator> = charges
            .charges()
            .iter()
            .enumerate()
            .map(|(j, &q)| {
                let qh = self.charge(j + 1)?.op;
                Ok(SparseOperator::identity(self.dim()).add(&qh.scale(Complex64::new(q as f64, 0.0))).scale(Complex64::new(0.5, 0.0)))
            })
            .collect::<Result<_>>()?;
        let w = self.wilson_loop()?.op;
        let w_proj = SparseOperator::identity(self.dim()).add(&w.scale(Complex64::new(flux as f64, 0.0))).scale(Complex64::new(0.5, 0.0));

        let n = self.dim();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            v.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            v[k] = Complex64::new(1.0, 0.0);
            for p in projectors.iter().chain(std::iter::once(&w_proj)) {
                p.mul_vec(&v, &mut tmp);
                std::mem::swap(&mut v, &mut tmp);
            }
            // the projected vector lives on the orbit of e_k under the charge
            // group; keep one vector per orbit (the one seeded by its lowest index)
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            let first = v.iter().position(|x| x.norm() > 1e-12).unwrap();
            if first != k {
                continue;
            }
            columns.push(v.iter().map(|x| x.re / norm).collect());
        }
        Ok(DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]))
    }
}

/// Full Hamiltonian on (fermions) ⊗ (links).
pub fn build_full_hamiltonian(sites: usize, particles: usize, params: &ModelParams) -> Result<FullSpaceOperator> {
    FullSpace::new(sites, particles, params.boundary)?.hamiltonian(params)
}

/// Charge operator `q̂_site` on the full space.
pub fn charge_operator(sites: usize, particles: usize, site: usize, boundary: Boundary) -> Result<FullSpaceOperator> {
    FullSpace::new(sites, particles, boundary)?.charge(site)
}

/// `max |U H U† - H|` for the gauge transformation `U = Π_j q̂_j^{(1-θ_j)/2}`.
pub fn gauge_transform_check(sites: usize, particles: usize, theta: &[i8], params: &ModelParams) -> Result<f64> {
    if theta.len() != sites {
        return Err(invalid(format!("{} angles for {sites} sites", theta.len())));
    }
    if theta.iter().any(|&t| t != 1 && t != -1) {
        return Err(invalid("gauge parameters must be ±1"));
    }
    let space = FullSpace::new(sites, particles, params.boundary)?;
    let h = space.hamiltonian(params)?.op;
    let mut u = SparseOperator::identity(space.dim());
    for (j, &t) in theta.iter().enumerate() {
        if t == -1 {
            u = u.matmul(&space.charge(j + 1)?.op);
        }
    }
    Ok(u.matmul(&h).matmul(&u.adjoint()).sub(&h).max_abs())
}

/// Result of comparing the projected full-model spectrum with the sector Hamiltonian.
#[derive(Clone, Debug)]
pub struct DualityReport {
    pub projected_dim: usize,
    pub sector_dim: usize,
    pub max_mismatch: f64,
}

/// Diagonalizes the full Hamiltonian inside the sector `{q̂_j = q_j}` (with
/// trivial Wilson loop) and compares its sorted spectrum with the composite
/// fermion Hamiltonian of the same sector.
pub fn duality_spectrum_check(sites: usize, particles: usize, charges: &ChargeConfig, params: &ModelParams) -> Result<DualityReport> {
    if params.boundary != Boundary::Periodic {
        return Err(Error::Unsupported("duality check needs periodic boundaries".into()));
    }
    let space = FullSpace::new(sites, particles, params.boundary)?;
    let expected = if particles.is_multiple_of(2) { 1 } else { -1 };
    let b = space.sector_projection(charges, 1)?;
    if b.ncols() == 0 || charges.product() != expected {
        return Err(Error::UnphysicalSector(format!(
            "Π q_j = {} but a ring with {particles} particles requires {expected}",
            charges.product()
        )));
    }
    let h = space.hamiltonian(params)?.op.to_dense_real();
    let projected = b.transpose() * h * &b;
    let full = sorted_symmetric_eigenvalues(projected);
    let sector_h = build_sector_hamiltonian(space.basis(), charges, params)?.to_dense_real();
    let reduced = sorted_symmetric_eigenvalues(sector_h);
    let max_mismatch =
        if full.len() == reduced.len() { full.iter().zip(&reduced).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) } else { f64::INFINITY };
    Ok(DualityReport { projected_dim: full.len(), sector_dim: reduced.len(), max_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(m: &SparseOperator) -> DMatrix<f64> {
        m.to_dense_real()
    }

    #[test]
    fn two_site_open_sector_hamiltonians() {
        let b = SectorBasis::enumerate(2, 1).unwrap();
        let p = ModelParams::new(1.0, 0.7, Boundary::Open).unwrap();
        let h = re(&build_sector_hamiltonian(&b, &"++".parse().unwrap(), &p).unwrap());
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let h = re(&build_sector_hamiltonian(&b, &"+-".parse().unwrap(), &p).unwrap());
        let two_h = 2.0 * 0.7;
        assert!((h - DMatrix::from_row_slice(2, 2, &[-two_h, -1.0, -1.0, two_h])).abs().max() < 1e-15);
    }

    #[test]
    fn zero_field_removes_charge_dependence() {
        let b = SectorBasis::enumerate(5, 2).unwrap();
        let p = ModelParams::with_field(0.0).unwrap();
        let h0 = build_sector_hamiltonian(&b, &ChargeConfig::uniform(5), &p).unwrap();
        let h1 = build_sector_hamiltonian(&b, &"+--+-".parse().unwrap(), &p).unwrap();
        assert_eq!(h0, h1);
    }

    #[test]
    fn sector_hamiltonian_rejects_bad_input() {
        let b = SectorBasis::enumerate(2, 1).unwrap();
        let periodic = ModelParams::with_field(0.5).unwrap();
        assert!(build_sector_hamiltonian(&b, &"++".parse().unwrap(), &periodic).is_err());
        let b = SectorBasis::enumerate(4, 2).unwrap();
        assert!(build_sector_hamiltonian(&b, &"+++".parse().unwrap(), &periodic).is_err());
        assert!(ModelParams::new(0.0, 0.5, Boundary::Open).is_err());
        assert!(ModelParams::new(1.0, -0.1, Boundary::Open).is_err());
        assert!(ChargeConfig::new(vec![1, 0, -1]).is_err());
    }

    #[test]
    fn charge_parsing_and_display() {
        let q: ChargeConfig = "+-+".parse().unwrap();
        assert_eq!(q.charges(), &[1, -1, 1]);
        assert_eq!("1,-1,1".parse::<ChargeConfig>().unwrap(), q);
        assert_eq!(q.to_string(), "+-+");
        assert_eq!(q.translate(1).to_string(), "++-");
        assert_eq!(q.product(), -1);
    }

    #[test]
    fn full_hamiltonian_is_hermitian_and_vanishes_without_couplings() {
        let p = ModelParams::with_field(0.5).unwrap();
        let h = build_full_hamiltonian(4, 2, &p).unwrap();
        assert_eq!(h.dim(), 6 * 16);
        assert!(h.op.is_hermitian());
        let open = ModelParams::new(1.0, 0.5, Boundary::Open).unwrap();
        let h = build_full_hamiltonian(4, 2, &open).unwrap();
        assert_eq!(h.links, 3);
        assert!(h.op.is_hermitian());
        assert!(matches!(build_full_hamiltonian(9, 2, &p), Err(Error::Capacity(_))));
    }

    #[test]
    fn charges_are_involutions_with_balanced_spectrum() {
        let space = FullSpace::new(4, 2, Boundary::Periodic).unwrap();
        let id = SparseOperator::identity(space.dim());
        for j in 1..=4 {
            let q = space.charge(j).unwrap().op;
            assert!(q.is_hermitian());
            assert_eq!(q.matmul(&q), id);
            let ev = sorted_symmetric_eigenvalues(q.to_dense_real());
            let minus = ev.iter().filter(|&&e| (e + 1.0).abs() < 1e-10).count();
            let plus = ev.iter().filter(|&&e| (e - 1.0).abs() < 1e-10).count();
            assert_eq!((minus, plus), (48, 48));
        }
    }

    #[test]
    fn product_of_charges_is_particle_parity() {
        for nf in 0..=4 {
            let space = FullSpace::new(4, nf, Boundary::Periodic).unwrap();
            let mut prod = SparseOperator::identity(space.dim());
            for j in 1..=4 {
                prod = prod.matmul(&space.charge(j).unwrap().op);
            }
            let sign = if nf % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(prod, SparseOperator::identity(space.dim()).scale(Complex64::new(sign, 0.0)));
        }
    }

    #[test]
    fn open_edges_have_no_charge() {
        let space = FullSpace::new(4, 2, Boundary::Open).unwrap();
        assert!(matches!(space.charge(1), Err(Error::Unsupported(_))));
        assert!(matches!(space.charge(4), Err(Error::Unsupported(_))));
        assert!(space.charge(2).is_ok());
    }

    #[test]
    fn trivial_gauge_transform() {
        let p = ModelParams::with_field(0.5).unwrap();
        assert_eq!(gauge_transform_check(4, 2, &[1, 1, 1, 1], &p).unwrap(), 0.0);
        assert!(gauge_transform_check(4, 2, &[-1, 1, 1, 1], &p).unwrap() < 1e-12);
    }

    #[test]
    fn duality_small_ring() {
        let p = ModelParams::with_field(0.5).unwrap();
        let r = duality_spectrum_check(4, 2, &"++++".parse().unwrap(), &p).unwrap();
        assert_eq!(r.projected_dim, 6);
        assert!(r.max_mismatch < 1e-10, "{r:?}");
        let r = duality_spectrum_check(4, 2, &"++--".parse().unwrap(), &p).unwrap();
        assert_eq!(r.projected_dim, 6);
        assert!(r.max_mismatch < 1e-10, "{r:?}");
        assert!(matches!(duality_spectrum_check(4, 2, &"+++-".parse().unwrap(), &p), Err(Error::UnphysicalSector(_))));
    }
}
