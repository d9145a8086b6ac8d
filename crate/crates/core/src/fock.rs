//! Fixed-filling occupation bases for spinless fermions on a chain.
//!
//! Sites are numbered `1..=L` from the left. An occupation pattern is stored as
//! an `L`-bit integer with site 1 as the most significant bit, so sorting by
//! the integer value reproduces the report-facing ordering: `|0000011111⟩` is
//! state #1 of the ten-site, five-particle basis.
//!
//! Fermionic operators use the Jordan-Wigner sign `(-1)^(occupied sites left of j)`.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::sparse::SparseOperator;

/// Largest chain length accepted by [`SectorBasis::enumerate`].
pub const MAX_SITES: usize = 24;

/// One occupation pattern `|n_1 n_2 … n_L⟩`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationState {
    bits: u64,
    sites: usize,
}

impl OccupationState {
    pub fn new(bits: u64, sites: usize) -> Result<Self> {
        if sites == 0 || sites > 63 {
            return Err(invalid(format!("site count {sites} outside 1..=63")));
        }
        if bits >> sites != 0 {
            return Err(invalid(format!("value {bits} does not fit in {sites} sites")));
        }
        Ok(Self { bits, sites })
    }

    /// Parses a pattern such as `"1010101010"`; the first character is site 1.
    pub fn from_bitstring(pattern: &str) -> Result<Self> {
        let pattern = pattern.trim();
        let mut bits = 0u64;
        for ch in pattern.chars() {
            bits <<= 1;
            match ch {
                '0' => {}
                '1' => bits |= 1,
                other => return Err(invalid(format!("unexpected character {other:?} in occupation pattern"))),
            }
        }
        Self::new(bits, pattern.chars().count())
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Binary value with site 1 as the most significant bit.
    pub fn value(&self) -> u64 {
        self.bits
    }

    pub fn particles(&self) -> usize {
        self.bits.count_ones() as usize
    }

    fn mask(&self, site: usize) -> u64 {
        1u64 << (self.sites - site)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.sites {
            return Err(invalid(format!("site {site} outside 1..={}", self.sites)));
        }
        Ok(())
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        site >= 1 && site <= self.sites && self.bits & self.mask(site) != 0
    }

    /// Number of occupied sites with index strictly below `site`.
    fn occupied_left_of(&self, site: usize) -> u32 {
        (self.bits >> (self.sites - site + 1)).count_ones()
    }

    fn jw_sign(&self, site: usize) -> f64 {
        if self.occupied_left_of(site).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// `c_j |s⟩`, or `None` when site `j` is empty.
    pub fn annihilate(&self, site: usize) -> Result<Option<(f64, Self)>> {
        self.check_site(site)?;
        if !self.is_occupied(site) {
            return Ok(None);
        }
        let sign = self.jw_sign(site);
        Ok(Some((sign, Self { bits: self.bits & !self.mask(site), sites: self.sites })))
    }

    /// `c†_j |s⟩`, or `None` when site `j` is already occupied.
    pub fn create(&self, site: usize) -> Result<Option<(f64, Self)>> {
        self.check_site(site)?;
        if self.is_occupied(site) {
            return Ok(None);
        }
        let sign = self.jw_sign(site);
        Ok(Some((sign, Self { bits: self.bits | self.mask(site), sites: self.sites })))
    }

    /// Cyclic translation moving the occupation of site `j` to site `j + shift` (mod L).
    pub fn translate(&self, shift: usize) -> Self {
        let l = self.sites;
        let s = shift % l;
        if s == 0 {
            return *self;
        }
        let all = if l == 64 { u64::MAX } else { (1u64 << l) - 1 };
        let bits = ((self.bits >> s) | (self.bits << (l - s))) & all;
        Self { bits, sites: l }
    }

    /// Occupation of every site, site 1 first.
    pub fn occupations(&self) -> Vec<u8> {
        (1..=self.sites).map(|j| self.is_occupied(j) as u8).collect()
    }

    pub fn bitstring(&self) -> String {
        format!("{:0width$b}", self.bits, width = self.sites)
    }
}

impl fmt::Debug for OccupationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.bitstring())
    }
}

impl fmt::Display for OccupationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bitstring())
    }
}

/// All occupation patterns with `particles` fermions on `sites` sites, in ascending binary order.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBasis {
    sites: usize,
    particles: usize,
    states: Vec<OccupationState>,
    lookup: HashMap<u64, usize>,
}

impl SectorBasis {
    pub fn enumerate(sites: usize, particles: usize) -> Result<Self> {
        if sites == 0 {
            return Err(invalid("site count must be positive"));
        }
        if sites > MAX_SITES {
            return Err(Error::Capacity(format!("{sites} sites exceeds the basis cap of {MAX_SITES}")));
        }
        if particles > sites {
            return Err(invalid(format!("{particles} particles do not fit on {sites} sites")));
        }
        let mut states = Vec::new();
        let limit = 1u64 << sites;
        let mut v: u64 = (1u64 << particles) - 1;
        loop {
            states.push(OccupationState { bits: v, sites });
            if v == 0 {
                break;
            }
            // next integer with the same popcount (Gosper)
            let t = v | (v - 1);
            let next = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
            if next >= limit {
                break;
            }
            v = next;
        }
        let lookup = states.iter().enumerate().map(|(i, s)| (s.bits, i)).collect();
        Ok(Self { sites, particles, states, lookup })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    /// Zero-based storage position, if the state belongs to this basis.
    pub fn position(&self, state: &OccupationState) -> Option<usize> {
        if state.sites != self.sites {
            return None;
        }
        self.lookup.get(&state.bits).copied()
    }

    /// One-based report index of `state`.
    pub fn index_of(&self, state: &OccupationState) -> Result<usize> {
        if state.sites != self.sites {
            return Err(invalid(format!("state {state} has {} sites, basis has {}", state.sites, self.sites)));
        }
        if state.particles() != self.particles {
            return Err(invalid(format!("state {state} has {} particles, basis has {}", state.particles(), self.particles)));
        }
        Ok(self.lookup[&state.bits] + 1)
    }

    /// State with one-based report index `index`.
    pub fn state(&self, index: usize) -> Result<OccupationState> {
        if index == 0 || index > self.dim() {
            return Err(invalid(format!("index {index} outside 1..={}", self.dim())));
        }
        Ok(self.states[index - 1])
    }

    /// Writes `index,bitstring` rows.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, s) in self.states.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, s)?;
        }
        Ok(())
    }
}

/// `coeff · c†_create c_annihilate`, sites one-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticTerm {
    pub coeff: Complex64,
    pub create: usize,
    pub annihilate: usize,
}

impl QuadraticTerm {
    pub fn new(coeff: impl Into<Complex64>, create: usize, annihilate: usize) -> Self {
        Self { coeff: coeff.into(), create, annihilate }
    }

    pub fn number(coeff: impl Into<Complex64>, site: usize) -> Self {
        Self::new(coeff, site, site)
    }
}

/// Assembles `Σ coeff · c†_a c_b` on a fixed-filling basis.
pub fn build_quadratic_operator(basis: &SectorBasis, terms: &[QuadraticTerm]) -> Result<SparseOperator> {
    let l = basis.sites();
    for t in terms {
        for site in [t.create, t.annihilate] {
            if site == 0 || site > l {
                return Err(invalid(format!("site {site} outside 1..={l}")));
            }
        }
    }
    let mut triplets = Vec::new();
    for (col, s) in basis.states().iter().enumerate() {
        for t in terms {
            if t.coeff == Complex64::new(0.0, 0.0) {
                continue;
            }
            let Some((s1, mid)) = s.annihilate(t.annihilate)? else { continue };
            let Some((s2, out)) = mid.create(t.create)? else { continue };
            let row = basis.lookup[&out.bits];
            triplets.push((row, col, t.coeff * (s1 * s2)));
        }
    }
    Ok(SparseOperator::from_triplets(basis.dim(), triplets))
}

/// `n_j` on the basis.
pub fn number_operator(basis: &SectorBasis, site: usize) -> Result<SparseOperator> {
    build_quadratic_operator(basis, &[QuadraticTerm::number(1.0, site)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(p: &str) -> OccupationState {
        OccupationState::from_bitstring(p).unwrap()
    }

    fn binomial(n: usize, k: usize) -> usize {
        // counts subsets directly rather than via the multiplicative formula
        (0u64..(1 << n)).filter(|m| m.count_ones() as usize == k).count()
    }

    #[test]
    fn ten_site_half_filling_indices() {
        let b = SectorBasis::enumerate(10, 5).unwrap();
        assert_eq!(b.dim(), 252);
        assert_eq!(b.state(1).unwrap(), occ("0000011111"));
        assert_eq!(b.state(2).unwrap(), occ("0000101111"));
        assert_eq!(b.state(252).unwrap(), occ("1111100000"));
        assert_eq!(b.index_of(&occ("1010101010")).unwrap(), 176);
        assert_eq!(b.index_of(&occ("0101010101")).unwrap(), 77);
        assert_eq!(b.index_of(&occ("0000011111")).unwrap(), 1);
    }

    #[test]
    fn small_bases() {
        let b = SectorBasis::enumerate(2, 1).unwrap();
        assert_eq!(b.states(), &[occ("01"), occ("10")]);
        assert_eq!(b.index_of(&occ("10")).unwrap(), 2);
        assert_eq!(SectorBasis::enumerate(12, 4).unwrap().dim(), binomial(12, 4));
        assert_eq!(SectorBasis::enumerate(5, 0).unwrap().dim(), 1);
        assert_eq!(SectorBasis::enumerate(5, 5).unwrap().dim(), 1);
    }

    #[test]
    fn basis_invariants() {
        for l in 1..=12 {
            for n in 0..=l {
                let b = SectorBasis::enumerate(l, n).unwrap();
                assert_eq!(b.dim(), binomial(l, n));
                assert!(b.states().windows(2).all(|w| w[0].value() < w[1].value()));
                for (k, s) in b.states().iter().enumerate() {
                    assert_eq!(s.particles(), n);
                    assert_eq!(b.index_of(s).unwrap(), k + 1);
                    assert_eq!(b.state(k + 1).unwrap(), *s);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(SectorBasis::enumerate(4, 5).is_err());
        assert!(SectorBasis::enumerate(0, 0).is_err());
        assert!(matches!(SectorBasis::enumerate(MAX_SITES + 1, 2), Err(Error::Capacity(_))));
        let b = SectorBasis::enumerate(4, 2).unwrap();
        assert!(b.index_of(&occ("1110")).is_err());
        assert!(b.index_of(&occ("10100")).is_err());
        assert!(b.state(0).is_err());
        assert!(b.state(7).is_err());
        assert!(OccupationState::from_bitstring("10a1").is_err());
    }

    #[test]
    fn annihilation_signs() {
        let s = occ("1010");
        assert_eq!(s.annihilate(1).unwrap(), Some((1.0, occ("0010"))));
        assert_eq!(s.annihilate(3).unwrap(), Some((-1.0, occ("1000"))));
        assert_eq!(s.annihilate(2).unwrap(), None);
        assert_eq!(s.create(2).unwrap(), Some((-1.0, occ("1110"))));
        assert_eq!(s.create(4).unwrap(), Some((1.0, occ("1011"))));
        assert!(s.annihilate(5).is_err());
        assert!(s.create(0).is_err());
    }

    #[test]
    fn translation_is_cyclic() {
        assert_eq!(occ("1010101010").translate(1), occ("0101010101"));
        assert_eq!(occ("100100100100").translate(2), occ("001001001001"));
        assert_eq!(occ("1101").translate(4), occ("1101"));
    }

    #[test]
    fn total_number_is_filling_times_identity() {
        let b = SectorBasis::enumerate(6, 2).unwrap();
        let terms: Vec<_> = (1..=6).map(|j| QuadraticTerm::number(1.0, j)).collect();
        let n = build_quadratic_operator(&b, &terms).unwrap();
        assert_eq!(n, SparseOperator::identity(b.dim()).scale(Complex64::new(2.0, 0.0)));
    }

    #[test]
    fn two_site_operators() {
        let b = SectorBasis::enumerate(2, 1).unwrap();
        let diff = build_quadratic_operator(&b, &[QuadraticTerm::number(1.0, 1), QuadraticTerm::number(-1.0, 2)]).unwrap().to_dense();
        assert_eq!(diff[(0, 0)].re, -1.0);
        assert_eq!(diff[(1, 1)].re, 1.0);
        assert_eq!(diff[(0, 1)].norm(), 0.0);

        // (c†_1 + c†_2)(c_1 - c_2) = n_1 - c†_1 c_2 + c†_2 c_1 - n_2
        let o = build_quadratic_operator(
            &b,
            &[QuadraticTerm::number(1.0, 1), QuadraticTerm::new(-1.0, 1, 2), QuadraticTerm::new(1.0, 2, 1), QuadraticTerm::number(-1.0, 2)],
        )
        .unwrap()
        .to_dense();
        // column k holds O|state k⟩; basis order {|01⟩, |10⟩}
        assert_eq!([o[(0, 0)].re, o[(1, 0)].re], [-1.0, -1.0]);
        assert_eq!([o[(0, 1)].re, o[(1, 1)].re], [1.0, 1.0]);
    }

    #[test]
    fn rejects_out_of_range_terms() {
        let b = SectorBasis::enumerate(3, 1).unwrap();
        assert!(build_quadratic_operator(&b, &[QuadraticTerm::new(1.0, 4, 1)]).is_err());
    }

    #[test]
    fn dump_format() {
        let b = SectorBasis::enumerate(3, 1).unwrap();
        let mut buf = Vec::new();
        b.write_dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,001\n2,010\n3,100\n");
    }
}
