//! Hamiltonians as matrix-free spin operators and as dense matrices.
//!
//! Basis index bit `i` holds site `i`; bit value 1 is the Rydberg state, so
//! Z_i = +1 on bit 0 and −1 on bit 1.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::lattice::{vdw_strength, AtomRegister, InteractionRange, TfiParams};
use crate::pulse::PulseProgram;

/// Largest chain for which dense 2^L × 2^L matrices are built unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 14;

/// Largest chain held as a state vector.
pub const MAX_STATE_SITES: usize = 30;

pub(crate) const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[inline]
pub fn occupation(basis: usize, site: usize) -> f64 {
    ((basis >> site) & 1) as f64
}

/// Eigenvalue of Z_site on a basis state.
#[inline]
pub fn z_value(basis: usize, site: usize) -> f64 {
    1.0 - 2.0 * occupation(basis, site)
}

pub(crate) fn check_dense(sites: usize, cap: usize) -> Result<()> {
    if sites > cap {
        Err(Error::Capacity { sites, cap })
    } else {
        Ok(())
    }
}

/// H = diag(d) + Σ_i (f_i σ⁺_i + f_i* σ⁻_i), with σ⁺ = |1⟩⟨0|.
///
/// Covers every Hamiltonian of the simulator: Z and ZZ terms live on the
/// diagonal and the X/Y drive on site `i` has ⟨1|H|0⟩ = f_i.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperator {
    sites: usize,
    diag: Vec<f64>,
    flip: Vec<Complex64>,
}

impl SpinOperator {
    pub fn new(sites: usize, diag: Vec<f64>, flip: Vec<Complex64>) -> Result<Self> {
        if sites > MAX_STATE_SITES {
            return Err(Error::Capacity { sites, cap: MAX_STATE_SITES });
        }
        if diag.len() != 1 << sites || flip.len() != sites {
            return invalid("operator diagonal or flip table has the wrong length");
        }
        Ok(Self { sites, diag, flip })
    }

    pub fn zero(sites: usize) -> Self {
        Self { sites, diag: vec![0.0; 1 << sites], flip: vec![C0; sites] }
    }

    /// Ising chain J(Σ Z_i Z_{i+1} + g Σ X_i).
    pub fn tfi(params: &TfiParams) -> Result<Self> {
        params.validate()?;
        let l = params.sites;
        if l > MAX_STATE_SITES {
            return Err(Error::Capacity { sites: l, cap: MAX_STATE_SITES });
        }
        let diag = (0..1usize << l)
            .map(|b| params.j * (0..l - 1).map(|i| z_value(b, i) * z_value(b, i + 1)).sum::<f64>())
            .collect();
        let flip = vec![Complex64::new(params.j * params.g, 0.0); l];
        Ok(Self { sites: l, diag, flip })
    }

    /// Σ_i c_i Z_i.
    pub fn z_sum(coefficients: &[f64]) -> Self {
        let l = coefficients.len();
        let diag = (0..1usize << l)
            .map(|b| coefficients.iter().enumerate().map(|(i, c)| c * z_value(b, i)).sum())
            .collect();
        Self { sites: l, diag, flip: vec![C0; l] }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn flip(&self) -> &[Complex64] {
        &self.flip
    }

    pub fn is_diagonal(&self) -> bool {
        self.flip.iter().all(|f| *f == C0)
    }

    /// Upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let d = self.diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        d + self.flip.iter().map(|f| f.norm()).sum::<f64>()
    }

    pub fn diag_range(&self) -> (f64, f64) {
        self.diag
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SpinOperator, b: f64) -> SpinOperator {
        debug_assert_eq!(self.sites, other.sites);
        SpinOperator {
            sites: self.sites,
            diag: self.diag.iter().zip(&other.diag).map(|(x, y)| a * x + b * y).collect(),
            flip: self.flip.iter().zip(&other.flip).map(|(x, y)| x * a + y * b).collect(),
        }
    }

    /// `self + shift·1`.
    pub fn shifted(&self, shift: f64) -> SpinOperator {
        SpinOperator {
            sites: self.sites,
            diag: self.diag.iter().map(|x| x + shift).collect(),
            flip: self.flip.clone(),
        }
    }

    /// out = H·psi.
    pub fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for ((o, d), p) in out.iter_mut().zip(&self.diag).zip(psi) {
            *o = p * *d;
        }
        let dim = self.diag.len();
        for (i, f) in self.flip.iter().enumerate() {
            if *f == C0 {
                continue;
            }
            let fc = f.conj();
            let m = 1usize << i;
            let mut hi = 0;
            while hi < dim {
                for b in hi..hi + m {
                    let (p0, p1) = (psi[b], psi[b | m]);
                    out[b | m] += f * p0;
                    out[b] += fc * p1;
                }
                hi += 2 * m;
            }
        }
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![C0; psi.len()];
        self.apply_into(psi, &mut out);
        out
    }

    /// ⟨psi|H|psi⟩ for a normalized vector.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let h = self.apply(psi);
        psi.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn to_dense(&self, cap: usize) -> Result<HamiltonianMatrix> {
        check_dense(self.sites, cap)?;
        let dim = self.dim();
        let mut m = Array2::from_elem((dim, dim), C0);
        for (b, d) in self.diag.iter().enumerate() {
            m[[b, b]] = Complex64::new(*d, 0.0);
        }
        for (i, f) in self.flip.iter().enumerate() {
            let mask = 1usize << i;
            for b in (0..dim).filter(|b| b & mask == 0) {
                m[[b | mask, b]] += f;
                m[[b, b | mask]] += f.conj();
            }
        }
        Ok(HamiltonianMatrix { sites: self.sites, data: m })
    }
}

/// Dense Hermitian operator on 2^L amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    sites: usize,
    data: Array2<Complex64>,
}

impl HamiltonianMatrix {
    pub fn from_array(sites: usize, data: Array2<Complex64>) -> Result<Self> {
        let dim = 1usize << sites;
        if data.shape() != [dim, dim] {
            return invalid(format!("matrix shape {:?} does not match {sites} sites", data.shape()));
        }
        Ok(Self { sites, data })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    /// max |H − H†|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.data[[r, c]] - self.data[[c, r]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let v = ndarray::ArrayView1::from(psi);
        self.data.dot(&v).to_vec()
    }

    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let h = self.apply(psi);
        psi.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn sub(&self, other: &HamiltonianMatrix) -> HamiltonianMatrix {
        HamiltonianMatrix { sites: self.sites, data: &self.data - &other.data }
    }
}

/// Dense Ising chain Hamiltonian.
pub fn tfi_hamiltonian(params: &TfiParams) -> Result<HamiltonianMatrix> {
    tfi_hamiltonian_capped(params, DEFAULT_DENSE_CAP)
}

pub fn tfi_hamiltonian_capped(params: &TfiParams, cap: usize) -> Result<HamiltonianMatrix> {
    params.validate()?;
    check_dense(params.sites, cap)?;
    SpinOperator::tfi(params)?.to_dense(cap)
}

/// Per-atom deviations from the ideal device for one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteModifiers {
    /// Multiplies the Rabi frequency seen by each atom.
    pub amplitude: Vec<f64>,
    /// Added to each atom's detuning.
    pub detuning: Vec<f64>,
    /// False for atoms missing from the array: no drive, no interactions.
    pub present: Vec<bool>,
}

impl SiteModifiers {
    pub fn ideal(sites: usize) -> Self {
        Self { amplitude: vec![1.0; sites], detuning: vec![0.0; sites], present: vec![true; sites] }
    }

    pub fn is_ideal(&self) -> bool {
        self.amplitude.iter().all(|&a| a == 1.0)
            && self.detuning.iter().all(|&d| d == 0.0)
            && self.present.iter().all(|&p| p)
    }
}

/// Atom array with its interaction table, ready to produce H(t) for a pulse program.
#[derive(Debug, Clone)]
pub struct RydbergSystem {
    register: AtomRegister,
    c6: f64,
    range: InteractionRange,
    modifiers: SiteModifiers,
    interaction: Vec<f64>,
}

impl RydbergSystem {
    pub fn new(register: AtomRegister, c6: f64, range: InteractionRange) -> Result<Self> {
        let sites = register.len();
        Self::with_parts(register, c6, range, SiteModifiers::ideal(sites))
    }

    fn with_parts(register: AtomRegister, c6: f64, range: InteractionRange, modifiers: SiteModifiers) -> Result<Self> {
        if !(c6 > 0.0) {
            return invalid(format!("C6 must be positive, got {c6}"));
        }
        let l = register.len();
        if l > MAX_STATE_SITES {
            return Err(Error::Capacity { sites: l, cap: MAX_STATE_SITES });
        }
        if modifiers.amplitude.len() != l || modifiers.detuning.len() != l || modifiers.present.len() != l {
            return invalid("site modifiers do not match the register size");
        }
        let mut pairs = Vec::new();
        for i in 0..l {
            for j in i + 1..l {
                if modifiers.present[i] && modifiers.present[j] && range.includes(&register, i, j) {
                    pairs.push((i, j, c6 * vdw_strength(&register, i, j)?));
                }
            }
        }
        let interaction = (0..1usize << l)
            .map(|b| {
                pairs
                    .iter()
                    .map(|&(i, j, v)| v * occupation(b, i) * occupation(b, j))
                    .sum()
            })
            .collect();
        Ok(Self { register, c6, range, modifiers, interaction })
    }

    /// Same array with per-shot deviations applied.
    pub fn with_modifiers(&self, modifiers: SiteModifiers) -> Result<Self> {
        Self::with_parts(self.register.clone(), self.c6, self.range, modifiers)
    }

    pub fn register(&self) -> &AtomRegister {
        &self.register
    }

    pub fn sites(&self) -> usize {
        self.register.len()
    }

    pub fn c6(&self) -> f64 {
        self.c6
    }

    pub fn range(&self) -> InteractionRange {
        self.range
    }

    pub fn modifiers(&self) -> &SiteModifiers {
        &self.modifiers
    }

    /// Σ_{i<j} C6 V_ij n_i n_j on each basis state.
    pub fn interaction_diag(&self) -> &[f64] {
        &self.interaction
    }

    /// H(t) = ½ΣΔ_i Z_i + Σ (Ω_i/2)(X cosφ − Y sinφ) + C6 Σ V n_i n_j.
    ///
    /// Returns the operator and whether the amplitude had to be clamped at `t`.
    pub fn operator_at(&self, program: &PulseProgram, t: f64) -> (SpinOperator, bool) {
        let l = self.sites();
        let s = program.sample(t);
        let mut deltas = program.site_detunings(t, l);
        let mut flip = vec![C0; l];
        let drive = Complex64::from_polar(0.5 * s.omega, -s.phase);
        for i in 0..l {
            if self.modifiers.present[i] {
                deltas[i] += self.modifiers.detuning[i];
                flip[i] = drive * self.modifiers.amplitude[i];
            } else {
                deltas[i] = 0.0;
            }
        }
        let diag = self
            .interaction
            .iter()
            .enumerate()
            .map(|(b, v)| v + 0.5 * deltas.iter().enumerate().map(|(i, d)| d * z_value(b, i)).sum::<f64>())
            .collect();
        (SpinOperator { sites: l, diag, flip }, s.clamped)
    }
}

/// Interaction constant, truncation and drive program for the Rydberg Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct RydbergParams {
    pub c6: f64,
    pub range: InteractionRange,
    pub program: PulseProgram,
}

/// Dense Rydberg Hamiltonian at time `t`.
pub fn rydberg_hamiltonian_at(register: &AtomRegister, params: &RydbergParams, t: f64) -> Result<HamiltonianMatrix> {
    rydberg_hamiltonian_at_capped(register, params, t, DEFAULT_DENSE_CAP)
}

pub fn rydberg_hamiltonian_at_capped(
    register: &AtomRegister,
    params: &RydbergParams,
    t: f64,
    cap: usize,
) -> Result<HamiltonianMatrix> {
    check_dense(register.len(), cap)?;
    params.program.validate(register.len())?;
    if !(0.0..=params.program.duration).contains(&t) {
        return invalid(format!("t = {t} lies outside the program duration {}", params.program.duration));
    }
    let system = RydbergSystem::new(register.clone(), params.c6, params.range)?;
    system.operator_at(&params.program, t).0.to_dense(cap)
}
