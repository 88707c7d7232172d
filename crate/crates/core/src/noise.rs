//! Monte Carlo noise: readout errors, missing atoms, Doppler and laser-profile
//! fluctuations, and single-qubit Kraus channels realized as quantum jumps.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::AtomRegister;
use crate::state::QuantumState;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Hardware error rates and laser parameters. Defaults are the device values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Probability that an atom is missing from the array.
    pub eta_prep: f64,
    /// Ground read as Rydberg.
    pub eps: f64,
    /// Rydberg read as ground.
    pub eps_prime: f64,
    /// Atom temperature, K.
    pub temperature: f64,
    /// Atom mass, kg.
    pub mass: f64,
    /// Laser waist, μm.
    pub waist: f64,
    /// Shot-to-shot relative amplitude spread.
    pub sigma_omega: f64,
    /// Effective wave number, μm⁻¹.
    pub k_eff: f64,
    pub p_z: f64,
    pub p_r0: f64,
    pub p_r1: f64,
    /// Trajectories per run.
    pub samples: usize,
    /// Apply the Kraus channels after every recorded evolution step instead of once per shot.
    pub kraus_per_step: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            eta_prep: 0.01,
            eps: 0.01,
            eps_prime: 0.08,
            temperature: 50e-6,
            mass: 1.45e-25,
            waist: 175.0,
            sigma_omega: 0.05,
            k_eff: 8.7,
            p_z: 0.1,
            p_r0: 0.1,
            p_r1: 0.1,
            samples: 5000,
            kraus_per_step: false,
        }
    }
}

impl NoiseConfig {
    /// All error sources switched off.
    pub fn noiseless(samples: usize) -> Self {
        Self {
            eta_prep: 0.0,
            eps: 0.0,
            eps_prime: 0.0,
            temperature: 0.0,
            waist: f64::INFINITY,
            sigma_omega: 0.0,
            p_z: 0.0,
            p_r0: 0.0,
            p_r1: 0.0,
            samples,
            ..Self::default()
        }
    }

    /// Every error source scaled by `lambda`: probabilities, temperature and
    /// amplitude spread linearly, and the inverse squared waist.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            eta_prep: self.eta_prep * lambda,
            eps: self.eps * lambda,
            eps_prime: self.eps_prime * lambda,
            temperature: self.temperature * lambda,
            waist: if lambda > 0.0 { self.waist / lambda.sqrt() } else { f64::INFINITY },
            sigma_omega: self.sigma_omega * lambda,
            p_z: self.p_z * lambda,
            p_r0: self.p_r0 * lambda,
            p_r1: self.p_r1 * lambda,
            ..*self
        }
    }

    pub fn p_identity(&self) -> f64 {
        1.0 - self.p_z - self.p_r0 - self.p_r1
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("eta_prep", self.eta_prep),
            ("eps", self.eps),
            ("eps_prime", self.eps_prime),
            ("p_z", self.p_z),
            ("p_r0", self.p_r0),
            ("p_r1", self.p_r1),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        if self.p_identity() < -1e-12 {
            return Err(Error::InvalidConfig(format!(
                "p_z + p_r0 + p_r1 = {} exceeds 1",
                self.p_z + self.p_r0 + self.p_r1
            )));
        }
        if !(self.temperature >= 0.0) || !(self.mass > 0.0) || !(self.waist > 0.0) {
            return Err(Error::InvalidConfig("temperature, mass and waist must be positive".into()));
        }
        if !(self.sigma_omega >= 0.0) || !(self.k_eff >= 0.0) {
            return Err(Error::InvalidConfig("sigma_omega and k_eff must be non-negative".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn has_kraus(&self) -> bool {
        self.p_z > 0.0 || self.p_r0 > 0.0 || self.p_r1 > 0.0
    }

    /// Doppler detuning spread K_eff·√(k_B T/m), rad/μs.
    pub fn doppler_sigma(&self) -> f64 {
        // μm⁻¹ · m/s = 10⁶ s⁻¹ = μs⁻¹.
        self.k_eff * (BOLTZMANN * self.temperature / self.mass).sqrt()
    }
}

/// Reproducible random stream for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySeed {
    pub master: u64,
    pub index: u64,
}

impl TrajectorySeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    /// ChaCha8 keyed by the master seed, on stream `index`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

/// Per-atom missing flags, each with probability η_prep.
pub fn sample_missing(sites: usize, cfg: &NoiseConfig, rng: &mut impl Rng) -> Vec<bool> {
    (0..sites).map(|_| rng.random::<f64>() < cfg.eta_prep).collect()
}

/// Readout errors on a measured bitstring. Missing atoms read as ground;
/// ground bits flip with probability ε and Rydberg bits with ε′.
pub fn apply_readout_errors(bits: u64, sites: usize, missing: &[bool], cfg: &NoiseConfig, rng: &mut impl Rng) -> u64 {
    let mut out = 0u64;
    for i in 0..sites {
        let u: f64 = rng.random();
        if missing[i] {
            continue;
        }
        let bit = (bits >> i) & 1 == 1;
        let read = if bit { u >= cfg.eps_prime } else { u < cfg.eps };
        out |= (read as u64) << i;
    }
    out
}

/// Missing-atom draw followed by readout errors.
pub fn sample_spam(bits: u64, sites: usize, cfg: &NoiseConfig, rng: &mut impl Rng) -> u64 {
    let missing = sample_missing(sites, cfg, rng);
    apply_readout_errors(bits, sites, &missing, cfg, rng)
}

/// Quenched Doppler detunings, rad/μs.
pub fn doppler_shifts(cfg: &NoiseConfig, sites: usize, rng: &mut impl Rng) -> Vec<f64> {
    let sigma = cfg.doppler_sigma();
    if sigma == 0.0 {
        return vec![0.0; sites];
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    (0..sites).map(|_| normal.sample(rng)).collect()
}

/// Rabi-frequency multipliers from the Gaussian beam profile plus shot noise.
/// Register coordinates are in μm.
pub fn amplitude_factors(register: &AtomRegister, cfg: &NoiseConfig, rng: &mut impl Rng) -> Vec<f64> {
    let (cx, cy) = register.centroid();
    let normal = (cfg.sigma_omega > 0.0).then(|| Normal::new(0.0, cfg.sigma_omega).expect("finite sigma"));
    register
        .positions()
        .iter()
        .map(|&(x, y)| {
            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
            let mean = if cfg.waist.is_finite() { (-r2 / (cfg.waist * cfg.waist)).exp() } else { 1.0 };
            let jitter = normal.as_ref().map_or(0.0, |n| n.sample(rng));
            (mean + jitter).max(0.0)
        })
        .collect()
}

/// 2×2 matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

/// Identity, phase flip, two resets to |0⟩ and two resets to |1⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausChannel {
    pub ops: [Mat2; 6],
}

impl KrausChannel {
    pub fn from_config(cfg: &NoiseConfig) -> Result<Self> {
        let p0 = cfg.p_identity();
        if p0 < -1e-12 {
            return Err(Error::InvalidConfig(format!("identity probability {p0} is negative")));
        }
        let r = |x: f64| Complex64::new(x, 0.0);
        let z = r(0.0);
        let (a, b, c, d) = (p0.max(0.0).sqrt(), cfg.p_z.sqrt(), cfg.p_r0.sqrt(), cfg.p_r1.sqrt());
        Ok(Self {
            ops: [
                [[r(a), z], [z, r(a)]],
                [[r(b), z], [z, r(-b)]],
                [[r(c), z], [z, z]],
                [[z, r(c)], [z, z]],
                [[z, z], [r(d), z]],
                [[z, z], [z, r(d)]],
            ],
        })
    }

    /// Σ K†K.
    pub fn completeness(&self) -> Mat2 {
        let mut s = [[Complex64::new(0.0, 0.0); 2]; 2];
        for k in &self.ops {
            for r in 0..2 {
                for c in 0..2 {
                    s[r][c] += (0..2).map(|m| k[m][r].conj() * k[m][c]).sum::<Complex64>();
                }
            }
        }
        s
    }

    /// max |Σ K†K − 1|.
    pub fn completeness_error(&self) -> f64 {
        let s = self.completeness();
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((s[r][c] - id).norm());
            }
        }
        worst
    }

    /// Quantum-jump step on `site`: picks K_α with probability ‖K_α ψ‖², applies it, renormalizes.
    pub fn apply(&self, state: &mut QuantumState, site: usize, rng: &mut impl Rng) {
        let m = 1usize << site;
        // Reduced density matrix of the site.
        let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
        let amps = state.amplitudes();
        for b in (0..amps.len()).filter(|b| b & m == 0) {
            let (a0, a1) = (amps[b], amps[b | m]);
            rho[0][0] += a0 * a0.conj();
            rho[1][1] += a1 * a1.conj();
            rho[0][1] += a0 * a1.conj();
            rho[1][0] += a1 * a0.conj();
        }
        let weights: Vec<f64> = self
            .ops
            .iter()
            .map(|k| {
                // Tr(K ρ K†)
                let mut w = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        for s in 0..2 {
                            w += (k[r][c] * rho[c][s] * k[r][s].conj()).re;
                        }
                    }
                }
                w.max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        let k = self.ops[pick];
        let scale = weights[pick].sqrt().recip();
        let amps = state.amplitudes_mut();
        for b in (0..amps.len()).filter(|b| b & m == 0) {
            let (a0, a1) = (amps[b], amps[b | m]);
            amps[b] = (k[0][0] * a0 + k[0][1] * a1) * scale;
            amps[b | m] = (k[1][0] * a0 + k[1][1] * a1) * scale;
        }
    }
}

/// One quantum-jump realization of the single-qubit channel on `site`.
pub fn apply_kraus_channel(state: &QuantumState, site: usize, cfg: &NoiseConfig, rng: &mut impl Rng) -> Result<QuantumState> {
    if site >= state.sites() {
        return invalid(format!("site {site} out of range"));
    }
    let channel = KrausChannel::from_config(cfg)?;
    let mut out = state.clone();
    channel.apply(&mut out, site, rng);
    Ok(out)
}

/// Samples a basis index from |ψ|².
pub fn sample_bitstring(state: &QuantumState, rng: &mut impl Rng) -> u64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let amps = state.amplitudes();
    for (b, a) in amps.iter().enumerate() {
        acc += a.norm_sqr();
        if u < acc {
            return b as u64;
        }
    }
    // Rounding left u above the cumulative sum: take the last populated state.
    amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0) as u64
}
