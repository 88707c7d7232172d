//! Dynamic structure factor from a Green's table.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::greens::GreensTable;

/// Frequency points in the default grid.
pub const DEFAULT_OMEGA_POINTS: usize = 512;
/// Upper end of the default frequency grid and of the QFI integral.
pub const DEFAULT_OMEGA_MAX: f64 = 25.0;
/// Default damping, model units.
pub const DEFAULT_ETA: f64 = 0.2;

/// `points` uniform frequencies on [0, ω_max].
pub fn omega_grid(omega_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(omega_max > 0.0) || points < 2 {
        return invalid("frequency grid needs ω_max > 0 and at least two points");
    }
    Ok((0..points).map(|k| omega_max * k as f64 / (points - 1) as f64).collect())
}

/// Lattice momenta 2πm/L, m = 0…L−1.
pub fn momentum_grid(sites: usize) -> Vec<f64> {
    (0..sites).map(|m| 2.0 * PI * m as f64 / sites as f64).collect()
}

/// S(k, ω) on a momentum × frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    momenta: Vec<f64>,
    omegas: Vec<f64>,
    values: Vec<f64>,
    eta: f64,
}

impl SpectralGrid {
    pub fn from_values(momenta: Vec<f64>, omegas: Vec<f64>, values: Vec<f64>, eta: f64) -> Result<Self> {
        if values.len() != momenta.len() * omegas.len() {
            return invalid("spectral values do not match the momentum × frequency grid");
        }
        Ok(Self { momenta, omegas, values, eta })
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: usize, w: usize) -> f64 {
        self.values[k * self.omegas.len() + w]
    }

    /// S(k_index, ·).
    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.omegas.len();
        &self.values[k * n..(k + 1) * n]
    }

    /// Index of the momentum closest to `k` (mod 2π) within 1e−9.
    pub fn momentum_index(&self, k: f64) -> Option<usize> {
        self.momenta.iter().position(|q| {
            let d = (q - k).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) < 1e-9
        })
    }

    pub fn scaled(&self, c: f64) -> SpectralGrid {
        SpectralGrid { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    /// Σ max(0, −S) / Σ max(0, S).
    pub fn negative_weight_ratio(&self) -> f64 {
        let neg: f64 = self.values.iter().map(|v| (-v).max(0.0)).sum();
        let pos: f64 = self.values.iter().map(|v| v.max(0.0)).sum();
        if pos > 0.0 {
            neg / pos
        } else if neg > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    pub fn has_negative(&self) -> bool {
        self.values.iter().any(|v| *v < 0.0)
    }

    /// Frequency of the largest value in row `k`.
    pub fn peak_omega(&self, k: usize) -> f64 {
        self.omegas[self.peak_index(k)]
    }

    pub fn peak_index(&self, k: usize) -> usize {
        let row = self.row(k);
        (0..row.len()).fold(0, |best, w| if row[w] > row[best] { w } else { best })
    }

    /// Interior local maxima of row `k` as (index, value).
    pub fn local_maxima(&self, k: usize) -> Vec<(usize, f64)> {
        let row = self.row(k);
        (1..row.len().saturating_sub(1))
            .filter(|&w| row[w] > row[w - 1] && row[w] >= row[w + 1])
            .map(|w| (w, row[w]))
            .collect()
    }
}

/// Centre-site transform:
/// G(k, ω) = (2πδ/LT) Σ_j e^{−ik(j−j_c)} Σ_n e^{i(ω+iη)t_n} G(j, t_n) and S = −Im G(k, ω)/π.
pub fn fourier_dsf(table: &GreensTable, eta: f64, omegas: &[f64], momenta: &[f64]) -> Result<SpectralGrid> {
    if !(eta > 0.0) || !eta.is_finite() {
        return invalid(format!("damping η must be positive, got {eta}"));
    }
    let l = table.sites();
    let grid = table.grid();
    let jc = table.center() as f64;
    let prefactor = 2.0 * PI * grid.delta / (l as f64 * grid.total());
    let mut values = Vec::with_capacity(momenta.len() * omegas.len());
    for &k in momenta {
        let folded: Vec<Complex64> = (0..grid.steps)
            .map(|n| {
                (0..l)
                    .map(|j| Complex64::from_polar(table.get(j, n), -k * (j as f64 - jc)))
                    .sum()
            })
            .collect();
        for &w in omegas {
            let step = Complex64::new(0.0, 1.0) * Complex64::new(w, eta) * grid.delta;
            let ratio = step.exp();
            let mut phase = ratio;
            let mut acc = Complex64::new(0.0, 0.0);
            for g in &folded {
                acc += phase * g;
                phase *= ratio;
            }
            values.push(-(prefactor * acc).im / PI);
        }
    }
    SpectralGrid::from_values(momenta.to_vec(), omegas.to_vec(), values, eta)
}

/// Linear weights W such that S(k, ω) = Σ_{j,n} W[j·N + n]·G(j, t_n).
pub fn fourier_weights(table: &GreensTable, eta: f64, omega: f64, k: f64) -> Vec<f64> {
    let l = table.sites();
    let grid = table.grid();
    let jc = table.center() as f64;
    let prefactor = 2.0 * PI * grid.delta / (l as f64 * grid.total());
    let mut w = Vec::with_capacity(l * grid.steps);
    for j in 0..l {
        for n in 1..=grid.steps {
            let t = grid.time(n);
            let z = Complex64::from_polar((-eta * t).exp(), omega * t - k * (j as f64 - jc)) * prefactor;
            w.push(-z.im / PI);
        }
    }
    w
}
