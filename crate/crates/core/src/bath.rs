//! Harmonic-oscillator baths: memory kernels, dissipation constant, noise
//! autocorrelations, and thermal sampling of the stochastic force.
//!
//! Conventions. For a discrete bank of oscillators `(ω_k, m_k, g_k)` the
//! memory kernel is
//!
//! k(t) = Σ_k g_k²/(m_k ω_k²) · cos(ω_k t),
//!
//! and the stochastic force evaluated from initial bath conditions is
//!
//! f(t) = Σ_k g_k [ q_k(0) cos(ω_k t) + p_k(0)/(m_k ω_k) · sin(ω_k t) ].
//!
//! [`autocorrelation`] returns the *anticommutator* average ⟨{f(t), f(t')}⟩,
//! which is twice the c-number covariance reproduced by [`sample_noise`].
//! The Ohmic continuum has k(t) = (2Mγ/π)·sin(Λt)/t with ∫₀^∞ k dt = Mγ.

use crate::quad;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BathError {
    #[error("discrete bath must contain at least one oscillator")]
    EmptyBank,
    #[error("oscillator {index} has non-positive frequency or mass")]
    InvalidOscillator { index: usize },
    #[error("spectral density parameters must be positive (gamma={gamma}, M={mass}, cutoff={cutoff})")]
    InvalidSpectralDensity { gamma: f64, mass: f64, cutoff: f64 },
    #[error("temperature must be non-negative, got {0}")]
    NegativeTemperature(f64),
    #[error("hbar must be positive, got {0}")]
    NonPositiveHbar(f64),
    #[error("discrete finite bank has a quasi-periodic kernel; its integral does not converge — pass a continuum spec")]
    NonIntegrableKernel,
    #[error("noise sampling realizes the discrete force sum; discretize the continuum first")]
    ContinuumNotSampleable,
    #[error("operation requires a discrete bath")]
    RequiresDiscrete,
    #[error("operation requires a continuum (Ohmic) bath")]
    RequiresContinuum,
    #[error("n_modes must be at least 2, got {0}")]
    TooFewModes(usize),
    #[error("noise grid must be strictly increasing and finite")]
    InvalidGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    /// ω_k > 0, rad/time.
    pub frequency: f64,
    /// m_k > 0.
    pub mass: f64,
    /// g_k, force/length.
    pub coupling: f64,
}

/// Continuum spectral density. Only the Ohmic family ships; the enum keeps
/// the kernel API open for other families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralDensity {
    Ohmic {
        /// Dissipation rate γ, 1/time.
        gamma: f64,
        /// System mass M entering Mγ = ∫₀^∞ k dt.
        mass: f64,
        /// Frequency cutoff Λ, rad/time.
        cutoff: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathModel {
    Discrete(Vec<Oscillator>),
    Continuum(SpectralDensity),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub model: BathModel,
    /// k_B T in energy units.
    pub k_b_t: f64,
    pub hbar: f64,
    pub statistics: Statistics,
}

impl BathSpec {
    pub fn discrete(
        oscillators: Vec<Oscillator>,
        k_b_t: f64,
        hbar: f64,
        statistics: Statistics,
    ) -> Result<Self, BathError> {
        let spec = Self { model: BathModel::Discrete(oscillators), k_b_t, hbar, statistics };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ohmic(
        gamma: f64,
        mass: f64,
        cutoff: f64,
        k_b_t: f64,
        hbar: f64,
        statistics: Statistics,
    ) -> Result<Self, BathError> {
        let spec = Self {
            model: BathModel::Continuum(SpectralDensity::Ohmic { gamma, mass, cutoff }),
            k_b_t,
            hbar,
            statistics,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BathError> {
        if self.k_b_t < 0.0 {
            return Err(BathError::NegativeTemperature(self.k_b_t));
        }
        if !(self.hbar > 0.0) {
            return Err(BathError::NonPositiveHbar(self.hbar));
        }
        match &self.model {
            BathModel::Discrete(bank) => {
                if bank.is_empty() {
                    return Err(BathError::EmptyBank);
                }
                for (index, osc) in bank.iter().enumerate() {
                    if !(osc.frequency > 0.0 && osc.mass > 0.0) {
                        return Err(BathError::InvalidOscillator { index });
                    }
                }
            }
            BathModel::Continuum(SpectralDensity::Ohmic { gamma, mass, cutoff }) => {
                if !(*gamma > 0.0 && *mass > 0.0 && *cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(BathError::InvalidSpectralDensity {
                        gamma: *gamma,
                        mass: *mass,
                        cutoff: *cutoff,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn oscillators(&self) -> Result<&[Oscillator], BathError> {
        match &self.model {
            BathModel::Discrete(bank) => Ok(bank),
            BathModel::Continuum(_) => Err(BathError::RequiresDiscrete),
        }
    }
}

/// A realized stochastic-force path on a time grid (negative times allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl NoisePath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, BathError> {
        if times.len() != values.len()
            || times.windows(2).any(|w| !(w[1] > w[0]))
            || times.iter().chain(values.iter()).any(|x| !x.is_finite())
        {
            return Err(BathError::InvalidGrid);
        }
        Ok(Self { times, values })
    }

    pub fn zero(times: Vec<f64>) -> Result<Self, BathError> {
        let values = vec![0.0; times.len()];
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The path `t -> f(-t)`, used by time-reversal residual checks.
    pub fn reversed(&self) -> NoisePath {
        let times: Vec<f64> = self.times.iter().rev().map(|&t| -t).collect();
        let values: Vec<f64> = self.values.iter().rev().copied().collect();
        NoisePath { times, values }
    }
}

/// x·coth(x), stable for all x >= 0 (limit 1 at x = 0).
fn x_coth_x(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 + x * x / 3.0
    } else if x > 20.0 {
        x
    } else {
        x / x.tanh()
    }
}

/// coth(x) for x > 0 with the x -> ∞ limit (zero temperature) mapped to 1.
pub(crate) fn coth(x: f64) -> f64 {
    if x.is_infinite() || x > 20.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

/// Memory kernel k(t). Even in t by construction (evaluated at |t|).
pub fn memory_kernel(spec: &BathSpec, t: f64) -> f64 {
    let ta = t.abs();
    match &spec.model {
        BathModel::Discrete(bank) => bank
            .iter()
            .map(|o| {
                o.coupling * o.coupling / (o.mass * o.frequency * o.frequency)
                    * (o.frequency * ta).cos()
            })
            .sum(),
        BathModel::Continuum(SpectralDensity::Ohmic { gamma, mass, cutoff }) => {
            let pref = 2.0 * mass * gamma / std::f64::consts::PI;
            if ta == 0.0 {
                pref * cutoff
            } else {
                pref * (cutoff * ta).sin() / ta
            }
        }
    }
}

/// Mγ = ∫₀^∞ k(t) dt. Exact for the Ohmic continuum; finite discrete banks
/// are rejected because their quasi-periodic kernel has no limit.
pub fn dissipation_constant(spec: &BathSpec) -> Result<f64, BathError> {
    match &spec.model {
        BathModel::Discrete(_) => Err(BathError::NonIntegrableKernel),
        BathModel::Continuum(SpectralDensity::Ohmic { gamma, mass, .. }) => Ok(gamma * mass),
    }
}

/// Symmetrized force autocorrelation ⟨{f(t), f(t')}⟩ as a function of
/// dt = t - t'. Even in dt by construction. `Classical` statistics replaces
/// ħω·coth(ħω/2k_BT) by 2k_BT.
pub fn autocorrelation(spec: &BathSpec, dt: f64) -> f64 {
    let ta = dt.abs();
    let kt = spec.k_b_t;
    let hbar = spec.hbar;
    match &spec.model {
        BathModel::Discrete(bank) => bank
            .iter()
            .map(|o| {
                let g2 = o.coupling * o.coupling;
                let weight = match spec.statistics {
                    Statistics::Classical => 2.0 * kt * g2 / (o.mass * o.frequency * o.frequency),
                    Statistics::Quantum => {
                        let x = if kt == 0.0 {
                            f64::INFINITY
                        } else {
                            hbar * o.frequency / (2.0 * kt)
                        };
                        hbar * g2 / (o.mass * o.frequency) * coth(x)
                    }
                };
                weight * (o.frequency * ta).cos()
            })
            .sum(),
        BathModel::Continuum(SpectralDensity::Ohmic { gamma, mass, cutoff }) => {
            let pref = 2.0 * gamma * mass * hbar / std::f64::consts::PI;
            match spec.statistics {
                Statistics::Classical => {
                    // 2k_BT · k(t) in closed form.
                    2.0 * kt * memory_kernel(spec, dt)
                }
                Statistics::Quantum => {
                    if kt == 0.0 {
                        // ∫₀^Λ ω cos(ω t) dω in closed form.
                        let val = if ta == 0.0 {
                            0.5 * cutoff * cutoff
                        } else {
                            ((cutoff * ta).cos() - 1.0) / (ta * ta)
                                + cutoff * (cutoff * ta).sin() / ta
                        };
                        return pref * val;
                    }
                    let n = quad::oscillation_panels(cutoff * ta, 128);
                    let integrand = |w: f64| {
                        let x = hbar * w / (2.0 * kt);
                        (2.0 * kt / hbar) * x_coth_x(x) * (w * ta).cos()
                    };
                    pref * quad::simpson(integrand, 0.0, *cutoff, n)
                }
            }
        }
    }
}

/// Thermal variances for the initial bath coordinates. Quantum statistics
/// scales the classical variances by (ħω/2k_BT)·coth(ħω/2k_BT).
fn initial_variances(spec: &BathSpec, osc: &Oscillator) -> (f64, f64) {
    let kt = spec.k_b_t;
    let classical_q = kt / (osc.mass * osc.frequency * osc.frequency);
    let classical_p = osc.mass * kt;
    match spec.statistics {
        Statistics::Classical => (classical_q, classical_p),
        Statistics::Quantum => {
            if kt == 0.0 {
                let q = spec.hbar / (2.0 * osc.mass * osc.frequency);
                let p = osc.mass * spec.hbar * osc.frequency / 2.0;
                (q, p)
            } else {
                let x = spec.hbar * osc.frequency / (2.0 * kt);
                let factor = x_coth_x(x);
                (classical_q * factor, classical_p * factor)
            }
        }
    }
}

/// Draw thermal initial conditions (q_k(0), p_k(0)) for a discrete bank.
/// Deterministic for a given seed.
pub fn sample_bath_initial_conditions(
    spec: &BathSpec,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), BathError> {
    let bank = match &spec.model {
        BathModel::Discrete(bank) => bank,
        BathModel::Continuum(_) => return Err(BathError::ContinuumNotSampleable),
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut q0 = Vec::with_capacity(bank.len());
    let mut p0 = Vec::with_capacity(bank.len());
    for osc in bank {
        let (vq, vp) = initial_variances(spec, osc);
        q0.push(unit.sample(&mut rng) * vq.sqrt());
        p0.push(unit.sample(&mut rng) * vp.sqrt());
    }
    Ok((q0, p0))
}

/// Evaluate the force sum from explicit initial bath conditions on `times`.
/// Valid for negative times: f(t) is a deterministic function of the t = 0
/// bath state.
///
/// Sign convention: with the coupling Hamiltonian +g_k·q_k·Q and its
/// counter-term, eliminating the bath exactly yields
/// M Q̈ + V' + ∫k Q̇ + k(t)Q(0) = f(t) with
/// f(t) = -Σ g_k [q_k(0) cos + p_k(0) sin/(m_k ω_k)]; the overall sign is
/// pinned here so the memory equation is an identity of the coupled
/// dynamics (it does not affect any statistics of f).
pub fn noise_from_initial_conditions(
    spec: &BathSpec,
    q0: &[f64],
    p0: &[f64],
    times: &[f64],
) -> Result<NoisePath, BathError> {
    let bank = spec.oscillators()?;
    if q0.len() != bank.len() || p0.len() != bank.len() {
        return Err(BathError::InvalidGrid);
    }
    let values: Vec<f64> = times
        .iter()
        .map(|&t| {
            -bank
                .iter()
                .zip(q0.iter().zip(p0))
                .map(|(o, (&q, &p))| {
                    o.coupling
                        * (q * (o.frequency * t).cos()
                            + p / (o.mass * o.frequency) * (o.frequency * t).sin())
                })
                .sum::<f64>()
        })
        .collect();
    NoisePath::new(times.to_vec(), values)
}

/// Sample a stochastic-force realization on `times` from thermal initial
/// conditions. Deterministic for a given seed.
pub fn sample_noise(spec: &BathSpec, times: &[f64], seed: u64) -> Result<NoisePath, BathError> {
    let (q0, p0) = sample_bath_initial_conditions(spec, seed)?;
    noise_from_initial_conditions(spec, &q0, &p0, times)
}

/// Realize an Ohmic continuum as a finite bank: ω_k = k·Δω with Δω = Λ/n,
/// m_k = 1, g_k² = (2Mγ/π)·m_k ω_k²·Δω, so the discrete kernel is the Riemann
/// sum of (2Mγ/π)·sin(Λt)/t. The bank recurs after 2π/Δω.
pub fn discretize_ohmic(spec: &BathSpec, n_modes: usize) -> Result<BathSpec, BathError> {
    let (gamma, mass, cutoff) = match &spec.model {
        BathModel::Continuum(SpectralDensity::Ohmic { gamma, mass, cutoff }) => {
            (*gamma, *mass, *cutoff)
        }
        BathModel::Discrete(_) => return Err(BathError::RequiresContinuum),
    };
    if n_modes < 2 {
        return Err(BathError::TooFewModes(n_modes));
    }
    let d_omega = cutoff / n_modes as f64;
    let pref = 2.0 * mass * gamma / std::f64::consts::PI;
    let bank: Vec<Oscillator> = (1..=n_modes)
        .map(|k| {
            let omega = k as f64 * d_omega;
            Oscillator {
                frequency: omega,
                mass: 1.0,
                coupling: (pref * omega * omega * d_omega).sqrt(),
            }
        })
        .collect();
    BathSpec::discrete(bank, spec.k_b_t, spec.hbar, spec.statistics)
}
