//! The two-sided quantum Brownian-motion master equation in moment space:
//! Γ(t) coefficients, Gaussian second-moment propagation, the free-particle
//! closed-form solution, and entropy curves.
//!
//! With quadratic potentials the master equation closes on first and second
//! moments. Writing s = sgn(t) and D = 2γMk_BT, the flow is
//!
//! d⟨Q⟩/dt   = ⟨P⟩/M
//! d⟨P⟩/dt   = -Mω₀²⟨Q⟩ - s·γ⟨P⟩
//! d varQ/dt = 2 cov/M
//! d varP/dt = -2Mω₀² cov - 2s·γ varP + 2·Dcoef(t)
//! d cov/dt  = varP/M - Mω₀² varQ - s·γ cov
//!
//! where Dcoef = s·D in the Markovian mode and Γ(t) (already odd in t) in
//! the pre-Markov mode. The purity of the Gaussian state is
//! ξ = ħ/(2√(varQ·varP - cov²)); entropy follows from
//! [`crate::quantum::entropy_from_purity`].

use crate::bath::{self, BathModel, BathSpec, SpectralDensity, Statistics};
use crate::quad;
use crate::quantum;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BrownianError {
    #[error("parameters must be positive (M={mass}, gamma={gamma}, hbar={hbar}, sigma={sigma})")]
    InvalidParams { mass: f64, gamma: f64, hbar: f64, sigma: f64 },
    #[error("variances must be positive (varQ={var_q}, varP={var_p})")]
    InvalidState { var_q: f64, var_p: f64 },
    #[error("the closed-form solution covers the free particle only")]
    FreeParticleOnly,
    #[error("entropy grid must be symmetric about t = 0")]
    AsymmetricGrid,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Second-moment description of a Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

impl GaussianState {
    pub fn validate(&self) -> Result<(), BrownianError> {
        if !(self.var_q > 0.0 && self.var_p > 0.0) {
            return Err(BrownianError::InvalidState { var_q: self.var_q, var_p: self.var_p });
        }
        Ok(())
    }

    pub fn covariance_determinant(&self) -> f64 {
        self.var_q * self.var_p - self.cov_qp * self.cov_qp
    }

    /// ħ²/4 - det Σ. Positive values flag a generalized-uncertainty
    /// violation; the Brownian map is not completely positive, so transient
    /// violations are reported rather than treated as fatal.
    pub fn uncertainty_defect(&self, hbar: f64) -> f64 {
        hbar * hbar / 4.0 - self.covariance_determinant()
    }

    pub fn uncertainty_violated(&self, hbar: f64) -> bool {
        self.uncertainty_defect(hbar) > 1e-9
    }

    /// Gaussian purity ξ = ħ/(2√det Σ).
    pub fn purity(&self, hbar: f64) -> f64 {
        hbar / (2.0 * self.covariance_determinant().sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BrownianPotential {
    Free,
    Harmonic { omega0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianParams {
    pub mass: f64,
    pub gamma: f64,
    pub k_b_t: f64,
    pub hbar: f64,
    /// Initial pure wavefunction width: ψ(x) ∝ exp(-x²/2σ²).
    pub sigma: f64,
    pub potential: BrownianPotential,
}

impl BrownianParams {
    pub fn validate(&self) -> Result<(), BrownianError> {
        if !(self.mass > 0.0 && self.gamma > 0.0 && self.hbar > 0.0 && self.sigma > 0.0)
            || self.k_b_t < 0.0
        {
            return Err(BrownianError::InvalidParams {
                mass: self.mass,
                gamma: self.gamma,
                hbar: self.hbar,
                sigma: self.sigma,
            });
        }
        Ok(())
    }

    /// Momentum diffusion coefficient D = 2γMk_BT of the Markovian equation.
    pub fn diffusion(&self) -> f64 {
        2.0 * self.gamma * self.mass * self.k_b_t
    }

    /// The pure Gaussian state at t = 0: varQ = σ²/2, varP = ħ²/(2σ²).
    pub fn initial_pure_state(&self) -> GaussianState {
        GaussianState {
            mean_q: 0.0,
            mean_p: 0.0,
            var_q: 0.5 * self.sigma * self.sigma,
            var_p: 0.5 * self.hbar * self.hbar / (self.sigma * self.sigma),
            cov_qp: 0.0,
        }
    }

    fn omega0(&self) -> f64 {
        match self.potential {
            BrownianPotential::Free => 0.0,
            BrownianPotential::Harmonic { omega0 } => omega0,
        }
    }
}

/// Γ(t) = ∫₀ᵗ ⟨{f(t), f(t')}⟩ dt'. Odd in t by construction (the integrand
/// is even in the lag), with the high-temperature/large-cutoff limit
/// sgn(t)·2γMk_BT.
pub fn gamma_coefficient(spec: &BathSpec, t: f64) -> f64 {
    let tau = t.abs();
    if tau == 0.0 {
        return 0.0;
    }
    let sign = t.signum();
    let kt = spec.k_b_t;
    let hbar = spec.hbar;
    let value = match &spec.model {
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
                        hbar * g2 / (o.mass * o.frequency) * bath::coth(x)
                    }
                };
                weight * (o.frequency * tau).sin() / o.frequency
            })
            .sum(),
        BathModel::Continuum(SpectralDensity::Ohmic { gamma, mass, cutoff }) => {
            // ∫₀^τ of the autocorrelation with the order of integration
            // swapped: (2γMħ/π) ∫₀^Λ coth(ħω/2k_BT)·sin(ωτ) dω.
            let pref = 2.0 * gamma * mass * hbar / std::f64::consts::PI;
            let n = quad::oscillation_panels(cutoff * tau, 256);
            let integrand = |w: f64| {
                if w == 0.0 {
                    match spec.statistics {
                        Statistics::Classical => 2.0 * kt * tau / hbar,
                        Statistics::Quantum => {
                            if kt == 0.0 {
                                0.0
                            } else {
                                2.0 * kt * tau / hbar
                            }
                        }
                    }
                } else {
                    let factor = match spec.statistics {
                        Statistics::Classical => 2.0 * kt / (hbar * w),
                        Statistics::Quantum => {
                            if kt == 0.0 {
                                1.0
                            } else {
                                bath::coth(hbar * w / (2.0 * kt))
                            }
                        }
                    };
                    factor * (w * tau).sin()
                }
            };
            pref * quad::simpson(integrand, 0.0, *cutoff, n)
        }
    };
    sign * value
}

/// Tabulated Γ on |t| with odd extension, for the pre-Markov moment flow.
struct GammaEval<'a> {
    spec: &'a BathSpec,
    table: Option<(f64, Vec<f64>)>, // (dtau, values at k·dtau)
}

impl<'a> GammaEval<'a> {
    fn new(spec: &'a BathSpec, tau_max: f64) -> Self {
        match &spec.model {
            // Closed-form sum: evaluate directly.
            BathModel::Discrete(_) => Self { spec, table: None },
            BathModel::Continuum(SpectralDensity::Ohmic { cutoff, .. }) => {
                // Γ oscillates with period 2π/Λ at every τ, so the table must
                // resolve 1/Λ throughout. Built cumulatively: each panel adds
                // a Simpson slice of the autocorrelation.
                let dtau = (0.02 / cutoff).min(tau_max / 64.0);
                let n = (tau_max / dtau).ceil() as usize + 2;
                let mut values = Vec::with_capacity(n + 1);
                values.push(0.0);
                let mut acc = 0.0;
                let mut c_left = bath::autocorrelation(spec, 0.0);
                for k in 0..n {
                    let mid = bath::autocorrelation(spec, (k as f64 + 0.5) * dtau);
                    let right = bath::autocorrelation(spec, (k as f64 + 1.0) * dtau);
                    acc += dtau / 6.0 * (c_left + 4.0 * mid + right);
                    values.push(acc);
                    c_left = right;
                }
                Self { spec, table: Some((dtau, values)) }
            }
        }
    }

    fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match &self.table {
            None => gamma_coefficient(self.spec, t),
            Some((dtau, values)) => {
                let tau = t.abs();
                let x = tau / dtau;
                let k = (x.floor() as usize).min(values.len() - 2);
                let w = x - k as f64;
                t.signum() * (values[k] * (1.0 - w) + values[k + 1] * w)
            }
        }
    }
}

/// Propagation mode for the moment flow.
pub enum PropagationMode<'a> {
    /// Markovian limit: friction and diffusion both carry sgn(t), with
    /// D = 2γMk_BT.
    MarkovSgn,
    /// Pre-Markov: diffusion coefficient Γ(t) from the bath autocorrelation;
    /// friction keeps sgn(t)·γ.
    TimeDependentGamma(&'a BathSpec),
}

type Moments = [f64; 5]; // mean_q, mean_p, var_q, var_p, cov_qp

fn moment_rhs(params: &BrownianParams, branch_sign: f64, diffusion: f64, y: &Moments) -> Moments {
    let m = params.mass;
    let g = params.gamma;
    let w2 = params.omega0() * params.omega0();
    let [mq, mp, vq, vp, c] = *y;
    [
        mp / m,
        -m * w2 * mq - branch_sign * g * mp,
        2.0 * c / m,
        -2.0 * m * w2 * c - 2.0 * branch_sign * g * vp + 2.0 * diffusion,
        vp / m - m * w2 * vq - branch_sign * g * c,
    ]
}

fn rk4_branch(
    params: &BrownianParams,
    gamma_eval: Option<&GammaEval<'_>>,
    branch_sign: f64,
    mut y: Moments,
    t_start: f64,
    t_end: f64,
) -> Moments {
    let span = t_end - t_start;
    if span == 0.0 {
        return y;
    }
    let rate = params.gamma.max(params.omega0()).max(1e-3);
    let mut dt_mag = (0.002 / rate).min(span.abs());
    // The pre-Markov coefficient varies on the bath cutoff scale.
    if let Some(ge) = gamma_eval {
        if let Some((dtau, _)) = &ge.table {
            dt_mag = dt_mag.min(4.0 * dtau);
        }
    }
    let n_steps = (span.abs() / dt_mag).ceil() as usize;
    let h = span / n_steps as f64;

    let diffusion = |t: f64| match gamma_eval {
        None => branch_sign * params.diffusion(),
        Some(ge) => ge.eval(t),
    };

    let add = |a: &Moments, b: &Moments, s: f64| -> Moments {
        [
            a[0] + s * b[0],
            a[1] + s * b[1],
            a[2] + s * b[2],
            a[3] + s * b[3],
            a[4] + s * b[4],
        ]
    };

    let mut t = t_start;
    for _ in 0..n_steps {
        let k1 = moment_rhs(params, branch_sign, diffusion(t), &y);
        let k2 = moment_rhs(params, branch_sign, diffusion(t + 0.5 * h), &add(&y, &k1, 0.5 * h));
        let k3 = moment_rhs(params, branch_sign, diffusion(t + 0.5 * h), &add(&y, &k2, 0.5 * h));
        let k4 = moment_rhs(params, branch_sign, diffusion(t + h), &add(&y, &k3, h));
        for i in 0..5 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    y
}

/// Integrate the moment flow from `t_from` to `t_to`, splitting at the time
/// origin so sgn(t) is constant on each branch (sgn is never evaluated at 0).
pub fn propagate_moments(
    params: &BrownianParams,
    mode: PropagationMode<'_>,
    state: &GaussianState,
    t_from: f64,
    t_to: f64,
) -> Result<GaussianState, BrownianError> {
    params.validate()?;
    state.validate()?;
    let gamma_eval = match mode {
        PropagationMode::MarkovSgn => None,
        PropagationMode::TimeDependentGamma(spec) => {
            let tau_max = t_from.abs().max(t_to.abs()) + 1e-9;
            Some(GammaEval::new(spec, tau_max))
        }
    };

    let mut y: Moments = [state.mean_q, state.mean_p, state.var_q, state.var_p, state.cov_qp];
    // Split the path at t = 0 into sign-definite branches.
    let mut legs: Vec<(f64, f64)> = Vec::new();
    if (t_from < 0.0 && t_to > 0.0) || (t_from > 0.0 && t_to < 0.0) {
        legs.push((t_from, 0.0));
        legs.push((0.0, t_to));
    } else {
        legs.push((t_from, t_to));
    }
    for (a, b) in legs {
        if a == b {
            continue;
        }
        // Branch sign = sign of the traversed times.
        let sign = if a + b != 0.0 { (0.5 * (a + b)).signum() } else { (b - a).signum() };
        y = rk4_branch(params, gamma_eval.as_ref(), sign, y, a, b);
    }
    Ok(GaussianState { mean_q: y[0], mean_p: y[1], var_q: y[2], var_p: y[3], cov_qp: y[4] })
}

/// Closed-form free-particle solution. All time dependence enters through
/// |t| and sgn(t); `n`, `a_im` and `b` are the even scalar coefficients of
/// the momentum-representation Gaussian
/// ρ(p, q) ∝ exp(-(q + sgn(t)·A·p)²/N - B·p²) with A = i·a_im, expressed in
/// ħ-scaled momentum labels: N = 2varP/ħ², B = varQ/2, a_im = |cov|/ħ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolution {
    pub n: f64,
    pub a_im: f64,
    pub b: f64,
    pub state: GaussianState,
}

/// Evaluate the free-particle closed form at time `t`. The solution solves
/// the two-sided Markovian master equation exactly: varP relaxes toward
/// D/γ = 2Mk_BT at rate 2γ|t|, cov is odd in t, varQ grows linearly at late
/// |t|. At t = 0 it reduces to the pure initial state (N = 1/σ², A = 0,
/// B = σ²/4).
pub fn analytic_solution(
    params: &BrownianParams,
    t: f64,
) -> Result<AnalyticSolution, BrownianError> {
    params.validate()?;
    if !matches!(params.potential, BrownianPotential::Free) {
        return Err(BrownianError::FreeParticleOnly);
    }
    let m = params.mass;
    let g = params.gamma;
    let hbar = params.hbar;
    let tau = t.abs();
    let s = if t == 0.0 { 0.0 } else { t.signum() };
    let init = params.initial_pure_state();

    let d = params.diffusion();
    let a_coef = d / g; // varP fixed point, 2Mk_BT
    let b_coef = init.var_p - a_coef;
    let e1 = (-g * tau).exp();
    let e2 = e1 * e1;

    let var_p = a_coef + b_coef * e2;
    // cov' = varP/M - γ·cov on the forward branch.
    let c_inf = a_coef / (m * g);
    let c_hom = init.cov_qp - c_inf + b_coef / (m * g);
    let cov_plus = c_inf - (b_coef / (m * g)) * e2 + c_hom * e1;
    // varQ' = 2 cov / M.
    let var_q = init.var_q
        + (2.0 / m)
            * (c_inf * tau - (b_coef / (2.0 * m * g * g)) * (1.0 - e2)
                + (c_hom / g) * (1.0 - e1));

    let state = GaussianState {
        mean_q: init.mean_q + s * init.mean_p / (m * g) * (1.0 - e1),
        mean_p: init.mean_p * e1,
        var_q,
        var_p,
        cov_qp: s * cov_plus,
    };
    Ok(AnalyticSolution {
        n: 2.0 * var_p / (hbar * hbar),
        a_im: cov_plus / hbar,
        b: 0.5 * var_q,
        state,
    })
}

/// One sample of an entropy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPoint {
    pub t: f64,
    pub entropy: f64,
    pub purity: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
    pub uncertainty_violated: bool,
}

/// Von Neumann entropy along a symmetric grid, from the Gaussian purity.
/// S(0) = 0 for the pure start and S(t) = S(-t); purities marginally above 1
/// (uncertainty violations of the non-CP map) are clamped and flagged.
pub fn entropy_curve(
    params: &BrownianParams,
    grid: &crate::grid::TimeGrid,
) -> Result<Vec<EntropyPoint>, BrownianError> {
    params.validate()?;
    if !grid.is_symmetric_about_zero() {
        return Err(BrownianError::AsymmetricGrid);
    }
    let init = params.initial_pure_state();
    let n = grid.len();
    let z = grid.zero_index();
    let mut states: Vec<GaussianState> = vec![init; n];

    match params.potential {
        BrownianPotential::Free => {
            for (i, slot) in states.iter_mut().enumerate() {
                *slot = analytic_solution(params, grid.time(i))?.state;
            }
        }
        BrownianPotential::Harmonic { .. } => {
            // Step outward from the origin on each branch.
            let mut fwd = init;
            for i in z + 1..n {
                fwd = propagate_moments(
                    params,
                    PropagationMode::MarkovSgn,
                    &fwd,
                    grid.time(i - 1),
                    grid.time(i),
                )?;
                states[i] = fwd;
            }
            let mut bwd = init;
            for step in 1..=z {
                let i = z - step;
                bwd = propagate_moments(
                    params,
                    PropagationMode::MarkovSgn,
                    &bwd,
                    grid.time(i + 1),
                    grid.time(i),
                )?;
                states[i] = bwd;
            }
        }
    }

    let mut points = Vec::with_capacity(n);
    for (i, st) in states.iter().enumerate() {
        let xi_raw = st.purity(params.hbar);
        let violated = st.uncertainty_violated(params.hbar);
        let xi = xi_raw.min(1.0);
        let entropy = quantum::entropy_from_purity(xi).map_err(|_| BrownianError::InvalidState {
            var_q: st.var_q,
            var_p: st.var_p,
        })?;
        points.push(EntropyPoint {
            t: grid.time(i),
            entropy,
            purity: xi_raw,
            var_q: st.var_q,
            var_p: st.var_p,
            cov_qp: st.cov_qp,
            uncertainty_violated: violated,
        });
    }
    Ok(points)
}

/// CSV export: `t,S_vN,purity,varQ,varP,covQP`.
pub fn write_entropy_csv<W: Write>(points: &[EntropyPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,S_vN,purity,varQ,varP,covQP")?;
    for p in points {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.t, p.entropy, p.purity, p.var_q, p.var_p, p.cov_qp
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use approx::assert_relative_eq;

    fn fig2_params() -> BrownianParams {
        BrownianParams {
            mass: 1.0,
            gamma: 1.0,
            k_b_t: 1.0,
            hbar: 1.0,
            sigma: 1.0,
            potential: BrownianPotential::Free,
        }
    }

    fn ohmic_bath(k_b_t: f64, cutoff: f64) -> BathSpec {
        BathSpec::ohmic(1.0, 1.0, cutoff, k_b_t, 1.0, Statistics::Quantum).unwrap()
    }

    #[test]
    fn gamma_vanishes_at_zero_and_is_odd() {
        let spec = ohmic_bath(2.0, 50.0);
        assert_eq!(gamma_coefficient(&spec, 0.0), 0.0);
        for &t in &[0.013, 0.4, 1.7, 6.3] {
            let plus = gamma_coefficient(&spec, t);
            let minus = gamma_coefficient(&spec, -t);
            assert!((plus + minus).abs() < 1e-8 * plus.abs().max(1.0));
        }
    }

    #[test]
    fn gamma_reaches_high_temperature_plateau() {
        // Γ(t) -> sgn(t)·2γMk_BT for |t| well past the cutoff time.
        let kbt = 1000.0;
        let spec = ohmic_bath(kbt, 100.0);
        let target = 2.0 * kbt;
        for &t in &[0.5, 1.0, 2.0, 5.0] {
            let g = gamma_coefficient(&spec, t);
            assert!((g - target).abs() / target < 0.02, "t={t}: {g} vs {target}");
            let gm = gamma_coefficient(&spec, -t);
            assert!((gm + target).abs() / target < 0.02);
        }
    }

    #[test]
    fn unitary_limit_preserves_purity() {
        // γ -> 0 surrogate: negligible γ, zero temperature, harmonic motion.
        let params = BrownianParams {
            mass: 1.0,
            gamma: 1e-12,
            k_b_t: 0.0,
            hbar: 1.0,
            sigma: 1.3,
            potential: BrownianPotential::Harmonic { omega0: 1.0 },
        };
        let init = params.initial_pure_state();
        for &t in &[0.5, 1.0, 2.0, -1.5] {
            let st =
                propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, t).unwrap();
            assert!((st.purity(params.hbar) - 1.0).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn moment_symmetry_under_time_reflection() {
        // Propagating to +t and -t from the same origin state gives equal
        // variances and opposite covariance.
        let params = fig2_params();
        let init = params.initial_pure_state();
        for &t in &[0.3, 1.0, 2.7] {
            let fwd =
                propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, t).unwrap();
            let bwd =
                propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, -t).unwrap();
            assert!((fwd.var_q - bwd.var_q).abs() < 1e-9);
            assert!((fwd.var_p - bwd.var_p).abs() < 1e-9);
            assert!((fwd.cov_qp + bwd.cov_qp).abs() < 1e-9);
        }
    }

    #[test]
    fn free_particle_momentum_variance_equilibrates_to_d_over_gamma() {
        // Fixed point of the moment flow: varP -> D/γ = 2Mk_BT under the
        // printed diffusion coefficient.
        let params = fig2_params();
        let init = params.initial_pure_state();
        let st =
            propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, 10.0).unwrap();
        let target = params.diffusion() / params.gamma;
        assert!((st.var_p - target).abs() / target < 0.01, "varP = {}", st.var_p);
        let st_b =
            propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, -10.0).unwrap();
        assert!((st_b.var_p - target).abs() / target < 0.01);
    }

    #[test]
    fn analytic_solution_at_origin_is_pure_with_printed_coefficients() {
        let params = BrownianParams { sigma: 1.7, ..fig2_params() };
        let sol = analytic_solution(&params, 0.0).unwrap();
        let s2 = params.sigma * params.sigma;
        assert_relative_eq!(sol.n, 1.0 / s2, max_relative = 1e-14);
        assert_eq!(sol.a_im, 0.0);
        assert_relative_eq!(sol.b, s2 / 4.0, max_relative = 1e-14);
        assert_relative_eq!(sol.state.purity(params.hbar), 1.0, max_relative = 1e-14);
        assert!(matches!(
            analytic_solution(
                &BrownianParams {
                    potential: BrownianPotential::Harmonic { omega0: 1.0 },
                    ..params
                },
                1.0
            ),
            Err(BrownianError::FreeParticleOnly)
        ));
    }

    #[test]
    fn analytic_coefficients_are_even_in_time() {
        let params = fig2_params();
        for &t in &[0.4, 1.1, 3.9] {
            let plus = analytic_solution(&params, t).unwrap();
            let minus = analytic_solution(&params, -t).unwrap();
            assert_eq!(plus.n, minus.n);
            assert_eq!(plus.a_im, minus.a_im);
            assert_eq!(plus.b, minus.b);
            assert_eq!(plus.state.cov_qp, -minus.state.cov_qp);
        }
    }

    #[test]
    fn analytic_matches_moment_ode() {
        // Closed form vs RK4 moment integration, three parameter sets, both
        // time directions; purity is the Fig. 2 functional.
        let sets = [
            (1.0, 1.0, 1.0, 1.0, 1.0),
            (2.0, 0.5, 0.7, 1.3, 0.8),
            (0.7, 1.8, 2.5, 0.4, 1.6),
        ];
        for &(m, g, kbt, hbar, sigma) in &sets {
            let params = BrownianParams {
                mass: m,
                gamma: g,
                k_b_t: kbt,
                hbar,
                sigma,
                potential: BrownianPotential::Free,
            };
            let init = params.initial_pure_state();
            for &t in &[-10.0, -2.0, -0.3, 0.5, 3.0, 10.0] {
                let ana = analytic_solution(&params, t).unwrap().state;
                let ode = propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, t)
                    .unwrap();
                let scale = ana.var_p.abs().max(ana.var_q.abs());
                assert!(
                    (ana.var_q - ode.var_q).abs() / scale < 1e-6
                        && (ana.var_p - ode.var_p).abs() / scale < 1e-6
                        && (ana.cov_qp - ode.cov_qp).abs() / scale < 1e-6,
                    "params {m},{g},{kbt},{hbar},{sigma} t={t}: {ana:?} vs {ode:?}"
                );
                assert!(
                    (ana.purity(hbar) - ode.purity(hbar)).abs() < 1e-6,
                    "purity mismatch at t={t}"
                );
            }
        }
    }

    #[test]
    fn markov_sgn_moment_map_is_a_two_sided_semigroup() {
        let params = BrownianParams {
            potential: BrownianPotential::Harmonic { omega0: 0.7 },
            ..fig2_params()
        };
        let init =
            GaussianState { mean_q: 0.3, mean_p: -0.2, var_q: 0.8, var_p: 0.9, cov_qp: 0.1 };
        for &(t1, t2) in &[(0.4, 0.9), (1.3, 0.2), (-0.5, -1.1), (-0.2, -0.7)] {
            let direct =
                propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, t1 + t2)
                    .unwrap();
            let mid =
                propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, t1).unwrap();
            let composed =
                propagate_moments(&params, PropagationMode::MarkovSgn, &mid, t1, t1 + t2)
                    .unwrap();
            for (a, b) in [
                (direct.var_q, composed.var_q),
                (direct.var_p, composed.var_p),
                (direct.cov_qp, composed.cov_qp),
                (direct.mean_q, composed.mean_q),
                (direct.mean_p, composed.mean_p),
            ] {
                assert!((a - b).abs() < 1e-9, "{a} vs {b} at ({t1},{t2})");
            }
        }
    }

    #[test]
    fn generator_reversal_maps_solutions_to_solutions() {
        // (cov -> -cov, t -> -t) conjugates the moment flow onto itself.
        let params = BrownianParams {
            potential: BrownianPotential::Harmonic { omega0: 1.2 },
            ..fig2_params()
        };
        let init =
            GaussianState { mean_q: 0.0, mean_p: 0.0, var_q: 0.6, var_p: 1.1, cov_qp: 0.25 };
        let t = 1.7;
        let fwd = propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, t).unwrap();
        let mirrored_init = GaussianState { cov_qp: -init.cov_qp, ..init };
        let bwd = propagate_moments(&params, PropagationMode::MarkovSgn, &mirrored_init, 0.0, -t)
            .unwrap();
        assert!((fwd.var_q - bwd.var_q).abs() < 1e-9);
        assert!((fwd.var_p - bwd.var_p).abs() < 1e-9);
        assert!((fwd.cov_qp + bwd.cov_qp).abs() < 1e-9);
    }

    #[test]
    fn pre_markov_mode_converges_to_markovian_limit() {
        // Λ and k_BT large together: the Γ(t) flow matches the sgn(t)·D flow
        // within 2% for |t| > 10/Λ.
        let cutoff = 200.0;
        let kbt = 2000.0;
        let bath_spec = ohmic_bath(kbt, cutoff);
        let params = BrownianParams { k_b_t: kbt, ..fig2_params() };
        let init = params.initial_pure_state();
        for &t in &[0.2, 0.5, 1.0, 2.0, -0.5, -2.0] {
            let markov =
                propagate_moments(&params, PropagationMode::MarkovSgn, &init, 0.0, t).unwrap();
            let pre = propagate_moments(
                &params,
                PropagationMode::TimeDependentGamma(&bath_spec),
                &init,
                0.0,
                t,
            )
            .unwrap();
            let rel = (markov.var_p - pre.var_p).abs() / markov.var_p;
            assert!(rel < 0.02, "t={t}: varP {} vs {}", markov.var_p, pre.var_p);
        }
    }

    #[test]
    fn entropy_curve_is_symmetric_zero_at_origin_and_increasing() {
        let params = fig2_params();
        let grid = TimeGrid::symmetric(10.0, 0.05).unwrap();
        let points = entropy_curve(&params, &grid).unwrap();
        let z = grid.zero_index();
        assert!(points[z].entropy.abs() <= 1e-9);
        let n = points.len();
        for i in 0..n {
            assert!((points[i].entropy - points[n - 1 - i].entropy).abs() <= 1e-9);
        }
        // Strictly increasing in |t| on the forward side.
        for i in z + 1..n {
            assert!(
                points[i].entropy > points[i - 1].entropy,
                "not increasing at t={}",
                points[i].t
            );
        }
    }

    #[test]
    fn entropy_csv_round_trips_columns() {
        let params = fig2_params();
        let grid = TimeGrid::symmetric(1.0, 0.5).unwrap();
        let points = entropy_curve(&params, &grid).unwrap();
        let mut buf = Vec::new();
        write_entropy_csv(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,S_vN,purity,varQ,varP,covQP");
        assert_eq!(lines.count(), points.len());
    }
}
