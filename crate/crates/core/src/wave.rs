//! Truncated impulsive wave equation on `(0, π)` with Dirichlet ends,
//! controlled through a fixed spatial shape `h(θ) = Σ γ_m sin mθ`.
//!
//! A state `(a, b)` with `a(θ) = Σ α_m sin mθ`, `b(θ) = Σ β_m sin mθ` lives in
//! the energy space with `‖(a, b)‖² = Σ (m²α_m² + β_m²)`. We store it in
//! canonical coordinates `(mα_m, β_m)`, block `m` at indices `2(m-1)` and
//! `2(m-1)+1`, where that norm is Euclidean and the free evolution is a
//! rotation by angle `mt` in each block.

use std::f64::consts::PI;

use crate::control::{ControlLaw, ControlPair};
use crate::controllability::{
    default_schedule, positivity_test, resolvent_decay, ResolventDecay, DEFAULT_DECAY_TOL, DEFAULT_RANK_TOL,
};
use crate::linalg::symmetric_eigenvalues;
use crate::propagation::simulate;
use crate::quadrature::QuadratureConfig;
use crate::synthesis::{ImpulseMode, Steering, SynthesisResult};
use crate::system::{GeneratorSpec, ImpulseStage, ImpulsiveSystem, SystemDefinition};
use crate::{Error, Matrix, Result, StateVector};

/// Uniform θ points on `[0, π]` in profile output.
pub const THETA_POINTS: usize = 257;

/// Fixed jump `Δx = a_i`, `Δx_t = b_i` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveImpulse {
    pub t: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveModel {
    /// Sine coefficients of the control shape; its length is the truncation.
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub impulses: Vec<WaveImpulse>,
    pub horizon: f64,
}

fn check_coeffs(what: &str, v: &[f64], modes: usize) -> Result<()> {
    if v.len() != modes {
        return Err(Error::InvalidModel(format!("{what} has {} coefficients, expected {modes}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel(format!("non-finite coefficient in {what}")));
    }
    Ok(())
}

fn resized(v: &[f64], modes: usize) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().copied().take(modes).collect();
    out.resize(modes, 0.0);
    out
}

impl WaveModel {
    pub fn modes(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let modes = self.modes();
        if modes == 0 {
            return Err(Error::InvalidModel("at least one mode is required".into()));
        }
        check_coeffs("gamma", &self.gamma, modes)?;
        check_coeffs("alpha", &self.alpha, modes)?;
        check_coeffs("beta", &self.beta, modes)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidModel(format!("horizon {} must be positive", self.horizon)));
        }
        let mut previous = 0.0;
        for (i, imp) in self.impulses.iter().enumerate() {
            check_coeffs(&format!("impulse {} a", i + 1), &imp.a, modes)?;
            check_coeffs(&format!("impulse {} b", i + 1), &imp.b, modes)?;
            if !(imp.t > previous && imp.t < self.horizon) {
                return Err(Error::InvalidModel(format!(
                    "impulse {} at t = {} is not increasing inside (0, b)",
                    i + 1,
                    imp.t
                )));
            }
            previous = imp.t;
        }
        Ok(())
    }

    /// The same model truncated or zero-padded to `modes` modes. The control
    /// shape must already have at least `modes` coefficients.
    pub fn with_modes(&self, modes: usize) -> Result<WaveModel> {
        if modes == 0 || modes > self.gamma.len() {
            return Err(Error::InvalidModel(format!(
                "cannot use {modes} modes with {} control-shape coefficients",
                self.gamma.len()
            )));
        }
        Ok(WaveModel {
            gamma: self.gamma[..modes].to_vec(),
            alpha: resized(&self.alpha, modes),
            beta: resized(&self.beta, modes),
            impulses: self
                .impulses
                .iter()
                .map(|imp| WaveImpulse { t: imp.t, a: resized(&imp.a, modes), b: resized(&imp.b, modes) })
                .collect(),
            horizon: self.horizon,
        })
    }

    pub fn initial_state(&self) -> StateVector {
        canonical(&self.alpha, &self.beta)
    }

    pub fn last_impulse_time(&self) -> f64 {
        self.impulses.last().map(|imp| imp.t).unwrap_or(0.0)
    }

    /// Requires at least one full period `2π` after the last impulse.
    pub fn check_full_period(&self) -> Result<()> {
        let available = self.horizon - self.last_impulse_time();
        if available < 2.0 * PI {
            return Err(Error::HorizonTooShort { available, required: 2.0 * PI });
        }
        Ok(())
    }
}

/// `(α, β) ↦ (mα_m, β_m)` per mode.
pub fn canonical(alpha: &[f64], beta: &[f64]) -> StateVector {
    let modes = alpha.len().max(beta.len());
    StateVector::from_fn(2 * modes, |i, _| {
        let m = i / 2;
        if i % 2 == 0 {
            (m + 1) as f64 * alpha.get(m).copied().unwrap_or(0.0)
        } else {
            beta.get(m).copied().unwrap_or(0.0)
        }
    })
}

/// Inverse of [`canonical`].
pub fn from_canonical(x: &StateVector) -> (Vec<f64>, Vec<f64>) {
    let modes = x.len() / 2;
    let alpha = (0..modes).map(|m| x[2 * m] / (m + 1) as f64).collect();
    let beta = (0..modes).map(|m| x[2 * m + 1]).collect();
    (alpha, beta)
}

/// Displacement `Σ α_m sin mθ` of a canonical state at each `θ`.
pub fn displacement(x: &StateVector, thetas: &[f64]) -> Vec<f64> {
    let (alpha, _) = from_canonical(x);
    thetas
        .iter()
        .map(|&theta| alpha.iter().enumerate().map(|(m, a)| a * ((m + 1) as f64 * theta).sin()).sum())
        .collect()
}

pub fn theta_grid() -> Vec<f64> {
    (0..THETA_POINTS).map(|i| PI * i as f64 / (THETA_POINTS - 1) as f64).collect()
}

/// Impulse `i` (0-based) in canonical coordinates.
pub fn impulse_canonical(wm: &WaveModel, i: usize) -> StateVector {
    let imp = &wm.impulses[i];
    canonical(&imp.a, &imp.b)
}

/// Rotation blocks with frequencies `1..=M`, `B` with blocks `(0, γ_m)`,
/// `C_k = 0`, and each `D_k` the canonical impulse as a single column, fired
/// with `v_k = 1` (see [`fixed_impulse_controls`]).
pub fn build_wave_system(wm: &WaveModel) -> Result<ImpulsiveSystem> {
    wm.validate()?;
    let modes = wm.modes();
    let n = 2 * modes;
    let b = Matrix::from_fn(n, 1, |i, _| if i % 2 == 1 { wm.gamma[i / 2] } else { 0.0 });
    let stages = (0..wm.impulses.len())
        .map(|i| ImpulseStage {
            t: wm.impulses[i].t,
            c: Matrix::zeros(n, n),
            d: Matrix::from_column_slice(n, 1, impulse_canonical(wm, i).as_slice()),
        })
        .collect();
    ImpulsiveSystem::new(SystemDefinition {
        generator: GeneratorSpec::SpectralBlocks((1..=modes).map(|m| m as f64).collect()),
        b,
        horizon: wm.horizon,
        stages,
    })
}

/// Unit amplitudes that fire every impulse exactly as prescribed.
pub fn fixed_impulse_controls(wm: &WaveModel) -> Vec<StateVector> {
    vec![StateVector::from_element(1, 1.0); wm.impulses.len()]
}

/// `B*S*(b-t)φ = Σ γ_m (mα_m sin m(b-t) + β_m cos m(b-t))` for
/// `t_p ≤ t ≤ b`, summed directly from the series.
pub fn adjoint_trace(wm: &WaveModel, phi: &StateVector, t: f64) -> Result<f64> {
    let (lo, hi) = (wm.last_impulse_time(), wm.horizon);
    if !(lo..=hi).contains(&t) {
        return Err(Error::TimeOutOfRange { t, lo, hi });
    }
    if phi.len() != 2 * wm.modes() {
        return Err(Error::DimensionMismatch { what: "wave state", expected: 2 * wm.modes(), got: phi.len() });
    }
    let tau = wm.horizon - t;
    Ok(wm
        .gamma
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let (s, c) = ((i + 1) as f64 * tau).sin_cos();
            g * (phi[2 * i] * s + phi[2 * i + 1] * c)
        })
        .sum())
}

/// Recovers `(mγ_mα_m, γ_mβ_m)` for every mode from one period of the trace
/// `s ↦ B*S*(s)φ`, `s ∈ [0, 2π]`, by
/// `(1/π)∫ trace(s) sin ms ds` and `(1/π)∫ trace(s) cos ms ds`.
pub fn fourier_recovery<F: Fn(f64) -> f64>(
    wm: &WaveModel,
    q: &QuadratureConfig,
    trace: F,
) -> Result<Vec<(f64, f64)>> {
    wm.check_full_period()?;
    let nodes = q.nodes(0.0, 2.0 * PI, &[]);
    let values: Vec<f64> = nodes.iter().map(|n| trace(n.s)).collect();
    Ok((1..=wm.modes())
        .map(|m| {
            let m = m as f64;
            let (mut sin_part, mut cos_part) = (0.0, 0.0);
            for (node, v) in nodes.iter().zip(&values) {
                let (s, c) = (m * node.s).sin_cos();
                sin_part += node.w * v * s;
                cos_part += node.w * v * c;
            }
            (sin_part / PI, cos_part / PI)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveDemoOptions {
    pub epsilon: f64,
    pub profile_times: usize,
    /// Fixed (default) keeps the prescribed impulses as data.
    pub free_impulses: bool,
    pub rank_tol: f64,
}

impl Default for WaveDemoOptions {
    fn default() -> Self {
        WaveDemoOptions { epsilon: 1e-6, profile_times: 65, free_impulses: false, rank_tol: DEFAULT_RANK_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub t: f64,
    pub theta: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveDemoReport {
    pub system: ImpulsiveSystem,
    pub gamma_eigenvalues: Vec<f64>,
    pub gamma_lambda_min: f64,
    pub synthesis_lambda_min: f64,
    pub controllable_at_truncation: bool,
    /// Resolvent decay of `h - x_free` under the synthesis Gramian.
    pub resolvent: ResolventDecay,
    pub target: StateVector,
    pub synthesis: SynthesisResult,
    /// `max_θ |x(b, θ) - target(θ)|` on the θ grid.
    pub terminal_profile_error: f64,
    pub profile: Vec<ProfilePoint>,
}

pub fn wave_demo(
    wm: &WaveModel,
    target_alpha: &[f64],
    target_beta: &[f64],
    q: &QuadratureConfig,
    options: &WaveDemoOptions,
) -> Result<WaveDemoReport> {
    let system = build_wave_system(wm)?;
    wm.check_full_period()?;
    let modes = wm.modes();
    check_coeffs("target alpha", target_alpha, modes)?;
    check_coeffs("target beta", target_beta, modes)?;
    if options.profile_times < 2 {
        return Err(Error::InvalidParameter("at least two profile times are required".into()));
    }

    let mode = if options.free_impulses {
        ImpulseMode::Free
    } else {
        ImpulseMode::Fixed(fixed_impulse_controls(wm))
    };
    let steering = Steering::new(&system, q, mode)?;
    let gamma_eigenvalues = symmetric_eigenvalues(&steering.gramians().gamma);
    let gamma_lambda_min = gamma_eigenvalues[0];
    let (synthesis_lambda_min, controllable_at_truncation) =
        positivity_test(steering.synthesis_gramian(), options.rank_tol)?;

    let x0 = wm.initial_state();
    let target = canonical(target_alpha, target_beta);
    let drive = &target - steering.uncontrolled_terminal(&x0)?;
    let resolvent = resolvent_decay(steering.synthesis_gramian(), &drive, &default_schedule(), DEFAULT_DECAY_TOL)?;
    let synthesis = steering.steer(&x0, &target, options.epsilon)?;

    let thetas = theta_grid();
    let err: Vec<f64> = displacement(&synthesis.achieved_error, &thetas);
    let terminal_profile_error = err.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let b = wm.horizon;
    let times: Vec<f64> = (0..options.profile_times)
        .map(|i| if i + 1 == options.profile_times { b } else { b * i as f64 / (options.profile_times - 1) as f64 })
        .collect();
    let traj = simulate(&system, q, &x0, &synthesis.control, &times)?;
    let mut profile = Vec::with_capacity(times.len() * thetas.len());
    for sample in traj.samples.iter().filter(|s| s.side != crate::propagation::Side::Right && times.contains(&s.t)) {
        for (theta, x) in thetas.iter().zip(displacement(&sample.x, &thetas)) {
            profile.push(ProfilePoint { t: sample.t, theta: *theta, x });
        }
    }

    Ok(WaveDemoReport {
        system,
        gamma_eigenvalues,
        gamma_lambda_min,
        synthesis_lambda_min,
        controllable_at_truncation,
        resolvent,
        target,
        synthesis,
        terminal_profile_error,
        profile,
    })
}

/// The control trace `u(t)` at `count` uniform times on `[0, b]`.
pub fn control_trace(sys: &ImpulsiveSystem, law: &ControlLaw, count: usize) -> Result<Vec<(f64, StateVector)>> {
    let b = sys.horizon();
    (0..count)
        .map(|i| {
            let t = if count <= 1 { 0.0 } else { b * i as f64 / (count - 1) as f64 };
            Ok((t, law.eval(sys, t)?))
        })
        .collect()
}

/// A zero-control pair that fires the prescribed impulses.
pub fn prescribed_impulses(wm: &WaveModel, sys: &ImpulsiveSystem) -> Result<ControlPair> {
    ControlPair::new(sys, ControlLaw::zero(sys), fixed_impulse_controls(wm))
}
