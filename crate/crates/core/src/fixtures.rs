//! Small systems with hand-computable Gramians, shared by tests and docs.

use nalgebra::dmatrix;

use crate::system::{GeneratorSpec, ImpulseStage, ImpulsiveSystem, SystemDefinition};
use crate::wave::{WaveImpulse, WaveModel};
use crate::Matrix;

/// Scalar system: `A = 0`, `B = 1`, `b = 1`, one impulse at `t_1 = 0.5` with
/// `C_1 = 0.5`, `D_1 = 1`. Gramians: `Γ = 0.5`, `Θ = 1.125`, `Γ̃ = 1`,
/// `Θ̃ = 0`, `W = 2.625`.
pub fn s1() -> ImpulsiveSystem {
    ImpulsiveSystem::new(SystemDefinition {
        generator: GeneratorSpec::Dense(dmatrix![0.0]),
        b: dmatrix![1.0],
        horizon: 1.0,
        stages: vec![ImpulseStage { t: 0.5, c: dmatrix![0.5], d: dmatrix![1.0] }],
    })
    .expect("fixture S1 is valid")
}

/// Uncontrollable: `A = 0` (2×2), `B = e₁`, `b = 1`, no impulses, so
/// `W = diag(1, 0)`.
pub fn s2() -> ImpulsiveSystem {
    ImpulsiveSystem::new(SystemDefinition {
        generator: GeneratorSpec::Dense(Matrix::zeros(2, 2)),
        b: dmatrix![1.0; 0.0],
        horizon: 1.0,
        stages: vec![],
    })
    .expect("fixture S2 is valid")
}

/// Scalar system with `A = 0`, `B = 1`, `b = 1` and impulses at 1/3 and 2/3
/// whose jump factors `1 + C_k` are `first` and `second`; `D_k = 1`.
pub fn two_stage_scalar(first: f64, second: f64) -> ImpulsiveSystem {
    ImpulsiveSystem::new(SystemDefinition {
        generator: GeneratorSpec::Dense(dmatrix![0.0]),
        b: dmatrix![1.0],
        horizon: 1.0,
        stages: vec![
            ImpulseStage { t: 1.0 / 3.0, c: dmatrix![first - 1.0], d: dmatrix![1.0] },
            ImpulseStage { t: 2.0 / 3.0, c: dmatrix![second - 1.0], d: dmatrix![1.0] },
        ],
    })
    .expect("two-stage fixture is valid")
}

/// Three-mode wave model with control shape `γ_m = 1/m`, zero initial data,
/// one fixed impulse at `t = 1` (`a = (0.1, 0, 0)`, `b = (0, 0.2, 0)`) and
/// `b = 1 + 2π`. `λ_min(Γ) = π/9`.
pub fn w3() -> WaveModel {
    WaveModel {
        gamma: vec![1.0, 0.5, 1.0 / 3.0],
        alpha: vec![0.0; 3],
        beta: vec![0.0; 3],
        impulses: vec![WaveImpulse { t: 1.0, a: vec![0.1, 0.0, 0.0], b: vec![0.0, 0.2, 0.0] }],
        horizon: 1.0 + 2.0 * std::f64::consts::PI,
    }
}
