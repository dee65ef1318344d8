//! Mixed-state evolution with coin-factor noise.
//!
//! Both channels act on the polarization (coin) factor only and are lifted
//! to the joint space as `E ⊗ 1_position`. In block form, with
//! `ρ = [[A, B], [B†, D]]` split by coin value,
//!
//! * amplitude damping: `[[A + γD, √(1-γ) B], [√(1-γ) B†, (1-γ) D]]`
//! * depolarizing: `(γ/2) 1_coin ⊗ (A + D) + (1-γ) ρ`

use nalgebra::SymmetricEigen;

use crate::walk::{
    coin_operator, initial_state, max_abs_diff, shift_operator, CMatrix, PureState,
    UnitaryOperator, WalkConfig,
};
use crate::{QsdcError, Result, C64};

/// Density matrix on a finite space (normally coin ⊗ position, dimension 2k).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace (1e-10) and positivity (-1e-9).
    pub fn new_checked(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QsdcError::Shape {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let rho = Self { matrix };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > 1e-10 {
            return Err(QsdcError::Domain(format!(
                "density matrix is not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(QsdcError::Domain(format!("trace is {tr}, expected 1")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(QsdcError::Domain(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Position dimension of a coin ⊗ position matrix.
    pub fn k(&self) -> usize {
        self.dim() / 2
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &PureState) -> f64 {
        let v = psi.amplitudes();
        v.dotc(&(&self.matrix * v)).re
    }
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Either representation of a walk state.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn k(&self) -> usize {
        match self {
            Self::Pure(s) => s.k(),
            Self::Mixed(r) => r.k(),
        }
    }

    pub fn position_distribution(&self) -> Vec<f64> {
        match self {
            Self::Pure(s) => crate::walk::position_distribution(s),
            Self::Mixed(r) => position_distribution(r),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            Self::Pure(s) => to_density(s),
            Self::Mixed(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    None,
    AmplitudeDamping,
    Depolarizing,
}

/// Where the channel is inserted within one walk step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NoisePlacement {
    /// Once, after the full step `S_k C`.
    PerStep,
    /// After each polarization-touching element: after the coin and again
    /// after the shift.
    #[default]
    PerElement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub gamma: f64,
    pub placement: NoisePlacement,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            gamma: 0.0,
            placement: NoisePlacement::default(),
        }
    }

    pub fn new(kind: NoiseKind, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            kind,
            gamma,
            placement: NoisePlacement::default(),
        })
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        Self::new(NoiseKind::AmplitudeDamping, gamma)
    }

    pub fn depolarizing(gamma: f64) -> Result<Self> {
        Self::new(NoiseKind::Depolarizing, gamma)
    }

    pub fn with_placement(mut self, placement: NoisePlacement) -> Self {
        self.placement = placement;
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.kind == NoiseKind::None || self.gamma == 0.0
    }

    /// One application of the channel.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self.kind {
            NoiseKind::None => Ok(rho.clone()),
            NoiseKind::AmplitudeDamping => amplitude_damping_step(rho, self.gamma),
            NoiseKind::Depolarizing => depolarizing_step(rho, self.gamma),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(QsdcError::ParameterDomain {
            name: "gamma",
            value: gamma,
            expected: "0 <= gamma <= 1",
        });
    }
    Ok(())
}

fn check_joint(rho: &DensityMatrix) -> Result<usize> {
    if !rho.dim().is_multiple_of(2) || rho.dim() < 4 {
        return Err(QsdcError::Shape {
            expected: 2 * rho.k().max(2),
            actual: rho.dim(),
        });
    }
    Ok(rho.k())
}

pub fn to_density(state: &PureState) -> DensityMatrix {
    let v = state.amplitudes();
    DensityMatrix::from_matrix_unchecked(v * v.adjoint())
}

/// `U ρ U†`.
pub fn apply_unitary(rho: &DensityMatrix, u: &UnitaryOperator) -> Result<DensityMatrix> {
    if rho.dim() != u.dim() {
        return Err(QsdcError::Shape {
            expected: u.dim(),
            actual: rho.dim(),
        });
    }
    let m = u.matrix();
    Ok(DensityMatrix::from_matrix_unchecked(
        m * &rho.matrix * m.adjoint(),
    ))
}

/// Kraus pair `E0 = diag(1, √(1-γ))`, `E1 = √γ |0⟩⟨1|` on the coin.
pub fn amplitude_damping_step(rho: &DensityMatrix, gamma_a: f64) -> Result<DensityMatrix> {
    check_gamma(gamma_a)?;
    let k = check_joint(rho)?;
    let m = &rho.matrix;
    let s = (1.0 - gamma_a).sqrt();
    let mut out = m.clone();
    {
        let d = m.view((k, k), (k, k)).clone_owned();
        let mut a = out.view_mut((0, 0), (k, k));
        a += d.map(|z| z * gamma_a);
    }
    out.view_mut((0, k), (k, k)).scale_mut(s);
    out.view_mut((k, 0), (k, k)).scale_mut(s);
    out.view_mut((k, k), (k, k)).scale_mut(1.0 - gamma_a);
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// `ρ ↦ (γ/2) 1_coin ⊗ Tr_coin ρ + (1-γ) ρ`.
pub fn depolarizing_step(rho: &DensityMatrix, gamma_d: f64) -> Result<DensityMatrix> {
    check_gamma(gamma_d)?;
    let k = check_joint(rho)?;
    let m = &rho.matrix;
    let position = m.view((0, 0), (k, k)) + m.view((k, k), (k, k));
    let mut out = m.map(|z| z * (1.0 - gamma_d));
    let half = position.map(|z| z * (gamma_d / 2.0));
    {
        let mut a = out.view_mut((0, 0), (k, k));
        a += &half;
    }
    {
        let mut d = out.view_mut((k, k), (k, k));
        d += &half;
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Position marginal of a coin ⊗ position density matrix.
pub fn position_distribution(rho: &DensityMatrix) -> Vec<f64> {
    let k = rho.k();
    (0..k)
        .map(|x| rho.matrix[(x, x)].re + rho.matrix[(k + x, k + x)].re)
        .collect()
}

/// Precomputed pieces of one noisy walk step.
#[derive(Debug, Clone)]
pub struct NoisyStep {
    coin: UnitaryOperator,
    shift: UnitaryOperator,
    step: UnitaryOperator,
    noise: NoiseSpec,
}

impl NoisyStep {
    pub fn new(config: &WalkConfig, noise: NoiseSpec) -> Result<Self> {
        check_gamma(noise.gamma)?;
        let coin = coin_operator(config)?;
        let shift = shift_operator(config.k)?;
        let step = shift.compose(&coin);
        Ok(Self {
            coin,
            shift,
            step,
            noise,
        })
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if self.noise.is_noiseless() {
            return apply_unitary(rho, &self.step);
        }
        match self.noise.placement {
            NoisePlacement::PerStep => self.noise.apply(&apply_unitary(rho, &self.step)?),
            NoisePlacement::PerElement => {
                let after_coin = self.noise.apply(&apply_unitary(rho, &self.coin)?)?;
                self.noise.apply(&apply_unitary(&after_coin, &self.shift)?)
            }
        }
    }
}

/// Evolves `rho` through `t` noisy steps.
pub fn evolve_density(
    rho: &DensityMatrix,
    config: &WalkConfig,
    noise: NoiseSpec,
    t: usize,
) -> Result<DensityMatrix> {
    let step = NoisyStep::new(config, noise)?;
    let mut out = rho.clone();
    for _ in 0..t {
        out = step.apply(&out)?;
    }
    Ok(out)
}

/// States at `t = 0, 1, …, t_max` from `initial_state(config, 0)`.
pub fn noisy_trajectory(
    config: &WalkConfig,
    noise: NoiseSpec,
    t_max: usize,
) -> Result<Vec<DensityMatrix>> {
    let step = NoisyStep::new(config, noise)?;
    let mut rho = to_density(&initial_state(config, 0)?);
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(rho.clone());
    for _ in 0..t_max {
        rho = step.apply(&rho)?;
        out.push(rho.clone());
    }
    Ok(out)
}

pub fn noisy_evolve(config: &WalkConfig, noise: NoiseSpec, t: usize) -> Result<DensityMatrix> {
    let rho0 = to_density(&initial_state(config, 0)?);
    evolve_density(&rho0, config, noise, t)
}

pub fn return_probability_noisy(config: &WalkConfig, noise: NoiseSpec, t: usize) -> Result<f64> {
    Ok(position_distribution(&noisy_evolve(config, noise, t)?)[0])
}

/// Convenience for building a density matrix from a flat row-major slice.
pub fn density_from_rows(dim: usize, entries: &[C64]) -> Result<DensityMatrix> {
    if entries.len() != dim * dim {
        return Err(QsdcError::Shape {
            expected: dim * dim,
            actual: entries.len(),
        });
    }
    DensityMatrix::new_checked(CMatrix::from_row_slice(dim, dim, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::reduced_coin;
    use crate::walk::evolve;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn five() -> WalkConfig {
        WalkConfig::table1(5).unwrap()
    }

    /// Kraus application built from explicit Kronecker products, kept
    /// separate from the block formulas above.
    fn kraus_oracle(rho: &DensityMatrix, kraus: &[CMatrix]) -> CMatrix {
        let k = rho.k();
        let id = CMatrix::identity(k, k);
        kraus.iter().fold(CMatrix::zeros(2 * k, 2 * k), |acc, e| {
            let full = e.kronecker(&id);
            acc + &full * rho.matrix() * full.adjoint()
        })
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn walked(t: usize) -> DensityMatrix {
        let cfg = five();
        to_density(&evolve(&initial_state(&cfg, 1).unwrap(), &cfg, t).unwrap())
    }

    #[test]
    fn projector_examples() {
        let rho = to_density(&PureState::basis(3, 1, 2).unwrap());
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == 5 && j == 5 { 1.0 } else { 0.0 };
                assert_eq!(rho.matrix()[(i, j)], c(expected));
            }
        }
        let h = FRAC_1_SQRT_2;
        let mut v = vec![C64::new(0.0, 0.0); 6];
        v[1] = c(h);
        v[4] = c(h);
        let rho = to_density(&PureState::from_amplitudes(3, v).unwrap());
        for (i, j) in [(1, 1), (1, 4), (4, 1), (4, 4)] {
            assert!((rho.matrix()[(i, j)] - c(0.5)).norm() < 1e-15);
        }
        assert!((walked(17).purity() - 1.0).abs() < 1e-10);
        walked(17).validate().unwrap();
    }

    #[test]
    fn unitary_conjugation() {
        let rho = walked(7);
        let same = apply_unitary(&rho, &UnitaryOperator::identity(10)).unwrap();
        assert_eq!(same, rho);

        let step = five().step_operator().unwrap();
        let moved = apply_unitary(&rho, &step).unwrap();
        assert!((moved.trace() - 1.0).abs() < 1e-12);

        let cfg = five();
        let psi = initial_state(&cfg, 0).unwrap();
        let mut r = to_density(&psi);
        for _ in 0..60 {
            r = apply_unitary(&r, &step).unwrap();
        }
        let direct = to_density(&evolve(&psi, &cfg, 60).unwrap());
        assert!(max_abs_diff(r.matrix(), direct.matrix()) < 1e-9);

        assert!(apply_unitary(&rho, &UnitaryOperator::identity(8)).is_err());
    }

    #[test]
    fn amplitude_damping_matches_kraus_oracle() {
        let rho = walked(13);
        for gamma in [0.0f64, 0.1, 0.37, 1.0] {
            let e0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())]);
            let e1 = CMatrix::from_row_slice(2, 2, &[c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)]);
            let out = amplitude_damping_step(&rho, gamma).unwrap();
            assert!(max_abs_diff(out.matrix(), &kraus_oracle(&rho, &[e0, e1])) < 1e-14);
            assert!((out.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_examples() {
        let rho = walked(9);
        assert_eq!(amplitude_damping_step(&rho, 0.0).unwrap(), rho);

        let full = amplitude_damping_step(&rho, 1.0).unwrap();
        let coin = reduced_coin(&full).unwrap();
        assert!((coin.matrix()[(0, 0)] - c(1.0)).norm() < 1e-12);
        assert!(coin.matrix()[(1, 1)].norm() < 1e-12);
        assert!(coin.matrix()[(0, 1)].norm() < 1e-12);

        let excited = to_density(&PureState::basis(5, 1, 3).unwrap());
        let half = amplitude_damping_step(&excited, 0.5).unwrap();
        let coin = reduced_coin(&half).unwrap();
        assert!((coin.matrix()[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!((coin.matrix()[(1, 1)] - c(0.5)).norm() < 1e-15);

        assert!(matches!(
            amplitude_damping_step(&rho, 1.5),
            Err(QsdcError::ParameterDomain { name: "gamma", .. })
        ));
    }

    #[test]
    fn depolarizing_matches_oracle() {
        // (γ/2) 1 ⊗ Tr_coin ρ + (1-γ) ρ written through the Pauli twirl:
        // (1 - 3γ/4) ρ + (γ/4) Σ σ ρ σ.
        let rho = walked(21);
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let y = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0)],
        );
        let z = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        for gamma in [0.0, 0.2, 0.5, 1.0] {
            let paulis = kraus_oracle(&rho, &[x.clone(), y.clone(), z.clone()]);
            let expected = rho.matrix().map(|v| v * (1.0 - 0.75 * gamma)) + paulis.map(|v| v * (gamma / 4.0));
            let out = depolarizing_step(&rho, gamma).unwrap();
            assert!(max_abs_diff(out.matrix(), &expected) < 1e-14);
        }
    }

    #[test]
    fn depolarizing_examples() {
        let rho = walked(4);
        assert_eq!(depolarizing_step(&rho, 0.0).unwrap(), rho);

        let coin = reduced_coin(&depolarizing_step(&rho, 1.0).unwrap()).unwrap();
        assert!((coin.matrix()[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!((coin.matrix()[(1, 1)] - c(0.5)).norm() < 1e-15);
        assert!(coin.matrix()[(0, 1)].norm() < 1e-15);

        let ground = to_density(&PureState::basis(5, 0, 2).unwrap());
        let coin = reduced_coin(&depolarizing_step(&ground, 0.5).unwrap()).unwrap();
        assert!((coin.matrix()[(0, 0)] - c(0.75)).norm() < 1e-15);
        assert!((coin.matrix()[(1, 1)] - c(0.25)).norm() < 1e-15);

        assert!(depolarizing_step(&rho, -0.01).is_err());
    }

    #[test]
    fn zero_gamma_depolarizing_is_exactly_identity_when_iterated() {
        let rho = walked(11);
        let mut out = rho.clone();
        for _ in 0..50 {
            out = depolarizing_step(&out, 0.0).unwrap();
        }
        assert_eq!(out, rho);
    }

    #[test]
    fn noiseless_evolution_matches_pure_walk() {
        let cfg = five();
        let traj = noisy_trajectory(&cfg, NoiseSpec::none(), 120).unwrap();
        let psi = initial_state(&cfg, 0).unwrap();
        for (t, rho) in traj.iter().enumerate() {
            let pure = to_density(&evolve(&psi, &cfg, t).unwrap());
            assert!(max_abs_diff(rho.matrix(), pure.matrix()) < 1e-9, "t = {t}");
        }
        let p = return_probability_noisy(&cfg, NoiseSpec::none(), 60).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_return_probability_anchors() {
        let cfg = five();
        assert!((return_probability_noisy(&cfg, NoiseSpec::amplitude_damping(0.3).unwrap(), 0).unwrap() - 1.0).abs() < 1e-15);

        let ad = NoiseSpec::amplitude_damping(0.0007).unwrap();
        let p = return_probability_noisy(&cfg, ad, 60).unwrap();
        assert!((p - 0.97).abs() <= 0.01, "{p}");

        let dep = NoiseSpec::depolarizing(0.01).unwrap();
        assert!(return_probability_noisy(&cfg, dep, 60).unwrap() > 0.5);
        let ad = NoiseSpec::amplitude_damping(0.01).unwrap();
        assert!(return_probability_noisy(&cfg, ad, 60).unwrap() > 0.5);
    }

    #[test]
    fn once_per_step_placement_overshoots_the_anchor() {
        let noise = NoiseSpec::amplitude_damping(0.0007)
            .unwrap()
            .with_placement(NoisePlacement::PerStep);
        let p = return_probability_noisy(&five(), noise, 60).unwrap();
        assert!((p - 0.98648).abs() < 1e-4, "{p}");
    }

    #[test]
    fn strong_noise_saturates_at_uniform_position() {
        for noise in [
            NoiseSpec::amplitude_damping(0.5).unwrap(),
            NoiseSpec::depolarizing(0.5).unwrap(),
        ] {
            let p = return_probability_noisy(&five(), noise, 60).unwrap();
            assert!((p - 0.2).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn damage_at_recurrence_is_monotone_in_gamma() {
        let cfg = five();
        for placement in [NoisePlacement::PerStep, NoisePlacement::PerElement] {
            for kind in [NoiseKind::AmplitudeDamping, NoiseKind::Depolarizing] {
                let mut last = f64::INFINITY;
                for gamma in [0.0, 0.01, 0.1, 0.3, 0.5] {
                    let noise = NoiseSpec::new(kind, gamma).unwrap().with_placement(placement);
                    let p = return_probability_noisy(&cfg, noise, 60).unwrap();
                    assert!(p <= last + 1e-12, "{kind:?} {placement:?} {gamma}: {p} > {last}");
                    last = p;
                }
            }
        }
    }

    #[test]
    fn noisy_outputs_are_valid_density_matrices() {
        let cfg = five();
        for noise in [
            NoiseSpec::amplitude_damping(0.2).unwrap(),
            NoiseSpec::depolarizing(0.7).unwrap(),
        ] {
            for rho in noisy_trajectory(&cfg, noise, 40).unwrap() {
                rho.validate().unwrap();
            }
        }
    }

    #[test]
    fn density_constructor_rejects_invalid_input() {
        let bad_trace = vec![c(0.6), c(0.0), c(0.0), c(0.6)];
        assert!(density_from_rows(2, &bad_trace).is_err());
        let negative = vec![c(1.5), c(0.0), c(0.0), c(-0.5)];
        assert!(density_from_rows(2, &negative).is_err());
        let non_herm = vec![c(0.5), c(0.3), c(0.0), c(0.5)];
        assert!(density_from_rows(2, &non_herm).is_err());
    }
}
