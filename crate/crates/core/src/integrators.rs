//! Exact sub-flows and the five Strang one-step maps.
//!
//! | kind            | variables   | step                                        |
//! |-----------------|-------------|---------------------------------------------|
//! | `Kdk`           | (θ, p), M=I | kick(∇U) · drift · kick(∇U)                 |
//! | `UncondKrk`     | (θ, p), M=I | kick(∇U1) · rotate(H0) · kick(∇U1)          |
//! | `PrecondVerlet` | (θ, v), M=J | kick(J⁻¹∇U) · drift · kick(J⁻¹∇U)           |
//! | `PrecondKrk`    | (θ, v), M=J | kick(J⁻¹∇U1) · rotate(unit) · kick(J⁻¹∇U1)  |
//! | `PrecondRkr`    | (θ, v), M=J | rotate(unit) · kick(J⁻¹∇U1) · rotate(unit)  |
//!
//! with `∇U1(θ) = ∇U(θ) − J(θ−θ*)`, so `J⁻¹∇U1 = J⁻¹∇U − (θ−θ*)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::precompute::QuadraticReference;
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorKind {
    /// Unconditioned velocity Verlet.
    Kdk,
    /// Unconditioned kick-rotate-kick.
    #[serde(rename = "ukrk")]
    UncondKrk,
    #[serde(rename = "pverlet")]
    PrecondVerlet,
    #[serde(rename = "pkrk")]
    PrecondKrk,
    #[serde(rename = "prkr")]
    PrecondRkr,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 5] = [
        IntegratorKind::Kdk,
        IntegratorKind::UncondKrk,
        IntegratorKind::PrecondVerlet,
        IntegratorKind::PrecondKrk,
        IntegratorKind::PrecondRkr,
    ];

    pub fn convention(self) -> Convention {
        if self.is_preconditioned() {
            Convention::Velocity
        } else {
            Convention::Momentum
        }
    }

    pub fn is_preconditioned(self) -> bool {
        matches!(
            self,
            IntegratorKind::PrecondVerlet | IntegratorKind::PrecondKrk | IntegratorKind::PrecondRkr
        )
    }

    /// Uses exact flows of the quadratic reference (KRK/RKR patterns).
    pub fn is_rotation_based(self) -> bool {
        matches!(
            self,
            IntegratorKind::UncondKrk | IntegratorKind::PrecondKrk | IntegratorKind::PrecondRkr
        )
    }

    pub fn needs_reference(self) -> bool {
        self != IntegratorKind::Kdk
    }

    /// Short CLI name.
    pub fn cli_name(self) -> &'static str {
        match self {
            IntegratorKind::Kdk => "kdk",
            IntegratorKind::UncondKrk => "ukrk",
            IntegratorKind::PrecondVerlet => "pverlet",
            IntegratorKind::PrecondKrk => "pkrk",
            IntegratorKind::PrecondRkr => "prkr",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            IntegratorKind::Kdk => "UncondVerlet",
            IntegratorKind::UncondKrk => "UncondKRK",
            IntegratorKind::PrecondVerlet => "PrecondVerlet",
            IntegratorKind::PrecondKrk => "PrecondKRK",
            IntegratorKind::PrecondRkr => "PrecondRKR",
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntegratorKind::ALL
            .into_iter()
            .find(|k| k.cli_name().eq_ignore_ascii_case(s) || k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}' (kdk|ukrk|pverlet|pkrk|prkr)")))
    }
}

/// Whether `m` holds momentum `p` or velocity `v = M⁻¹p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Momentum,
    Velocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
    pub convention: Convention,
}

impl PhaseState {
    pub fn new(theta: Vec<f64>, m: Vec<f64>, convention: Convention) -> Self {
        debug_assert_eq!(theta.len(), m.len());
        Self { theta, m, convention }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.m).all(|x| x.is_finite())
    }

    /// `m ← m − ε·force`.
    pub fn kick(&mut self, eps: f64, force: &[f64]) {
        axpy(-eps, force, &mut self.m);
    }

    /// `θ ← θ + ε·m`.
    pub fn drift(&mut self, eps: f64) {
        axpy(eps, &self.m, &mut self.theta);
    }

    /// Exact flow of `H0 = ½pᵀp + ½(θ−θ*)ᵀJ(θ−θ*)` over the table's step.
    pub fn rotate_uncond(&mut self, table: &RotationTable, reference: &QuadraticReference) {
        debug_assert_eq!(self.convention, Convention::Momentum);
        let eig = reference.eigen();
        let u = eig.to_eigen(&reference.offset(&self.theta));
        let w = eig.to_eigen(&self.m);
        let mut u2 = vec![0.0; u.len()];
        let mut w2 = vec![0.0; u.len()];
        for k in 0..u.len() {
            let (c, s, om) = (table.cos[k], table.sin[k], table.omega[k]);
            u2[k] = c * u[k] + s / om * w[k];
            w2[k] = -om * s * u[k] + c * w[k];
        }
        let back = eig.from_eigen(&u2);
        for ((t, b), ts) in self.theta.iter_mut().zip(back).zip(reference.theta_star()) {
            *t = b + ts;
        }
        self.m = eig.from_eigen(&w2);
    }

    /// Exact flow of the preconditioned `H0` in velocity variables: a unit
    /// frequency rotation of `(θ−θ*, v)` by angle `ε`.
    pub fn rotate_precond(&mut self, eps: f64, theta_star: &[f64]) {
        debug_assert_eq!(self.convention, Convention::Velocity);
        let (s, c) = eps.sin_cos();
        for ((t, v), ts) in self.theta.iter_mut().zip(self.m.iter_mut()).zip(theta_star) {
            let u = *t - ts;
            let u2 = u * c + *v * s;
            *v = -u * s + *v * c;
            *t = u2 + ts;
        }
    }
}

/// Per-frequency `cos(εωⱼ)`, `sin(εωⱼ)` for the unconditioned rotation.
/// Rebuilt for every randomized `ε`; reused across the `L` steps.
#[derive(Debug, Clone)]
pub struct RotationTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
    omega: Vec<f64>,
}

impl RotationTable {
    pub fn new(reference: &QuadraticReference, eps: f64) -> Self {
        let omega = reference.frequencies().to_vec();
        let (sin, cos) = omega.iter().map(|w| (eps * w).sin_cos()).unzip();
        Self { cos, sin, omega }
    }
}

/// Integrator kind with maximum step `ε̄` and `L` steps per proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub kind: IntegratorKind,
    pub eps_bar: f64,
    pub steps: usize,
}

impl IntegratorSpec {
    pub fn new(kind: IntegratorKind, eps_bar: f64, steps: usize) -> Result<Self> {
        if !(eps_bar > 0.0) || !eps_bar.is_finite() {
            return Err(Error::InvalidArgument(format!("ε̄ must be positive, got {eps_bar}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("L must be at least 1".into()));
        }
        Ok(Self { kind, eps_bar, steps })
    }

    /// Nominal duration `ε̄·L`.
    pub fn duration(&self) -> f64 {
        self.eps_bar * self.steps as f64
    }
}

/// End state of an `L`-step integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub state: PhaseState,
    pub grad_evals: u64,
    /// A non-finite coordinate appeared; integration stopped there.
    pub divergent: bool,
}

/// A target plus (for every kind but KDK) its quadratic reference.
pub struct Dynamics<'a, T: Target + ?Sized> {
    target: &'a T,
    reference: Option<&'a QuadraticReference>,
}

impl<'a, T: Target + ?Sized> Clone for Dynamics<'a, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<'a, T: Target + ?Sized> Copy for Dynamics<'a, T> {}

impl<'a, T: Target + ?Sized> Dynamics<'a, T> {
    pub fn new(target: &'a T, reference: Option<&'a QuadraticReference>) -> Result<Self> {
        if let Some(r) = reference {
            if r.dim() != target.dim() {
                return Err(Error::DimensionMismatch {
                    expected: target.dim(),
                    got: r.dim(),
                });
            }
        }
        Ok(Self { target, reference })
    }

    pub fn target(&self) -> &'a T {
        self.target
    }

    pub fn reference(&self) -> Option<&'a QuadraticReference> {
        self.reference
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn require_reference(&self, kind: IntegratorKind) -> Result<&'a QuadraticReference> {
        match (kind.needs_reference(), self.reference) {
            (true, None) => Err(Error::InvalidArgument(format!("{kind} needs a quadratic reference"))),
            (_, Some(r)) => Ok(r),
            (false, None) => unreachable!("KDK never asks for a reference"),
        }
    }

    fn reference_unchecked(&self) -> &'a QuadraticReference {
        self.reference.expect("reference checked before integration")
    }

    /// The vector a kick subtracts for `kind`, at `theta`. One gradient
    /// evaluation.
    pub fn force(&self, kind: IntegratorKind, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        self.target.eval_gradient(theta, &mut g);
        match kind {
            IntegratorKind::Kdk => g,
            IntegratorKind::UncondKrk => {
                let r = self.reference_unchecked();
                let jd = r.hessian().mul_vec(&r.offset(theta));
                for (gi, ji) in g.iter_mut().zip(jd) {
                    *gi -= ji;
                }
                g
            }
            IntegratorKind::PrecondVerlet => self.reference_unchecked().solve(&g),
            IntegratorKind::PrecondKrk | IntegratorKind::PrecondRkr => {
                let r = self.reference_unchecked();
                let mut f = r.solve(&g);
                for ((fi, t), ts) in f.iter_mut().zip(theta).zip(r.theta_star()) {
                    *fi -= t - ts;
                }
                f
            }
        }
    }

    /// `½pᵀp` for momentum, `½vᵀJv = ½‖Bᵀv‖²` for velocity.
    pub fn kinetic(&self, state: &PhaseState) -> f64 {
        match state.convention {
            Convention::Momentum => 0.5 * dot(&state.m, &state.m),
            Convention::Velocity => {
                let bt = self.reference_unchecked().cholesky().mul_transpose_vec(&state.m);
                0.5 * dot(&bt, &bt)
            }
        }
    }

    /// Total energy `U(θ) + kinetic`.
    pub fn hamiltonian(&self, state: &PhaseState) -> f64 {
        self.target.eval_potential(&state.theta) + self.kinetic(state)
    }

    fn check_state(&self, kind: IntegratorKind, state: &PhaseState) -> Result<()> {
        self.require_reference_if_needed(kind)?;
        if state.convention != kind.convention() {
            return Err(Error::InvalidArgument(format!(
                "{kind} integrates in {:?} variables, state is {:?}",
                kind.convention(),
                state.convention
            )));
        }
        if state.dim() != self.dim() || state.m.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        Ok(())
    }

    fn require_reference_if_needed(&self, kind: IntegratorKind) -> Result<()> {
        if kind.needs_reference() {
            self.require_reference(kind)?;
        }
        Ok(())
    }

    /// One Strang step with fresh gradient evaluations for both half-kicks.
    pub fn step(&self, kind: IntegratorKind, state: &PhaseState, eps: f64) -> Result<PhaseState> {
        self.check_state(kind, state)?;
        let mut s = state.clone();
        let table = (kind == IntegratorKind::UncondKrk).then(|| RotationTable::new(self.reference_unchecked(), eps));
        if kind == IntegratorKind::PrecondRkr {
            let ts = self.reference_unchecked().theta_star();
            s.rotate_precond(0.5 * eps, ts);
            let f = self.force(kind, &s.theta);
            s.kick(eps, &f);
            s.rotate_precond(0.5 * eps, ts);
        } else {
            let f = self.force(kind, &s.theta);
            s.kick(0.5 * eps, &f);
            self.inner_flow(kind, &mut s, eps, table.as_ref());
            let f = self.force(kind, &s.theta);
            s.kick(0.5 * eps, &f);
        }
        Ok(s)
    }

    fn inner_flow(&self, kind: IntegratorKind, s: &mut PhaseState, eps: f64, table: Option<&RotationTable>) {
        match kind {
            IntegratorKind::Kdk | IntegratorKind::PrecondVerlet => s.drift(eps),
            IntegratorKind::UncondKrk => {
                s.rotate_uncond(table.expect("table built for UncondKrk"), self.reference_unchecked())
            }
            IntegratorKind::PrecondKrk => s.rotate_precond(eps, self.reference_unchecked().theta_star()),
            IntegratorKind::PrecondRkr => unreachable!("RKR has no kick sandwich"),
        }
    }

    /// `L` steps. Adjacent half-kicks share one gradient evaluation, so the
    /// kick-sandwiched kinds cost `L+1` evaluations and RKR costs `L`.
    pub fn trajectory(&self, kind: IntegratorKind, state: &PhaseState, eps: f64, steps: usize) -> Result<Trajectory> {
        self.check_state(kind, state)?;
        let mut s = state.clone();
        let mut evals = 0u64;
        let mut divergent = false;

        if kind == IntegratorKind::PrecondRkr {
            let ts = self.reference_unchecked().theta_star();
            for _ in 0..steps {
                s.rotate_precond(0.5 * eps, ts);
                let f = self.force(kind, &s.theta);
                evals += 1;
                s.kick(eps, &f);
                s.rotate_precond(0.5 * eps, ts);
                if !s.is_finite() {
                    divergent = true;
                    break;
                }
            }
        } else {
            let table = (kind == IntegratorKind::UncondKrk).then(|| RotationTable::new(self.reference_unchecked(), eps));
            let mut f = self.force(kind, &s.theta);
            evals += 1;
            for _ in 0..steps {
                s.kick(0.5 * eps, &f);
                self.inner_flow(kind, &mut s, eps, table.as_ref());
                f = self.force(kind, &s.theta);
                evals += 1;
                s.kick(0.5 * eps, &f);
                if !s.is_finite() {
                    divergent = true;
                    break;
                }
            }
        }
        Ok(Trajectory {
            state: s,
            grad_evals: evals,
            divergent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::targets::GaussianTarget;
    use std::f64::consts::PI;

    fn gaussian_1d(omega2: f64) -> (GaussianTarget, QuadraticReference) {
        let t = GaussianTarget::new(vec![0.0], SymMatrix::from_diag(&[omega2])).unwrap();
        let r = QuadraticReference::new(vec![0.0], SymMatrix::from_diag(&[omega2])).unwrap();
        (t, r)
    }

    #[test]
    fn kick_properties() {
        let mut s = PhaseState::new(vec![1.0, 2.0], vec![0.5, -0.5], Convention::Momentum);
        let orig = s.clone();
        s.kick(0.3, &[0.0, 0.0]);
        assert_eq!(s, orig);
        let g = [0.7, -1.3];
        s.kick(0.25, &g);
        s.kick(-0.25, &g);
        assert!((s.m[0] - orig.m[0]).abs() < 1e-16 && (s.m[1] - orig.m[1]).abs() < 1e-16);
        let mut a = orig.clone();
        a.kick(0.125, &g);
        a.kick(0.125, &g);
        let mut b = orig.clone();
        b.kick(0.25, &g);
        assert!((a.m[0] - b.m[0]).abs() < 1e-15 && (a.m[1] - b.m[1]).abs() < 1e-15);
        assert_eq!(a.theta, orig.theta);
    }

    #[test]
    fn drift_properties() {
        let mut s = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0], Convention::Momentum);
        s.drift(1.0);
        assert_eq!(s.theta, vec![1.0, 0.0]);
        s.drift(-1.0);
        assert_eq!(s.theta, vec![0.0, 0.0]);
        let mut z = PhaseState::new(vec![3.0], vec![0.0], Convention::Velocity);
        z.drift(5.0);
        assert_eq!(z.theta, vec![3.0]);
    }

    #[test]
    fn rotate_uncond_identities() {
        let (_, r) = gaussian_1d(4.0);
        let s0 = PhaseState::new(vec![0.7], vec![-0.3], Convention::Momentum);
        let mut s = s0.clone();
        s.rotate_uncond(&RotationTable::new(&r, 0.0), &r);
        assert_eq!(s, s0);
        let mut s = s0.clone();
        s.rotate_uncond(&RotationTable::new(&r, 2.0 * PI / 2.0), &r);
        assert!((s.theta[0] - 0.7).abs() < 1e-14 && (s.m[0] + 0.3).abs() < 1e-14);
    }

    #[test]
    fn rotate_precond_quarter_and_full_turn() {
        let ts = [1.0, -2.0];
        let mut s = PhaseState::new(vec![1.5, -1.0], vec![0.25, 3.0], Convention::Velocity);
        s.rotate_precond(PI / 2.0, &ts);
        // θ' = θ* + b, v' = −a with a = (0.5, 1.0), b = (0.25, 3.0)
        assert!((s.theta[0] - 1.25).abs() < 1e-15 && (s.theta[1] - 1.0).abs() < 1e-15);
        assert!((s.m[0] + 0.5).abs() < 1e-15 && (s.m[1] + 1.0).abs() < 1e-15);
        let mut f = PhaseState::new(vec![1.5, -1.0], vec![0.25, 3.0], Convention::Velocity);
        f.rotate_precond(2.0 * PI, &ts);
        assert!((f.theta[0] - 1.5).abs() < 1e-14 && (f.m[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn kdk_matches_closed_form_harmonic_step() {
        let (t, _) = gaussian_1d(1.0);
        let dyn_ = Dynamics::new(&t, None).unwrap();
        let eps: f64 = 0.37;
        let (q, p) = (0.8, -0.45);
        let s = dyn_
            .step(IntegratorKind::Kdk, &PhaseState::new(vec![q], vec![p], Convention::Momentum), eps)
            .unwrap();
        let a = 1.0 - eps * eps / 2.0;
        let expect_q = a * q + eps * p;
        let expect_p = (-eps + eps.powi(3) / 4.0) * q + a * p;
        assert!((s.theta[0] - expect_q).abs() < 1e-14);
        assert!((s.m[0] - expect_p).abs() < 1e-14);
    }

    #[test]
    fn precond_rkr_half_turn() {
        let (t, r) = gaussian_1d(3.0);
        let dyn_ = Dynamics::new(&t, Some(&r)).unwrap();
        let s = PhaseState::new(vec![0.6], vec![-1.1], Convention::Velocity);
        let out = dyn_.trajectory(IntegratorKind::PrecondRkr, &s, PI, 1).unwrap();
        assert!((out.state.theta[0] + 0.6).abs() < 1e-14);
        assert!((out.state.m[0] - 1.1).abs() < 1e-14);
        assert_eq!(out.grad_evals, 1);
    }

    #[test]
    fn merged_kicks_match_unmerged_steps() {
        let p = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let t = GaussianTarget::new(vec![0.1, -0.2], p.clone()).unwrap();
        // deliberately mismatched reference so U1 ≠ 0
        let r = QuadraticReference::new(vec![0.0, 0.0], SymMatrix::from_diag(&[1.5, 1.2])).unwrap();
        let dyn_ = Dynamics::new(&t, Some(&r)).unwrap();
        for kind in IntegratorKind::ALL {
            let s0 = PhaseState::new(vec![0.4, -0.9], vec![0.3, 0.8], kind.convention());
            let traj = dyn_.trajectory(kind, &s0, 0.2, 7).unwrap();
            let mut s = s0.clone();
            for _ in 0..7 {
                s = dyn_.step(kind, &s, 0.2).unwrap();
            }
            for (a, b) in traj.state.theta.iter().chain(&traj.state.m).zip(s.theta.iter().chain(&s.m)) {
                assert!((a - b).abs() <= 1e-14, "{kind}: {a} vs {b}");
            }
            let expected = if kind == IntegratorKind::PrecondRkr { 7 } else { 8 };
            assert_eq!(traj.grad_evals, expected, "{kind}");
        }
    }

    #[test]
    fn convention_and_reference_checked() {
        let (t, r) = gaussian_1d(1.0);
        let no_ref = Dynamics::new(&t, None).unwrap();
        let sv = PhaseState::new(vec![0.0], vec![0.0], Convention::Velocity);
        assert!(no_ref.trajectory(IntegratorKind::PrecondKrk, &sv, 0.1, 1).is_err());
        let with_ref = Dynamics::new(&t, Some(&r)).unwrap();
        assert!(with_ref.trajectory(IntegratorKind::Kdk, &sv, 0.1, 1).is_err());
        assert!(IntegratorSpec::new(IntegratorKind::Kdk, 0.0, 1).is_err());
        assert!(IntegratorSpec::new(IntegratorKind::Kdk, 0.1, 0).is_err());
    }

    #[test]
    fn divergence_is_flagged() {
        let (t, _) = gaussian_1d(1.0);
        let dyn_ = Dynamics::new(&t, None).unwrap();
        let s = PhaseState::new(vec![1.0], vec![0.0], Convention::Momentum);
        let out = dyn_.trajectory(IntegratorKind::Kdk, &s, 10.0, 2000).unwrap();
        assert!(out.divergent);
        assert!(out.grad_evals < 2001);
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in IntegratorKind::ALL {
            assert_eq!(k.cli_name().parse::<IntegratorKind>().unwrap(), k);
            assert_eq!(k.label().parse::<IntegratorKind>().unwrap(), k);
        }
        assert!("nuts".parse::<IntegratorKind>().is_err());
    }
}
