//! Scalar model problem `H = ½(p² + θ²) + ½κθ²` split as unit-frequency
//! rotation plus the perturbation kick, and a two-scale Gaussian example.
//!
//! One step of any of the schemes below maps `(θ, p)` linearly by a matrix
//! `[[A, B], [C, D]]`; everything here (stability, energy error, `ρ`)
//! follows from its entries.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// One-step (or `L`-step) propagator of the model problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Propagator2x2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub kappa: f64,
    pub eps: f64,
    /// `C + (1+κ)B`, the factor that vanishes for an exact flow. Schemes
    /// with a closed form carry it free of the cancellation in the entries.
    pub defect: f64,
}

impl Propagator2x2 {
    /// Entry-wise constructor; `defect` is formed from the entries.
    pub fn new(a: f64, b: f64, c: f64, d: f64, kappa: f64, eps: f64) -> Self {
        Self {
            a,
            b,
            c,
            d,
            kappa,
            eps,
            defect: c + (1.0 + kappa) * b,
        }
    }

    fn from_mat(m: Mat, kappa: f64, eps: f64) -> Self {
        Self::new(m[0][0], m[0][1], m[1][0], m[1][1], kappa, eps)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn apply(&self, theta: f64, p: f64) -> (f64, f64) {
        (self.a * theta + self.b * p, self.c * theta + self.d * p)
    }

    /// `L`-fold composition by Cayley–Hamilton, `Mᴸ = U_{L−1}·M − U_{L−2}·I`
    /// with Chebyshev `U` at half the trace (`det M = 1`).
    pub fn power(&self, steps: usize) -> Self {
        if steps == 0 {
            return Self {
                defect: 0.0,
                ..Self::from_mat(IDENTITY, self.kappa, self.eps)
            };
        }
        let x = 0.5 * self.trace();
        let (mut prev, mut cur) = (0.0, 1.0);
        for _ in 1..steps {
            (prev, cur) = (cur, 2.0 * x * cur - prev);
        }
        Self {
            a: cur * self.a - prev,
            b: cur * self.b,
            c: cur * self.c,
            d: cur * self.d - prev,
            kappa: self.kappa,
            eps: self.eps,
            defect: cur * self.defect,
        }
    }
}

/// `Σ_{m≥1} (−1)^{m+1} ε^{2m+1}/(2m+1)! · coeff(m)` for `|ε| ≤ 1`.
fn odd_series(eps: f64, coeff: impl Fn(f64) -> f64) -> f64 {
    let e2 = eps * eps;
    let mut power = eps * e2 / 6.0;
    let mut sum = 0.0;
    for m in 1..40 {
        let mf = m as f64;
        let term = power * coeff(mf);
        sum += if m % 2 == 1 { term } else { -term };
        if term.abs() <= 1e-18 * sum.abs() && m > 2 {
            break;
        }
        power *= e2 / ((2.0 * mf + 2.0) * (2.0 * mf + 3.0));
    }
    sum
}

/// `C + (1+κ)B` of one KRK step on the unit model.
fn krk_defect(eps: f64, kappa: f64) -> f64 {
    if eps <= 1.0 {
        kappa * odd_series(eps, |m| 2.0 * m * kappa.mul_add((2.0 * m + 1.0) / 4.0, 1.0))
    } else {
        let (s, c) = eps.sin_cos();
        kappa * (s - eps * c) + 0.25 * kappa * kappa * eps * eps * s
    }
}

/// `C + (1+κ)B` of one RKR step on the unit model.
fn rkr_defect(eps: f64, kappa: f64) -> f64 {
    if eps <= 1.0 {
        -kappa * odd_series(eps, |m| kappa.mul_add((2.0 * m + 1.0) / 2.0, 1.0))
    } else {
        let half = (0.5 * eps).sin();
        kappa * (eps.sin() - eps) - kappa * kappa * eps * half * half
    }
}

type Mat = [[f64; 2]; 2];
const IDENTITY: Mat = [[1.0, 0.0], [0.0, 1.0]];

fn mul(x: Mat, y: Mat) -> Mat {
    [
        [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
        [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
    ]
}

/// Exact flow of `½p² + ½ω²θ²` over time `t`.
fn rotation(t: f64, omega: f64) -> Mat {
    let (s, c) = (omega * t).sin_cos();
    [[c, s / omega], [-omega * s, c]]
}

/// Exact flow of `½kθ²` over time `t`.
fn kick(t: f64, k: f64) -> Mat {
    [[1.0, 0.0], [-k * t, 1.0]]
}

fn drift(t: f64) -> Mat {
    [[1.0, t], [0.0, 1.0]]
}

/// Which sub-flow a multistage scheme's `a` coefficients belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubFlow {
    Rotation,
    Kick,
}

/// `φ_{a₁ε} ∘ ψ_{b₁ε} ∘ φ_{a₂ε} ∘ … ∘ ψ_{b_{m−1}ε} ∘ φ_{a_mε}` with
/// `Σa = Σb = 1` and palindromic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PalindromicScheme {
    a: Vec<f64>,
    b: Vec<f64>,
    outer: SubFlow,
}

impl PalindromicScheme {
    pub fn new(a: Vec<f64>, b: Vec<f64>, outer: SubFlow) -> Result<Self> {
        const TOL: f64 = 1e-12;
        if a.is_empty() || b.len() + 1 != a.len() {
            return Err(Error::InvalidArgument(format!(
                "need m a-coefficients and m−1 b-coefficients, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let sa: f64 = a.iter().sum();
        let sb: f64 = if b.is_empty() { 1.0 } else { b.iter().sum() };
        if (sa - 1.0).abs() > TOL || (sb - 1.0).abs() > TOL {
            return Err(Error::InvalidArgument(format!("coefficients must sum to 1 (Σa={sa}, Σb={sb})")));
        }
        let pal = |v: &[f64]| v.iter().zip(v.iter().rev()).all(|(x, y)| (x - y).abs() <= TOL);
        if !pal(&a) || !pal(&b) {
            return Err(Error::InvalidArgument("coefficients are not palindromic".into()));
        }
        Ok(Self { a, b, outer })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn outer(&self) -> SubFlow {
        self.outer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    Krk,
    Rkr,
    /// Velocity Verlet on the full spring `ω₀² + κ`.
    Kdk,
    Palindromic(PalindromicScheme),
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Krk => "KRK",
            Scheme::Rkr => "RKR",
            Scheme::Kdk => "KDK",
            Scheme::Palindromic(_) => "palindromic",
        }
    }
}

fn check_args(eps: f64, omega0: f64, kappa: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(Error::InvalidArgument(format!("ω₀ must be positive, got {omega0}")));
    }
    if !(omega0 * omega0 + kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("need ω₀² + κ > 0, got κ = {kappa}")));
    }
    Ok(())
}

/// One-step propagator of the unit model (`ω₀ = 1`, `κ > −1`).
pub fn propagator(scheme: &Scheme, eps: f64, kappa: f64) -> Result<Propagator2x2> {
    propagator_with_frequency(scheme, eps, 1.0, kappa)
}

/// One-step propagator for `H = ½p² + ½ω₀²θ² + ½κθ²`, split as the
/// `ω₀`-rotation plus the `κ`-kick.
pub fn propagator_with_frequency(scheme: &Scheme, eps: f64, omega0: f64, kappa: f64) -> Result<Propagator2x2> {
    check_args(eps, omega0, kappa)?;
    let h = 0.5 * eps;
    let m = match scheme {
        Scheme::Krk => mul(mul(kick(h, kappa), rotation(eps, omega0)), kick(h, kappa)),
        Scheme::Rkr => mul(mul(rotation(h, omega0), kick(eps, kappa)), rotation(h, omega0)),
        Scheme::Kdk => {
            let spring = omega0 * omega0 + kappa;
            mul(mul(kick(h, spring), drift(eps)), kick(h, spring))
        }
        Scheme::Palindromic(s) => {
            let (outer, inner): (Box<dyn Fn(f64) -> Mat>, Box<dyn Fn(f64) -> Mat>) = match s.outer {
                SubFlow::Rotation => (Box::new(|t| rotation(t, omega0)), Box::new(|t| kick(t, kappa))),
                SubFlow::Kick => (Box::new(|t| kick(t, kappa)), Box::new(|t| rotation(t, omega0))),
            };
            let mut acc = outer(s.a[0] * eps);
            for (bi, ai) in s.b.iter().zip(&s.a[1..]) {
                acc = mul(mul(acc, inner(bi * eps)), outer(ai * eps));
            }
            acc
        }
    };
    let mut p = Propagator2x2::from_mat(m, kappa, eps);
    if omega0 == 1.0 {
        match scheme {
            Scheme::Krk => p.defect = krk_defect(eps, kappa),
            Scheme::Rkr => p.defect = rkr_defect(eps, kappa),
            Scheme::Kdk => p.defect = 0.25 * (1.0 + kappa).powi(2) * eps.powi(3),
            Scheme::Palindromic(_) => {}
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    Stable,
    Unstable,
    WeaklyUnstable,
    /// `M = ±I`; stable.
    BoundaryIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub class: StabilityClass,
    /// Rotation angle with `A = cos η`, when stable.
    pub eta: Option<f64>,
    /// `B / sin η`; `None` when stable with `sin η = 0` (not applicable).
    pub chi: Option<f64>,
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self.class, StabilityClass::Stable | StabilityClass::BoundaryIdentity)
    }
}

/// Classifies a symplectic propagator. Uses `1 − A² = −BC`, which stays
/// accurate where `A` itself rounds to `±1`.
pub fn classify(p: &Propagator2x2) -> StabilityVerdict {
    let bc = p.b * p.c;
    let half_trace = 0.5 * p.trace();
    if bc < 0.0 && half_trace.abs() <= 1.0 + 1e-12 {
        let sin_eta = (-bc).sqrt();
        let eta = sin_eta.atan2(half_trace);
        return StabilityVerdict {
            class: StabilityClass::Stable,
            eta: Some(eta),
            chi: Some(p.b / sin_eta),
        };
    }
    if bc > 0.0 || half_trace.abs() > 1.0 {
        return StabilityVerdict {
            class: StabilityClass::Unstable,
            eta: None,
            chi: None,
        };
    }
    if p.b == 0.0 && p.c == 0.0 {
        StabilityVerdict {
            class: StabilityClass::BoundaryIdentity,
            eta: Some(if half_trace > 0.0 { 0.0 } else { PI }),
            chi: None,
        }
    } else {
        StabilityVerdict {
            class: StabilityClass::WeaklyUnstable,
            eta: None,
            chi: None,
        }
    }
}

/// `2/√(ω₀² + κ)`.
pub fn kdk_stability_limit(omega0: f64, kappa: f64) -> f64 {
    2.0 / (omega0 * omega0 + kappa).sqrt()
}

/// Root of `κε = 2cot(ε/2)` in `(0, π)` for `κ > 0` (unit model), by bisection.
pub fn krk_transcendental_limit(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("transcendental limit needs κ > 0, got {kappa}")));
    }
    let g = |e: f64| kappa * e - 2.0 / (0.5 * e).tan();
    let (mut lo, mut hi) = (1e-8, PI - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Supremum of the stable step interval starting at 0 for the unit model.
/// Returns `+∞` when no instability exists (`κ = 0` for rotation schemes).
pub fn stability_limit(scheme: &Scheme, kappa: f64) -> Result<f64> {
    check_args(1.0, 1.0, kappa)?;
    match scheme {
        Scheme::Kdk => Ok(kdk_stability_limit(1.0, kappa)),
        Scheme::Krk | Scheme::Rkr if kappa > 0.0 => krk_transcendental_limit(kappa),
        Scheme::Krk | Scheme::Rkr if kappa < 0.0 => Ok(PI),
        Scheme::Krk | Scheme::Rkr => Ok(f64::INFINITY),
        Scheme::Palindromic(_) => stability_limit_by_classification(scheme, 1.0, kappa),
    }
}

/// Scan-then-bisect on [`classify`]: the first scanned unstable step, refined
/// against the last stable one. Returns `+∞` when the scan finds none.
pub fn stability_limit_by_classification(scheme: &Scheme, omega0: f64, kappa: f64) -> Result<f64> {
    check_args(1.0, omega0, kappa)?;
    let stable = |e: f64| -> Result<bool> { Ok(classify(&propagator_with_frequency(scheme, e, omega0, kappa)?).is_stable()) };
    let horizon = (8.0 * PI).max(4.0 * kdk_stability_limit(omega0, kappa) * omega0) / omega0;
    const SCAN: usize = 8192;
    let mut prev: f64 = 0.0;
    for k in 1..=SCAN {
        let e = horizon * k as f64 / SCAN as f64;
        if !stable(e)? {
            let (mut lo, mut hi) = (prev.max(f64::MIN_POSITIVE), e);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if stable(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 4.0 * f64::EPSILON * hi {
                    break;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev = e;
    }
    Ok(f64::INFINITY)
}

/// `Δ = ½(C + (1+κ)B)(Cθ₀² + 2Aθ₀p₀ + Bp₀²)` for an `L`-step propagator.
pub fn energy_error(p_l: &Propagator2x2, theta0: f64, p0: f64) -> f64 {
    let (a, b, c) = (p_l.a, p_l.b, p_l.c);
    0.5 * p_l.defect * (c * theta0 * theta0 + 2.0 * a * theta0 * p0 + b * p0 * p0)
}

/// Model energy `½(p² + (1+κ)θ²)`.
pub fn model_energy(theta: f64, p: f64, kappa: f64) -> f64 {
    0.5 * (p * p + (1.0 + kappa) * theta * theta)
}

/// `ρ = (C + (1+κ)B)² / (2(1+κ)(1 − A²))`, with `1 − A² = −BC`.
pub fn rho_from_propagator(p: &Propagator2x2) -> Result<f64> {
    let v = classify(p);
    match v.class {
        StabilityClass::Stable => {
            let k1 = 1.0 + p.kappa;
            Ok(p.defect * p.defect / (2.0 * k1 * (-p.b * p.c)))
        }
        StabilityClass::BoundaryIdentity => Err(Error::InvalidArgument(format!(
            "ρ is undefined where the propagator is ±I (ε = {}, κ = {})",
            p.eps, p.kappa
        ))),
        _ => Err(Error::Unstable {
            eps: p.eps,
            kappa: p.kappa,
        }),
    }
}

pub fn rho(scheme: &Scheme, eps: f64, kappa: f64) -> Result<f64> {
    rho_from_propagator(&propagator(scheme, eps, kappa)?)
}

fn rho_denominator_trig(eps: f64, kappa: f64) -> f64 {
    4.0 * kappa * eps * eps.cos() + (4.0 - kappa * kappa * eps * eps) * eps.sin()
}

/// Trigonometric closed form of `ρ` for KRK.
pub fn rho_krk_closed_form(eps: f64, kappa: f64) -> f64 {
    let (s, c) = eps.sin_cos();
    let t = -4.0 * eps * c + (4.0 + kappa * eps * eps) * s;
    kappa * kappa * t * t / (s * 8.0 * (1.0 + kappa) * rho_denominator_trig(eps, kappa))
}

/// Trigonometric closed form of `ρ` for RKR.
pub fn rho_rkr_closed_form(eps: f64, kappa: f64) -> f64 {
    let (s, c) = eps.sin_cos();
    let t = kappa * eps * c + 2.0 * s - (2.0 + kappa) * eps;
    kappa * kappa * t * t / (s * 2.0 * (1.0 + kappa) * rho_denominator_trig(eps, kappa))
}

/// `E[Δ] = sin²(Lη)·ρ` at stationarity.
pub fn expected_energy_error(scheme: &Scheme, eps: f64, kappa: f64, steps: usize) -> Result<f64> {
    let p = propagator(scheme, eps, kappa)?;
    let r = rho_from_propagator(&p)?;
    let eta = classify(&p).eta.expect("stable verdict carries η");
    Ok((steps as f64 * eta).sin().powi(2) * r)
}

/// `H = ½pᵀp + ½θᵀdiag(σ₁⁻², σ₂⁻²)θ + ½κθᵀθ`, optionally with mass matrix
/// `diag(σ₁⁻², σ₂⁻²)` (every reference oscillator at unit frequency).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoScaleModel {
    pub sigma1: f64,
    pub sigma2: f64,
    pub kappa: f64,
    pub preconditioned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentVerdict {
    /// Frequency of the full oscillator.
    pub omega: f64,
    pub verdict: StabilityVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoScaleReport {
    pub components: [ComponentVerdict; 2],
    pub stable: bool,
    /// `L ≥ C/(εω₂)`.
    pub decorrelates: bool,
    pub min_steps: f64,
}

impl TwoScaleModel {
    pub fn new(sigma1: f64, sigma2: f64, kappa: f64, preconditioned: bool) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma1 <= sigma2) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("need 0 < σ₁ ≤ σ₂, got {sigma1}, {sigma2}")));
        }
        let m = Self {
            sigma1,
            sigma2,
            kappa,
            preconditioned,
        };
        for i in 0..2 {
            let (w0, k) = m.component(i);
            check_args(1.0, w0, k)?;
        }
        Ok(m)
    }

    /// `(ω₀, κ)` of component `i` after any rescaling.
    fn component(&self, i: usize) -> (f64, f64) {
        let s = if i == 0 { self.sigma1 } else { self.sigma2 };
        if self.preconditioned {
            (1.0, self.kappa * s * s)
        } else {
            (1.0 / s, self.kappa)
        }
    }

    pub fn frequency(&self, i: usize) -> f64 {
        let (w0, k) = self.component(i);
        (w0 * w0 + k).sqrt()
    }

    pub fn analyze(&self, scheme: &Scheme, eps: f64, steps: usize, c: f64) -> Result<TwoScaleReport> {
        let mut comps = [ComponentVerdict {
            omega: 0.0,
            verdict: StabilityVerdict {
                class: StabilityClass::Stable,
                eta: None,
                chi: None,
            },
        }; 2];
        for (i, slot) in comps.iter_mut().enumerate() {
            let (w0, k) = self.component(i);
            slot.omega = self.frequency(i);
            slot.verdict = classify(&propagator_with_frequency(scheme, eps, w0, k)?);
        }
        let min_steps = c / (eps * self.frequency(1));
        Ok(TwoScaleReport {
            stable: comps.iter().all(|c| c.verdict.is_stable()),
            components: comps,
            decorrelates: steps as f64 >= min_steps,
            min_steps,
        })
    }

    /// Smallest per-component stability limit. KRK, RKR and KDK rescale to
    /// the unit model (`ε' = εω₀`, `κ' = κ/ω₀²`); palindromic schemes use
    /// classification.
    pub fn stability_limit(&self, scheme: &Scheme) -> Result<f64> {
        let mut lim = f64::INFINITY;
        for i in 0..2 {
            let (w0, k) = self.component(i);
            let li = match scheme {
                Scheme::Kdk => kdk_stability_limit(w0, k),
                Scheme::Krk | Scheme::Rkr => stability_limit(scheme, k / (w0 * w0))? / w0,
                Scheme::Palindromic(_) => stability_limit_by_classification(scheme, w0, k)?,
            };
            lim = lim.min(li);
        }
        Ok(lim)
    }
}

/// One `(ε, κ)` point of the `ρ` surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoGridPoint {
    pub eps: f64,
    pub kappa: f64,
    pub rho_krk: Option<f64>,
    pub rho_rkr: Option<f64>,
    pub stable: bool,
}

/// `ρ` for KRK and RKR over `kappas × epss`.
pub fn rho_grid(kappas: &[f64], epss: &[f64]) -> Result<Vec<RhoGridPoint>> {
    let mut out = Vec::with_capacity(kappas.len() * epss.len());
    for &kappa in kappas {
        for &eps in epss {
            let pk = propagator(&Scheme::Krk, eps, kappa)?;
            let pr = propagator(&Scheme::Rkr, eps, kappa)?;
            let stable = classify(&pk).is_stable() && classify(&pr).is_stable();
            out.push(RhoGridPoint {
                eps,
                kappa,
                rho_krk: rho_from_propagator(&pk).ok(),
                rho_rkr: rho_from_propagator(&pr).ok(),
                stable,
            });
        }
    }
    Ok(out)
}

/// `eps,kappa,rho_krk,rho_rkr,stable`; undefined `ρ` left empty.
pub fn write_rho_grid_csv(path: &Path, grid: &[RhoGridPoint]) -> Result<()> {
    let mut s = String::from("eps,kappa,rho_krk,rho_rkr,stable\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for g in grid {
        let _ = writeln!(s, "{},{},{},{},{}", g.eps, g.kappa, opt(g.rho_krk), opt(g.rho_rkr), u8::from(g.stable));
    }
    fs::write(path, s)?;
    Ok(())
}
