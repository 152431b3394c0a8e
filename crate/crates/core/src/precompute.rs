//! One-time quadratic reference at the mode: MAP point, Hessian there, its
//! eigendecomposition and Cholesky factor, and the rotation frequencies.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{chol_solve, cholesky, dot, max_abs, sym_eigen, CholFactor, EigenDecomp, SymMatrix};
use crate::targets::{LogisticPosterior, Target};

pub const MAP_TOLERANCE: f64 = 1e-8;
pub const MAP_MAX_ITERATIONS: usize = 200;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// `(θ*, J, Z, D, B)` and `ω = √D` ascending.
#[derive(Debug, Clone)]
pub struct QuadraticReference {
    theta_star: Vec<f64>,
    j: SymMatrix,
    eig: EigenDecomp,
    chol: CholFactor,
    omega: Vec<f64>,
}

impl QuadraticReference {
    /// Factorizes `J`. Fails if `J` is not SPD.
    pub fn new(theta_star: Vec<f64>, j: SymMatrix) -> Result<Self> {
        check_len(j.dim(), theta_star.len())?;
        check_finite(&theta_star, "θ*")?;
        let eig = sym_eigen(&j)?;
        let chol = cholesky(&j)?;
        let omega = eig.values().iter().map(|d| d.sqrt()).collect();
        Ok(Self {
            theta_star,
            j,
            eig,
            chol,
            omega,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn hessian(&self) -> &SymMatrix {
        &self.j
    }

    pub fn eigen(&self) -> &EigenDecomp {
        &self.eig
    }

    pub fn cholesky(&self) -> &CholFactor {
        &self.chol
    }

    /// Rotation frequencies `ωⱼ = √Dⱼ`, ascending.
    pub fn frequencies(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_min(&self) -> f64 {
        self.omega[0]
    }

    pub fn omega_max(&self) -> f64 {
        self.omega[self.omega.len() - 1]
    }

    /// `θ − θ*`.
    pub fn offset(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.theta_star).map(|(t, s)| t - s).collect()
    }

    /// `J⁻¹ r` by Cholesky solves.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        chol_solve(&self.chol, r).expect("dimension checked by caller")
    }
}

/// Outcome of the Newton iteration.
#[derive(Debug, Clone)]
pub struct MapResult {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    /// `U` at the start and after every accepted step.
    pub potentials: Vec<f64>,
}

/// Minimizes `U` by Newton's method with Cholesky-solved steps and Armijo
/// backtracking (c = 1e-4, halving), until `‖∇U‖_∞ ≤ 1e-8`.
pub fn find_map<T: Target + ?Sized>(target: &T, theta0: &[f64]) -> Result<MapResult> {
    check_len(target.dim(), theta0.len())?;
    check_finite(theta0, "θ₀")?;
    let d = target.dim();
    let mut theta = theta0.to_vec();
    let mut u = target.eval_potential(&theta);
    let mut g = vec![0.0; d];
    target.eval_gradient(&theta, &mut g);
    let mut potentials = vec![u];

    for it in 0..=MAP_MAX_ITERATIONS {
        let gn = max_abs(&g);
        if gn <= MAP_TOLERANCE {
            return Ok(MapResult {
                theta,
                iterations: it,
                grad_norm: gn,
                potentials,
            });
        }
        if it == MAP_MAX_ITERATIONS {
            break;
        }
        let h = target.eval_hessian(&theta);
        let step: Vec<f64> = chol_solve(&cholesky(&h)?, &g)?.into_iter().map(|x| -x).collect();
        let slope = dot(&g, &step);
        // Predicted decrease below the rounding level of U: take the full step.
        let unresolvable = slope.abs() <= 1e-13 * u.abs().max(1.0);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(x, s)| x + t * s).collect();
            let u_trial = target.eval_potential(&trial);
            if u_trial <= u + ARMIJO_C * t * slope || (unresolvable && t == 1.0) {
                accepted = Some((trial, u_trial));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, u_trial)) = accepted else {
            return Err(Error::MapNoConvergence {
                iterations: it,
                grad_norm: gn,
            });
        };
        theta = trial;
        u = u_trial;
        potentials.push(u);
        target.eval_gradient(&theta, &mut g);
        check_finite(&g, "∇U during MAP search")?;
    }
    Err(Error::MapNoConvergence {
        iterations: MAP_MAX_ITERATIONS,
        grad_norm: max_abs(&g),
    })
}

/// MAP search from `theta0`, then `J = ∇²U(θ*)` and its factorizations.
pub fn build_reference<T: Target + ?Sized>(target: &T, theta0: &[f64]) -> Result<(QuadraticReference, MapResult)> {
    let map = find_map(target, theta0)?;
    let j = target.eval_hessian(&map.theta);
    Ok((QuadraticReference::new(map.theta.clone(), j)?, map))
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    fingerprint: String,
    dim: usize,
    theta_star: Vec<f64>,
    hessian: Vec<f64>,
}

fn cache_path(dir: &Path, fingerprint: &str) -> PathBuf {
    dir.join(format!("reference-{}.json", &fingerprint[..16]))
}

/// Builds the reference for a logistic posterior, reusing `(θ*, J)` from a
/// JSON cache in `cache_dir` keyed by the dataset/prior fingerprint.
pub fn build_reference_cached(
    target: &LogisticPosterior,
    cache_dir: Option<&Path>,
) -> Result<QuadraticReference> {
    let fingerprint = target.fingerprint();
    if let Some(dir) = cache_dir {
        let path = cache_path(dir, &fingerprint);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
                if entry.fingerprint == fingerprint && entry.dim == target.dim() {
                    return QuadraticReference::new(entry.theta_star, SymMatrix::new(entry.dim, entry.hessian)?);
                }
            }
        }
    }
    let (reference, _) = build_reference(target, &vec![0.0; target.dim()])?;
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir)?;
        let entry = CacheEntry {
            fingerprint: fingerprint.clone(),
            dim: reference.dim(),
            theta_star: reference.theta_star().to_vec(),
            hessian: reference.hessian().as_slice().to_vec(),
        };
        fs::write(cache_path(dir, &fingerprint), serde_json::to_string(&entry)?)?;
    }
    Ok(reference)
}
