//! Shared oracles and reporting for the integration tests.
#![allow(dead_code)]

use std::io::Write;

/// Writes one verdict line straight to stderr, past the test harness's
/// output capture, so every criterion shows up in the log.
pub fn verdict(number: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {number:>2} {tag}  {title} | {detail}");
}

pub fn skip(number: u32, title: &str, why: &str) {
    let _ = writeln!(std::io::stderr(), "criterion {number:>2} SKIP  {title} | {why}");
}

/// Error-free double-double arithmetic for the energy-difference oracle.
#[derive(Clone, Copy, Debug)]
pub struct Dd(pub f64, pub f64);

impl Dd {
    pub fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.0, o.0);
        let t = Dd::two_sum(self.1, o.1);
        let hi = Dd::two_sum(s.0, s.1 + t.0);
        Dd::two_sum(hi.0, hi.1 + t.1)
    }

    pub fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        Dd::two_sum(p, e + (self.0 * o.1 + self.1 * o.0))
    }

    pub fn value(self) -> f64 {
        self.0 + self.1
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn sqrt(self) -> Dd {
        let x = Dd::from(self.0.sqrt());
        let r = self.sub(x.mul(x));
        x.add(Dd::from(r.value() / (2.0 * x.0)))
    }
}

pub type DdMat = [[Dd; 2]; 2];

pub fn dd_mul(x: DdMat, y: DdMat) -> DdMat {
    let e = |i: usize, j: usize| x[i][0].mul(y[0][j]).add(x[i][1].mul(y[1][j]));
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

/// Rotation by `t` with `cos² + sin² = 1` to double-double precision: the
/// smaller of the two comes from f64, the larger from the identity.
pub fn dd_rotation(t: f64) -> DdMat {
    let (sf, cf) = t.sin_cos();
    let one = Dd::from(1.0);
    let (s, c) = if sf.abs() <= cf.abs() {
        let s = Dd::from(sf);
        let c = one.sub(s.mul(s)).sqrt();
        (s, if cf < 0.0 { c.neg() } else { c })
    } else {
        let c = Dd::from(cf);
        let s = one.sub(c.mul(c)).sqrt();
        (if sf < 0.0 { s.neg() } else { s }, c)
    };
    [[c, s], [s.neg(), c]]
}

pub fn dd_kick(t: f64, spring: Dd) -> DdMat {
    [[Dd::from(1.0), Dd::from(0.0)], [spring.mul(Dd::from(t)).neg(), Dd::from(1.0)]]
}

pub fn dd_drift(t: f64) -> DdMat {
    [[Dd::from(1.0), Dd::from(t)], [Dd::from(0.0), Dd::from(1.0)]]
}

/// `L`-step propagator of KRK (0), RKR (1) or KDK (2) in double-double.
pub fn dd_propagator(which: usize, eps: f64, kappa: f64, steps: usize) -> DdMat {
    let h = 0.5 * eps;
    let k = Dd::from(kappa);
    let one = match which {
        0 => dd_mul(dd_mul(dd_kick(h, k), dd_rotation(eps)), dd_kick(h, k)),
        1 => dd_mul(dd_mul(dd_rotation(h), dd_kick(eps, k)), dd_rotation(h)),
        _ => {
            let spring = Dd::from(1.0).add(k);
            dd_mul(dd_mul(dd_kick(h, spring), dd_drift(eps)), dd_kick(h, spring))
        }
    };
    let mut acc = one;
    for _ in 1..steps {
        acc = dd_mul(acc, one);
    }
    acc
}

/// `H(Mz) − H(z)` for the model energy, all in double-double.
pub fn direct_energy_difference(m: DdMat, kappa: f64, theta0: f64, p0: f64) -> f64 {
    let (t, p) = (Dd::from(theta0), Dd::from(p0));
    let t1 = m[0][0].mul(t).add(m[0][1].mul(p));
    let p1 = m[1][0].mul(t).add(m[1][1].mul(p));
    let spring = Dd::from(1.0).add(Dd::from(kappa));
    let energy = |t: Dd, p: Dd| p.mul(p).add(spring.mul(t).mul(t)).mul(Dd::from(0.5));
    energy(t1, p1).sub(energy(t, p)).value()
}

