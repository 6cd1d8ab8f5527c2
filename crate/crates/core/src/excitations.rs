//! Particle-hole excitation sets at a Fermi boundary and the factor
//! algebra attached to them: pair couplings between adjacent sectors,
//! boundary factors, critical-class form factors, Barnes-type norm
//! constants, the quadratic exponent and Umklapp momentum offsets.
//!
//! Conventions: particle and hole labels are the positive integers
//! counting levels away from the boundary; a set is strictly increasing
//! and may be empty.  Critical classes are the integer vectors
//! (ℓ_1 … ℓ_{r−1}) with ℓ_0 = ℓ_r = 0 implied, equivalently the
//! zero-sum vectors κ_s = ℓ_{s−1} − ℓ_s.

use crate::error::{Error, Result};
use crate::specfun::{gamma_ratio, LogComplex};
use num_complex::Complex64;

const PI: f64 = std::f64::consts::PI;

/// Which Fermi boundary a sum or factor refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A particle-hole excitation pattern at one boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParticleHoleSet {
    particles: Vec<u32>,
    holes: Vec<u32>,
}

impl ParticleHoleSet {
    pub const EMPTY: ParticleHoleSet = ParticleHoleSet {
        particles: Vec::new(),
        holes: Vec::new(),
    };

    /// Both lists must be strictly increasing with entries ≥ 1.
    pub fn new(particles: Vec<u32>, holes: Vec<u32>) -> Result<Self> {
        for list in [&particles, &holes] {
            if list.first().is_some_and(|&x| x == 0) {
                return Err(Error::invalid("labels start at 1"));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("labels must be strictly increasing"));
            }
        }
        Ok(ParticleHoleSet { particles, holes })
    }

    pub fn particles(&self) -> &[u32] {
        &self.particles
    }

    pub fn holes(&self) -> &[u32] {
        &self.holes
    }

    pub fn n_p(&self) -> usize {
        self.particles.len()
    }

    pub fn n_h(&self) -> usize {
        self.holes.len()
    }

    /// Net level transfer n_p − n_h carried by the set.
    pub fn net(&self) -> i64 {
        self.particles.len() as i64 - self.holes.len() as i64
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty() && self.holes.is_empty()
    }
}

/// Critical-class vector (ℓ_1 … ℓ_{r−1}); the boundary values ℓ_0 and
/// ℓ_r are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalClassVector {
    ell: Vec<i64>,
}

impl CriticalClassVector {
    pub fn new(ell: Vec<i64>) -> Self {
        CriticalClassVector { ell }
    }

    /// Number of operators r (one more than stored entries).
    pub fn r(&self) -> usize {
        self.ell.len() + 1
    }

    pub fn ell(&self) -> &[i64] {
        &self.ell
    }

    /// ℓ_s with the implied boundary zeros, s = 0..=r.
    pub fn ell_at(&self, s: usize) -> i64 {
        if s == 0 || s > self.ell.len() {
            0
        } else {
            self.ell[s - 1]
        }
    }

    /// κ_s = ℓ_{s−1} − ℓ_s for s = 1..=r; always sums to zero.
    pub fn kappa(&self) -> Vec<i64> {
        (1..=self.r()).map(|s| self.ell_at(s - 1) - self.ell_at(s)).collect()
    }

    /// Inverse of [`Self::kappa`]: ℓ_s = Σ_{a>s} κ_a.
    pub fn from_kappa(kappa: &[i64]) -> Result<Self> {
        if kappa.iter().sum::<i64>() != 0 {
            return Err(Error::invalid("kappa must sum to zero"));
        }
        if kappa.is_empty() {
            return Err(Error::invalid("kappa must be nonempty"));
        }
        let r = kappa.len();
        let ell = (1..r)
            .map(|s| kappa[s..].iter().sum::<i64>())
            .collect();
        Ok(CriticalClassVector { ell })
    }
}

/// Shift parameters attached to a chain of r operators: the complex
/// shifts ν_1 … ν_r and the separation variables t_1 … t_{r−1}.
///
/// The t's are kept complex because convergence of the configuration
/// sums requires Im t of a definite sign; purely real separations enter
/// through a damping deformation chosen by the evaluation policy.
#[derive(Debug, Clone)]
pub struct ShiftParams {
    pub nu: Vec<Complex64>,
    pub t: Vec<Complex64>,
}

impl ShiftParams {
    pub fn new(nu: Vec<Complex64>, t: Vec<Complex64>) -> Result<Self> {
        if nu.len() != t.len() + 1 || nu.len() < 2 {
            return Err(Error::invalid(format!(
                "need r shifts and r−1 separations, got {} and {}",
                nu.len(),
                t.len()
            )));
        }
        for v in &nu {
            check_shift(*v)?;
        }
        Ok(ShiftParams { nu, t })
    }

    pub fn r(&self) -> usize {
        self.nu.len()
    }

    /// Partial sums t̄_s = t_1 + … + t_s, s = 0..r−1 (t̄_0 = 0).
    pub fn t_bar(&self) -> Vec<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut out = vec![acc];
        for &ts in &self.t {
            acc += ts;
            out.push(acc);
        }
        out
    }
}

/// Re ν on 1/2 + ℤ degenerates the sin(πν)-normalised factors.
pub fn check_shift(nu: Complex64) -> Result<()> {
    let d = (nu.re - 0.5) - (nu.re - 0.5).round();
    if d.abs() < 1e-9 {
        return Err(Error::HalfIntegerShift { re: nu.re });
    }
    Ok(())
}

/// The cheapest excitation pattern realising a pure level transfer ℓ:
/// for ℓ ≥ 0, the first ℓ particles on the right boundary paired with
/// the first ℓ holes on the left one (mirrored for ℓ ≤ 0).  Its
/// momentum offset is exactly 2ℓp_F with no 1/L remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FundamentalRepresentative {
    pub ell: i64,
}

impl FundamentalRepresentative {
    pub fn right_boundary(&self) -> ParticleHoleSet {
        let ladder: Vec<u32> = (1..=self.ell.unsigned_abs() as u32).collect();
        if self.ell >= 0 {
            ParticleHoleSet::new(ladder, vec![]).unwrap()
        } else {
            ParticleHoleSet::new(vec![], ladder).unwrap()
        }
    }

    pub fn left_boundary(&self) -> ParticleHoleSet {
        let ladder: Vec<u32> = (1..=self.ell.unsigned_abs() as u32).collect();
        if self.ell >= 0 {
            ParticleHoleSet::new(vec![], ladder).unwrap()
        } else {
            ParticleHoleSet::new(ladder, vec![]).unwrap()
        }
    }

    /// 1/L part of the momentum in units of 2π/L: Σ p_+ + Σ(h_+ − 1)
    /// − Σ(p_− − 1) − Σ h_−; vanishes for the representative.
    pub fn momentum_remainder(&self) -> i64 {
        let right = self.right_boundary();
        let left = self.left_boundary();
        let plus: i64 = right.particles().iter().map(|&p| p as i64).sum::<i64>()
            + right.holes().iter().map(|&h| h as i64 - 1).sum::<i64>();
        let minus: i64 = left.particles().iter().map(|&p| p as i64 - 1).sum::<i64>()
            + left.holes().iter().map(|&h| h as i64).sum::<i64>();
        plus - minus
    }
}

/// Umklapp momentum offset 2 ℓ p_F carried by a level transfer ℓ.
pub fn momentum_offset(ell: i64, p_f: f64) -> f64 {
    2.0 * ell as f64 * p_f
}

pub(crate) const COLLISION_EPS: f64 = 1e-12;

/// Pair-coupling factor between the excitation sets of two adjacent
/// sectors sharing the shift ν:
///
/// ϖ(J; J′ | ν) = Π_{h∈J} [ Π_{k∈J′}(1 − k − h + ν) / Π_{t∈J′}(t − h + ν) ]
///              · Π_{p∈J} [ Π_{t∈J′}(p + t + ν − 1) / Π_{k∈J′}(p − k + ν) ]
///
/// with (k, t) the particles/holes of J′.  A vanishing denominator is a
/// genuine collision of levels and is reported as such.
pub fn varpi(prev: &ParticleHoleSet, next: &ParticleHoleSet, nu: Complex64) -> Result<Complex64> {
    let mut val = Complex64::new(1.0, 0.0);
    for &h in &prev.holes {
        let h = h as f64;
        for &k in &next.particles {
            val *= 1.0 - k as f64 - h + nu;
        }
        for &t in &next.holes {
            let d = t as f64 - h + nu;
            if d.norm() < COLLISION_EPS {
                return Err(Error::CollidingPair {
                    left: t as f64,
                    right: h,
                    nu,
                });
            }
            val /= d;
        }
    }
    for &p in &prev.particles {
        let p = p as f64;
        for &t in &next.holes {
            val *= p + t as f64 + nu - 1.0;
        }
        for &k in &next.particles {
            let d = p - k as f64 + nu;
            if d.norm() < COLLISION_EPS {
                return Err(Error::CollidingPair {
                    left: p,
                    right: k as f64,
                    nu,
                });
            }
            val /= d;
        }
    }
    Ok(val)
}

/// Quadratic weight ρ(ν) = ½(Δℓ)² + ½ν² − Δℓ·ν of a sector with level
/// transfer Δℓ = ℓ_s − ℓ_{s−1}.
pub fn rho(ell_s: i64, ell_prev: i64, nu: Complex64) -> Complex64 {
    let d = (ell_s - ell_prev) as f64;
    0.5 * d * d + 0.5 * nu * nu - d * nu
}

/// Completed-square form ½(Δℓ − ν)² of [`rho`]; identical value, kept
/// separate so the rearrangement can be cross-checked numerically.
pub fn rho_completed(ell_s: i64, ell_prev: i64, nu: Complex64) -> Complex64 {
    let d = (ell_s - ell_prev) as f64;
    0.5 * (d - nu) * (d - nu)
}

fn sin_pi_over_pi(nu: Complex64) -> Complex64 {
    (PI * nu).sin() / PI
}

/// Boundary factor of a single excitation set J at separation t.
///
/// For the right boundary (`Sign::Plus`):
///
/// ℛ⁺(J|ν,η;t) = (−sinπν·sinπη/π²)^{n_h} · C(J)²
///   · Π_p e^{itp} Γ(p−ν)Γ(p+η)/Γ(p)² · Π_h e^{it(h−1)} Γ(h+ν)Γ(h−η)/Γ(h)²
///
/// and for the left one the phases wind the opposite way with ν, η
/// swapped in sign; C(J)² is the squared Cauchy block
/// Π_{a<b}(p_a−p_b)²(h_a−h_b)² / Π_{a,b}(p_a+h_b−1)².
///
/// Convergence of Σ_J ℛ^± requires Im t > 0 resp. Im t < 0; the factor
/// itself is defined for any t.
pub fn r_factor(
    sign: Sign,
    set: &ParticleHoleSet,
    nu: Complex64,
    eta: Complex64,
    t: Complex64,
) -> Result<Complex64> {
    check_shift(nu)?;
    check_shift(eta)?;
    let i = Complex64::new(0.0, 1.0);
    let nh = set.n_h() as i32;
    let pref = -sin_pi_over_pi(nu) * sin_pi_over_pi(eta);
    let mut acc = if nh == 0 {
        LogComplex::ZERO_LOG
    } else {
        LogComplex::from_complex(pref).pow(Complex64::new(nh as f64, 0.0))
    };
    acc = acc.mul(LogComplex::from_complex(cauchy_sq(set)));

    let mut num = Vec::with_capacity(2 * (set.n_p() + set.n_h()));
    let mut den = Vec::with_capacity(2 * (set.n_p() + set.n_h()));
    let mut phase_exp = Complex64::new(0.0, 0.0);
    for &p in set.particles() {
        let pf = p as f64;
        match sign {
            Sign::Plus => {
                num.push(pf - nu);
                num.push(pf + eta);
                phase_exp += i * t * pf;
            }
            Sign::Minus => {
                num.push(pf + nu);
                num.push(pf - eta);
                phase_exp += i * t * (1.0 - pf);
            }
        }
        den.push(Complex64::new(pf, 0.0));
        den.push(Complex64::new(pf, 0.0));
    }
    for &h in set.holes() {
        let hf = h as f64;
        match sign {
            Sign::Plus => {
                num.push(hf + nu);
                num.push(hf - eta);
                phase_exp += i * t * (hf - 1.0);
            }
            Sign::Minus => {
                num.push(hf - nu);
                num.push(hf + eta);
                phase_exp += -i * t * hf;
            }
        }
        den.push(Complex64::new(hf, 0.0));
        den.push(Complex64::new(hf, 0.0));
    }
    acc = acc.mul(gamma_ratio(&num, &den)?);
    acc = acc.mul(LogComplex::new(phase_exp.re, phase_exp.im));
    Ok(acc.exp())
}

/// Squared Cauchy block of one set.
pub(crate) fn cauchy_sq(set: &ParticleHoleSet) -> Complex64 {
    let mut v = 1.0f64;
    let ps = set.particles();
    let hs = set.holes();
    for a in 0..ps.len() {
        for b in 0..a {
            let d = ps[a] as f64 - ps[b] as f64;
            v *= d * d;
        }
    }
    for a in 0..hs.len() {
        for b in 0..a {
            let d = hs[a] as f64 - hs[b] as f64;
            v *= d * d;
        }
    }
    for &p in ps {
        for &h in hs {
            let d = p as f64 + h as f64 - 1.0;
            v /= d * d;
        }
    }
    Complex64::new(v, 0.0)
}

/// Form factor of a critical-class state between two sectors, finite-L
/// normalised.  `prev` carries the (p, h) of the earlier sector, `next`
/// the (k, t) of the later one, and `rho_val` the quadratic weight that
/// scales the (2π/L) prefactor.
pub fn ff_critical(
    sign: Sign,
    prev: &ParticleHoleSet,
    next: &ParticleHoleSet,
    nu: Complex64,
    rho_val: Complex64,
    l_system: f64,
) -> Result<Complex64> {
    check_shift(nu)?;
    if l_system <= 0.0 {
        return Err(Error::domain("system length must be positive"));
    }
    let (n_h, n_t) = (prev.n_h(), next.n_h());
    // (2π/L)^ρ, principal branch on the positive real base
    let base = (2.0 * PI / l_system).ln();
    let mut acc = LogComplex::new(base, 0.0).pow(rho_val);
    // (−1)^{n_t} resp. (−1)^{n_h} and (sin πν/π)^{n_t+n_h}
    let parity = match sign {
        Sign::Plus => n_t,
        Sign::Minus => n_h,
    };
    acc.phase += PI * parity as f64;
    let spp = sin_pi_over_pi(nu);
    if n_t + n_h > 0 {
        acc = acc.mul(LogComplex::from_complex(spp).pow(Complex64::new((n_t + n_h) as f64, 0.0)));
    }
    let vp = match sign {
        Sign::Plus => varpi(prev, next, nu)?,
        Sign::Minus => varpi(prev, next, -nu)?,
    };
    acc = acc.mul(LogComplex::from_complex(vp));
    acc = acc.mul(LogComplex::from_complex(signed_cauchy(prev)));
    acc = acc.mul(LogComplex::from_complex(signed_cauchy(next)));
    // joint Γ ratio of all labels
    let mut num = Vec::new();
    let mut den = Vec::new();
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    for &p in prev.particles() {
        num.push(p as f64 + s * nu);
        den.push(Complex64::new(p as f64, 0.0));
    }
    for &h in prev.holes() {
        num.push(h as f64 - s * nu);
        den.push(Complex64::new(h as f64, 0.0));
    }
    for &k in next.particles() {
        num.push(k as f64 - s * nu);
        den.push(Complex64::new(k as f64, 0.0));
    }
    for &t in next.holes() {
        num.push(t as f64 + s * nu);
        den.push(Complex64::new(t as f64, 0.0));
    }
    acc = acc.mul(gamma_ratio(&num, &den)?);
    Ok(acc.exp())
}

/// Signed Cauchy block Π_{a>b}(p_a−p_b)·Π_{a<b}(h_a−h_b)/Π(p_a+h_b−1).
fn signed_cauchy(set: &ParticleHoleSet) -> Complex64 {
    let mut v = 1.0f64;
    let ps = set.particles();
    let hs = set.holes();
    for a in 0..ps.len() {
        for b in 0..a {
            v *= ps[a] as f64 - ps[b] as f64;
        }
    }
    for a in 0..hs.len() {
        for b in a + 1..hs.len() {
            v *= hs[a] as f64 - hs[b] as f64;
        }
    }
    for &p in ps {
        for &h in hs {
            v /= p as f64 + h as f64 - 1.0;
        }
    }
    Complex64::new(v, 0.0)
}

/// Barnes-type norm constant of a sector with boundary shifts ν⁺, ν⁻
/// between level transfers ℓ_prev and ℓ_s:
///
/// C = G(1+ν⁻) G(1−ν⁺) G(1+ℓ_s−ν⁻) G(1−ℓ_s+ν⁺)
///   / [G(1−ℓ_s+ν⁻) G(1+ℓ_s−ν⁺) G(1−ℓ_prev+ℓ_s−ν⁻) G(1+ℓ_prev−ℓ_s+ν⁺)]
pub fn c_norm(
    ell_prev: i64,
    ell_s: i64,
    nu_plus: Complex64,
    nu_minus: Complex64,
) -> Result<Complex64> {
    let lp = ell_prev as f64;
    let ls = ell_s as f64;
    let num = [
        1.0 + nu_minus,
        1.0 - nu_plus,
        1.0 + ls - nu_minus,
        1.0 - ls + nu_plus,
    ];
    let den = [
        1.0 - ls + nu_minus,
        1.0 + ls - nu_plus,
        1.0 - lp + ls - nu_minus,
        1.0 + lp - ls + nu_plus,
    ];
    Ok(crate::specfun::barnes_ratio(&num, &den)?.exp())
}

/// Quadratic exponent ϑ of a critical class, in the form resolved over
/// sectors:
///
/// ϑ = ½ Σ_s [(ν_s⁺)² + (ν_s⁻)²]
///   − Σ_{s<r} [(ν_s⁺ + ν_s⁻ − ν_{s+1}⁺ − ν_{s+1}⁻) ℓ_s − 2ℓ_s²]
///   − 2 Σ_{1<s<r} ℓ_s ℓ_{s−1}
pub fn theta_exponent(
    cls: &CriticalClassVector,
    nu_plus: &[Complex64],
    nu_minus: &[Complex64],
) -> Result<Complex64> {
    let r = cls.r();
    if nu_plus.len() != r || nu_minus.len() != r {
        return Err(Error::invalid("need one shift pair per operator"));
    }
    let mut v = Complex64::new(0.0, 0.0);
    for s in 0..r {
        v += 0.5 * (nu_plus[s] * nu_plus[s] + nu_minus[s] * nu_minus[s]);
    }
    for s in 1..r {
        let ls = cls.ell_at(s) as f64;
        let w = nu_plus[s - 1] + nu_minus[s - 1] - nu_plus[s] - nu_minus[s];
        v -= w * ls - 2.0 * ls * ls;
    }
    for s in 2..r {
        v -= 2.0 * (cls.ell_at(s) * cls.ell_at(s - 1)) as f64;
    }
    Ok(v)
}

/// ϑ in the κ-resolved form ½ Σ_s [(ν_s⁺+κ_s)² + (ν_s⁻+κ_s)²]; equal to
/// [`theta_exponent`] identically, exposed for the dual-route check.
pub fn theta_exponent_kappa_form(
    cls: &CriticalClassVector,
    nu_plus: &[Complex64],
    nu_minus: &[Complex64],
) -> Result<Complex64> {
    let r = cls.r();
    if nu_plus.len() != r || nu_minus.len() != r {
        return Err(Error::invalid("need one shift pair per operator"));
    }
    let kappa = cls.kappa();
    let mut v = Complex64::new(0.0, 0.0);
    for s in 0..r {
        let k = kappa[s] as f64;
        v += 0.5 * ((nu_plus[s] + k) * (nu_plus[s] + k) + (nu_minus[s] + k) * (nu_minus[s] + k));
    }
    Ok(v)
}
