//! Large-distance asymptotics of r-point correlators.
//!
//! Each critical class vector κ (integers, Σκ = 0) contributes one term
//!
//!   𝓕(κ) · e^{2ip_F Σκ_s x_s} · Π_{b>a} [i(x_b−x_a)]^{θ_b⁻θ_a⁻} [−i(x_b−x_a)]^{θ_b⁺θ_a⁺}
//!
//! in the infinite-volume normalization, and
//!
//!   𝓕(κ) · e^{2ip_F Σκ_s x_s} · (2π/L)^{Σ_s[(θ_s⁺)²+(θ_s⁻)²]/2}
//!        · Π_{b>a} [1−e^{2iπ(x_b−x_a)/L}]^{θ_b⁺θ_a⁺} [1−e^{−2iπ(x_b−x_a)/L}]^{θ_b⁻θ_a⁻}
//!
//! at finite volume L, with per-site exponents θ_s^± = κ_s Z(q) ∓ o_s/(2Z(q)).
//! Since chord factors behave as (2π/L)(∓i(x_b−x_a)) for L → ∞ and the
//! leftover (2π/L) power is ½(Σθ⁺)² + ½(Σθ⁻)², the two forms agree in the
//! limit exactly when the θ-sums vanish — which Σκ = 0 and Σo = 0
//! guarantee.  Terms are sorted by decay power (ties by lexicographic κ),
//! so truncating the list truncates the asymptotic series.

use crate::bethe::critical_exponents;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;

const PI: f64 = std::f64::consts::PI;
const TAU: f64 = std::f64::consts::TAU;

/// Non-universal amplitudes 𝓕 keyed by the class vector: opaque inputs
/// (limits of properly normalized form factors), defaulting to 1.
#[derive(Debug, Clone)]
pub enum AmplitudeMap {
    Unit,
    Table(HashMap<Vec<i64>, Complex64>),
}

impl AmplitudeMap {
    fn get(&self, kappa: &[i64]) -> Result<Complex64> {
        match self {
            AmplitudeMap::Unit => Ok(Complex64::new(1.0, 0.0)),
            AmplitudeMap::Table(map) => map.get(kappa).copied().ok_or_else(|| {
                Error::MissingAmplitude {
                    kappa: kappa.to_vec(),
                }
            }),
        }
    }
}

/// An r-point correlator: operator levels o_s at positions x_s, with the
/// Fermi data (p_F, Z(q)) of the underlying model supplying the
/// exponents.
#[derive(Debug, Clone)]
pub struct MultipointSpec {
    pub positions: Vec<f64>,
    pub levels: Vec<i64>,
    pub amplitudes: AmplitudeMap,
    pub p_f: f64,
    pub z_q: f64,
}

impl MultipointSpec {
    pub fn new(
        positions: Vec<f64>,
        levels: Vec<i64>,
        amplitudes: AmplitudeMap,
        p_f: f64,
        z_q: f64,
    ) -> Result<MultipointSpec> {
        if positions.is_empty() || positions.len() != levels.len() {
            return Err(Error::invalid(
                "need equally many positions and levels, at least one site",
            ));
        }
        if !(z_q.is_finite() && z_q != 0.0) {
            return Err(Error::domain(format!("dressed charge Z(q) = {z_q} unusable")));
        }
        for (i, &xi) in positions.iter().enumerate() {
            if !xi.is_finite() {
                return Err(Error::invalid("non-finite position"));
            }
            for &xj in &positions[i + 1..] {
                if (xi - xj).abs() <= 1e-9 * xi.abs().max(xj.abs()).max(1.0) {
                    return Err(Error::invalid(format!(
                        "coincident positions {xi} and {xj}"
                    )));
                }
            }
        }
        Ok(MultipointSpec {
            positions,
            levels,
            amplitudes,
            p_f,
            z_q,
        })
    }

    pub fn r(&self) -> usize {
        self.positions.len()
    }

    /// Whether Σo_s = 0 (the operator string conserves charge; this is
    /// what makes Σθ^± vanish and licenses the L-independent limit form).
    pub fn charge_balanced(&self) -> bool {
        self.levels.iter().sum::<i64>() == 0
    }

    /// Site indices in ascending-position order; every pair product runs
    /// in this order so each [±i(x_b−x_a)] has x_b > x_a and a fixed
    /// principal branch.
    fn ascending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.r()).collect();
        idx.sort_by(|&a, &b| self.positions[a].total_cmp(&self.positions[b]));
        idx
    }
}

/// One term of the asymptotic series.
#[derive(Debug, Clone)]
pub struct AsymptoticTerm {
    /// class vector, Σκ = 0, in the caller's site order
    pub kappa: Vec<i64>,
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    /// Σ_s[(θ_s⁺)² + (θ_s⁻)²]/2 — the power of the overall scale
    pub decay_power: f64,
    /// 2 p_F Σ κ_s x_s
    pub phase: f64,
    pub coefficient: Complex64,
}

/// Flat export row for one term.
#[derive(Debug, Clone, Serialize)]
pub struct TermRecord {
    pub kappa: Vec<i64>,
    pub power: f64,
    pub phase: f64,
    pub coeff_re: f64,
    pub coeff_im: f64,
}

pub fn term_records(terms: &[AsymptoticTerm]) -> Vec<TermRecord> {
    terms
        .iter()
        .map(|t| TermRecord {
            kappa: t.kappa.clone(),
            power: t.decay_power,
            phase: t.phase,
            coeff_re: t.coefficient.re,
            coeff_im: t.coefficient.im,
        })
        .collect()
}

pub fn terms_csv(terms: &[AsymptoticTerm]) -> String {
    let mut out = String::from("kappa,power,phase,coeff_re,coeff_im\n");
    for t in terms {
        let kappa = t
            .kappa
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!(
            "{kappa},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            t.decay_power, t.phase, t.coefficient.re, t.coefficient.im
        ));
    }
    out
}

/// All κ ∈ [−box, box]^r with Σκ = 0, in lexicographic order.
pub fn enumerate_kappa(r: usize, box_radius: i64) -> Vec<Vec<i64>> {
    assert!(r >= 1 && box_radius >= 1, "need r ≥ 1 and box ≥ 1");
    let mut out = Vec::new();
    let mut cur = vec![0i64; r];
    fn fill(cur: &mut Vec<i64>, pos: usize, sum: i64, b: i64, out: &mut Vec<Vec<i64>>) {
        let left = cur.len() - pos;
        if left == 0 {
            if sum == 0 {
                out.push(cur.clone());
            }
            return;
        }
        // remaining entries can move the running sum by at most b each
        if sum.abs() > left as i64 * b {
            return;
        }
        for k in -b..=b {
            cur[pos] = k;
            fill(cur, pos + 1, sum + k, b, out);
        }
        cur[pos] = 0;
    }
    fill(&mut cur, 0, 0, box_radius, &mut out);
    out
}

/// Minimal decay exponent over the κ box, Σ_s[(θ_s⁺)² + (θ_s⁻)²]
/// (twice the `decay_power` of the corresponding term), with every
/// minimizer within 1e−12 reported: degenerate ties are data.
#[derive(Debug, Clone)]
pub struct ExponentMinimum {
    pub minimizers: Vec<Vec<i64>>,
    pub power: f64,
}

pub fn minimize_exponent(spec: &MultipointSpec, box_radius: i64) -> ExponentMinimum {
    let best = scan_minimum(spec, box_radius);
    // the exponent grows quadratically in κ, so widening the box must not
    // improve the minimum; certify rather than assume
    let wider = scan_minimum(spec, box_radius + 1);
    assert!(
        (best.power - wider.power).abs() <= 1e-12 * best.power.max(1.0),
        "exponent minimum escaped the search box: {} vs {} at box+1",
        best.power,
        wider.power
    );
    best
}

fn scan_minimum(spec: &MultipointSpec, box_radius: i64) -> ExponentMinimum {
    let mut min = f64::INFINITY;
    let mut ties: Vec<Vec<i64>> = Vec::new();
    for kappa in enumerate_kappa(spec.r(), box_radius) {
        let f: f64 = kappa
            .iter()
            .zip(&spec.levels)
            .map(|(&k, &o)| {
                let (tp, tm) = critical_exponents(spec.z_q, k, o);
                tp * tp + tm * tm
            })
            .sum();
        if ties.is_empty() || f < min - 1e-12 * min.abs().max(1.0) {
            min = f;
            ties.clear();
            ties.push(kappa);
        } else if (f - min).abs() <= 1e-12 * min.abs().max(1.0) {
            ties.push(kappa);
        }
    }
    ExponentMinimum {
        minimizers: ties,
        power: min,
    }
}

struct TermParts {
    kappa: Vec<i64>,
    theta_plus: Vec<f64>,
    theta_minus: Vec<f64>,
    decay_power: f64,
    phase: f64,
    amp: Complex64,
}

fn term_parts(spec: &MultipointSpec, kappa: Vec<i64>) -> Result<TermParts> {
    let amp = spec.amplitudes.get(&kappa)?;
    let (mut tp, mut tm) = (Vec::with_capacity(spec.r()), Vec::with_capacity(spec.r()));
    for (&k, &o) in kappa.iter().zip(&spec.levels) {
        let (p, m) = critical_exponents(spec.z_q, k, o);
        tp.push(p);
        tm.push(m);
    }
    if spec.charge_balanced() {
        let (sp, sm) = (tp.iter().sum::<f64>(), tm.iter().sum::<f64>());
        assert!(
            sp.abs() <= 1e-9 && sm.abs() <= 1e-9,
            "θ-sum rule violated for balanced levels: {sp:e}, {sm:e}"
        );
    }
    let decay_power = tp
        .iter()
        .zip(&tm)
        .map(|(a, b)| (a * a + b * b) / 2.0)
        .sum();
    let phase = 2.0
        * spec.p_f
        * kappa
            .iter()
            .zip(&spec.positions)
            .map(|(&k, &x)| k as f64 * x)
            .sum::<f64>();
    Ok(TermParts {
        kappa,
        theta_plus: tp,
        theta_minus: tm,
        decay_power,
        phase,
        amp,
    })
}

fn sort_terms(terms: &mut [AsymptoticTerm]) {
    terms.sort_by(|a, b| {
        a.decay_power
            .total_cmp(&b.decay_power)
            .then_with(|| a.kappa.cmp(&b.kappa))
    });
}

/// Infinite-volume terms over the κ box, sorted ascending by decay power.
pub fn assemble_terms_infinite_l(
    spec: &MultipointSpec,
    box_radius: i64,
) -> Result<Vec<AsymptoticTerm>> {
    let order = spec.ascending();
    let mut terms = Vec::new();
    for kappa in enumerate_kappa(spec.r(), box_radius) {
        let p = term_parts(spec, kappa)?;
        // Π_{b>a} [i d]^{θ⁻θ⁻}[−i d]^{θ⁺θ⁺} with d = x_b − x_a > 0:
        // ln(±i d) = ln d ± iπ/2 on the principal branch
        let mut w = Complex64::new(0.0, 0.0);
        for (bi, &b) in order.iter().enumerate() {
            for &a in &order[..bi] {
                let d = spec.positions[b] - spec.positions[a];
                let (pp, mm) = (
                    p.theta_plus[b] * p.theta_plus[a],
                    p.theta_minus[b] * p.theta_minus[a],
                );
                w += Complex64::new((pp + mm) * d.ln(), (mm - pp) * PI / 2.0);
            }
        }
        terms.push(AsymptoticTerm {
            coefficient: p.amp * w.exp(),
            kappa: p.kappa,
            theta_plus: p.theta_plus,
            theta_minus: p.theta_minus,
            decay_power: p.decay_power,
            phase: p.phase,
        });
    }
    sort_terms(&mut terms);
    Ok(terms)
}

/// Finite-volume terms on the ring of circumference `length`; positions
/// must lie strictly inside (0, length).
pub fn assemble_terms_finite_l(
    spec: &MultipointSpec,
    box_radius: i64,
    length: u64,
) -> Result<Vec<AsymptoticTerm>> {
    let l = length as f64;
    if spec.positions.iter().any(|&x| x <= 0.0 || x >= l) {
        return Err(Error::domain(format!(
            "positions must lie strictly inside (0, {length})"
        )));
    }
    let order = spec.ascending();
    let mut terms = Vec::new();
    for kappa in enumerate_kappa(spec.r(), box_radius) {
        let p = term_parts(spec, kappa)?;
        // per-site scale (2π/L)^{[(θ⁺)²+(θ⁻)²]/2} collects to the decay power
        let mut coeff = p.amp * Complex64::new((TAU / l).powf(p.decay_power), 0.0);
        for (bi, &b) in order.iter().enumerate() {
            for &a in &order[..bi] {
                let d = spec.positions[b] - spec.positions[a];
                let chord = Complex64::new(0.0, TAU * d / l).exp();
                coeff *= (Complex64::new(1.0, 0.0) - chord)
                    .powf(p.theta_plus[b] * p.theta_plus[a]);
                coeff *= (Complex64::new(1.0, 0.0) - chord.conj())
                    .powf(p.theta_minus[b] * p.theta_minus[a]);
            }
        }
        terms.push(AsymptoticTerm {
            coefficient: coeff,
            kappa: p.kappa,
            theta_plus: p.theta_plus,
            theta_minus: p.theta_minus,
            decay_power: p.decay_power,
            phase: p.phase,
        });
    }
    sort_terms(&mut terms);
    Ok(terms)
}

/// Leading group when every distance carries the same scale R: positions
/// are the scaled separations z, and only the terms sharing the minimal
/// decay power survive division by the common R^{−power}.
pub fn conformal_leading(spec: &MultipointSpec, box_radius: i64) -> Result<Vec<AsymptoticTerm>> {
    let terms = assemble_terms_infinite_l(spec, box_radius)?;
    let min = terms[0].decay_power;
    Ok(terms
        .into_iter()
        .take_while(|t| (t.decay_power - min).abs() <= 1e-9 * min.max(1.0))
        .collect())
}

/// Leading large-distance asymptotics of the 4-point ⟨σˣσˣσˣσˣ⟩ chain
/// correlator:
///
///   2 a₊²a₋² { |(x₂−x₁)(x₄−x₃) / ((x₃−x₁)(x₄−x₁)(x₃−x₂)(x₄−x₂))|^{1/(2Z²)}
///              + (2↔3) + (2↔4) },
///
/// the three ways of pairing the four σ^± levels, each decaying with the
/// shared power 2/Z² in the overall scale.
pub fn xxz_xxxx_leading(
    positions: [f64; 4],
    z_q: f64,
    amp_plus: Complex64,
    amp_minus: Complex64,
) -> Result<Complex64> {
    if !(z_q > 0.0) {
        return Err(Error::domain(format!("dressed charge Z(q) = {z_q} must be positive")));
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let (xi, xj) = (positions[i], positions[j]);
            if (xi - xj).abs() <= 1e-9 * xi.abs().max(xj.abs()).max(1.0) {
                return Err(Error::invalid(format!("coincident positions {xi} and {xj}")));
            }
        }
    }
    let d = |b: usize, a: usize| positions[b] - positions[a];
    let ratio = |p: [usize; 4]| {
        // pairing (p0 p1)(p2 p3): the paired distances over the crossed ones
        (d(p[1], p[0]) * d(p[3], p[2]))
            / (d(p[2], p[0]) * d(p[3], p[0]) * d(p[2], p[1]) * d(p[3], p[1]))
    };
    let e = 1.0 / (2.0 * z_q * z_q);
    let sum: f64 = [
        ratio([0, 1, 2, 3]),
        ratio([0, 2, 1, 3]),
        ratio([0, 3, 1, 2]),
    ]
    .iter()
    .map(|r| r.abs().powf(e))
    .sum();
    Ok(2.0 * amp_plus * amp_plus * amp_minus * amp_minus * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_spec(positions: Vec<f64>, levels: Vec<i64>, z_q: f64) -> MultipointSpec {
        MultipointSpec::new(positions, levels, AmplitudeMap::Unit, 0.75, z_q).unwrap()
    }

    /// Lattice-point count of {κ ∈ [−b,b]^r : Σκ = 0} by convolving the
    /// indicator of [−b,b] with itself r times and reading the center.
    fn convolution_count(r: usize, b: i64) -> usize {
        let width = 2 * b as usize + 1;
        let mut dist = vec![1u64; width];
        for _ in 1..r {
            let mut next = vec![0u64; dist.len() + width - 1];
            for (i, &x) in dist.iter().enumerate() {
                for j in 0..width {
                    next[i + j] += x;
                }
            }
            dist = next;
        }
        dist[(dist.len() - 1) / 2] as usize
    }

    #[test]
    fn kappa_enumeration_matches_convolution_count() {
        assert_eq!(enumerate_kappa(2, 1).len(), 3);
        assert_eq!(enumerate_kappa(3, 1).len(), 7);
        assert_eq!(enumerate_kappa(4, 1).len(), 19);
        for r in 1..=5 {
            for b in 1..=3 {
                let all = enumerate_kappa(r, b);
                assert_eq!(all.len(), convolution_count(r, b), "r={r} b={b}");
                let mut seen = all.clone();
                seen.dedup();
                assert_eq!(seen.len(), all.len(), "duplicates at r={r} b={b}");
                assert!(all.windows(2).all(|w| w[0] < w[1]), "lex order broken");
                for k in &all {
                    assert_eq!(k.iter().sum::<i64>(), 0);
                    assert!(k.iter().all(|v| v.abs() <= b));
                }
            }
        }
    }

    #[test]
    fn exponent_minimum_desk_cases() {
        // balanced zero levels: power 0 at the unique κ = 0
        let spec = unit_spec(vec![0.0, 3.0, 7.0], vec![0, 0, 0], 1.3);
        let m = minimize_exponent(&spec, 2);
        assert_eq!(m.minimizers, vec![vec![0, 0, 0]]);
        assert_eq!(m.power, 0.0);

        // Z=1, o=(2,−2): brute force over the box with the explicit
        // per-site form 2(κZ)² + o²/(2Z²)
        let spec = unit_spec(vec![0.0, 1.0], vec![2, -2], 1.0);
        let m = minimize_exponent(&spec, 3);
        let mut brute = f64::INFINITY;
        for k in -3i64..=3 {
            let f = 2.0 * (k * k + k * k) as f64 + (4.0 + 4.0) / 2.0;
            brute = brute.min(f);
        }
        assert!((m.power - brute).abs() <= 1e-12);
        assert_eq!(m.minimizers, vec![vec![0, 0]]);

        // alternating ±1 levels: min power 2/Z² independent of the pattern
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let z = rng.gen_range(0.6..1.8);
            for levels in [[1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]] {
                let spec = unit_spec(vec![0.0, 1.0, 2.5, 4.0], levels.to_vec(), z);
                let m = minimize_exponent(&spec, 2);
                assert!((m.power - 2.0 / (z * z)).abs() <= 1e-12 / (z * z));
                assert_eq!(m.minimizers, vec![vec![0, 0, 0, 0]]);
            }
        }
    }

    #[test]
    fn free_fermion_two_point_term_matches_hand_composition() {
        // o=(1,−1), Z=1, κ=0: θ pairs (∓½, ±½) give
        // (i d)^{−¼}(−i d)^{−¼} = d^{−1/2}
        let (x1, x2) = (0.3, 2.7);
        let spec = unit_spec(vec![x1, x2], vec![1, -1], 1.0);
        let terms = assemble_terms_infinite_l(&spec, 1).unwrap();
        let t0 = &terms[0];
        assert_eq!(t0.kappa, vec![0, 0]);
        assert_eq!(t0.theta_plus, vec![-0.5, 0.5]);
        assert_eq!(t0.theta_minus, vec![0.5, -0.5]);
        let d = x2 - x1;
        let hand = (Complex64::new(0.0, d).powf(-0.25)) * (Complex64::new(0.0, -d).powf(-0.25));
        assert!((t0.coefficient - hand).norm() <= 1e-14);
        assert!((t0.coefficient.re - d.powf(-0.5)).abs() <= 1e-14);
        assert!(t0.coefficient.im.abs() <= 1e-15);
        assert!((t0.decay_power - 0.5).abs() <= 1e-15);
        assert_eq!(t0.phase, 0.0);
    }

    #[test]
    fn zero_levels_leading_term_is_the_amplitude() {
        let spec = unit_spec(vec![1.0, 2.0, 4.0], vec![0, 0, 0], 1.2);
        let lead = conformal_leading(&spec, 2).unwrap();
        assert_eq!(lead.len(), 1);
        assert_eq!(lead[0].kappa, vec![0, 0, 0]);
        assert_eq!(lead[0].decay_power, 0.0);
        assert_eq!(lead[0].coefficient, Complex64::new(1.0, 0.0));
        let all = assemble_terms_infinite_l(&spec, 2).unwrap();
        assert_eq!(all.len(), enumerate_kappa(3, 2).len());
        assert_eq!(all[0].kappa, lead[0].kappa);
        // every other term decays strictly faster
        assert!(all[1].decay_power > 0.0);
    }

    #[test]
    fn assembled_multiset_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let r = rng.gen_range(3usize..=4);
            let mut positions: Vec<f64> = (0..r).map(|_| rng.gen_range(0.5..40.0)).collect();
            positions.sort_by(f64::total_cmp);
            for i in 1..r {
                positions[i] += i as f64; // enforce separation
            }
            let mut levels: Vec<i64> = (0..r - 1).map(|_| rng.gen_range(-2i64..=2)).collect();
            levels.push(-levels.iter().sum::<i64>());
            let z = rng.gen_range(0.7..1.6);
            let spec = unit_spec(positions.clone(), levels.clone(), z);
            let mut perm: Vec<usize> = (0..r).collect();
            for i in (1..r).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let spec_p = unit_spec(
                perm.iter().map(|&i| positions[i]).collect(),
                perm.iter().map(|&i| levels[i]).collect(),
                z,
            );
            // match terms by class vector (mapped back through the
            // permutation): power ties make positional matching ambiguous
            let mut back: HashMap<Vec<i64>, (f64, f64, Complex64)> =
                assemble_terms_infinite_l(&spec_p, 1)
                    .unwrap()
                    .into_iter()
                    .map(|t| {
                        let mut un = vec![0i64; r];
                        for (i, &site) in perm.iter().enumerate() {
                            un[site] = t.kappa[i];
                        }
                        (un, (t.decay_power, t.phase, t.coefficient))
                    })
                    .collect();
            for t in assemble_terms_infinite_l(&spec, 1).unwrap() {
                let (pw, ph, c) = back.remove(&t.kappa).expect("κ present in both");
                assert!((t.decay_power - pw).abs() <= 1e-12 * pw.max(1.0));
                assert!((t.phase - ph).abs() <= 1e-9 * ph.abs().max(1.0));
                assert!((t.coefficient - c).norm() <= 1e-12 * c.norm().max(1.0));
            }
            assert!(back.is_empty());
        }
    }

    #[test]
    fn finite_volume_terms_approach_infinite_volume() {
        // L/max-spacing = 10⁴: every matched term's coefficient ratio is
        // within 1e−3 of 1
        let spec = unit_spec(vec![10.0, 45.0, 110.0], vec![1, 0, -1], 1.25);
        let inf = assemble_terms_infinite_l(&spec, 1).unwrap();
        let fin = assemble_terms_finite_l(&spec, 1, 1_000_000).unwrap();
        assert_eq!(inf.len(), fin.len());
        for (ti, tf) in inf.iter().zip(&fin) {
            assert_eq!(ti.kappa, tf.kappa);
            let ratio = tf.coefficient / ti.coefficient;
            assert!(
                (ratio - Complex64::new(1.0, 0.0)).norm() <= 1e-3,
                "κ={:?}: ratio {ratio}",
                ti.kappa
            );
        }
    }

    #[test]
    fn chord_factors_order_by_separation() {
        // the κ=0 two-point coefficient has modulus
        // (2π/L)^{1/2}(2 sin(πd/L))^{−1/2}: chords grow with d below L/2,
        // so the coefficient decreases
        let l = 1000u64;
        let coeff = |d: f64| {
            let spec = unit_spec(vec![5.0, 5.0 + d], vec![1, -1], 1.0);
            let terms = assemble_terms_finite_l(&spec, 1, l).unwrap();
            assert_eq!(terms[0].kappa, vec![0, 0]);
            terms[0].coefficient
        };
        for d in [10.0, 100.0, 400.0] {
            let c = coeff(d);
            let want = (TAU / l as f64).sqrt() / (2.0 * (PI * d / l as f64).sin()).sqrt();
            assert!((c.norm() - want).abs() <= 1e-12 * want);
        }
        assert!(coeff(10.0).norm() > coeff(100.0).norm());
        assert!(coeff(100.0).norm() > coeff(400.0).norm());
    }

    /// The leading 4-point value assembled from first principles: sum the
    /// κ = 0 conformal term over the six balanced sign patterns of the
    /// level decomposition, with the per-pattern amplitude a₊^{#+}a₋^{#−}.
    fn xxxx_via_assembler(
        positions: [f64; 4],
        z_q: f64,
        ap: Complex64,
        am: Complex64,
    ) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for bits in 0u32..16 {
            let eps: Vec<i64> = (0..4).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            if eps.iter().sum::<i64>() != 0 {
                continue;
            }
            let spec = unit_spec(positions.to_vec(), eps.clone(), z_q);
            let lead = conformal_leading(&spec, 2).unwrap();
            assert_eq!(lead.len(), 1, "unique κ=0 leader per pattern");
            assert!((lead[0].decay_power - 1.0 / (z_q * z_q)).abs() <= 1e-12);
            let amp = eps
                .iter()
                .map(|&e| if e == 1 { ap } else { am })
                .product::<Complex64>();
            total += amp * lead[0].coefficient;
        }
        total
    }

    #[test]
    fn four_point_closed_form_is_the_assembled_sum() {
        // equally spaced desk value: 2(1/√12 + √(4/3) + √(3/4)) = 8/√3
        let desk = xxz_xxxx_leading(
            [0.0, 1.0, 2.0, 3.0],
            1.0,
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        assert!((desk - 8.0 / 3f64.sqrt()).norm() <= 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let mut positions = [0.0f64; 4];
            let mut x = 0.0;
            for p in positions.iter_mut() {
                x += rng.gen_range(0.4..8.0);
                *p = x;
            }
            let z = rng.gen_range(0.7..1.6);
            let ap = Complex64::new(rng.gen_range(0.2..1.5), rng.gen_range(-0.5..0.5));
            let am = Complex64::new(rng.gen_range(0.2..1.5), rng.gen_range(-0.5..0.5));
            let closed = xxz_xxxx_leading(positions, z, ap, am).unwrap();
            let assembled = xxxx_via_assembler(positions, z, ap, am);
            assert!(
                (closed - assembled).norm() <= 1e-12 * closed.norm(),
                "closed {closed} vs assembled {assembled}"
            );
        }
    }

    #[test]
    fn four_point_exponent_collapse_and_symmetry() {
        let one = Complex64::new(1.0, 0.0);
        // Z → ∞ sends every pairing power to 0, so the sum → 6·amp⁴
        let big = xxz_xxxx_leading([0.0, 1.0, 2.5, 4.0], 1e9, one, one).unwrap();
        assert!((big - Complex64::new(6.0, 0.0)).norm() <= 1e-6);
        // the three pairings permute among themselves
        let base = xxz_xxxx_leading([0.0, 1.0, 2.5, 4.0], 1.3, one, one).unwrap();
        for perm in [[1.0, 0.0, 4.0, 2.5], [2.5, 4.0, 0.0, 1.0], [4.0, 1.0, 2.5, 0.0]] {
            let v = xxz_xxxx_leading(perm, 1.3, one, one).unwrap();
            assert!((v - base).norm() <= 1e-12 * base.norm());
        }
    }

    #[test]
    fn term_records_export_shape() {
        let spec = unit_spec(vec![1.0, 3.0], vec![1, -1], 1.1);
        let terms = assemble_terms_infinite_l(&spec, 1).unwrap();
        let records = term_records(&terms);
        assert_eq!(records.len(), terms.len());
        let js = serde_json::to_string(&records[0]).unwrap();
        for key in ["\"kappa\"", "\"power\"", "\"phase\"", "\"coeff_re\"", "\"coeff_im\""] {
            assert!(js.contains(key), "missing {key} in {js}");
        }
        let csv = terms_csv(&terms);
        assert!(csv.starts_with("kappa,power,phase,coeff_re,coeff_im\n"));
        assert_eq!(csv.lines().count(), terms.len() + 1);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(MultipointSpec::new(vec![1.0, 1.0], vec![0, 0], AmplitudeMap::Unit, 1.0, 1.0)
            .is_err());
        assert!(MultipointSpec::new(vec![1.0], vec![0, 0], AmplitudeMap::Unit, 1.0, 1.0).is_err());
        assert!(MultipointSpec::new(vec![1.0, 2.0], vec![0, 0], AmplitudeMap::Unit, 1.0, 0.0)
            .is_err());
        // positions outside the ring
        let spec = unit_spec(vec![1.0, 120.0], vec![1, -1], 1.0);
        assert!(assemble_terms_finite_l(&spec, 1, 100).is_err());
        // table amplitudes must cover the searched box
        let mut table = HashMap::new();
        table.insert(vec![0i64, 0], Complex64::new(2.0, 0.0));
        let spec = MultipointSpec::new(
            vec![1.0, 4.0],
            vec![1, -1],
            AmplitudeMap::Table(table),
            1.0,
            1.0,
        )
        .unwrap();
        match assemble_terms_infinite_l(&spec, 1) {
            Err(Error::MissingAmplitude { kappa }) => assert_eq!(kappa.len(), 2),
            other => panic!("expected missing-amplitude error, got {:?}", other.map(|v| v.len())),
        }
        assert!(xxz_xxxx_leading([0.0, 0.0, 1.0, 2.0], 1.0, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn conformal_leading_is_the_minimal_power_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..10 {
            let r = rng.gen_range(2usize..=4);
            let mut positions: Vec<f64> = Vec::new();
            let mut x = 0.0;
            for _ in 0..r {
                x += rng.gen_range(0.5..5.0);
                positions.push(x);
            }
            let mut levels: Vec<i64> = (0..r - 1).map(|_| rng.gen_range(-1i64..=1)).collect();
            levels.push(-levels.iter().sum::<i64>());
            let spec = unit_spec(positions, levels, rng.gen_range(0.7..1.5));
            let all = assemble_terms_infinite_l(&spec, 2).unwrap();
            let lead = conformal_leading(&spec, 2).unwrap();
            assert!(!lead.is_empty() && lead.len() <= all.len());
            for (a, b) in lead.iter().zip(&all) {
                assert_eq!(a.kappa, b.kappa);
                assert_eq!(a.coefficient, b.coefficient);
            }
            if lead.len() < all.len() {
                assert!(all[lead.len()].decay_power > lead[0].decay_power + 1e-9);
            }
        }
    }
}
