//! Acceptance battery: every top-level guarantee of the crate exercised
//! end-to-end, one printed pass/fail line per criterion (C1–C9; C10, the
//! CLI determinism check, lives in the cli crate's acceptance test).
//!
//! Where a criterion is an algebraic identity, both sides are written out
//! literally here, independent of the library's internal forms.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::Instant;

use ffsum_core::asympt::{conformal_leading, minimize_exponent, AmplitudeMap, MultipointSpec};
use ffsum_core::bethe::{critical_exponents, DressedFunctions, ModelKernel};
use ffsum_core::excitations::{CriticalClassVector, ShiftParams};
use ffsum_core::fisher_hartwig::{
    fh_asymptotics_log_with, induction_kernel_check, kappa_maximizer, model_sum_toeplitz_log,
    FHSymbol, ToeplitzSpec,
};
use ffsum_core::restricted_sum::{identity_residual, IdentityReport, TailMode, TruncationPolicy};
use ffsum_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(tag: &str, detail: String, pass: bool) -> bool {
    println!("{tag}: {detail} … {}", if pass { "pass" } else { "FAIL" });
    pass
}

fn random_shifts(rng: &mut ChaCha8Rng, r: usize) -> ShiftParams {
    let nu = (0..r)
        .map(|_| Complex64::new(rng.gen_range(-0.4..=0.4), rng.gen_range(-0.1..=0.1)))
        .collect();
    let t = (0..r - 1)
        .map(|_| Complex64::new(rng.gen_range(0.2..=1.2), rng.gen_range(0.3..=1.0)))
        .collect();
    ShiftParams::new(nu, t).expect("draw is in-domain")
}

/// C1–C3: truncated vs. closed restricted sums (r = 2 and r = 3 with
/// nonzero transfer), and the two-sign product identity on the same cases.
#[test]
fn summation_and_product_identities() {
    let policy = TruncationPolicy::new(4, 4096, TailMode::Raw).with_tail_target(1e-8);
    let mut product_worst = 0.0f64;
    let mut ok = true;

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cls2 = CriticalClassVector::new(vec![0]);
    let mut worst2 = 0.0f64;
    for _ in 0..20 {
        let shifts = random_shifts(&mut rng, 2);
        let rep: IdentityReport = identity_residual(&cls2, &shifts, &policy).expect("r=2 case");
        assert!(rep.tail_plus < 1e-8 && rep.tail_minus < 1e-8, "tail target missed");
        worst2 = worst2.max(rep.residual_plus).max(rep.residual_minus);
        product_worst = product_worst.max(rep.product_residual);
    }
    ok &= verdict(
        "C1 two-segment summation identity",
        format!(
            "20 random cases, worst relative residual {worst2:.2e} (≤ 1e-6), {:.1?}",
            started.elapsed()
        ),
        worst2 <= 1e-6,
    );

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst3 = 0.0f64;
    for _ in 0..10 {
        let ell = loop {
            let e = vec![rng.gen_range(-1i64..=1), rng.gen_range(-1i64..=1)];
            if e.iter().any(|&x| x != 0) {
                break e;
            }
        };
        let cls = CriticalClassVector::new(ell);
        let shifts = random_shifts(&mut rng, 3);
        let rep = identity_residual(&cls, &shifts, &policy).expect("r=3 case");
        assert!(rep.tail_plus < 1e-8 && rep.tail_minus < 1e-8, "tail target missed");
        worst3 = worst3.max(rep.residual_plus).max(rep.residual_minus);
        product_worst = product_worst.max(rep.product_residual);
    }
    ok &= verdict(
        "C2 three-segment summation identity, nonzero transfer",
        format!(
            "10 random cases, worst relative residual {worst3:.2e} (≤ 1e-4), {:.1?}",
            started.elapsed()
        ),
        worst3 <= 1e-4,
    );

    ok &= verdict(
        "C3 two-sign product identity",
        format!("all cases above, worst relative residual {product_worst:.2e} (≤ 1e-4)"),
        product_worst <= 1e-4,
    );
    assert!(ok, "a summation-identity criterion failed");
}

/// Least-squares fit of ratio(N) ≈ 1 + c/N; returns the rms fit residual
/// and the N = ns[0] deviation |ratio − 1|.
fn one_over_n_fit(points: &[(usize, Complex64)]) -> (f64, f64) {
    let num: Complex64 = points
        .iter()
        .map(|&(n, r)| (r - 1.0) / n as f64)
        .sum();
    let den: f64 = points.iter().map(|&(n, _)| (n as f64).powi(-2)).sum();
    let c = num / den;
    let rms = (points
        .iter()
        .map(|&(n, r)| (r - 1.0 - c / n as f64).norm_sqr())
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    let dev0 = (points[0].1 - 1.0).norm();
    (rms, dev0)
}

fn ratio_points(
    nu: &[Complex64],
    t: &[f64],
    kappa: &[i64],
    ns: &[usize],
) -> Vec<(usize, Complex64)> {
    ns.iter()
        .map(|&n| {
            let spec = ToeplitzSpec::new(nu.to_vec(), t.to_vec(), n).expect("valid spec");
            let v = model_sum_toeplitz_log(&spec).expect("determinant");
            let a = fh_asymptotics_log_with(&spec, kappa).expect("asymptotics");
            (n, v.div(a).exp())
        })
        .collect()
}

/// C4: exact determinants over N ∈ {8,…,64} against the jump asymptotics;
/// the ratio must fit 1 + c/N, and for |Re ν| > ½ only the nonzero
/// winding-compensation branch achieves that.
#[test]
fn toeplitz_determinant_oracle() {
    let started = Instant::now();
    let ns = [8usize, 16, 24, 32, 48, 64];
    let mut rng = ChaCha8Rng::seed_from_u64(479);
    let mut ok = true;
    let mut detail = Vec::new();

    // Four random small-shift specs (r = 2 and r = 3).  A pure jump symbol
    // has no smooth 1/N correction of its own: the deviations are the
    // subleading winding branches, entering at relative order
    // N^{−g}·e^{iN·(t̄ phase)} with g = 2 − 2·(Re ν spread).  The 1 + c/N
    // fit therefore needs draws in the regime where those terms both decay
    // within the window (spread ≤ 0.45 ⇒ g > 1) and keep a phase the six
    // sample dimensions track coherently (t̄ per segment in [0.7, 1.1]);
    // outside it no correct asymptotics fits at N ≤ 64.
    for r in [2usize, 2, 3, 3] {
        let nu: Vec<Complex64> = loop {
            let draw: Vec<Complex64> = (0..r)
                .map(|_| Complex64::new(rng.gen_range(-0.4..=0.4), rng.gen_range(-0.1..=0.1)))
                .collect();
            let res: Vec<f64> = draw.iter().map(|z| z.re).collect();
            let spread = res.iter().cloned().fold(f64::MIN, f64::max)
                - res.iter().cloned().fold(f64::MAX, f64::min);
            if spread <= 0.45 {
                break draw;
            }
        };
        let t: Vec<f64> = (0..r - 1).map(|_| rng.gen_range(0.7..=1.1)).collect();
        let kappa = kappa_maximizer(&nu).expect("maximizer");
        let (rms, dev) = one_over_n_fit(&ratio_points(&nu, &t, &kappa, &ns));
        detail.push(format!("rms/dev₈ {:.2}%", 100.0 * rms / dev));
        ok &= rms <= 0.2 * dev;
    }

    // A winding case: |Re ν| > ½ on both jumps forces κ = (−1, 1), and the
    // best zero-winding branch trails by g = 1.4, keeping the window clean.
    let nu = vec![Complex64::new(0.9, 0.0), Complex64::new(-0.8, 0.05)];
    let t = vec![0.9];
    let kappa = kappa_maximizer(&nu).expect("maximizer");
    assert_eq!(kappa, vec![-1, 1], "winding branch not selected");
    let (rms, dev) = one_over_n_fit(&ratio_points(&nu, &t, &kappa, &ns));
    detail.push(format!("winding rms/dev₈ {:.2}%", 100.0 * rms / dev));
    ok &= rms <= 0.2 * dev;
    let (rms0, dev0) = one_over_n_fit(&ratio_points(&nu, &t, &[0, 0], &ns));
    let zero_branch_fails = rms0 > 0.2 * dev0;
    detail.push(format!(
        "κ=0 branch rms/dev₈ {:.0}% (must exceed 20%)",
        100.0 * rms0 / dev0
    ));
    ok &= zero_branch_fails;

    let pass = verdict(
        "C4 determinant convergence oracle",
        format!("{}; {:.1?}", detail.join(", "), started.elapsed()),
        ok,
    );
    assert!(pass, "determinant oracle fit failed");
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    if depth == 0 || (refined - whole).norm() <= 15.0 * tol {
        refined + (refined - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
    }
}

/// C5: closed-form Fourier coefficients — single jump against the sine
/// formula, several jumps against adaptive quadrature of pointwise values.
#[test]
fn fourier_coefficients_against_quadrature() {
    let started = Instant::now();
    let mut ok = true;

    let mut worst_single = 0.0f64;
    for nu in [
        Complex64::new(0.37, 0.0),
        Complex64::new(-0.41, 0.2),
        Complex64::new(0.12, -0.33),
    ] {
        let sym = FHSymbol::single(nu, 0.0).expect("single jump");
        for j in -100i64..=100 {
            let want = (PI * nu).sin() / (PI * (nu - j as f64));
            worst_single = worst_single.max((sym.fourier_coeff(j) - want).norm());
        }
    }
    ok &= verdict(
        "C5a single-jump Fourier coefficients",
        format!("|j| ≤ 100, worst deviation {worst_single:.2e} (≤ 1e-14)"),
        worst_single <= 1e-14,
    );

    let nu = vec![
        Complex64::new(0.31, -0.12),
        Complex64::new(-0.22, 0.05),
        Complex64::new(0.17, 0.0),
    ];
    let sym = FHSymbol::for_spec(&nu, &[1.1, 3.9]).expect("three jumps");
    let mut worst_multi = 0.0f64;
    for k in (-8i64..=8).chain([21]) {
        let f = |theta: f64| sym.value(theta) * (-Complex64::i() * k as f64 * theta).exp();
        let mut quad = Complex64::new(0.0, 0.0);
        for (a, b) in sym.arcs() {
            // stay inside the half-open arc: its right endpoint already
            // carries the next jump's factor
            let b = b - 1e-12;
            let m = 0.5 * (a + b);
            quad += adaptive_simpson(&f, a, b, f(a), f(m), f(b), 1e-13, 28);
        }
        quad /= TAU;
        worst_multi = worst_multi.max((sym.fourier_coeff(k) - quad).norm());
    }
    ok &= verdict(
        "C5b multi-jump coefficients vs. adaptive quadrature",
        format!(
            "k ∈ [-8, 8] ∪ {{21}}, worst deviation {worst_multi:.2e} (≤ 1e-10), {:.1?}",
            started.elapsed()
        ),
        worst_multi <= 1e-10,
    );
    assert!(ok, "a Fourier-coefficient criterion failed");
}

/// C6: the one-step symbol induction — the weighted lattice sum of base
/// coefficients reproduces the coefficient of the extended symbol.
#[test]
fn induction_kernel_residual() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let base_nu = vec![
            Complex64::new(rng.gen_range(-0.4..=0.4), rng.gen_range(-0.1..=0.1)),
            Complex64::new(rng.gen_range(-0.4..=0.4), rng.gen_range(-0.1..=0.1)),
        ];
        let base = FHSymbol::for_spec(&base_nu, &[rng.gen_range(0.8..=3.0)]).expect("base");
        let a = rng.gen_range(-3i64..=3);
        let b = rng.gen_range(-3i64..=3);
        let t_bar = rng.gen_range(3.5..=5.8);
        let nu_next = Complex64::new(rng.gen_range(-0.4..=0.4), rng.gen_range(-0.1..=0.1));
        let res = induction_kernel_check(&base, a, b, t_bar, nu_next, 100_000).expect("kernel");
        worst = worst.max(res);
    }
    let pass = verdict(
        "C6 symbol-induction kernel",
        format!(
            "10 random (a, b, ν, t̄), cutoff 10⁵, worst residual {worst:.2e} (≤ 1e-5), {:.1?}",
            started.elapsed()
        ),
        worst <= 1e-5,
    );
    assert!(pass, "induction kernel residual too large");
}

// --- literal left/right sides of the class-resummation identities -------

/// Σ_{s=1}^{r−1} ℓ_s t_s, the oscillating exponent in class form.
fn class_momentum_direct(ell: &[i64], t: &[f64]) -> f64 {
    ell.iter().zip(t).map(|(&l, &ts)| l as f64 * ts).sum()
}

/// Σ_{s=2}^{r} t̄_{s−1} κ_s with t̄ the partial sums and κ_s = ℓ_{s−1} − ℓ_s
/// (ℓ_0 = ℓ_r = 0).
fn class_momentum_resummed(ell: &[i64], t: &[f64]) -> f64 {
    let r = ell.len() + 1;
    let mut t_bar = 0.0;
    let mut acc = 0.0;
    for s in 2..=r {
        t_bar += t[s - 2];
        let prev = ell[s - 2];
        let cur = if s - 1 < ell.len() { ell[s - 1] } else { 0 };
        acc += t_bar * (prev - cur) as f64;
    }
    acc
}

/// 2Σℓ_s² − 2Σℓ_sℓ_{s−1} + 2Σ(ν_{s+1}−ν_s)ℓ_s + Σν_s².
fn class_exponent_direct(ell: &[i64], nu: &[f64]) -> f64 {
    let r = nu.len();
    let mut acc = 0.0;
    for s in 1..r {
        let l = ell[s - 1] as f64;
        let l_prev = if s >= 2 { ell[s - 2] as f64 } else { 0.0 };
        acc += 2.0 * l * l - 2.0 * l * l_prev + 2.0 * (nu[s] - nu[s - 1]) * l;
    }
    acc + nu.iter().map(|v| v * v).sum::<f64>()
}

/// Σ_{s=1}^{r} (ν_s + κ_s)² after completing the square.
fn class_exponent_resummed(ell: &[i64], nu: &[f64]) -> f64 {
    let r = nu.len();
    (1..=r)
        .map(|s| {
            let l_prev = if s >= 2 { ell[s - 2] } else { 0 };
            let l_cur = if s <= r - 1 { ell[s - 1] } else { 0 };
            (nu[s - 1] + (l_prev - l_cur) as f64).powi(2)
        })
        .sum()
}

/// ϑ_ε(κ) = κZ − ε/(2Z), the two Fermi-endpoint exponents.
fn endpoint_exponent_dual_form(z: f64, kappa: i64, eps: i64) -> f64 {
    kappa as f64 * z - eps as f64 / (2.0 * z)
}

/// C7: the class-to-κ resummation identities and the dual form of the
/// endpoint exponents, on 10³ random draws each.
#[test]
fn class_resummation_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_momentum = 0.0f64;
    let mut worst_exponent = 0.0f64;
    let mut worst_dual = 0.0f64;
    for _ in 0..1000 {
        let r = rng.gen_range(2usize..=6);
        let ell: Vec<i64> = (0..r - 1).map(|_| rng.gen_range(-4i64..=4)).collect();
        let t: Vec<f64> = (0..r - 1).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        let nu: Vec<f64> = (0..r).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        worst_momentum = worst_momentum
            .max((class_momentum_direct(&ell, &t) - class_momentum_resummed(&ell, &t)).abs());
        worst_exponent = worst_exponent
            .max((class_exponent_direct(&ell, &nu) - class_exponent_resummed(&ell, &nu)).abs());

        let z = rng.gen_range(0.4..=2.5);
        let kappa = rng.gen_range(-3i64..=3);
        let o = rng.gen_range(-2i64..=2);
        let (tp, tm) = critical_exponents(z, kappa, o);
        worst_dual = worst_dual
            .max((tp - endpoint_exponent_dual_form(z, kappa, o)).abs())
            .max((tm - endpoint_exponent_dual_form(z, kappa, -o)).abs());
    }
    let pass = verdict(
        "C7 class-resummation identities",
        format!(
            "10³ draws: momentum {worst_momentum:.2e}, exponent {worst_exponent:.2e}, \
             endpoint dual form {worst_dual:.2e} (all ≤ 1e-12)"
        ),
        worst_momentum <= 1e-12 && worst_exponent <= 1e-12 && worst_dual <= 1e-12,
    );
    assert!(pass, "a resummation identity failed");
}

/// C8: the linear-equation solvers — exact free-fermion pass-through,
/// spectral node-doubling convergence, and the weak-coupling limit.
#[test]
fn dressed_solver_guarantees() {
    let started = Instant::now();
    let mut ok = true;

    let ff = DressedFunctions::solve(ModelKernel::Xxz { zeta: FRAC_PI_2 }, 1.1, 48)
        .expect("free fermion");
    let exact = ff.z.iter().all(|&z| z == 1.0)
        && ff.phi_q_plus.iter().all(|&v| v == 0.0)
        && ff.phi_q_minus.iter().all(|&v| v == 0.0)
        && ff
            .p
            .iter()
            .zip(&ff.nodes)
            .all(|(&p, &x)| p == ff.kernel.p0(x));
    ok &= verdict(
        "C8a free-fermion point is exact",
        "Z ≡ 1, φ ≡ 0, p = p₀ bitwise".to_string(),
        exact,
    );

    let coarse = DressedFunctions::solve(ModelKernel::Xxz { zeta: PI / 3.0 }, 1.2, 64)
        .expect("coarse");
    let fine = DressedFunctions::solve(ModelKernel::Xxz { zeta: PI / 3.0 }, 1.2, 128)
        .expect("fine");
    let deltas = [
        (coarse.z_q - fine.z_q).abs(),
        (coarse.p_f - fine.p_f).abs(),
        (coarse.phi_qq - fine.phi_qq).abs(),
    ];
    let worst = deltas.iter().fold(0.0f64, |a, &b| a.max(b));
    ok &= verdict(
        "C8b node-doubling convergence",
        format!("ζ = π/3, q = 1.2, worst endpoint delta {worst:.2e} (≤ 1e-9)"),
        worst <= 1e-9,
    );

    let weak = DressedFunctions::solve(ModelKernel::Nlsm { c: 1e4 }, 1.2, 64).expect("weak");
    ok &= verdict(
        "C8c weak-coupling dressed charge",
        format!(
            "c = 10⁴, |Z(q) − 1| = {:.2e} (≤ 1e-3), {:.1?}",
            (weak.z_q - 1.0).abs(),
            started.elapsed()
        ),
        (weak.z_q - 1.0).abs() <= 1e-3,
    );
    assert!(ok, "a dressed-solver criterion failed");
}

/// C9: the specialised four-point closed form against the general
/// assembler, plus the leading power and its three-pairing degeneracy.
#[test]
fn four_point_closed_form() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let balanced: [[i64; 4]; 6] = [
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
        [-1, 1, 1, -1],
        [-1, 1, -1, 1],
        [-1, -1, 1, 1],
    ];
    let mut worst_rel = 0.0f64;
    let mut worst_power = 0.0f64;
    let mut pairings_ok = true;
    for case in 0..100 {
        let mut x = [0.0f64; 4];
        for i in 1..4 {
            x[i] = x[i - 1] + rng.gen_range(0.5..=8.0);
        }
        let z_q = rng.gen_range(0.6..=1.6);
        let amp_plus = Complex64::new(rng.gen_range(0.5..=1.5), rng.gen_range(-0.5..=0.5));
        let amp_minus = Complex64::new(rng.gen_range(0.5..=1.5), rng.gen_range(-0.5..=0.5));

        let closed = ffsum_core::asympt::xxz_xxxx_leading(x, z_q, amp_plus, amp_minus)
            .expect("closed form");

        let mut assembled = Complex64::new(0.0, 0.0);
        let mut magnitudes = Vec::new();
        for levels in balanced {
            let spec = MultipointSpec::new(
                x.to_vec(),
                levels.to_vec(),
                AmplitudeMap::Unit,
                1.0,
                z_q,
            )
            .expect("spec");
            let terms = conformal_leading(&spec, 1).expect("leading terms");
            assert_eq!(terms.len(), 1, "leading class vector not unique");
            // σ^± at each site: the pattern's amplitude is a₊^{#+} a₋^{#-}
            let amp = amp_plus * amp_plus * amp_minus * amp_minus;
            assembled += amp * terms[0].coefficient;
            magnitudes.push(terms[0].coefficient.norm());

            if case == 0 {
                let m = minimize_exponent(&spec, 1);
                worst_power = worst_power
                    .max((m.power - 2.0 / (z_q * z_q)).abs() / (2.0 / (z_q * z_q)));
                pairings_ok &= m.minimizers == vec![vec![0i64; 4]];
            }
        }
        worst_rel = worst_rel.max((assembled - closed).norm() / closed.norm());

        // six balanced patterns must realise exactly three pairings, twice each
        magnitudes.sort_by(f64::total_cmp);
        let mut distinct = 0;
        let mut i = 0;
        while i < magnitudes.len() {
            let mut j = i;
            while j < magnitudes.len()
                && (magnitudes[j] - magnitudes[i]).abs() <= 1e-9 * magnitudes[i]
            {
                j += 1;
            }
            pairings_ok &= j - i == 2;
            distinct += 1;
            i = j;
        }
        pairings_ok &= distinct == 3;
    }
    let mut ok = verdict(
        "C9 four-point closed form vs. assembler",
        format!(
            "100 random quadruples, worst relative deviation {worst_rel:.2e} (≤ 1e-10), {:.1?}",
            started.elapsed()
        ),
        worst_rel <= 1e-10,
    );
    ok &= verdict(
        "C9 leading power and pairing degeneracy",
        format!("power = 2/Z(q)² to {worst_power:.2e}, three pairings twice each"),
        worst_power <= 1e-12 && pairings_ok,
    );
    assert!(ok, "a four-point criterion failed");
}
