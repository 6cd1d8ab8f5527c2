//! Subcommand implementations: each builds its inputs from the flat
//! config, drives the core library, and renders a JSON or CSV report.

use ffsum_core::asympt::{
    assemble_terms_finite_l, assemble_terms_infinite_l, conformal_leading, term_records,
    terms_csv, AmplitudeMap, MultipointSpec, TermRecord,
};
use ffsum_core::bethe::{DressedFunctions, ModelKernel};
use ffsum_core::excitations::{CriticalClassVector, ShiftParams};
use ffsum_core::fisher_hartwig::{convergence_sequence, kappa_maximizer, ConvergencePoint, FHSymbol};
use ffsum_core::restricted_sum::{identity_residual, TailMode, TruncationPolicy};
use ffsum_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::{classify, Failure, Format};

pub const SCHEMA_VERSION: u32 = 1;

/// Rendered report plus whether every checked threshold passed.
pub struct Outcome {
    pub body: String,
    pub pass: bool,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::numeric(format!("serialization failed: {e}")))
}

// ---------------------------------------------------------------- identity

#[derive(Serialize)]
struct IdentityCase {
    ell: Vec<i64>,
    nu: Vec<[f64; 2]>,
    t: Vec<[f64; 2]>,
    residual_plus: f64,
    residual_minus: f64,
    product_residual: f64,
    tail_plus: f64,
    tail_minus: f64,
    pass: bool,
}

#[derive(Serialize)]
struct IdentityReport {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    threshold: f64,
    all_pass: bool,
    cases: Vec<IdentityCase>,
}

/// Closed-form identity sweep: random (ν, t) draws — or one explicit case
/// from the config — compared between the truncated enumeration and the
/// closed product, both signs plus the two-sign product identity.
pub fn identity(cfg: &Config, seed: u64, format: Format) -> Result<Outcome, Failure> {
    cfg.allow_only(&[
        "r", "ell", "cases", "re_nu_max", "im_nu_max", "im_t_min", "im_t_max", "re_t_min",
        "re_t_max", "n_max", "max_integer", "tail", "threshold", "damping", "nu_re", "nu_im",
        "t_re", "t_im",
    ])?;
    let r = cfg.usize_or("r", 2)?;
    if r < 2 {
        return Err(Failure::validation("need r ≥ 2"));
    }
    let ell = match cfg.i64_list("ell")? {
        Some(e) => e,
        None => vec![0; r - 1],
    };
    if ell.len() != r - 1 {
        return Err(Failure::validation(format!(
            "ell must have r−1 = {} entries",
            r - 1
        )));
    }
    let n_max = cfg.usize_or("n_max", 4)?;
    let max_integer = cfg.u64_or("max_integer", 4096)? as u32;
    let tail = cfg.f64_or("tail", 1e-8)?;
    let threshold = cfg.f64_or("threshold", 1e-6)?;
    // Real separations only converge after Abel damping; `damping` sets δ.
    let tail_mode = if cfg.has("damping") {
        TailMode::AbelDamped {
            delta: cfg.f64_or("damping", 1e-3)?,
        }
    } else {
        TailMode::Raw
    };
    let policy = TruncationPolicy::new(n_max, max_integer, tail_mode).with_tail_target(tail);

    let mut case_inputs: Vec<ShiftParams> = Vec::new();
    if cfg.has("nu_re") || cfg.has("t_re") {
        // one explicit case
        let nu_re = cfg
            .f64_list("nu_re")?
            .ok_or_else(|| Failure::validation("explicit case needs nu_re"))?;
        let nu_im = cfg.f64_list("nu_im")?.unwrap_or_else(|| vec![0.0; nu_re.len()]);
        let t_re = cfg
            .f64_list("t_re")?
            .ok_or_else(|| Failure::validation("explicit case needs t_re"))?;
        let t_im = cfg.f64_list("t_im")?.unwrap_or_else(|| vec![0.0; t_re.len()]);
        if nu_re.len() != r || nu_im.len() != r || t_re.len() != r - 1 || t_im.len() != r - 1 {
            return Err(Failure::validation(format!(
                "explicit case needs {r} nu entries and {} t entries",
                r - 1
            )));
        }
        let nu = nu_re
            .iter()
            .zip(&nu_im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        let t = t_re
            .iter()
            .zip(&t_im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        case_inputs.push(ShiftParams::new(nu, t).map_err(classify)?);
    } else {
        let cases = cfg.usize_or("cases", 5)?;
        let re_nu_max = cfg.f64_or("re_nu_max", 0.4)?;
        let im_nu_max = cfg.f64_or("im_nu_max", 0.1)?;
        let (im_lo, im_hi) = (cfg.f64_or("im_t_min", 0.3)?, cfg.f64_or("im_t_max", 1.0)?);
        let (re_lo, re_hi) = (cfg.f64_or("re_t_min", 0.2)?, cfg.f64_or("re_t_max", 1.2)?);
        if !(im_lo > 0.0 && im_hi >= im_lo) {
            return Err(Failure::validation("need 0 < im_t_min ≤ im_t_max"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..cases {
            let nu = (0..r)
                .map(|_| {
                    Complex64::new(
                        rng.gen_range(-re_nu_max..=re_nu_max),
                        rng.gen_range(-im_nu_max..=im_nu_max),
                    )
                })
                .collect();
            let t = (0..r - 1)
                .map(|_| Complex64::new(rng.gen_range(re_lo..=re_hi), rng.gen_range(im_lo..=im_hi)))
                .collect();
            case_inputs.push(ShiftParams::new(nu, t).map_err(classify)?);
        }
    }

    let cls = CriticalClassVector::new(ell.clone());
    let mut cases = Vec::new();
    let mut all_pass = true;
    for shifts in &case_inputs {
        let rep = identity_residual(&cls, shifts, &policy).map_err(classify)?;
        let pass = rep.worst() <= threshold;
        all_pass &= pass;
        cases.push(IdentityCase {
            ell: ell.clone(),
            nu: shifts.nu.iter().map(|z| [z.re, z.im]).collect(),
            t: shifts.t.iter().map(|z| [z.re, z.im]).collect(),
            residual_plus: rep.residual_plus,
            residual_minus: rep.residual_minus,
            product_residual: rep.product_residual,
            tail_plus: rep.tail_plus,
            tail_minus: rep.tail_minus,
            pass,
        });
    }

    let body = match format {
        Format::Json => to_json(&IdentityReport {
            schema_version: SCHEMA_VERSION,
            command: "identity",
            seed,
            threshold,
            all_pass,
            cases,
        })?,
        Format::Csv => {
            let mut out = String::from(
                "case,residual_plus,residual_minus,product_residual,tail_plus,tail_minus,pass\n",
            );
            for (i, c) in cases.iter().enumerate() {
                out.push_str(&format!(
                    "{i},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                    c.residual_plus,
                    c.residual_minus,
                    c.product_residual,
                    c.tail_plus,
                    c.tail_minus,
                    c.pass
                ));
            }
            out
        }
    };
    Ok(Outcome {
        body,
        pass: all_pass,
    })
}

// ---------------------------------------------------------------- toeplitz

#[derive(Serialize)]
struct ToeplitzReport {
    schema_version: u32,
    command: &'static str,
    nu: Vec<[f64; 2]>,
    t: Vec<f64>,
    kappa: Vec<i64>,
    points: Vec<ConvergencePoint>,
}

/// Determinant-vs-asymptotics convergence study over a dimension list.
pub fn toeplitz(cfg: &Config, format: Format) -> Result<Outcome, Failure> {
    cfg.allow_only(&["nu_re", "nu_im", "t", "n_list"])?;
    let nu_re = cfg.f64_list("nu_re")?.unwrap_or_else(|| vec![0.2, -0.2]);
    let nu_im = cfg.f64_list("nu_im")?.unwrap_or_else(|| vec![0.0; nu_re.len()]);
    if nu_im.len() != nu_re.len() {
        return Err(Failure::validation("nu_re and nu_im lengths differ"));
    }
    let nu: Vec<Complex64> = nu_re
        .iter()
        .zip(&nu_im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    let t = cfg.f64_list("t")?.unwrap_or_else(|| vec![1.1]);
    let ns = cfg.usize_list_or("n_list", &[8, 16, 24, 32, 48, 64])?;

    let kappa = kappa_maximizer(&nu).map_err(classify)?;
    let points = convergence_sequence(&nu, &t, &ns).map_err(classify)?;

    let body = match format {
        Format::Json => to_json(&ToeplitzReport {
            schema_version: SCHEMA_VERSION,
            command: "toeplitz",
            nu: nu.iter().map(|z| [z.re, z.im]).collect(),
            t,
            kappa,
            points,
        })?,
        Format::Csv => {
            let mut out =
                String::from("n,value_re,value_im,asymptotic_re,asymptotic_im,ratio_re,ratio_im\n");
            for p in &points {
                out.push_str(&format!(
                    "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    p.n,
                    p.value[0],
                    p.value[1],
                    p.asymptotic[0],
                    p.asymptotic[1],
                    p.ratio[0],
                    p.ratio[1]
                ));
            }
            out
        }
    };
    Ok(Outcome { body, pass: true })
}

// ----------------------------------------------------------------- dressed

#[derive(Serialize)]
struct DoublingDelta {
    nodes_coarse: usize,
    nodes_fine: usize,
    z_q_fine: f64,
    p_f_fine: f64,
    phi_qq_fine: f64,
    z_q_delta: f64,
    p_f_delta: f64,
    phi_qq_delta: f64,
    threshold: f64,
    pass: bool,
}

#[derive(Serialize)]
struct DressedReport {
    schema_version: u32,
    command: &'static str,
    model: String,
    q: f64,
    nodes: usize,
    z_q: f64,
    p_f: f64,
    lambda: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    phi_plus: Vec<f64>,
    phi_minus: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    doubling: Option<DoublingDelta>,
}

/// Solve the dressed charge, phase and momentum on the Fermi interval and
/// export the sampled columns; optionally re-solve at doubled node count
/// and report endpoint deltas.
pub fn dressed(cfg: &Config, format: Format) -> Result<Outcome, Failure> {
    cfg.allow_only(&["model", "zeta", "c", "q", "nodes", "double", "refine_tol"])?;
    let kernel = match cfg.str_or("model", "xxz") {
        "xxz" => ModelKernel::Xxz {
            zeta: cfg.f64_or("zeta", std::f64::consts::PI / 3.0)?,
        },
        "nlsm" => ModelKernel::Nlsm {
            c: cfg.f64_or("c", 4.0)?,
        },
        other => {
            return Err(Failure::validation(format!(
                "unknown model `{other}` (expected xxz or nlsm)"
            )))
        }
    };
    let q = cfg.f64_or("q", 1.2)?;
    let nodes = cfg.usize_or("nodes", 64)?;
    let d = DressedFunctions::solve(kernel, q, nodes).map_err(classify)?;

    let mut pass = true;
    let doubling = if cfg.bool_or("double", false)? {
        let threshold = cfg.f64_or("refine_tol", 1e-9)?;
        let fine = DressedFunctions::solve(kernel, q, 2 * nodes).map_err(classify)?;
        let delta = DoublingDelta {
            nodes_coarse: nodes,
            nodes_fine: 2 * nodes,
            z_q_fine: fine.z_q,
            p_f_fine: fine.p_f,
            phi_qq_fine: fine.phi_qq,
            z_q_delta: (d.z_q - fine.z_q).abs(),
            p_f_delta: (d.p_f - fine.p_f).abs(),
            phi_qq_delta: (d.phi_qq - fine.phi_qq).abs(),
            threshold,
            pass: (d.z_q - fine.z_q).abs() <= threshold
                && (d.p_f - fine.p_f).abs() <= threshold
                && (d.phi_qq - fine.phi_qq).abs() <= threshold,
        };
        pass = delta.pass;
        Some(delta)
    } else {
        None
    };

    let body = match (format, &doubling) {
        (Format::Csv, Some(delta)) => format!(
            "quantity,coarse,fine,delta\nz_q,{:.17e},{:.17e},{:.17e}\np_f,{:.17e},{:.17e},{:.17e}\nphi_qq,{:.17e},{:.17e},{:.17e}\n",
            d.z_q,
            delta.z_q_fine,
            delta.z_q_delta,
            d.p_f,
            delta.p_f_fine,
            delta.p_f_delta,
            d.phi_qq,
            delta.phi_qq_fine,
            delta.phi_qq_delta,
        ),
        (Format::Csv, None) => d.csv(),
        (Format::Json, _) => {
            let summary = d.summary();
            to_json(&DressedReport {
                schema_version: SCHEMA_VERSION,
                command: "dressed",
                model: summary.model,
                q: d.q,
                nodes,
                z_q: d.z_q,
                p_f: d.p_f,
                lambda: d.nodes.clone(),
                z: d.z.clone(),
                p: d.p.clone(),
                phi_plus: d.phi_q_plus.clone(),
                phi_minus: d.phi_q_minus.clone(),
                doubling,
            })?
        }
    };
    Ok(Outcome { body, pass })
}

// -------------------------------------------------------------- multipoint

#[derive(Serialize)]
struct MultipointReport {
    schema_version: u32,
    command: &'static str,
    positions: Vec<f64>,
    levels: Vec<i64>,
    p_f: f64,
    z_q: f64,
    box_radius: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<u64>,
    leading_only: bool,
    terms: Vec<TermRecord>,
}

/// Assemble the asymptotic term list for an r-point spec.
pub fn multipoint(cfg: &Config, format: Format) -> Result<Outcome, Failure> {
    cfg.allow_only(&["positions", "levels", "p_f", "z_q", "box", "length", "leading"])?;
    let positions = cfg
        .f64_list("positions")?
        .ok_or_else(|| Failure::validation("multipoint needs positions"))?;
    let levels = cfg
        .i64_list("levels")?
        .ok_or_else(|| Failure::validation("multipoint needs levels"))?;
    let p_f = cfg.f64_or("p_f", 1.0)?;
    let z_q = cfg.f64_or("z_q", 1.0)?;
    let box_radius = cfg.u64_or("box", 2)? as i64;
    let leading_only = cfg.bool_or("leading", false)?;
    let length = if cfg.has("length") {
        Some(cfg.u64_or("length", 0)?)
    } else {
        None
    };

    let spec =
        MultipointSpec::new(positions.clone(), levels.clone(), AmplitudeMap::Unit, p_f, z_q)
            .map_err(classify)?;
    let terms = match (leading_only, length) {
        (true, _) => conformal_leading(&spec, box_radius).map_err(classify)?,
        (false, Some(l)) => assemble_terms_finite_l(&spec, box_radius, l).map_err(classify)?,
        (false, None) => assemble_terms_infinite_l(&spec, box_radius).map_err(classify)?,
    };

    let body = match format {
        Format::Json => to_json(&MultipointReport {
            schema_version: SCHEMA_VERSION,
            command: "multipoint",
            positions,
            levels,
            p_f,
            z_q,
            box_radius,
            length,
            leading_only,
            terms: term_records(&terms),
        })?,
        Format::Csv => terms_csv(&terms),
    };
    Ok(Outcome { body, pass: true })
}

// ---------------------------------------------------------------- selftest

/// Cheap cross-module desk checks; one line per check.
pub fn selftest() -> Result<Outcome, Failure> {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, result: Result<(), String>| match result {
        Ok(()) => lines.push(format!("ok {name}")),
        Err(why) => {
            pass = false;
            lines.push(format!("FAIL {name}: {why}"));
        }
    };

    check("fourier_single_jump", (|| {
        let nu = Complex64::new(0.3, 0.1);
        let sym = FHSymbol::single(nu, 0.0).map_err(|e| e.to_string())?;
        (-5..=5).try_for_each(|j| {
            let want =
                (std::f64::consts::PI * nu).sin() / (std::f64::consts::PI * (nu - j as f64));
            let got = sym.fourier_coeff(j);
            if (got - want).norm() <= 1e-14 {
                Ok(())
            } else {
                Err(format!("j={j}: {got} vs {want}"))
            }
        })
    })());

    check("kappa_counts", (|| {
        [(2usize, 3usize), (3, 7), (4, 19)]
            .iter()
            .try_for_each(|&(r, want)| {
                let got = ffsum_core::asympt::enumerate_kappa(r, 1).len();
                if got == want {
                    Ok(())
                } else {
                    Err(format!("r={r}: {got} vs {want}"))
                }
            })
    })());

    check("free_fermion_dressing", (|| {
        let d = DressedFunctions::solve(
            ModelKernel::Xxz {
                zeta: std::f64::consts::FRAC_PI_2,
            },
            1.0,
            32,
        )
        .map_err(|e| e.to_string())?;
        if d.z.iter().all(|&z| z == 1.0) && d.phi_q_plus.iter().all(|&v| v == 0.0) {
            Ok(())
        } else {
            Err("free-fermion solve not exact".into())
        }
    })());

    check("four_point_desk_value", (|| {
        let v = ffsum_core::asympt::xxz_xxxx_leading(
            [0.0, 1.0, 2.0, 3.0],
            1.0,
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
        .map_err(|e| e.to_string())?;
        if (v - 8.0 / 3f64.sqrt()).norm() <= 1e-12 {
            Ok(())
        } else {
            Err(format!("got {v}"))
        }
    })());

    check("two_point_identity", (|| {
        let cls = CriticalClassVector::new(vec![1]);
        let shifts = ShiftParams::new(
            vec![Complex64::new(0.2, 0.0), Complex64::new(-0.1, 0.05)],
            vec![Complex64::new(0.6, 0.5)],
        )
        .map_err(|e| e.to_string())?;
        let policy = TruncationPolicy::new(4, 4096, TailMode::Raw).with_tail_target(1e-8);
        let rep = identity_residual(&cls, &shifts, &policy).map_err(|e| e.to_string())?;
        if rep.worst() <= 1e-6 {
            Ok(())
        } else {
            Err(format!("worst residual {:.3e}", rep.worst()))
        }
    })());

    let mut body = lines.join("\n");
    body.push('\n');
    body.push_str(if pass { "all checks passed\n" } else { "selftest FAILED\n" });
    Ok(Outcome { body, pass })
}
