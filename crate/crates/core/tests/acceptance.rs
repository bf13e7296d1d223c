//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines are visible under `cargo test`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use intpoints::arith::ln_abs;
use intpoints::bounds_lab::{
    exponent_experiment, run_check, CheckId, FamilySpec, GridConfig, PRINTED_TOL, WP_TAIL,
};
use intpoints::curve_models::{BoxSpec, LongCurve, ShortCurve};
use intpoints::delpezzo::{brute_force_s_n, count_s_n, on_disc_locus, DP1Surface};
use intpoints::heights::{breakdown_with_offset, calibration_corpus, normalization_calibration, RationalPoint};
use intpoints::lattice_modular::{
    associate_tau, delta_from_eisenstein, delta_tau, j_of_tau, j_qexp_coeffs, tau_grid, SeriesControl, TauPoint,
};
use intpoints::point_enum::{
    admissible_x, arbitrary_box_pipeline, enumerate_short, main_theorem_pipeline, sieve_certified_interval,
    xresidues_mod_p,
};

// Pinned tolerances.
const PRINTED_DECIMALS: f64 = 1e-3;
const SUITE_SECONDS: f64 = 300.0;
const HEIGHT_RESIDUAL: f64 = 1e-5;
const OFFSET_STD: f64 = 1e-4;
const HEIGHT_BOX: i128 = 10_000;
const HEIGHT_CAP: f64 = 5.0;
/// Measured on the first run and frozen.
const HEIGHT_PIN: f64 = -0.020_404;
const HEIGHT_PIN_TOL: f64 = 1e-3;
const SIEVE_CURVES: usize = 100;
const SIEVE_LEN: i128 = 10_000;
const DELTA_REL: f64 = 1e-8;
const SPECIAL_J: f64 = 1e-8;
const ASSOC_REL: f64 = 1e-6;
const PETERSSON: (f64, f64) = (0.8, 1.2);
const EXPONENT_SECONDS: f64 = 600.0;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn printed_constants() -> Outcome {
    let start = Instant::now();
    let grid = GridConfig::default();
    let mut notes = Vec::new();
    for id in [CheckId::L4, CheckId::Cor1, CheckId::L3, CheckId::Jw, CheckId::L8, CheckId::L5] {
        let r = run_check(id, &grid).map_err(|e| format!("{id}: {e}"))?;
        if !r.ok() {
            return Err(format!("{id} failed: worst {} vs {}, {:?}", r.worst_case, r.threshold, r.subchecks));
        }
        for s in &r.subchecks {
            if s.tolerance > PRINTED_DECIMALS {
                return Err(format!("{id} {} tolerance {} above {PRINTED_DECIMALS}", s.name, s.tolerance));
            }
        }
        notes.push(format!("{id} worst {:.5}", r.worst_case));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        PRINTED_TOL == PRINTED_DECIMALS && (WP_TAIL - 97.7778).abs() < 1e-12 && secs < SUITE_SECONDS,
        format!("{} in {secs:.1}s", notes.join(", ")),
    )
}

fn height_decomposition() -> Outcome {
    let cal = normalization_calibration().map_err(|e| e.to_string())?;
    let ctl = SeriesControl::default();
    let mut worst = 0f64;
    let mut points = 0;
    for (curve, _) in calibration_corpus() {
        let (a, b) = curve.small_coeffs().unwrap();
        if a.abs() > 50 || b.abs() > 50 {
            return Err(format!("corpus curve {curve} outside |A|,|B| <= 50"));
        }
        let pts = enumerate_short(&curve, &BoxSpec::square(HEIGHT_BOX))
            .map_err(|e| e.to_string())?
            .points
            .unwrap_or_default();
        for (x, y) in pts {
            let p = RationalPoint::integral(&curve, x as i64, y as i64).map_err(|e| e.to_string())?;
            let br = breakdown_with_offset(&curve, &p, &ctl, cal.offset).map_err(|e| format!("{curve} ({x},{y}): {e}"))?;
            worst = worst.max(br.residual);
            points += 1;
        }
    }
    check(
        worst <= HEIGHT_RESIDUAL && cal.std_dev <= OFFSET_STD && cal.samples == 20,
        format!("{points} points, max residual {worst:.2e}, offset {:.2e} (sd {:.2e})", cal.offset, cal.std_dev),
    )
}

fn height_constant() -> Outcome {
    let r = run_check(CheckId::P1, &GridConfig::default()).map_err(|e| e.to_string())?;
    let c = r.empirical_constant.unwrap_or(f64::INFINITY);
    check(
        r.ok() && c <= HEIGHT_CAP && (c - HEIGHT_PIN).abs() <= HEIGHT_PIN_TOL,
        format!("C = {c:.6} over {} points (cap {HEIGHT_CAP}, pin {HEIGHT_PIN})", r.samples),
    )
}

fn sieve_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut tested = 0;
    let mut worst_ratio = 0f64;
    let mut residue_checks = 0;
    while tested < SIEVE_CURVES {
        let curve = ShortCurve::new(rng.gen_range(-1000i64..=1000), rng.gen_range(-1000i64..=1000));
        if curve.is_singular() {
            continue;
        }
        let lo: i128 = rng.gen_range(-2000..=50_000);
        let hi = lo + SIEVE_LEN - 1;
        let cert = sieve_certified_interval(&curve, lo, hi, false).map_err(|e| e.to_string())?;
        let exact = admissible_x(&curve, lo, hi).map_err(|e| e.to_string())?.len() as f64;
        if cert.bound < exact {
            return Err(format!("{curve} on [{lo},{hi}]: bound {} < exact {exact}", cert.bound));
        }
        worst_ratio = worst_ratio.max(exact / cert.bound);
        for p in intpoints::arith::primes_up_to(200).into_iter().filter(|&p| p > 42) {
            match catch_unwind(AssertUnwindSafe(|| xresidues_mod_p(&curve, p))) {
                Ok(Ok(r)) => {
                    if (r.hasse_residual as f64) > 2.0 * (p as f64).sqrt() || 4 * r.x_count > 3 * p {
                        return Err(format!("{curve} mod {p}: {r:?}"));
                    }
                    residue_checks += 1;
                }
                Ok(Err(intpoints::Error::BadReduction { .. })) => {}
                Ok(Err(e)) => return Err(e.to_string()),
                Err(_) => return Err(format!("{curve} mod {p}: residue assertion fired")),
            }
        }
        tested += 1;
    }
    check(true, format!("{tested} curves, max exact/bound {worst_ratio:.4}, {residue_checks} residue checks"))
}

fn lattice_cross_validation() -> Outcome {
    let ctl = SeriesControl::default();
    let taus = tau_grid(200, 10.0);
    let mut worst = 0f64;
    for tau in &taus {
        let a = delta_tau(tau, &ctl).map_err(|e| e.to_string())?;
        let b = delta_from_eisenstein(tau, &ctl).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).norm() / a.norm());
    }
    let ji = (j_of_tau(&TauPoint::i(), &ctl).map_err(|e| e.to_string())? - 1728.0).norm();
    let jr = j_of_tau(&TauPoint::rho(), &ctl).map_err(|e| e.to_string())?.norm();
    let mut assoc = 0f64;
    for j in [-1e6, -1.0, 0.0, 1.0, 1000.0, 1728.0, 1e6] {
        let a = associate_tau(j, &ctl).map_err(|e| e.to_string())?;
        assoc = assoc.max(a.residual / f64::max(j.abs(), 1.0));
    }
    check(
        taus.len() == 600 && worst <= DELTA_REL && ji <= SPECIAL_J && jr <= SPECIAL_J && assoc <= ASSOC_REL,
        format!("Δ rel err {worst:.2e}, |j(i)-1728| {ji:.1e}, |j(ρ)| {jr:.1e}, round trip {assoc:.1e}"),
    )
}

fn q_expansion() -> Outcome {
    let c = j_qexp_coeffs(64);
    let (mut lo, mut hi) = (f64::INFINITY, 0f64);
    for (n, cn) in c.iter().enumerate().skip(10) {
        let n = n as f64;
        let ratio = (ln_abs(cn) + 0.5 * 2f64.ln() + 0.75 * n.ln() - 4.0 * std::f64::consts::PI * n.sqrt()).exp();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    check(
        c[0] == BigInt::from(744) && c[1] == BigInt::from(196_884) && lo >= PETERSSON.0 && hi <= PETERSSON.1,
        format!("c(0) = {}, c(1) = {}, Petersson ratio in [{lo:.4}, {hi:.4}]", c[0], c[1]),
    )
}

fn exponent_experiments() -> Outcome {
    let start = Instant::now();
    let ns = [10u64, 100, 1000, 10_000, 100_000, 1_000_000];
    for d in [2, 3, 5] {
        let t = exponent_experiment(&FamilySpec::Power { d }, &ns).map_err(|e| e.to_string())?;
        if t.closed_form_ok != Some(true) {
            return Err(format!("y = x^{d}: counts differ from 2 floor(N^(1/d)) + 1"));
        }
    }
    let t = exponent_experiment(&FamilySpec::CoefficientBox { bound: 50 }, &[1000, 10_000, 100_000, 1_000_000])
        .map_err(|e| e.to_string())?;
    let slope = t.slope.unwrap_or(f64::INFINITY);
    let secs = start.elapsed().as_secs_f64();
    let counts: Vec<u64> = t.rows.iter().map(|r| r.max_count).collect();
    check(
        slope < 1.0 / 3.0 && secs < EXPONENT_SECONDS,
        format!("power families exact; elliptic max counts {counts:?}, slope {slope:.4}, {secs:.1}s"),
    )
}

fn del_pezzo() -> Outcome {
    let s = DP1Surface::new([1, 0, 0, 0, 1], [1, 0, 0, 0, 0, 0, 1]);
    let r2 = count_s_n(&s, 2).map_err(|e| e.to_string())?;
    let brute = brute_force_s_n(&s, 2);
    let r10 = count_s_n(&s, 10).map_err(|e| e.to_string())?;
    let zeros_ok = r10.singular_fibers.iter().all(|f| on_disc_locus(&s, f.u, f.v));
    check(
        r2.total == brute && r10.is_consistent() && zeros_ok,
        format!(
            "N=2: {} vs brute {brute}; N=10: total {} over {} fibers, {} disc-zero pairs",
            r2.total,
            r10.total,
            r10.per_fiber.len() + r10.singular_fibers.len(),
            r10.disc_zero_count
        ),
    )
}

fn pipeline_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut runs = 0;
    let mut flagged = 0;
    for _ in 0..60 {
        let mut a: [i64; 5] = std::array::from_fn(|_| rng.gen_range(-30..=30));
        // The pipeline takes models with a1 = 0.
        a[0] = 0;
        let curve = LongCurve::new(a);
        if curve.discriminant() == BigInt::from(0) {
            continue;
        }
        for n in [20u64, 200] {
            let r = main_theorem_pipeline(&curve, n, 0.01, 4.5).map_err(|e| format!("{a:?} N={n}: {e}"))?;
            if !r.is_sound() {
                return Err(format!("{a:?} N={n}: unsound {:?}", r.branches));
            }
            flagged += r.constant_dependent as usize;
            runs += 1;
        }
        let x0: i128 = rng.gen_range(-100..=100);
        let y0: i128 = rng.gen_range(-1000..=1000);
        let short = ShortCurve::new(rng.gen_range(-30i64..=30), rng.gen_range(-30i64..=30));
        if !short.is_singular() {
            let bx = BoxSpec::new(x0 - 20, x0 + 20, y0 - 20, y0 + 20).unwrap();
            let r = arbitrary_box_pipeline(&short.to_long(), &bx, 0.05).map_err(|e| format!("{short} box: {e}"))?;
            if !r.is_sound() {
                return Err(format!("{short} box {bx:?}: unsound"));
            }
            runs += 1;
        }
    }
    check(runs > 0, format!("{runs} runs, {flagged} flagged constant-dependent, no unsound certified bound"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("printed constants", printed_constants),
        ("height decomposition vs oracle", height_decomposition),
        ("height bound constant", height_constant),
        ("sieve soundness", sieve_soundness),
        ("lattice cross-validation", lattice_cross_validation),
        ("q-expansion", q_expansion),
        ("exponent experiments", exponent_experiments),
        ("del Pezzo consistency", del_pezzo),
        ("pipeline soundness", pipeline_soundness),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS {} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
