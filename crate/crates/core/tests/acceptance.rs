//! Acceptance harness: one line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use hglk_core::app::{self, Command, RunConfig};
use hglk_core::besov::{weight_scan, Verdict};
use hglk_core::commutator::Ladder;
use hglk_core::evolve::Status;
use hglk_core::suite;
use hglk_core::Result;
use statrs::function::beta::beta;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn fractional_cross_path() -> Result<Outcome> {
    let start = Instant::now();
    let rows = suite::cross_path_suite(20, 64, 16.0, 400, 101)?;
    let secs = start.elapsed().as_secs_f64();
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let reduction = rows
        .iter()
        .map(|r| r.rel_error / r.rel_error_doubled)
        .fold(f64::INFINITY, f64::min);
    outcome(
        worst <= 1e-6 && reduction >= 4.0 && secs < 10.0,
        format!("max rel error {worst:.2e}, min reduction {reduction:.1}x, {secs:.1} s"),
    )
}

fn square_identity() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for (k, n) in [64, 128, 256, 512, 1024].into_iter().enumerate() {
        worst = worst.max(suite::square_identity_error(&suite::rough_operator(200 + k as u64, n, n as f64 / 4.0)?)?);
    }
    for seed in 101..121 {
        worst = worst.max(suite::square_identity_error(&suite::rough_operator(seed, 64, 16.0)?)?);
    }
    outcome(worst <= 1e-10, format!("max ||D^2 - H||_F / ||H||_F = {worst:.2e} up to n = 1024"))
}

fn scalar_balakrishnan() -> Result<Outcome> {
    let errs = suite::scalar_balakrishnan_errors(&[0.25, 1.0, 4.0, 100.0], 800)?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-8, format!("max rel error {worst:.2e}"))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h)).sum();
    h / 3.0 * (f(a) + inner + f(b))
}

/// `int_0^inf lambda^{2s-3/2} (1+lambda)^{-2s} d lambda`, split at 1 and
/// smoothed by `lambda = v^{1/(2s-1/2)}` below and `lambda = u^{-2}` above.
fn substituted_constant(sigma: f64) -> f64 {
    let alpha = 2.0 * sigma - 0.5;
    let low = simpson(|v| (1.0 + v.powf(1.0 / alpha)).powf(-2.0 * sigma) / alpha, 0.0, 1.0, 20_000);
    let high = simpson(|u| 2.0 * (1.0 + u * u).powf(-2.0 * sigma), 0.0, 1.0, 20_000);
    low + high
}

fn resolvent_constant() -> Result<Outcome> {
    let sigmas = [0.3, 0.5, 1.0];
    let reports = suite::weighted_resolvent_suite(50, &sigmas, 303)?;
    // lambda = tan^2 theta turns the sigma = 1 constant into int 2 sin^2
    let simpson = simpson(|t| 2.0 * t.sin().powi(2), 0.0, 0.5 * PI, 2000);
    let mut const_err = (simpson - PI / 2.0).abs() / (PI / 2.0);
    for r in &reports {
        let exact = beta(2.0 * r.sigma - 0.5, 0.5);
        const_err = const_err.max((r.constant_sq - exact).abs() / exact);
        if r.sigma == 1.0 {
            const_err = const_err.max((r.constant_sq - simpson).abs() / simpson);
        }
    }
    for &s in &sigmas {
        let exact = beta(2.0 * s - 0.5, 0.5);
        const_err = const_err.max((substituted_constant(s) - exact).abs() / exact);
    }
    let bound_ok = reports.iter().all(|r| r.lhs <= r.rhs * (1.0 + 1e-6));
    let worst = reports.iter().map(|r| r.lhs / r.rhs).fold(0.0, f64::max);
    outcome(
        const_err <= 1e-6 && bound_ok && reports.len() == 150,
        format!(
            "c(1)^2 rel error {const_err:.2e} against pi/2; {} cases, max lhs/rhs {worst:.6}",
            reports.len()
        ),
    )
}

fn loewner() -> Result<Outcome> {
    let reports = suite::loewner_suite(200, &[0.25, 0.5, 0.75, 1.0], 404)?;
    let forward = reports.iter().all(|r| r.min_gap_eig >= -1e-9 * r.scale);
    let inverse = reports
        .iter()
        .all(|r| matches!((r.inverse_gap_eig, r.inverse_scale), (Some(g), Some(s)) if g >= -1e-9 * s));
    let worst = reports.iter().map(|r| r.min_gap_eig / r.scale).fold(f64::INFINITY, f64::min);
    outcome(
        forward && inverse && reports.len() == 800,
        format!("{} checks, min scaled gap {worst:.2e}, inverse ordering {inverse}", reports.len()),
    )
}

fn commutator_identity() -> Result<Outcome> {
    let rows = suite::commutator_identity_suite(50, 64, 505)?;
    let worst = rows.iter().map(|r| r.difference / r.scale).fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("max |direct - integral| / scale = {worst:.2e} on {} triples", rows.len()))
}

fn commutator_stability() -> Result<Outcome> {
    let fam = suite::commutator_stability(&Ladder::new(16.0, vec![64, 128, 256])?, 100, 606)?;
    let stable = fam.refinement_ratios.iter().all(|&r| r < 2.0 && r > 0.5);
    let zero = suite::constant_commutator_norm(128, 16.0)?;
    outcome(
        stable && zero < 1e-10,
        format!(
            "max ratios {:?}, refinement {:?}, constant f norm {zero:.1e}",
            fam.max_ratios, fam.refinement_ratios
        ),
    )
}

fn weight_regularity() -> Result<Outcome> {
    let scan = weight_scan(&[0.7, 1.0], &[64.0, 128.0, 256.0, 512.0], 1.0 / 32.0)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for t in &scan.trends {
        if t.a == 0.7 {
            ok &= t.max_tail_ratio <= 0.05 && t.verdict == Verdict::Convergent;
            parts.push(format!("a=0.7 tail {:.1e} {}", t.max_tail_ratio, t.verdict.as_str()));
        } else {
            let min_inc = t.increments.iter().copied().fold(f64::INFINITY, f64::min);
            ok &= t.increments.len() == 3 && min_inc >= 0.05 && t.verdict == Verdict::DivergentTrend;
            parts.push(format!("a=1 min increment {min_inc:.3} {}", t.verdict.as_str()));
        }
    }
    let margin = suite::second_difference_margin(4096, 128.0, 60);
    ok &= margin >= 0.0 && scan.trends.len() == 2;
    parts.push(format!("second-difference margin {margin:.3}"));
    outcome(ok, parts.join(", "))
}

fn riccati_ode() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in 0..20 {
        worst = worst.max(suite::ode_max_error(&suite::ode_case(909, k), 200_000)?);
    }
    let base = suite::ode_case(909, 0);
    let eq = hglk_core::evolve::BlowupOde::new(base.a, base.b, base.q, base.equilibrium())?;
    // the equilibrium repels at rate A (q - 1); five e-foldings keep
    // round-off growth far below the tolerance
    let horizon = 5.0 / (eq.a * (eq.q - 1.0));
    let drift = eq
        .rk4(horizon, 10_000)
        .into_iter()
        .map(|(_, f)| (f - eq.f0).abs())
        .chain((0..=100).map(|k| (eq.closed_form(horizon * k as f64 / 100.0).unwrap_or(f64::NAN) - eq.f0).abs()))
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-6 && drift <= 1e-9,
        format!("max |closed - RK4| {worst:.2e}, equilibrium drift {drift:.1e}"),
    )
}

fn blowup() -> Result<Outcome> {
    let start = Instant::now();
    let run = suite::blowup_run(128, 32.0, 2.0, 0.75, 1.5, 100, 7)?;
    let secs = start.elapsed().as_secs_f64();
    let t_bound = run.certificate.t_bound.unwrap_or(f64::NAN);
    let ok = match run.status {
        Status::BlownUp { t_obs } => t_obs <= 1.1 * t_bound,
        _ => false,
    };
    outcome(
        ok && run.certificate.predicted && run.inequality.fraction >= 0.99 && secs < 60.0,
        format!(
            "{} with T_obs {:?} vs t_bound {t_bound:.4}, inequality {}/{}, {secs:.1} s",
            run.status.label(),
            run.certificate.t_obs,
            run.inequality.satisfied,
            run.inequality.checked
        ),
    )
}

fn rescaling() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.5, 2.0, 2.5, 3.0] {
        let scan = suite::standard_rescaling(p, 0.75, &[1, 2, 4, 8, 16])?;
        let target = if p == 3.0 { 0.0 } else { -1.0 + 0.5 * (p - 1.0) };
        ok &= (scan.slope - target).abs() <= 0.15;
        parts.push(format!("p={p}: {:.3} (target {target})", scan.slope));
    }
    outcome(ok, parts.join(", "))
}

fn lwp_order() -> Result<Outcome> {
    let gaps = suite::order_ladder(64, 0.01, 1.0, &[4, 8, 16, 32])?;
    let factors: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = factors.iter().all(|f| (3.5..=4.5).contains(f));
    outcome(ok, format!("gaps {:?}, factors {factors:.4?}", gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>()))
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir().map_err(|e| hglk_core::LabError::InvalidInput(e.to_string()))?;
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let mut cfg = RunConfig::default();
        cfg.output.dir = dir.path().join(run);
        let outcome = app::run(Command::Verify, &cfg).map_err(|e| hglk_core::LabError::InvalidInput(e.to_string()))?;
        let mut files: Vec<(String, Vec<u8>)> = outcome
            .manifest
            .files
            .iter()
            .map(|f| f.name.clone())
            .chain(std::iter::once("manifest.json".to_string()))
            .map(|name| {
                let bytes = std::fs::read(cfg.output.dir.join(&name)).unwrap_or_default();
                (name, bytes)
            })
            .collect();
        files.sort();
        outputs.push((outcome.exit_code, files));
    }
    let identical = outputs[0] == outputs[1];
    let count = outputs[0].1.len();
    let bytes: usize = outputs[0].1.iter().map(|(_, b)| b.len()).sum();
    outcome(
        identical && outputs[0].0 == 0 && count >= 3,
        format!("verify twice: {count} files, {bytes} bytes, identical {identical}, exit {}", outputs[0].0),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 13] = [
        ("fractional power cross-path", fractional_cross_path),
        ("square identity", square_identity),
        ("scalar resolvent integral", scalar_balakrishnan),
        ("weighted resolvent constant", resolvent_constant),
        ("Loewner monotonicity", loewner),
        ("commutator pairing identity", commutator_identity),
        ("commutator refinement stability", commutator_stability),
        ("weight regularity", weight_regularity),
        ("comparison ODE", riccati_ode),
        ("blow-up reproduction", blowup),
        ("rescaling slope", rescaling),
        ("Strang order", lwp_order),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {:<34} {}  {detail} [{:.1} s]",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
