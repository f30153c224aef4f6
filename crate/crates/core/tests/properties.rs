use num_complex::Complex64;
use proptest::prelude::*;

use hglk_core::besov::{Band, DyadicBank};
use hglk_core::commutator::{apply_hamiltonian_commutator, commutator_matrix, leibniz_expansion};
use hglk_core::evolve::{nonlinear_substep, step_strang, BlowupOde, Propagator, Step};
use hglk_core::grid::{dft, fourier_multiplier, inner_product};
use hglk_core::linalg::{apply_real, min_eigenvalue};
use hglk_core::operator::{CoefficientFamily, EllipticOperator, PotentialFamily, PotentialSpec};
use hglk_core::random::{band_limited_complex, band_limited_real, trial_rng};
use hglk_core::spectral::{eigendecompose, square_root};
use hglk_core::{suite, Field, Grid};

fn field(seed: u64, n: usize, length: f64) -> Field {
    band_limited_complex(&mut trial_rng(seed, 0), Grid::new(n, length).unwrap())
}

fn operator(seed: u64, n: usize, rough: bool) -> EllipticOperator {
    let g = Grid::new(n, 8.0).unwrap();
    let coeff = if rough {
        CoefficientFamily::RandomLipschitz {
            mean: 1.0,
            amplitude: 0.6,
            knots: 7,
            seed,
        }
    } else {
        CoefficientFamily::Sinusoidal {
            mean: 1.0,
            amplitude: 0.4,
            periods: 2,
        }
    };
    let pot = PotentialSpec {
        q: 4.0,
        theta: 0.5,
        singular: PotentialFamily::InversePower { strength: 0.5, cap: 3.0 },
        bounded: PotentialFamily::Noise {
            offset: 0.3,
            amplitude: 0.2,
            modes: 3,
            seed,
        },
    };
    EllipticOperator::from_families(g, &coeff, &pot).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval(seed in any::<u64>(), log_n in 3usize..9) {
        let f = field(seed, 1 << log_n, 5.0);
        let n = f.grid().n() as f64;
        let spectral: f64 = dft(f.samples()).iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        let physical: f64 = f.samples().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((spectral - physical).abs() <= 1e-12 * physical);
    }

    #[test]
    fn multipliers_compose(seed in any::<u64>(), s in 0.1f64..1.9, t in 0.1f64..1.9) {
        let f = field(seed, 64, 7.0);
        let both = fourier_multiplier(&fourier_multiplier(&f, |xi| (1.0 + xi * xi).powf(0.5 * s)), |xi| xi.abs().powf(t));
        let once = fourier_multiplier(&f, |xi| (1.0 + xi * xi).powf(0.5 * s) * xi.abs().powf(t));
        prop_assert!(both.sub(&once).unwrap().l2_norm() <= 1e-11 * once.l2_norm().max(1.0));
    }

    #[test]
    fn hamiltonian_is_symmetric_and_nonnegative(seed in any::<u64>(), rough in any::<bool>()) {
        let op = operator(seed, 32, rough);
        let asym = (&op.matrix - op.matrix.transpose()).norm();
        prop_assert_eq!(asym, 0.0);
        prop_assert!(min_eigenvalue(&op.matrix).unwrap() >= -1e-10 * op.matrix.norm());
    }

    #[test]
    fn leibniz_expansion_matches_commutator(seed in any::<u64>(), rough in any::<bool>()) {
        let op = operator(seed, 32, rough);
        let mut r = trial_rng(seed, 1);
        let f = band_limited_real(&mut r, op.grid).real_parts();
        let u = band_limited_complex(&mut r, op.grid);
        let direct = apply_hamiltonian_commutator(&op.kinetic, &f, u.samples());
        let expanded = leibniz_expansion(&op.grid, &op.coeff.a, &f, u.samples());
        let scale: f64 = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let gap = direct.iter().zip(&expanded).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-12 * scale.max(1.0));
        // the potential commutes with multipliers
        let full = apply_hamiltonian_commutator(&op.matrix, &f, u.samples());
        let gap_v = direct.iter().zip(&full).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap_v <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn multiplier_commutator_is_skew(seed in any::<u64>()) {
        let op = operator(seed, 32, true);
        let d = square_root(&eigendecompose(&op).unwrap()).unwrap();
        let mut r = trial_rng(seed, 2);
        let f = band_limited_real(&mut r, op.grid).real_parts();
        let c = commutator_matrix(&f, &d).unwrap();
        prop_assert!((&c + c.transpose()).norm() <= 1e-12 * c.norm().max(1.0));
        let g = band_limited_complex(&mut r, op.grid);
        let h = band_limited_complex(&mut r, op.grid);
        let cg = Field::new(op.grid, apply_real(&c, g.samples())).unwrap();
        let ch = Field::new(op.grid, apply_real(&c, h.samples())).unwrap();
        let lhs = inner_product(&g, &ch).unwrap();
        let rhs = -inner_product(&cg, &h).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn dyadic_pieces_telescope(seed in any::<u64>(), log_n in 4usize..10, length in 2.0f64..200.0) {
        let f = field(seed, 1 << log_n, length);
        let bank = DyadicBank::new(*f.grid());
        let mut total = Field::zeros(*f.grid());
        for (_, pj) in bank.decompose(&f).unwrap() {
            total = total.add(&pj).unwrap();
        }
        prop_assert!(total.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
        let low = bank.project(&f, Band::Lowpass).unwrap();
        let mut inhom = low;
        for (j, pj) in bank.decompose(&f).unwrap() {
            if j >= 1 {
                inhom = inhom.add(&pj).unwrap();
            }
        }
        prop_assert!(inhom.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn nonlinear_substep_grows_modulus_and_keeps_phase(seed in any::<u64>(), p in 1.2f64..4.0, tau in 1e-4f64..0.05) {
        let u = field(seed, 32, 6.0);
        let v = match nonlinear_substep(u.samples(), tau, p) {
            Ok(v) => v,
            Err(t_star) => {
                let peak = u.max_abs();
                let expected = peak.powf(1.0 - p) / (p - 1.0);
                prop_assert!(t_star <= tau);
                prop_assert!((t_star - expected).abs() <= 1e-12 * expected);
                return Ok(());
            }
        };
        for (a, b) in u.samples().iter().zip(&v) {
            prop_assert!(b.norm() >= a.norm());
            if a.norm() > 1e-12 {
                prop_assert!((b / a).im.abs() <= 1e-12 * (b / a).norm());
            }
        }
    }

    #[test]
    fn strang_steps_never_lose_mass(seed in any::<u64>(), p in 1.5f64..3.0) {
        let op = operator(seed, 32, false);
        let prop = Propagator::from_operator(&op).unwrap();
        let mut u = field(seed, 32, 8.0);
        let mut mass = u.l2_norm();
        for _ in 0..10 {
            match step_strang(&u, 1e-3, &prop, p).unwrap() {
                Step::Advanced(v) => u = v,
                Step::BlowupSignal { .. } => break,
            }
            prop_assert!(u.l2_norm() >= mass * (1.0 - 1e-13));
            mass = u.l2_norm();
        }
    }

    #[test]
    fn comparison_ode_is_monotone_in_data(a in 0.2f64..3.0, b in 0.2f64..3.0, q in 1.2f64..3.0, x in 1.05f64..3.0) {
        let eq = (a / b).powf(1.0 / (q - 1.0));
        let lo = BlowupOde::new(a, b, q, eq * x).unwrap();
        let hi = BlowupOde::new(a, b, q, eq * x * 1.1).unwrap();
        let (tl, th) = (lo.t_bound().unwrap(), hi.t_bound().unwrap());
        prop_assert!(th < tl);
        let t = 0.5 * th;
        prop_assert!(hi.closed_form(t).unwrap() > lo.closed_form(t).unwrap());
        let below = BlowupOde::new(a, b, q, eq / x).unwrap();
        prop_assert!(below.t_bound().is_none());
        prop_assert!(below.closed_form(5.0).unwrap() < eq / x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn resolvent_commutator_identity_carries_a_minus_sign(seed in any::<u64>(), lambda in 0.05f64..20.0) {
        let op = operator(seed, 32, true);
        let f = band_limited_real(&mut trial_rng(seed, 3), op.grid);
        prop_assert!(suite::resolvent_identity_residual(&op, &f, lambda).unwrap() <= 1e-10);
    }
}

#[test]
fn resolvent_identity_fails_with_the_plus_sign() {
    use hglk_core::linalg::Mat;
    let op = operator(5, 32, true);
    let n = op.grid.n();
    let f = band_limited_real(&mut trial_rng(5, 3), op.grid).real_parts();
    let r = eigendecompose(&op).unwrap().function(|l| 1.0 / (1.0 + l));
    let fm = Mat::from_fn(n, n, |i, k| if i == k { f[i] } else { 0.0 });
    let hf = &op.matrix * &fm - &fm * &op.matrix;
    let lhs = &r * &fm - &fm * &r;
    let plus = (&lhs - &r * &hf * &r).norm() / lhs.norm();
    let minus = (&lhs + &r * &hf * &r).norm() / lhs.norm();
    assert!(minus < 1e-12);
    assert!((plus - 2.0).abs() < 1e-9);
}

#[test]
fn complex_samples_survive_the_propagator() {
    let op = operator(9, 32, true);
    let prop = Propagator::from_operator(&op).unwrap();
    let u = field(9, 32, 8.0);
    let back = prop.apply(&prop.apply(&u, 0.3), -0.3);
    assert!(back.sub(&u).unwrap().l2_norm() <= 1e-12 * u.l2_norm());
    let zero = prop.apply(&Field::constant(op.grid, Complex64::new(0.0, 0.0)), 1.0);
    assert_eq!(zero.max_abs(), 0.0);
}
