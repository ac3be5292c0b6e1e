//! Randomized invariants.

mod support;

use num_complex::Complex64;
use proptest::prelude::*;

use support::*;
use usct::array::{simulate_observation, MeasurementSet, SourcePlan};
use usct::born::{build_potential, choose_born_params};
use usct::fft::{fft2, ifft2};
use usct::field::{fourier_symbol, ComplexField, Grid2D, RealField};
use usct::fwi::{self, FwiOptions, FwiProblem, PenaltyKind, Regularization};
use usct::io::{Dtype, FieldContainer};
use usct::medium::SoundSpeedMap;
use usct::metrics::rrmse;
use usct::phantom::{gen_phantom, PhantomKind, PhantomSpec};
use usct::solver::SolverOptions;

fn kind_strategy() -> impl Strategy<Value = PhantomKind> {
    prop_oneof![Just(PhantomKind::BreastLike), Just(PhantomKind::BrainLike), Just(PhantomKind::InclusionTest)]
}

fn complex_values(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_round_trip((nx, ny, values) in (8usize..24, 8usize..24).prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), complex_values(nx * ny)))) {
        let f = ComplexField::new(Grid2D::centered(nx, ny, 1e-3).unwrap(), values).unwrap();
        let back = ifft2(&fft2(&f));
        prop_assert!(rrmse(&f, &back).unwrap() < 1e-12);
    }

    #[test]
    fn fourier_symbol_is_even(nx in 8usize..40, ny in 8usize..40, dx in 1e-4..1e-2f64) {
        let s = fourier_symbol(&Grid2D::centered(nx, ny, dx).unwrap());
        for my in 0..ny {
            for mx in 0..nx {
                prop_assert_eq!(s.at(mx, my), s.at((nx - mx) % nx, (ny - my) % ny));
            }
        }
    }

    #[test]
    fn rrmse_ignores_a_shared_phase(
        (u, e) in (complex_values(64), complex_values(64)),
        phase in 0.3..6.0f64,
    ) {
        prop_assume!(u.iter().any(|z| z.norm() > 1.0));
        let g = Grid2D::centered(8, 8, 1.0).unwrap();
        let (u, e) = (ComplexField::new(g, u).unwrap(), ComplexField::new(g, e).unwrap());
        let rot = Complex64::from_polar(1.0, phase);
        let base = rrmse(&u, &e).unwrap();
        let both = rrmse(&u.scale(rot), &e.scale(rot)).unwrap();
        prop_assert!((base - both).abs() <= 1e-12 * base.max(1.0));
        // Rotating only the estimate of a perfect match breaks it.
        let one = rrmse(&u, &u.scale(rot)).unwrap();
        prop_assert!((one - 2.0 * (phase / 2.0).sin().abs()).abs() < 1e-9);
        prop_assert!(one > 0.2);
    }

    #[test]
    fn container_round_trip_is_bitwise(
        (nx, ny, values) in (1u32..20, 1u32..20).prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), complex_values((nx * ny) as usize))),
        dx in 1e-5..1.0f64,
        code in 0u8..4,
    ) {
        let wide = FieldContainer::new(nx, ny, dx, usct::io::Payload::Complex128(values.clone())).unwrap();
        let c = match Dtype::from_code(code).unwrap() {
            Dtype::Complex128 => wide,
            Dtype::Complex64 => wide.narrowed(),
            Dtype::Real64 => FieldContainer::new(nx, ny, dx, usct::io::Payload::Real64(values.iter().map(|z| z.re).collect())).unwrap(),
            Dtype::Real32 => FieldContainer::new(nx, ny, dx, usct::io::Payload::Real64(values.iter().map(|z| z.im).collect())).unwrap().narrowed(),
        };
        let bytes = c.to_bytes();
        let back = FieldContainer::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back.dtype() as u8, code);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Every generated medium yields a contraction: `|k² - κ²| ≤ ε`.
    #[test]
    fn born_params_cover_random_phantoms(kind in kind_strategy(), seed in 0u64..1_000_000) {
        let grid = grid_at_ppw(32, 8.0);
        let c = gen_phantom(&PhantomSpec::new(kind, grid, seed)).unwrap();
        let params = choose_born_params(&c, omega()).unwrap();
        let pot = build_potential(&c, &params).unwrap();
        prop_assert!(pot.contraction_bound() <= 1.0 + 1e-12);
        prop_assert!(pot.v.values().iter().all(|v| (v.im + params.epsilon).abs() <= 1e-9 * params.epsilon));
    }

    #[test]
    fn phantom_exterior_is_background(kind in kind_strategy(), seed in 0u64..1_000_000) {
        let grid = grid_at_ppw(32, 8.0);
        let c = gen_phantom(&PhantomSpec::new(kind, grid, seed)).unwrap();
        let mask = c.doi_mask().unwrap();
        prop_assert!(c.speeds().iter().zip(mask).all(|(&s, &m)| m || s == c.c0()));
    }
}

/// Quarter turn about the grid center: cell `(i, j)` moves to `(n-1-j, i)`.
fn rotate(c: &SoundSpeedMap) -> SoundSpeedMap {
    let n = c.grid().nx();
    let f = RealField::from_fn(*c.grid(), |i, j, _| c.field().get(j, n - 1 - i)).unwrap();
    SoundSpeedMap::new(f, c.c0(), None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Turning phantom and ring together relabels transducers by a quarter
    /// of the ring.
    #[test]
    fn quarter_turn_permutes_measurements(kind in kind_strategy(), seed in 0u64..1000) {
        let grid = grid_at_ppw(32, 8.0);
        let mut spec = PhantomSpec::new(kind, grid, seed);
        spec.organ_radius_fraction = 0.55;
        let c = SoundSpeedMap::new(gen_phantom(&spec).unwrap().field().clone(), 1500.0, None).unwrap();
        let ring = ring_for(&grid, 12, 0.9);
        let opts = SolverOptions::with_tol(1e-10);
        let y = simulate_observation(&c, &ring, &all_sources(&ring), omega(), &opts).unwrap();
        let yr = simulate_observation(&rotate(&c), &ring, &all_sources(&ring), omega(), &opts).unwrap();
        let peak = y.data.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let q = ring.count / 4;
        for k in 0..ring.count {
            for j in 0..ring.count {
                let d = (y.get(k, j) - yr.get((k + q) % ring.count, (j + q) % ring.count)).norm();
                prop_assert!(d <= 1e-9 * peak, "entry ({k},{j}) differs by {d:e}");
            }
        }
    }

    /// Reordering the sources changes only the summation order.
    #[test]
    fn gradient_independent_of_source_order(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), seed in 0u64..1000) {
        let (problem, model) = small_problem(seed, Regularization::default());
        let y = &problem.observed;
        let rows: Vec<Complex64> = perm.iter().flat_map(|&r| y.row(r).to_vec()).collect();
        let plan = SourcePlan::new(perm.iter().map(|&r| y.plan.source_indices[r]).collect(), y.plan.amplitude, &y.ring).unwrap();
        let mut shuffled = MeasurementSet::new(rows, y.ring, plan, y.omega).unwrap();
        shuffled.row_converged = perm.iter().map(|&r| y.row_converged[r]).collect();
        let other = FwiProblem { observed: shuffled, ..problem.clone() };
        let (g1, l1) = fwi::gradient(&model, &problem).unwrap();
        let (g2, l2) = fwi::gradient(&model, &other).unwrap();
        let norm = g1.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = g1.values().iter().zip(g2.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-10 * norm, "{diff:e} vs {norm:e}");
        prop_assert!((l1 - l2).abs() <= 1e-10 * l1);
    }

    /// Central difference along a random direction agrees with the adjoint
    /// gradient, with and without a penalty.
    #[test]
    fn directional_derivative_matches(
        seed in 0u64..1000,
        coeffs in prop::collection::vec(-1.0..1.0f64, 32 * 32),
        kind in prop_oneof![Just(PenaltyKind::None), Just(PenaltyKind::Tikhonov), Just(PenaltyKind::Gradient), Just(PenaltyKind::TotalVariation)],
    ) {
        let reg = Regularization { kind, weight: 1e-6, ..Regularization::default() };
        let (problem, model) = small_problem(seed, reg);
        let d: Vec<f64> = coeffs.iter().zip(&problem.inversion_mask).map(|(c, &m)| if m { *c } else { 0.0 }).collect();
        let t = 0.05;
        let at = |s: f64| {
            let v: Vec<f64> = model.speeds().iter().zip(&d).map(|(c, d)| c + s * d).collect();
            fwi::loss(&model.with_speeds(v).unwrap(), &problem).unwrap()
        };
        let fd = (at(t) - at(-t)) / (2.0 * t);
        let (g, _) = fwi::gradient(&model, &problem).unwrap();
        let analytic: f64 = g.values().iter().zip(&d).map(|(g, d)| g * d).sum();
        prop_assert!((fd - analytic).abs() < 1e-3 * analytic.abs(), "fd {fd:e} vs adjoint {analytic:e}");
    }
}

/// 32² inclusion phantom seen by 6 transducers; the model is a different
/// random phantom without a region-of-interest mask.
fn small_problem(seed: u64, reg: Regularization) -> (FwiProblem, SoundSpeedMap) {
    let grid = grid_at_ppw(32, 8.0);
    let ring = ring_for(&grid, 6, 0.9);
    let tight = SolverOptions { tol: 1e-12, max_iter: 20_000, ..SolverOptions::default() };
    let truth = inclusion_phantom(grid, 2, 0.03, 0.35, seed);
    let y = simulate_observation(&truth, &ring, &all_sources(&ring), omega(), &tight).unwrap();
    let model = SoundSpeedMap::new(inclusion_phantom(grid, 1, 0.01, 0.4, seed + 1).field().clone(), C0, None).unwrap();
    let mask = FwiProblem::disk_mask(&grid, &ring, 2.0 * grid.dx());
    let options = FwiOptions { regularization: reg, ..FwiOptions::default() };
    let c_init = SoundSpeedMap::homogeneous(grid, C0).unwrap();
    (FwiProblem::new(y, c_init, mask, tight, options).unwrap(), model)
}
