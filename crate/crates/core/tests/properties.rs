use jkoflow::energy::{potential, EnergyFunctional};
use jkoflow::entropycheck::{entropy_residual, SpaceTimeData, TestFunction};
use jkoflow::jko::{jko_step, step_objective, JkoConfig};
use jkoflow::measure1d::{wasserstein2, Grid, GridDensity, Quantile, Tails};
use jkoflow::profiles::{Barenblatt, InitialDatum};
use jkoflow::refsolver::{FvConfig, FvSolver};
use jkoflow::transform::{b_from_a, ConvectionCoefficient, TransformedCoefficients};
use proptest::prelude::*;

/// Monotone quantile built from a start point and positive increments.
fn quantile(start: f64, incs: &[f64]) -> Quantile {
    let mut v = Vec::with_capacity(incs.len() + 1);
    v.push(start);
    for d in incs {
        v.push(v[v.len() - 1] + d);
    }
    Quantile::new(v).unwrap()
}

fn increments(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..0.5f64, n)
}

fn triple() -> impl Strategy<Value = (Quantile, Quantile, Quantile)> {
    (2usize..40).prop_flat_map(|n| {
        (
            (-2.0..2.0f64, increments(n - 1)),
            (-2.0..2.0f64, increments(n - 1)),
            (-2.0..2.0f64, increments(n - 1)),
        )
            .prop_map(|(a, b, c)| (quantile(a.0, &a.1), quantile(b.0, &b.1), quantile(c.0, &c.1)))
    })
}

/// Smooth, compactly supported density on `[-1, 1]`.
fn bumps() -> impl Strategy<Value = InitialDatum> {
    (-0.6..-0.1f64, 0.1..0.6f64, 0.15..0.4f64, 0.2..1.0f64, 0.2..1.0f64).prop_map(|(c0, c1, r, w0, w1)| {
        InitialDatum::DoubleBump {
            centers: (c0, c1),
            radius: r,
            weights: (w0, w1),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn w2_is_a_metric((p, q, r) in triple()) {
        let pq = wasserstein2(&p, &q).unwrap();
        prop_assert_eq!(pq, wasserstein2(&q, &p).unwrap());
        prop_assert_eq!(wasserstein2(&p, &p).unwrap(), 0.0);
        let pr = wasserstein2(&p, &r).unwrap();
        let rq = wasserstein2(&r, &q).unwrap();
        prop_assert!(pq <= pr + rq + 1e-12, "{pq} > {pr} + {rq}");
    }
}

proptest! {
    #[test]
    fn w2_of_a_shift_is_its_length(start in -5.0..5.0f64, incs in increments(30), c in -3.0..3.0f64) {
        let q = quantile(start, &incs);
        let d = wasserstein2(&q.shift(c), &q).unwrap();
        prop_assert!((d - c.abs()).abs() <= 1e-14 * (1.0 + c.abs()), "{d} vs {c}");
    }

    #[test]
    fn reconstruction_is_a_probability_density(
        start in -1.0..-0.5f64,
        incs in prop::collection::vec(1e-2..0.05f64, 5..40),
        p in prop::option::of(0.0..4.0f64),
    ) {
        let q = quantile(start, &incs);
        let tails = p.map_or(Tails::Flat, Tails::Front);
        let grid = Grid::new(-4.0, 1e-2, 800).unwrap();
        let r = q.to_density_with(grid, tails).unwrap();
        prop_assert!((r.density.mass() - 1.0).abs() < 1e-12);
        prop_assert!(r.density.values().iter().all(|&v| v >= 0.0));
        prop_assert_eq!(r.overflow_mass, 0.0);
        // the reconstruction lives on the advertised support
        let (lo, hi) = q.support_with(tails);
        for (i, &v) in r.density.values().iter().enumerate() {
            if grid.node(i + 1) < lo || grid.node(i) > hi {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn potential_is_linear_in_the_weight(m in 1.2..4.0f64, datum in bumps(), s in 0.5..3.0f64) {
        let a = move |x: f64| 1.0 + 0.5 * (s * x).sin().powi(2);
        let grid = Grid::new(-1.5, 1e-2, 300).unwrap();
        let rho = datum.density(grid).unwrap();
        let ef1 = EnergyFunctional::from_fn(m, -2.0, 2.0, 1e-2, a).unwrap();
        let ef2 = EnergyFunctional::from_fn(m, -2.0, 2.0, 1e-2, move |x| 2.0 * a(x)).unwrap();
        prop_assert_eq!(potential(&rho, &ef2), 2.0 * potential(&rho, &ef1));
    }

    #[test]
    fn spreading_lowers_the_potential(m in 1.2..4.0f64, l in 0.2..2.0f64, grow in 1.01..2.0f64) {
        let ef = EnergyFunctional::constant(m, 1.7).unwrap();
        let uniform = |len: f64| {
            let grid = Grid::new(0.0, len / 200.0, 200).unwrap();
            potential(&GridDensity::from_fn(grid, |_| 1.0).unwrap(), &ef)
        };
        let (f1, f2) = (uniform(l), uniform(l * grow));
        prop_assert!((f1 - 1.7 * l.powf(1.0 - m) / m).abs() < 1e-12 * f1);
        prop_assert!(f2 < f1);
    }

    #[test]
    fn fv_conserves_mass_and_positivity(
        amplitude in -1.0..1.0f64,
        width in 0.3..1.5f64,
        m in 1.5..3.0f64,
        datum in bumps(),
    ) {
        let b = ConvectionCoefficient::gaussian(amplitude, width).unwrap();
        let grid = Grid::covering(-3.0, 3.0, 2e-2).unwrap();
        let u0 = datum.density(grid).unwrap();
        let solver = FvSolver::new(FvConfig::new(grid, 0.05), m, &b).unwrap();
        let dt = solver.stable_dt(u0.sup());
        let mut u = u0.values().to_vec();
        for _ in 0..20 {
            let next = solver.step_values(&u, dt).unwrap();
            let (m0, m1): (f64, f64) = (u.iter().sum(), next.iter().sum());
            prop_assert!(((m1 - m0) * grid.dx).abs() < 1e-12);
            prop_assert!(next.iter().all(|&v| v >= 0.0));
            u = next;
        }
    }

    #[test]
    fn fv_sup_does_not_grow_without_convection(m in 1.5..3.0f64, datum in bumps()) {
        let grid = Grid::covering(-3.0, 3.0, 2e-2).unwrap();
        let u0 = datum.density(grid).unwrap();
        let solver = FvSolver::new(FvConfig::new(grid, 0.05), m, &ConvectionCoefficient::zero()).unwrap();
        let dt = solver.stable_dt(u0.sup());
        let mut u = u0;
        for _ in 0..20 {
            let next = solver.step(&u, dt).unwrap();
            prop_assert!(next.sup() <= u.sup() * (1.0 + 1e-14));
            u = next;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trips(amplitude in -0.8..0.8f64, width in 0.4..1.5f64, m in 1.5..3.0f64) {
        let b = ConvectionCoefficient::gaussian(amplitude, width).unwrap();
        let tc = TransformedCoefficients::build(&b, m, 1.0, (-3.0, 3.0), 1e-3).unwrap();
        let back = b_from_a(&tc.a, m).unwrap();
        let err = (-250..=250)
            .map(|i| 0.01 * i as f64)
            .map(|x| (back.eval(x) - b.eval(tc.t(x))).abs())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-4, "sup error {err}");
        prop_assert!(tc.a_lower > 0.0);
    }

    #[test]
    fn rescaling_keeps_mass_and_sign(
        amplitude in -0.8..0.8f64,
        width in 0.4..1.5f64,
        m in 1.5..3.0f64,
        datum in bumps(),
    ) {
        let b = ConvectionCoefficient::gaussian(amplitude, width).unwrap();
        let tc = TransformedCoefficients::build(&b, m, 1.0, (-2.5, 2.5), 1e-3).unwrap();
        let y_grid = Grid::covering(-1.5, 1.5, 5e-3).unwrap();
        let x_grid = Grid::covering(-2.4, 2.4, 5e-3).unwrap();
        let u = datum.density(y_grid).unwrap();
        let rho = tc.rescale(&u, x_grid).unwrap();
        prop_assert!((rho.mass() - 1.0).abs() < 1e-8);
        prop_assert!(rho.values().iter().all(|&v| v >= 0.0));
        let back = tc.inverse_rescale(&rho, y_grid).unwrap();
        prop_assert!(back.l1_distance(&u).unwrap() < 2e-2);
        // the quantile route agrees with the grid route
        let n = 200;
        let via_q = tc.rescale_quantile(&u.to_quantile(n).unwrap()).unwrap();
        prop_assert!(via_q.wasserstein2(&rho.to_quantile(n).unwrap()).unwrap() < 1e-2);
    }

    #[test]
    fn a_jko_step_never_raises_the_objective(m in 1.5..3.0f64, datum in bumps(), tau in 1e-4..1e-2f64) {
        let ef = EnergyFunctional::porous_medium(m).unwrap();
        let cfg = JkoConfig { tau, n_quantiles: 60, ..JkoConfig::default() };
        let g0 = datum.quantile(60).unwrap();
        let (g1, report) = jko_step(&g0, &cfg, &ef).unwrap();
        prop_assert!(report.grad_norm <= cfg.inner_tol);
        let before = step_objective(&g0, &g0, tau, &ef);
        let after = step_objective(&g1, &g0, tau, &ef);
        prop_assert!(after <= before, "{after} > {before}");
        // mass centre is fixed without a drift
        prop_assert!((g1.mean() - g0.mean()).abs() < 1e-9);
    }

    #[test]
    fn even_data_stay_even(m in 1.5..3.0f64, r in 0.3..0.8f64) {
        let ef = EnergyFunctional::porous_medium(m).unwrap();
        let datum = InitialDatum::DoubleBump { centers: (-0.5, 0.5), radius: r, weights: (1.0, 1.0) };
        let cfg = JkoConfig { tau: 2e-3, n_quantiles: 80, t_end: 2e-2, ..JkoConfig::default() };
        let traj = jkoflow::jko::run(datum.quantile(80).unwrap(), &ef, &cfg, 0.0).unwrap();
        for g in &traj.states {
            let v = g.values();
            let asym = (0..v.len()).map(|i| (v[i] + v[v.len() - 1 - i]).abs()).fold(0.0, f64::max);
            prop_assert!(asym < 1e-8, "asymmetry {asym}");
        }
    }

    #[test]
    fn dissipation_is_nonnegative(k in 0.0..1.2f64, tc in 0.2..0.4f64, yc in -1.0..1.0f64, yr in 0.2..1.0f64) {
        let b = Barenblatt::new(2.0).unwrap();
        let grid = Grid::new(-3.0, 1e-2, 600).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| 0.1 + 0.01 * i as f64).collect();
        let frames: Vec<GridDensity> = times.iter().map(|&t| b.density(grid, t).unwrap()).collect();
        let data = SpaceTimeData::new(times, &frames).unwrap();
        let tf = TestFunction::new(0, tc, 0.08, yc, yr).unwrap();
        let e = entropy_residual(&data, k, &tf, &ConvectionCoefficient::zero(), 2.0, &data.default_eps_sequence(k, 2.0)).unwrap();
        prop_assert!(e.dissipation.iter().all(|d| d.1 >= 0.0));
        prop_assert_eq!(e.residual, e.lhs - e.rhs_flux - e.dissipation_estimate);
    }
}
