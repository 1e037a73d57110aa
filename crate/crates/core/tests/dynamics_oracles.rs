use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqg_core::coupling::{control_shift, rhs_nudged};
use sqg_core::dynamics::{advect, rhs_sqg, CutoffSpec, HistoryBuffer, PhysicalParams};
use sqg_core::integrate::{simulate, InitialCondition, Integrator, Scheme, SimConfig};
use sqg_core::noise::{build_additive_noise, check_hypothesis_E2, AdditiveSpec, E3Spec, NoiseSpec};
use sqg_core::spectral::{
    apply_lambda_s, random_field, riesz_perp, sobolev_norm, Grid, GridSpec, Level, RandomFieldSpec,
    SpectralField,
};
use sqg_core::verify::tangent_check;
use sqg_core::Error;

fn grid(m: usize) -> Grid {
    Grid::new(GridSpec::new(m)).unwrap()
}

fn field(g: &Grid, seed: u64, l2: f64) -> SpectralField {
    let spec = RandomFieldSpec {
        slope: 1.5,
        band: None,
        l2_norm: Some(l2),
    };
    random_field(g, &spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn params() -> PhysicalParams {
    PhysicalParams::new(0.8, 0.75).unwrap()
}

fn e3() -> NoiseSpec {
    NoiseSpec::E3(E3Spec {
        s_reg: 2.0,
        q0_scale: 1.0,
        smoothing_margin: None,
    })
}

fn random_ic(seed: u64, l2: f64) -> InitialCondition {
    InitialCondition::Random {
        seed,
        slope: 2.0,
        band: Some(5),
        l2_norm: Some(l2),
    }
}

fn deterministic(m: usize, dt: f64, t_end: f64, scheme: Scheme) -> SimConfig {
    let mut c = SimConfig::new(params(), GridSpec::new(m), dt, t_end);
    c.scheme = scheme;
    c.initial_condition = random_ic(4, 2.0);
    c.diagnostic_stride = c.n_steps();
    c
}

fn final_theta(c: &SimConfig) -> SpectralField {
    simulate(c).unwrap().final_state.theta()
}

fn norm(f: &SpectralField) -> f64 {
    f.l2_sq().sqrt()
}

#[test]
fn rho_equation_decomposes() {
    let g = grid(16);
    let p = params();
    let (k0, n) = (3.0, 2);
    for seed in 0..20 {
        let th = field(&g, seed, 1.0);
        let tt = field(&g, seed + 100, 1.5);
        let rho = &tt - &th;
        let lhs = &rhs_nudged(&tt, &th, &p, k0, n).unwrap() - &rhs_sqg(&th, &p);
        let (ur1, ur2) = riesz_perp(&rho);
        let (ut1, ut2) = riesz_perp(&th);
        let mut rhs = p.dissipation(&rho);
        rhs += &advect(&ur1, &ur2, &tt);
        rhs += &advect(&ut1, &ut2, &rho);
        rhs.axpy(-k0, &rho.project_ball(n));
        assert!((&lhs - &rhs).max_abs_coeff() <= 1e-11 * lhs.max_abs_coeff());

        // ⟨u_θ̃·∇ρ, ρ⟩ drops out of the energy identity
        let (ur1, ur2) = riesz_perp(&rho);
        let want = -p.kappa * sobolev_norm(&rho, p.alpha).powi(2) + advect(&ur1, &ur2, &th).inner(&rho)
            - k0 * rho.project_ball(n).l2_sq();
        let got = lhs.inner(&rho);
        assert!((got - want).abs() <= 1e-9 * norm(&lhs) * norm(&rho));
    }
}

#[test]
fn control_shift_recovers_nudging() {
    let g = grid(16);
    let p = params();
    let noise = build_additive_noise(
        &p,
        &AdditiveSpec::E3(E3Spec {
            s_reg: 2.0,
            q0_scale: 1.0,
            smoothing_margin: None,
        }),
        &g,
    )
    .unwrap();
    for n in [1, 2, 4] {
        let gm = check_hypothesis_E2(&noise, n).unwrap();
        let th = field(&g, 1, 1.0);
        let tt = field(&g, 2, 1.0);
        let (h, hsq) = control_shift(&th, &tt, 2.5, &gm).unwrap();
        let want = (&tt - &th).project_ball(n).scale(-2.5);
        assert!((&noise.apply_field(&h) - &want).max_abs_coeff() <= 1e-13 * want.max_abs_coeff());
        assert!((hsq - h.l2_sq()).abs() == 0.0);
        assert!(hsq <= (gm.norm * 2.5).powi(2) * want.l2_sq() / 6.25 * 1.0000001);
    }
}

#[test]
fn cutoff_is_a_unit_slope_ramp() {
    let c = CutoffSpec::new(2.0, 1.5).unwrap();
    assert_eq!(c.chi(0.0), 1.0);
    assert_eq!(c.chi(2.0), 1.0);
    assert_eq!(c.chi(2.25), 0.75);
    assert_eq!(c.chi(3.0), 0.0);
    assert_eq!(c.chi(10.0), 0.0);
    assert_eq!(c.chi_prime(2.5), -1.0);
    assert_eq!(c.chi_prime(1.0), 0.0);
    assert_eq!(c.chi_prime(4.0), 0.0);
    assert!(CutoffSpec::new(0.0, 1.5).is_err());
}

#[test]
fn tangent_matches_central_differences() {
    for r in tangent_check(16, 6, 0.2, 0.01, 3).unwrap() {
        assert!(r.pass, "{}: {} > {}", r.id, r.observed, r.bound);
    }
}

#[test]
fn history_average_converges_at_first_order() {
    let g = grid(8);
    let a = SpectralField::cos_mode(&g, 1, 2, 1.0);
    let b = SpectralField::sin_mode(&g, 3, 0, 1.0);
    let theta = |t: f64| {
        let mut f = a.scale(t.sin());
        f.axpy(t * t, &b);
        f
    };
    let t: f64 = 1.0;
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&delta| {
            let mut h = HistoryBuffer::new(delta).unwrap();
            let dt = 1e-4;
            for i in 0..=(t / dt).round() as usize {
                let s = i as f64 * dt;
                h.push(s, theta(s));
            }
            norm(&(&h.delayed_average(t, &a).unwrap() - &theta(t)))
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn history_rejects_missing_snapshots() {
    let g = grid(8);
    let z = SpectralField::zeros(&g);
    let mut h = HistoryBuffer::new(0.1).unwrap();
    assert!(matches!(
        h.field_at(0.5, &z),
        Err(Error::InsufficientHistory { .. })
    ));
    h.push(0.3, z.clone());
    h.push(0.4, z.clone());
    assert!(matches!(
        h.delayed_average(0.6, &z),
        Err(Error::InsufficientHistory { .. })
    ));
    assert!(h.delayed_average(0.5, &z).is_ok());
    // before t = 0 the past is zero
    assert_eq!(h.field_at(-1.0, &z).unwrap(), z);
    assert!(HistoryBuffer::new(0.0).is_err());
}

#[test]
fn mollified_scheme_converges_as_delta_shrinks() {
    let base = deterministic(16, 0.025 / 16.0, 1.0, Scheme::DeterministicRk4);
    let reference = final_theta(&base);
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&d| {
            let mut c = base.clone();
            c.delta_mollify = Some(d);
            norm(&(&final_theta(&c) - &reference)) / norm(&reference)
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..2.4).contains(&ratio), "errors {errs:?}");
    }
}

#[test]
fn rk4_is_fourth_order_and_exp_euler_first() {
    let reference = final_theta(&deterministic(16, 0.00125, 1.0, Scheme::DeterministicRk4));
    let err = |dt: f64, s: Scheme| norm(&(&final_theta(&deterministic(16, dt, 1.0, s)) - &reference));
    let r4 = err(0.04, Scheme::DeterministicRk4) / err(0.02, Scheme::DeterministicRk4);
    assert!((12.0..20.0).contains(&r4), "rk4 halving ratio {r4}");
    let r1 = err(0.02, Scheme::ExpEulerAdditive) / err(0.01, Scheme::ExpEulerAdditive);
    assert!((1.7..2.3).contains(&r1), "exp-euler halving ratio {r1}");
}

#[test]
fn deterministic_l2_norm_never_grows() {
    for scheme in [
        Scheme::ExpEulerAdditive,
        Scheme::EulerMaruyama,
        Scheme::DeterministicRk4,
    ] {
        let mut c = deterministic(16, 0.01, 2.0, scheme);
        c.diagnostic_stride = 1;
        let rows = simulate(&c).unwrap().record.rows;
        assert_eq!(rows.len(), 201);
        for w in rows.windows(2) {
            assert!(
                w[1].l2 <= w[0].l2 * (1.0 + 1e-12),
                "{scheme:?}: {} -> {} at t = {}",
                w[0].l2,
                w[1].l2,
                w[1].t
            );
        }
    }
}

#[test]
fn deterministic_energy_law_is_first_order() {
    let defect = |dt: f64| {
        let c = deterministic(16, dt, 1.0, Scheme::ExpEulerAdditive);
        let rec = simulate(&c).unwrap().record;
        let (first, last) = (rec.rows[0], *rec.last().unwrap());
        (last.l2 * last.l2 + 2.0 * c.params.kappa * last.diss_int - first.l2 * first.l2).abs()
    };
    let ratio = defect(0.02) / defect(0.01);
    assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn mean_is_conserved() {
    let mut c = SimConfig::new(params(), GridSpec::new(16), 0.01, 1.0);
    c.noise = Some(e3());
    c.initial_condition = random_ic(1, 1.0);
    let th = final_theta(&c);
    assert_eq!(th.mean_coeff().norm(), 0.0);
    let phys = th.to_physical(Level::Quadrature);
    let mean = phys.iter().sum::<f64>() / phys.len() as f64;
    assert!(mean.abs() < 1e-14 * phys.iter().fold(0.0f64, |m, x| m.max(x.abs())));
}

#[test]
fn same_noise_gives_the_same_path_and_lipschitz_dependence() {
    let mut c = SimConfig::new(params(), GridSpec::new(16), 0.01, 1.0);
    c.noise = Some(e3());
    c.seed = 21;
    c.initial_condition = random_ic(1, 1.0);
    let integ = Integrator::new(&c).unwrap();
    let th0 = integ.initial_state().unwrap().theta();
    let h = field(integ.grid(), 5, 1.0);
    let run = |eps: f64| {
        let mut s = integ.state_from(&th0 + &h.scale(eps));
        integ.simulate_from(&mut s, 0).unwrap();
        s.theta()
    };
    let base = run(0.0);
    assert_eq!(base, run(0.0));
    let d = |eps: f64| apply_lambda_s(&(&run(eps) - &base), -0.5).l2_sq().sqrt();
    let d0 = apply_lambda_s(&h, -0.5).l2_sq().sqrt();
    let (d1, d2) = (d(1e-6), d(2e-6));
    assert!((d2 / d1 - 2.0).abs() < 1e-3);
    // e^{Ct} growth with a moderate C
    let c_growth = (d1 / (1e-6 * d0)).ln();
    assert!(c_growth < 5.0, "growth exponent {c_growth}");
}

#[test]
fn blow_up_guard_returns_partial_record() {
    let mut c = deterministic(16, 0.01, 1.0, Scheme::ExpEulerAdditive);
    c.h1_ceiling = 1e-3;
    c.diagnostic_stride = 1;
    let err = simulate(&c).unwrap_err();
    assert!(matches!(err.error, Error::BlowUp { .. }));
    assert_eq!(err.record.rows.len(), 1);
}

#[test]
fn diagnostic_rows_follow_the_stride() {
    for stride in [1, 3, 7, 100] {
        let mut c = deterministic(8, 0.01, 1.0, Scheme::ExpEulerAdditive);
        c.diagnostic_stride = stride;
        let rows = simulate(&c).unwrap().record.rows;
        assert_eq!(rows.len() as u64, 100 / stride + 1);
        assert_eq!(rows[1].t, (stride as f64 * 0.01).min(1.0).max(rows[1].t));
    }
}

#[test]
fn config_rejects_inconsistent_schemes() {
    let mut c = deterministic(8, 0.01, 1.0, Scheme::ExpEulerAdditive);
    c.delta_mollify = Some(0.1);
    assert!(c.validate().is_err());
    c.scheme = Scheme::EulerMaruyama;
    c.dt = 0.02;
    assert!(c.validate().is_err(), "dt > delta/8");
    c.dt = 0.0125;
    assert!(c.validate().is_ok());
    c.delta_mollify = None;
    c.mollify_noise = true;
    assert!(c.validate().is_err());
    let mut c = deterministic(8, 0.01, 1.0, Scheme::DeterministicRk4);
    c.noise = Some(e3());
    assert!(c.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nonlinearity_is_energy_neutral(seed in any::<u64>(), amp in 0.01f64..100.0) {
        let g = grid(16);
        let th = field(&g, seed, amp);
        let p = params();
        let r = rhs_sqg(&th, &p);
        let diss = p.kappa * sobolev_norm(&th, p.alpha).powi(2);
        prop_assert!((r.inner(&th) + diss).abs() <= 1e-9 * norm(&r) * norm(&th));
    }

    #[test]
    fn exp_euler_step_is_deterministic_per_key(seed in any::<u64>(), traj in 0u64..4) {
        let mut c = SimConfig::new(params(), GridSpec::new(8), 0.01, 0.05);
        c.noise = Some(e3());
        c.seed = seed;
        c.initial_condition = random_ic(2, 1.0);
        let integ = Integrator::new(&c).unwrap();
        let a = integ.simulate_traj(traj).unwrap().final_state.theta();
        let b = integ.simulate_traj(traj).unwrap().final_state.theta();
        prop_assert_eq!(a, b);
    }
}
