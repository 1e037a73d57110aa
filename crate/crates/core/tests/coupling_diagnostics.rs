use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sqg_core::coupling::{
    delta0_constant, gamma_estimate, lambda_next, p_critical, CoupledConfig, Coupler, SyncRecord, SyncRow,
};
use sqg_core::diagnostics::{
    compare_decay, energy_balance_check, fit_decay, positivity_functional, time_average, DecayModel,
};
use sqg_core::dynamics::PhysicalParams;
use sqg_core::integrate::{DiagnosticsRecord, DiagnosticsRow, InitialCondition, SimConfig};
use sqg_core::noise::{E3Spec, NoiseSpec};
use sqg_core::spectral::{lp_norm, EmpiricalConstants, Grid, GridSpec, SpectralField};
use sqg_core::Error;

fn grid(m: usize) -> Grid {
    Grid::new(GridSpec::new(m)).unwrap()
}

fn constants(c_sobolev: f64, c_riesz: f64) -> EmpiricalConstants {
    EmpiricalConstants {
        c_sobolev,
        c_riesz,
        p: 7.0,
        q: 2.0,
        modes_per_dim: 16,
        corpus_size: 0,
        corpus_seed: 0,
    }
}

#[test]
fn critical_exponent_values() {
    assert!((p_critical(0.75) - 7.0).abs() < 1e-12);
    assert!((p_critical(0.6) - 16.0).abs() < 1e-12);
}

#[test]
fn next_eigenvalue_is_the_next_shell() {
    let g = grid(32);
    let p = PhysicalParams::new(1.0, 0.75).unwrap();
    // shells |k|^2 = 1, 2, 4, 5, 8, 9
    for (n, shell) in [(1, 2.0), (2, 5.0), (3, 10.0)] {
        let want = p.eigenvalue(f64::sqrt(shell));
        assert!((lambda_next(&g, &p, n).unwrap() - want).abs() < 1e-13);
    }
    let p2 = PhysicalParams::new(0.3, 0.6).unwrap();
    assert!((lambda_next(&g, &p2, 2).unwrap() - 0.3 * 5f64.powf(0.6)).abs() < 1e-13);
}

#[test]
fn delta0_matches_log_space_evaluation() {
    for (kappa, alpha, e0, cs, cr) in [
        (1.0, 0.75, 2.0, 0.5, 1.3),
        (0.2, 0.6, 0.01, 0.8, 1.1),
        (3.0, 0.9, 40.0, 0.3, 2.0),
    ] {
        let params = PhysicalParams::new(kappa, alpha).unwrap();
        let p: f64 = (alpha + 1.0) / (alpha - 0.5);
        let ln_term = 0.5 * p * 2f64.ln()
            + p * f64::ln(cr)
            + 2.0 * p * f64::ln(cs)
            + (1.0 - p) * f64::ln(kappa)
            + 0.5 * p * f64::ln(p * (p - 1.0))
            - 0.5 * p * f64::ln(kappa)
            + 0.5 * p * f64::ln(e0);
        let want = 10.0 - ln_term.exp();
        let got = delta0_constant(&params, e0, 10.0, &constants(cs, cr));
        assert!(
            (got - want).abs() <= 1e-12 * want.abs().max(ln_term.exp()),
            "{got} vs {want}"
        );
    }
}

#[test]
fn gamma_of_constant_norm_is_closed_form() {
    let c = constants(0.4, 1.5);
    let rows: Vec<SyncRow> = (0..11)
        .map(|i| SyncRow {
            t: i as f64 * 0.5,
            d_hminushalf: 1.0,
            rho_l2: 1.0,
            theta_lp: 0.9,
            h_sq_cum: 0.0,
            gamma_hat: f64::NAN,
            theta_tilde_l2: 1.0,
        })
        .collect();
    let rec = SyncRecord {
        p: 7.0,
        k0: 1.0,
        n: 2,
        lambda_next: 3.0,
        initial_high_norms: (1.0, 1.0),
        high_norm_exponent: 72.0,
        rows,
    };
    let kappa: f64 = 0.5;
    let want = -3.0 + 2.0 * (0.4f64 * 1.5).powf(7.0) * (kappa / 2.0).powf(-6.0) * 0.9f64.powf(7.0);
    for g in gamma_estimate(&rec, kappa, &c) {
        assert!((g - want).abs() < 1e-12 * want.abs());
    }
}

fn coupled(k0: Option<f64>) -> CoupledConfig {
    let params = PhysicalParams::new(1.0, 0.75).unwrap();
    let mut base = SimConfig::new(params, GridSpec::new(16), 0.005, 4.0);
    base.noise = Some(NoiseSpec::E3(E3Spec {
        s_reg: 2.0,
        q0_scale: 1.0,
        smoothing_margin: None,
    }));
    base.seed = 3;
    base.diagnostic_stride = 20;
    base.lp_exponent = 7.0;
    base.initial_condition = InitialCondition::Random {
        seed: 1,
        slope: 2.0,
        band: Some(4),
        l2_norm: Some(1.0),
    };
    CoupledConfig {
        base,
        k0,
        n: 2,
        theta0_tilde: InitialCondition::Random {
            seed: 2,
            slope: 2.0,
            band: Some(4),
            l2_norm: Some(1.0),
        },
        pairs: 1,
    }
}

#[test]
fn shared_noise_cancels_in_the_difference() {
    let cfg = coupled(None);
    let c = Coupler::new(&cfg, constants(0.5, 1.2)).unwrap();
    let mut st = c.initial_state().unwrap();
    for _ in 0..50 {
        c.step(&mut st, 0).unwrap();
    }
    assert_eq!(st.rho(), &st.v_tilde - &st.v);
    assert!(st.h_sq_cum > 0.0);
}

#[test]
fn nudged_pair_synchronizes_and_records_rows() {
    let cfg = coupled(None);
    let c = Coupler::new(&cfg, constants(0.5, 1.2)).unwrap();
    assert!((c.k0() - 2.0 * c.lambda_next()).abs() < 1e-12);
    let rec = c.run(0).unwrap();
    assert_eq!(rec.rows.len(), 800 / 20 + 1);
    let d = rec.distances();
    assert!(d.last().unwrap() / d[0] < 1e-4);
    assert!(rec.rows.iter().all(|r| r.gamma_hat.is_finite()));
    // the control field grows monotonically in its cumulative cost
    assert!(rec.rows.windows(2).all(|w| w[1].h_sq_cum >= w[0].h_sq_cum));
}

#[test]
fn coupled_config_validation() {
    let mut cfg = coupled(Some(-1.0));
    assert!(cfg.validate().is_err());
    cfg.k0 = Some(1.0);
    cfg.pairs = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn positivity_of_a_single_mode_is_closed_form() {
    // Aθ = κ|k|^{2α}θ for a single mode, so the functional is
    // κ(|k|^{2α} - 2/p)‖θ‖^p_p with λ_1 = κ
    let g = grid(16);
    let params = PhysicalParams::new(0.7, 0.6).unwrap();
    for (k1, k2) in [(1, 0), (2, 1), (0, 3)] {
        let f = SpectralField::cos_mode(&g, k1, k2, 1.3);
        let k2a = ((k1 * k1 + k2 * k2) as f64).powf(0.6);
        for p in [3.0, 4.0, 6.0] {
            let want = 0.7 * (k2a - 2.0 / p) * lp_norm(&f, p).powf(p);
            let got = positivity_functional(&f, p, &params);
            assert!((got - want).abs() < 1e-10 * want.abs(), "{got} vs {want}");
        }
    }
}

#[test]
fn batch_means_cover_a_known_mean() {
    // AR(1) around 2.0 with unit-ish correlation time
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut covered = 0;
    for rep in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(rep);
        let mut x = 2.0;
        let series: Vec<(f64, f64)> = (0..20_000)
            .map(|i| {
                x = 2.0 + 0.9 * (x - 2.0) + 0.3 * normal.sample(&mut rng);
                (i as f64 * 0.1, x)
            })
            .collect();
        let avg = time_average(&series, 10.0, 20).unwrap();
        if (avg.mean - 2.0).abs() <= 3.0 * avg.stderr {
            covered += 1;
        }
    }
    assert!(covered >= 93, "covered {covered}/100");
}

#[test]
fn decay_fits_recover_rates_and_models() {
    let normal = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let exp: Vec<(f64, f64)> = (1..200)
        .map(|i| {
            let t = i as f64 * 0.05;
            (t, 3.0 * (-1.7 * t).exp() * (1.0 + normal.sample(&mut rng)))
        })
        .collect();
    let f = fit_decay(&exp, DecayModel::Exponential).unwrap();
    assert!((f.rate - 1.7).abs() < 0.01);
    assert!(f.rate_ci.0 <= 1.7 && 1.7 <= f.rate_ci.1);
    let poly: Vec<(f64, f64)> = (1..200)
        .map(|i| (i as f64 * 0.05, 2.0 * (1.0 + i as f64 * 0.05).powf(-1.5)))
        .collect();
    let f = fit_decay(&poly, DecayModel::Polynomial).unwrap();
    assert!((f.rate - 1.5).abs() < 1e-10);
    assert!(compare_decay(&exp).unwrap().score > 0.0);
    assert!(compare_decay(&poly).unwrap().score < 0.0);
    assert!(matches!(
        fit_decay(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)], DecayModel::Exponential),
        Err(Error::NonPositiveSeries { index: 1, .. })
    ));
}

fn row(t: f64, l2: f64, diss_int: f64) -> DiagnosticsRow {
    DiagnosticsRow {
        t,
        l2,
        h_alpha: 0.0,
        h1: 0.0,
        lp: 0.0,
        tail_fraction: 0.0,
        diss_int,
    }
}

#[test]
fn energy_balance_on_synthetic_records() {
    let params = PhysicalParams::new(0.5, 0.75).unwrap();
    // |θ(1)|^2 + 2κ∫ = 1 + 1·trace exactly when l2^2 + diss = 3
    let recs: Vec<DiagnosticsRecord> = (0..64)
        .map(|i| {
            let jitter: f64 = if i % 2 == 0 { 0.1 } else { -0.1 };
            DiagnosticsRecord {
                lp_exponent: 4.0,
                rows: vec![row(0.0, 1.0, 0.0), row(1.0, (2.0 + jitter).sqrt(), 1.0)],
            }
        })
        .collect();
    let r = energy_balance_check(&recs, &params, 2.0, 1.0, 1e-3).unwrap();
    assert!(r.pass);
    assert!(r.rel_discrepancy < 1e-12);
    assert!((r.rhs - 3.0).abs() < 1e-12);
    let r = energy_balance_check(&recs, &params, 4.0, 1.0, 1e-3).unwrap();
    assert!(!r.pass);
    assert!(matches!(
        energy_balance_check(&recs[..3], &params, 2.0, 1.0, 1e-3),
        Err(Error::EnsembleTooSmall { .. })
    ));
}
