use drn_core::datagen::{
    gen_fp, gen_ou, ou_mean, ou_pdf, ou_variance, solve_fokker_planck, FokkerPlanck, FpConfig, OuConfig, Potential,
};
use drn_core::dist::{js_divergence, DiscreteDistribution, Support};

#[test]
fn ou_labels_follow_the_closed_form() {
    let cfg = OuConfig::<f64> { n_data: 40, seed: 7, ..OuConfig::default() };
    let data = gen_ou(&cfg).unwrap();
    assert_eq!(data.len(), 40);
    let mut checked = 0;
    for r in &data.records {
        let (y, t) = (r.meta["y"], r.meta["t_init"]);
        assert!((0.3..=0.9).contains(&y) && (0.01..=2.0).contains(&t));
        assert_eq!(r.inputs[0], ou_pdf(y, t, &cfg).unwrap());
        assert_eq!(r.label, ou_pdf(y, t + 1.0, &cfg).unwrap());
        let mu = y * (-0.1 * (t + 1.0)).exp();
        let sd = ou_variance(t + 1.0, &cfg).sqrt();
        if mu - 4.0 * sd > 0.0 && mu + 4.0 * sd < 1.0 {
            assert!((r.label.mean() - mu).abs() < 1e-3, "mean {} vs {mu}", r.label.mean());
            checked += 1;
        }
    }
    assert!(checked >= 10, "only {checked} untruncated records");
}

#[test]
fn ou_variance_grows_with_time() {
    let cfg = OuConfig::<f64>::default();
    let mut last = 0.0;
    for i in 1..=300 {
        let v = ou_variance(i as f64 * 0.01, &cfg);
        assert!(v > last);
        last = v;
    }
    let data = gen_ou(&OuConfig { n_data: 60, seed: 1, ..cfg.clone() }).unwrap();
    for r in data.records.iter().filter(|r| r.meta["t_init"] < 1.0) {
        assert!(r.label.variance() > r.inputs[0].variance());
    }
    assert!((ou_mean(0.5, 1.0, &cfg) - 0.452_418_709_017_979_7).abs() < 1e-15);
}

#[test]
fn zero_time_step_pairs_are_identical() {
    let data = gen_ou(&OuConfig::<f64> { dt: 0.0, n_data: 10, ..OuConfig::default() }).unwrap();
    assert!(data.records.iter().all(|r| r.inputs[0] == r.label));
}

#[test]
fn generators_are_deterministic_per_seed() {
    let ou = OuConfig::<f64> { n_data: 15, seed: 3, ..OuConfig::default() };
    assert_eq!(gen_ou(&ou).unwrap(), gen_ou(&ou).unwrap());
    assert_ne!(gen_ou(&ou).unwrap(), gen_ou(&OuConfig { seed: 4, ..ou }).unwrap());
    let fp = FpConfig::<f64> { n_data: 4, samples_per_dist: 200, seed: 3, ..FpConfig::default() };
    assert_eq!(gen_fp(&fp).unwrap().to_json().unwrap(), gen_fp(&fp).unwrap().to_json().unwrap());
}

/// Mass at bin centers of a discretized pdf against the bin integrals of the same
/// truncated Gaussian. Evaluating at centers is the midpoint rule, whose per-bin error
/// is about h³ f''/24 relative to a total of one.
#[test]
fn ou_discretization_against_bin_quadrature() {
    let cfg = OuConfig::<f64>::default();
    let p = ou_pdf(0.5, 1.0, &cfg).unwrap();
    let (mu, var) = (ou_mean(0.5, 1.0, &cfg), ou_variance(1.0, &cfg));
    let f = |x: f64| (-(x - mu) * (x - mu) / (2.0 * var)).exp();
    let s = p.support();
    let h = s.bin_width();
    let fine = 10;
    let integrals: Vec<f64> = (0..s.q)
        .map(|j| {
            let a = s.lower + j as f64 * h;
            let dx = h / fine as f64;
            (0..fine).map(|k| 0.5 * dx * (f(a + k as f64 * dx) + f(a + (k + 1) as f64 * dx))).sum()
        })
        .collect();
    let total: f64 = integrals.iter().sum();
    let max_diff = p.masses().iter().zip(&integrals).map(|(m, i)| (m - i / total).abs()).fold(0.0, f64::max);
    // |f''| peaks at the mode at f(μ)/σ² for the normalized density
    let bound = h.powi(3) / (24.0 * var) / (2.0 * std::f64::consts::PI * var).sqrt();
    assert!(max_diff < 1.1 * bound, "{max_diff} vs {bound}");
    assert!(max_diff > 0.5 * bound);
}

fn fp_default() -> FpConfig<f64> {
    FpConfig::default()
}

#[test]
fn free_diffusion_variance() {
    let cfg = FpConfig { potential: Potential::flat(), ..fp_default() };
    let p0 = DiscreteDistribution::point_mass(cfg.support, 50).unwrap();
    for t in [1.0, 3.0, 5.0] {
        let p = solve_fokker_planck(&p0, t, &cfg).unwrap();
        let expect = 9.0 * t;
        assert!((p.variance() - expect).abs() < 0.05 * expect, "t={t}: {}", p.variance());
        // bin 50 sits half a bin right of the middle, so reflections are not quite symmetric
        assert!((p.mean() - p0.mean()).abs() < 1e-6);
    }
}

#[test]
fn mass_is_conserved_by_the_raw_step() {
    let cfg = fp_default();
    let solver = cfg.solver();
    let mut p = vec![0.0; 100];
    p[3] = 0.5;
    p[97] = 0.5;
    let total: f64 = p.iter().sum();
    for _ in 0..1000 {
        p = solver.step(&p, solver.max_step());
    }
    assert!((p.iter().sum::<f64>() - total).abs() < 1e-9);
    assert!(p.iter().all(|&m| m >= 0.0));
}

#[test]
fn coarse_grid_agrees_with_refined_grid() {
    let coarse = fp_default();
    let fine = FpConfig { support: Support { q: 400, ..coarse.support }, ..fp_default() };
    for (bins, t) in [(vec![30], 1.0), (vec![10, 70], 5.0), (vec![0], 15.0), (vec![55], 15.0)] {
        let mut m = vec![0.0; 100];
        let mut mf = vec![0.0; 400];
        for &b in &bins {
            m[b] = 1.0 / bins.len() as f64;
            for k in 0..4 {
                mf[4 * b + k] = 0.25 / bins.len() as f64;
            }
        }
        let p = solve_fokker_planck(&DiscreteDistribution::new(coarse.support, m).unwrap(), t, &coarse).unwrap();
        let pf = solve_fokker_planck(&DiscreteDistribution::new(fine.support, mf).unwrap(), t, &fine).unwrap();
        let down: Vec<f64> = pf.masses().chunks(4).map(|c| c.iter().sum()).collect();
        let down = DiscreteDistribution::from_weights(coarse.support, down).unwrap();
        let js = js_divergence(&p, &down).unwrap();
        assert!(js < 0.01, "bins {bins:?} t={t}: {js}");
    }
}

fn one_step_change(solver: &FokkerPlanck<f64>, support: Support<f64>, bins: &[usize], t: f64) -> f64 {
    let mut m = vec![0.0; support.q];
    for &b in bins {
        m[b] = 1.0 / bins.len() as f64;
    }
    let p = solver.solve(&DiscreteDistribution::new(support, m).unwrap(), t).unwrap();
    let next = solver.step(p.masses(), solver.max_step());
    p.masses().iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn long_evolution_reaches_a_stationary_state() {
    let cfg = fp_default();
    let solver = cfg.solver();
    for bins in [vec![50], vec![49, 50], vec![30, 69], vec![20, 45, 80]] {
        let change = one_step_change(&solver, cfg.support, &bins, 500.0);
        assert!(change < 1e-8, "{bins:?}: {change}");
    }
}

/// Starts at an end of the support load the slowest diffusive mode, which decays at
/// rate ½σ²π²/L²; its remaining amplitude sets the size of one step at late times.
#[test]
fn edge_starts_relax_at_the_slowest_mode_rate() {
    let cfg = fp_default();
    let solver = cfg.solver();
    let length = cfg.support.upper - cfg.support.lower;
    let rate = 4.5 * std::f64::consts::PI.powi(2) / (length * length);
    for bins in [vec![0], vec![99]] {
        let predicted = rate * solver.max_step() * (-rate * 500.0).exp() * 2.0 / 100.0;
        let change = one_step_change(&solver, cfg.support, &bins, 500.0);
        assert!((change / predicted - 1.0).abs() < 0.2, "{bins:?}: {change} vs {predicted}");
        assert!(one_step_change(&solver, cfg.support, &bins, 700.0) < 1e-8);
    }
}

#[test]
fn separated_starts_stay_bimodal_at_short_times() {
    let cfg = FpConfig { n_data: 200, samples_per_dist: 0, ..fp_default() };
    let data = gen_fp(&cfg).unwrap();
    let mut seen = 0;
    for r in &data.records {
        if let (Some(a), Some(b)) = (r.meta.get("start0"), r.meta.get("start1")) {
            if (a - b).abs() >= 30.0 && r.meta["t_init"] <= 2.0 {
                assert!(r.inputs[0].local_maxima().len() >= 2, "starts {a} {b}");
                seen += 1;
            }
        }
    }
    assert!(seen > 0);
    let single = data.records.iter().filter(|r| !r.meta.contains_key("start1")).count();
    assert!((60..140).contains(&single), "{single} single-start data");
}

#[test]
fn late_pairs_are_close_to_identity() {
    let cfg = FpConfig { n_data: 5, samples_per_dist: 0, t_init_range: (300.0, 300.0), ..fp_default() };
    let data = gen_fp(&cfg).unwrap();
    let solver = cfg.solver();
    for r in &data.records {
        assert!(js_divergence(&r.inputs[0], &r.label).unwrap() < 1e-4);
        let long = solver.solve(&r.label, 1000.0).unwrap();
        assert!(js_divergence(&long, &r.label).unwrap() < 1e-3);
    }
    let early = gen_fp(&FpConfig { n_data: 5, samples_per_dist: 0, ..fp_default() }).unwrap();
    let mean_js = |d: &drn_core::Dataset| d.records.iter().map(|r| js_divergence(&r.inputs[0], &r.label).unwrap()).sum::<f64>();
    assert!(mean_js(&data) < mean_js(&early));
}

#[test]
fn sampled_fp_data_carries_kde_distributions() {
    let cfg = FpConfig { n_data: 3, samples_per_dist: 1000, ..fp_default() };
    let data = gen_fp(&cfg).unwrap();
    let exact = gen_fp(&FpConfig { samples_per_dist: 0, ..cfg.clone() }).unwrap();
    for (r, e) in data.records.iter().zip(&exact.records) {
        let samples = r.label_samples.as_ref().unwrap();
        assert_eq!(samples.len(), 1000);
        assert!(samples.iter().all(|&x| cfg.support.contains(x)));
        assert!(js_divergence(&r.label, &e.label).unwrap() < 0.05);
    }
}
