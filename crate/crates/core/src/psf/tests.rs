use super::*;
use crate::transport::{BackscatterExit, DepositionRecord, EventList, RunSummary};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

/// Hand-built record from (x, y, z, energy, channel) tuples.
fn record_from_events(events: &[(f64, f64, f64, f64, Channel)], trajectories: u64) -> DepositionRecord {
    let mut list = EventList::default();
    let mut deposited = 0.0;
    for &(x, y, z, e, ch) in events {
        list.push(x as f32, y as f32, z as f32, e as f32, ch);
        deposited += e;
    }
    DepositionRecord {
        events: list,
        backscattered_exits: Vec::new(),
        summary: RunSummary {
            trajectory_count: trajectories,
            deposited_ev: deposited,
            ..Default::default()
        },
    }
}

fn exits_record(exits: Vec<BackscatterExit>) -> DepositionRecord {
    let mut record = record_from_events(&[(0.0, 0.0, 0.0, 1.0, Channel::Incident)], 1);
    record.backscattered_exits = exits;
    record
}

#[test]
fn single_event_at_origin_lands_in_bin_zero() {
    let record = record_from_events(&[(0.0, 0.0, 10.0, 123.0, Channel::Incident)], 1);
    let psf = build_radial_psf(&record, 16).unwrap();
    let energy0 = psf.incident[0] * psf.annulus_area_nm2(0);
    assert!((energy0 - 123.0).abs() / 123.0 < 1e-6);
    assert!(psf.incident[1..].iter().all(|&d| d == 0.0));
}

#[test]
fn empty_record_is_an_error() {
    let record = DepositionRecord::default();
    assert!(build_radial_psf(&record, 32).is_err());
}

#[test]
fn channel_integrals_match_totals() {
    let events = [
        (5.0, 0.0, 10.0, 40.0, Channel::Incident),
        (200.0, 10.0, 600.0, 25.0, Channel::Backscattered),
        (0.1, 0.0, 5.0, 10.0, Channel::Incident), // below the first edge
        (90_000.0, 0.0, 5.0, 3.0, Channel::Backscattered), // beyond the last edge
    ];
    let psf = build_radial_psf(&record_from_events(&events, 2), 64).unwrap();
    let inc = psf.channel_integral_ev(Channel::Incident);
    let back = psf.channel_integral_ev(Channel::Backscattered);
    assert!((inc - psf.incident_total_ev).abs() / psf.incident_total_ev < 1e-6);
    assert!((back - psf.backscattered_total_ev).abs() / psf.backscattered_total_ev < 1e-6);
    assert!((inc - 25.0).abs() < 1e-4); // 50 eV over 2 trajectories
    assert!((back - 14.0).abs() < 1e-4);
}

#[test]
fn channel_additivity_bin_by_bin() {
    // incident + backscattered densities must equal the all-events density.
    let mut rng = SmallRng::seed_from_u64(3);
    let mut both = Vec::new();
    let mut incident_only = Vec::new();
    for _ in 0..5_000 {
        let r = 10.0f64.powf(rng.random_range(0.0..4.0));
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let e = rng.random_range(1.0..100.0);
        let ch = if rng.random_bool(0.5) {
            Channel::Incident
        } else {
            Channel::Backscattered
        };
        both.push((r * phi.cos(), r * phi.sin(), 1.0, e, ch));
        incident_only.push((r * phi.cos(), r * phi.sin(), 1.0, e, Channel::Incident));
    }
    let split = build_radial_psf(&record_from_events(&both, 10), 64).unwrap();
    let merged = build_radial_psf(&record_from_events(&incident_only, 10), 64).unwrap();
    for i in 0..split.bins() {
        let sum = split.incident[i] + split.backscattered[i];
        assert!(
            (sum - merged.incident[i]).abs() <= 1e-12 * merged.incident[i].max(1.0),
            "bin {i}: {sum} vs {}",
            merged.incident[i]
        );
    }
}

#[test]
fn synthetic_power_law_events_recovered() {
    // Generator-as-oracle: sample radii so the energy surface density follows
    // r^-0.77 exactly, then check the binned densities against the analytic
    // curve within Poisson error.
    let b = 0.77;
    let (r0, r1) = (10.0f64, 10_000.0f64);
    let mut rng = SmallRng::seed_from_u64(99);
    let n = 400_000usize;
    let mut events = Vec::with_capacity(n);
    // pdf(r) ∝ r^(1-b) on [r0, r1] makes density(r) ∝ r^-b.
    let p = 2.0 - b;
    let (c0, c1) = (r0.powf(p), r1.powf(p));
    for _ in 0..n {
        let u: f64 = rng.random();
        let r = (c0 + u * (c1 - c0)).powf(1.0 / p);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        events.push((r * phi.cos(), r * phi.sin(), 1.0, 1.0, Channel::Backscattered));
    }
    let psf = build_radial_psf(&record_from_events(&events, 1), 64).unwrap();
    let centers = psf.bin_centers();
    // Expected density from the sampling construction.
    let total_mass = n as f64;
    let norm = p / (2.0 * std::f64::consts::PI * (c1 - c0));
    let mut checked = 0;
    for (i, &c) in centers.iter().enumerate() {
        if c < r0 * 2.0 || c > r1 / 2.0 {
            continue;
        }
        let expected = total_mass * norm * c.powf(-b);
        // Poisson relative error from the bin's expected count.
        let count = expected * psf.annulus_area_nm2(i);
        let rel_sigma = 1.0 / count.sqrt();
        let got = psf.backscattered[i];
        let dev = (got - expected).abs() / expected;
        assert!(
            dev < 6.0 * rel_sigma + 0.01,
            "bin {i} r={c:.1}: got {got:.3e}, expected {expected:.3e}, dev {dev:.3}"
        );
        checked += 1;
    }
    assert!(checked > 20);
    // And the fitted exponent lands on the generator's.
    let fit = fit_power_law(&psf, Channel::Backscattered, r0 * 2.0, r1 / 2.0).unwrap();
    assert!((fit.b - b).abs() < 0.02, "fitted b = {}", fit.b);
}

#[test]
fn power_law_fixture_recovered_exactly() {
    // Noiseless table: density = 1.13e-4 * r^-0.77.
    let edges = log_edges(64);
    let mut psf = RadialPsf {
        bin_edges: edges,
        incident: vec![0.0; 64],
        backscattered: vec![0.0; 64],
        incident_total_ev: 1.0,
        backscattered_total_ev: 1.0,
        trajectory_count: 1,
        z_window_nm: (0.0, 730.0),
        source: (String::new(), String::new()),
    };
    let centers = psf.bin_centers();
    for (i, &c) in centers.iter().enumerate() {
        psf.backscattered[i] = 1.13e-4 * c.powf(-0.77);
    }
    let fit = fit_power_law(&psf, Channel::Backscattered, 1.0, 50_000.0).unwrap();
    assert!(((fit.a - 1.13e-4) / 1.13e-4).abs() < 1e-6, "a = {}", fit.a);
    assert!(((fit.b - 0.77) / 0.77).abs() < 1e-6, "b = {}", fit.b);
    assert!(fit.r_squared > 1.0 - 1e-12);
}

#[test]
fn constant_density_fits_zero_exponent() {
    let edges = log_edges(32);
    let psf = RadialPsf {
        bin_edges: edges,
        incident: vec![4.2; 32],
        backscattered: vec![4.2; 32],
        incident_total_ev: 1.0,
        backscattered_total_ev: 1.0,
        trajectory_count: 1,
        z_window_nm: (0.0, 730.0),
        source: (String::new(), String::new()),
    };
    let fit = fit_power_law(&psf, Channel::Backscattered, 1.0, 50_000.0).unwrap();
    assert!(fit.b.abs() < 1e-9, "b = {}", fit.b);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

    /// Noiseless tables fit back to their generating (a, b) at 1e-6.
    #[test]
    fn fit_round_trip_property(
        log_a in -8.0f64..2.0,
        b in 0.05f64..1.9,
    ) {
        let a = 10.0f64.powf(log_a);
        let bins = 64;
        let edges = log_edges(bins);
        let mut psf = RadialPsf {
            bin_edges: edges,
            incident: vec![0.0; bins],
            backscattered: vec![0.0; bins],
            incident_total_ev: 1.0,
            backscattered_total_ev: 1.0,
            trajectory_count: 1,
            z_window_nm: (0.0, 730.0),
            source: (String::new(), String::new()),
        };
        for (i, c) in psf.bin_centers().iter().enumerate() {
            psf.backscattered[i] = a * c.powf(-b);
        }
        let fit = fit_power_law(&psf, Channel::Backscattered, 1.0, 50_000.0).unwrap();
        proptest::prop_assert!(((fit.a - a) / a).abs() < 1e-6);
        proptest::prop_assert!(((fit.b - b) / b).abs() < 1e-6);
    }
}

#[test]
fn fit_requires_five_positive_bins() {
    let edges = log_edges(16);
    let mut psf = RadialPsf {
        bin_edges: edges,
        incident: vec![0.0; 16],
        backscattered: vec![0.0; 16],
        incident_total_ev: 1.0,
        backscattered_total_ev: 1.0,
        trajectory_count: 1,
        z_window_nm: (0.0, 730.0),
        source: (String::new(), String::new()),
    };
    psf.backscattered[3] = 1.0;
    psf.backscattered[4] = 0.5;
    let err = fit_power_law(&psf, Channel::Backscattered, 1.0, 50_000.0).unwrap_err();
    assert!(matches!(err, EblError::Numeric { .. }));
}

#[test]
fn angular_delta_distribution() {
    let exits = (0..1000)
        .map(|_| BackscatterExit {
            theta_deg: 43.0,
            energy_ev: 1.0,
            radius_nm: 100.0,
        })
        .collect();
    let record = exits_record(exits);
    let fit = fit_angular(&record, 90).unwrap();
    let bin_width = 1.0;
    assert!((fit.mu_deg - 43.0).abs() < bin_width, "mu = {}", fit.mu_deg);
    assert!(fit.sigma_deg <= bin_width, "sigma = {}", fit.sigma_deg);
}

#[test]
fn angular_gaussian_samples_recovered() {
    // The generator is the oracle.
    let mut rng = SmallRng::seed_from_u64(2024);
    let normal = rand_distr::Normal::new(43.0, 17.0).unwrap();
    let mut exits = Vec::new();
    while exits.len() < 1_000_000 {
        let theta: f64 = rng.sample(normal);
        if (0.0..=90.0).contains(&theta) {
            exits.push(BackscatterExit {
                theta_deg: theta,
                energy_ev: 1.0,
                radius_nm: 0.0,
            });
        }
    }
    let fit = fit_angular(&exits_record(exits), 90).unwrap();
    assert!((fit.mu_deg - 43.0).abs() < 0.5, "mu = {}", fit.mu_deg);
    assert!((fit.sigma_deg - 17.0).abs() < 0.5, "sigma = {}", fit.sigma_deg);
}

#[test]
fn angular_requires_exits() {
    let record = record_from_events(&[(0.0, 0.0, 0.0, 1.0, Channel::Incident)], 1);
    assert!(fit_angular(&record, 90).is_err());
}

#[test]
fn kernel_conserves_table_integral() {
    // A synthetic but realistically shaped table: Gaussian forward peak plus
    // power-law halo.
    let bins = DEFAULT_BINS;
    let edges = log_edges(bins);
    let mut psf = RadialPsf {
        bin_edges: edges,
        incident: vec![0.0; bins],
        backscattered: vec![0.0; bins],
        incident_total_ev: 0.0,
        backscattered_total_ev: 0.0,
        trajectory_count: 1,
        z_window_nm: (0.0, 730.0),
        source: (String::new(), String::new()),
    };
    let centers = psf.bin_centers();
    for (i, &c) in centers.iter().enumerate() {
        psf.incident[i] = (-c * c / (2.0 * 25.0 * 25.0)).exp();
        psf.backscattered[i] = 1e-3 * c.powf(-0.77);
    }
    psf.incident_total_ev = psf.channel_integral_ev(Channel::Incident);
    psf.backscattered_total_ev = psf.channel_integral_ev(Channel::Backscattered);

    let kernel = build_kernel(&psf, 10.0, 4000.0).unwrap();
    // Expected in-support integral per channel: table integral restricted to
    // r <= half-width.
    for (ch, total) in [
        (Channel::Incident, psf.incident_total_ev),
        (Channel::Backscattered, psf.backscattered_total_ev),
    ] {
        let mut inside = 0.0;
        for i in 0..psf.bins() {
            let lo = psf.bin_edges[i];
            let hi = psf.bin_edges[i + 1].min(4000.0);
            if hi <= lo {
                continue;
            }
            let area = std::f64::consts::PI * (hi * hi - lo * lo);
            inside += psf.density(ch)[i] * area;
        }
        let expected_fraction = inside / psf.total_ev();
        let got = kernel.channel_integral(ch);
        let rel = (got - expected_fraction).abs() / expected_fraction;
        assert!(
            rel < 5e-3,
            "{ch:?} integral {got} vs {expected_fraction} (rel {rel:.2e}, total {total})"
        );
    }
}

#[test]
fn kernel_rejects_half_width_below_first_bin() {
    let psf = RadialPsf {
        bin_edges: log_edges(16),
        incident: vec![1.0; 16],
        backscattered: vec![0.0; 16],
        incident_total_ev: 1.0,
        backscattered_total_ev: 0.0,
        trajectory_count: 1,
        z_window_nm: (0.0, 730.0),
        source: (String::new(), String::new()),
    };
    assert!(build_kernel(&psf, 0.1, 0.5).is_err());
}

#[test]
fn analytic_kernel_matches_closed_form_at_100nm() {
    let law = PowerLawFit {
        a: 1.13e-4,
        b: 0.77,
        fit_range_nm: (60.0, 360.0),
        r_squared: 1.0,
        stderr_ln_a: 0.0,
        stderr_b: 0.0,
    };
    let pitch = 10.0;
    let kernel = PsfKernel::analytic(&law, 25.0, 0.3, pitch, 2000.0).unwrap();
    let half = kernel.size() / 2;
    // Cell centered at (100, 0) nm.
    let sample = kernel.backscattered[(half, half + 10)] / (pitch * pitch);
    let r_full = LAST_EDGE_NM;
    let amp = 0.3 * (2.0 - 0.77)
        / (2.0 * std::f64::consts::PI * r_full.powf(2.0 - 0.77));
    let expected = amp * 100.0f64.powf(-0.77);
    assert!(
        ((sample - expected) / expected).abs() < 1e-3,
        "sample {sample:.6e} vs {expected:.6e}"
    );
}

#[test]
fn kernel_central_symmetry_exact() {
    let law = PowerLawFit {
        a: 1.0,
        b: 0.77,
        fit_range_nm: (60.0, 360.0),
        r_squared: 1.0,
        stderr_ln_a: 0.0,
        stderr_b: 0.0,
    };
    let kernel = PsfKernel::analytic(&law, 25.0, 0.4, 10.0, 500.0).unwrap();
    let n = kernel.size();
    for i in 0..n {
        for j in 0..n {
            let v = kernel.backscattered[(i, j)];
            assert_eq!(v, kernel.backscattered[(n - 1 - i, n - 1 - j)]);
            // Transpose symmetry within interpolation tolerance.
            let t = kernel.backscattered[(j, i)];
            if v > 0.0 {
                assert!((v - t).abs() / v < 1e-6);
            }
        }
    }
}

#[test]
fn kernel_channels_dump_to_grid_files() {
    let record = record_from_events(
        &[
            (10.0, 0.0, 5.0, 3.0, Channel::Incident),
            (500.0, 0.0, 5.0, 2.0, Channel::Backscattered),
        ],
        1,
    );
    let psf = build_radial_psf(&record, 32).unwrap();
    let kernel = build_kernel(&psf, 25.0, 500.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    kernel.write_grid_files(dir.path(), "kernel").unwrap();
    let (pitch, grid) = crate::io::read_grid(&dir.path().join("kernel_incident.grid")).unwrap();
    assert_eq!(pitch, 25.0);
    assert_eq!(grid.dim(), (kernel.size(), kernel.size()));
    let (_, grid_b) =
        crate::io::read_grid(&dir.path().join("kernel_backscattered.grid")).unwrap();
    // f32 storage rounds; compare loosely.
    let total: f64 = grid_b.sum();
    assert!((total - kernel.channel_integral(Channel::Backscattered)).abs() < 1e-6);
}

#[test]
fn four_micron_half_width_covers_influence_radius() {
    let record = record_from_events(&[(0.0, 0.0, 10.0, 1.0, Channel::Incident)], 1);
    let psf = build_radial_psf(&record, DEFAULT_BINS).unwrap();
    let kernel = build_kernel(&psf, 10.0, 4000.0).unwrap();
    assert_eq!(kernel.size(), 801);
    assert!((kernel.size() as f64 / 2.0).floor() * 10.0 >= 4000.0 - 10.0);
}

#[test]
fn layer_psfs_split_by_depth() {
    let events = [
        (10.0, 0.0, 100.0, 7.0, Channel::Incident), // PMMA layer
        (10.0, 0.0, 500.0, 5.0, Channel::Incident), // MMA layer
        (10.0, 0.0, 900.0, 3.0, Channel::Incident), // substrate: outside resist
    ];
    let record = record_from_events(&events, 1);
    let stack = crate::transport::LayerStack::pmma_mma_si();
    let psfs = layer_psfs(&record, &stack, 16).unwrap();
    assert_eq!(psfs.len(), 3);
    assert!((psfs[0].incident_total_ev - 12.0).abs() < 1e-9); // full resist
    assert!((psfs[1].incident_total_ev - 7.0).abs() < 1e-9); // PMMA
    assert!((psfs[2].incident_total_ev - 5.0).abs() < 1e-9); // MMA
}
