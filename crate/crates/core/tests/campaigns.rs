use tklab::analysis::ClaimId;
use tklab::experiments::{
    kuramoto_shadow, monte_carlo, run_scenario, Experiment, InitialSpec, Pairing, Scenario,
};
use tklab::integrate::IntegratorOptions;
use tklab::io::{emit_scenario, load_scenario, write_trajectory_csv, CsvTable};
use tklab::model::{ModelParams, Network};
use tklab::par::Execution;

fn shadow_scenario(kappa2: f64) -> Scenario {
    let n = 5;
    Scenario {
        name: format!("shadow-{kappa2}"),
        params: ModelParams::homogeneous(n, 3.0, kappa2, 0.5, 1.0)
            .with_nat_freq(vec![-0.2, -0.1, 0.0, 0.1, 0.2])
            .with_zeta(Network::ring(n, 0.6, 1.0)),
        initial: InitialSpec::Explicit {
            phases: vec![0.0, 0.4, -0.3, 0.2, -0.1],
            temps: vec![1.0, 1.6, 1.2, 2.0, 1.4],
        },
        options: IntegratorOptions::adaptive(1e-10, 80.0, 0.2),
        claims: vec![],
        pairing: Pairing::KuramotoShadow,
    }
}

#[test]
fn shift_shrinks_as_temperature_coupling_grows() {
    let zs: Vec<f64> = [0.25, 1.0, 4.0, 16.0, 64.0]
        .iter()
        .map(|&k2| {
            let r = kuramoto_shadow(&shadow_scenario(k2)).unwrap();
            assert!(
                r.z.abs() <= r.shift_bound,
                "|z| {} > bound {}",
                r.z,
                r.shift_bound
            );
            r.z.abs()
        })
        .collect();
    for w in zs.windows(2) {
        assert!(w[1] < w[0], "{zs:?}");
    }
    assert!(zs[4] < 0.05 * zs[0], "{zs:?}");
}

#[test]
fn campaign_report_is_independent_of_execution() {
    for exp in [
        Experiment::Claim(ClaimId::SyncRate),
        Experiment::TwinL1,
        Experiment::TcsConservation,
    ] {
        let a = monte_carlo(exp, 8, 99, Execution::Sequential);
        let b = monte_carlo(exp, 8, 99, Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(
            a.passed,
            8,
            "{exp}: {:?}",
            a.trials.iter().find(|t| !t.pass)
        );
    }
}

#[test]
fn seeds_change_the_draw() {
    let exp = Experiment::Claim(ClaimId::QuarterCircle);
    let a = monte_carlo(exp, 4, 1, Execution::Parallel);
    let b = monte_carlo(exp, 4, 2, Execution::Parallel);
    for (x, y) in a.trials.iter().zip(&b.trials) {
        assert_ne!(x.scenario_hash, y.scenario_hash);
    }
}

#[test]
fn scenario_file_round_trip_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = shadow_scenario(2.0);
    s.claims = vec![ClaimId::EntropyMonotone, ClaimId::PhaseLocking];
    s.initial = InitialSpec::Random {
        phase_center: 0.3,
        phase_diameter: 0.8,
        temp_min: 1.0,
        temp_max: 2.0,
        seed: 5,
    };
    let path = dir.path().join("s.toml");
    std::fs::write(&path, emit_scenario(&s).unwrap()).unwrap();
    let loaded = load_scenario(&path, &[]).unwrap();
    assert_eq!(loaded, s);

    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&loaded).unwrap();
    assert_eq!(a.report, b.report);
    assert!(a.report.pass, "{:?}", a.report.verdicts);

    let csv = dir.path().join("t.csv");
    let traj = a.trajectory.unwrap();
    write_trajectory_csv(&traj, &csv).unwrap();
    let table = CsvTable::read(&csv).unwrap();
    assert_eq!(table.rows.len(), traj.len());
    let g = table.column("conserved_g").unwrap();
    let g0 = g[0];
    assert!(g.iter().all(|x| (x - g0).abs() <= 1e-6 * g0.abs()));
}
