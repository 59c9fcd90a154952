use greybm::experiments::{
    find, list_experiments, parse_ladder, parse_scalar, run, ExperimentConfig, EXPERIMENTS,
};

#[test]
fn ladder_and_scalar_syntax() {
    assert_eq!(
        parse_ladder("2^-4..2^-7").unwrap(),
        vec![0.0625, 0.03125, 0.015625, 0.0078125]
    );
    assert_eq!(parse_ladder("0.5, 2^-2").unwrap(), vec![0.5, 0.25]);
    assert_eq!(parse_scalar("2^-6").unwrap(), 1.0 / 64.0);
    assert_eq!(parse_scalar(" 0.3 ").unwrap(), 0.3);
    assert!(parse_ladder("4..2^-7").is_err());
    assert!(parse_scalar("abc").is_err());
}

#[test]
fn config_file_parsing() {
    let cfg = ExperimentConfig::parse(
        "# comment\nalpha = 0.8\nbeta=0.5\ngrid-n = 1025\neps_ladder = 2^-3..2^-5 # trailing\nseed = 9\nkernel = triangular\n",
    )
    .unwrap();
    assert_eq!(cfg.alpha, Some(0.8));
    assert_eq!(cfg.beta, Some(0.5));
    assert_eq!(cfg.grid_n, Some(1025));
    assert_eq!(cfg.eps_ladder.as_ref().map(Vec::len), Some(3));
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.kernel.as_deref(), Some("triangular"));

    let unknown = ExperimentConfig::parse("gamma = 1\n").unwrap_err();
    assert!(unknown.is_config());
    assert!(ExperimentConfig::parse("alpha 1\n").is_err());
    assert!(ExperimentConfig::parse("replicas = many\n").is_err());
}

#[test]
fn listing_names_every_experiment() {
    let listing = list_experiments();
    assert_eq!(listing.lines().count(), EXPERIMENTS.len());
    for line in [
        "crossings-lt  (Thm. 4.3)",
        "odd-squared  (Appendix A)",
        "power-variation  (Thm. 3.6)",
    ] {
        assert!(listing.lines().any(|l| l == line), "missing {line}");
    }
    assert!(find("no-such-experiment").is_none());
    assert!(run("no-such-experiment", &ExperimentConfig::default())
        .unwrap_err()
        .is_config());
}

fn small(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        replicas: Some(2),
        grid_n: Some(2049),
        seed,
        ..ExperimentConfig::default()
    }
}

#[test]
fn small_runs_are_deterministic_and_seed_sensitive() {
    for name in ["crossings-lt", "increment-law", "power-variation"] {
        let a = run(name, &small(4)).unwrap();
        let b = run(name, &small(4)).unwrap();
        assert_eq!(a.csv(), b.csv(), "{name}");
        let c = run(name, &small(5)).unwrap();
        assert_ne!(a.csv(), c.csv(), "{name}");
    }
}

#[test]
fn invalid_settings_are_config_errors() {
    let bad = [
        ExperimentConfig {
            alpha: Some(2.5),
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            replicas: Some(0),
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            t: Some(3.0),
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            kernel: Some("/nonexistent/kernel.txt".into()),
            ..ExperimentConfig::default()
        },
    ];
    for cfg in &bad {
        let err = run("crossings-lt", cfg).unwrap_err();
        assert!(err.is_config(), "{err}");
    }
}

#[test]
fn every_listed_experiment_runs_and_reports() {
    for info in EXPERIMENTS {
        let cfg = match info.name {
            "moments" | "gbm-law" => ExperimentConfig {
                replicas: Some(500),
                ..ExperimentConfig::default()
            },
            "specfun-golden" | "c-psi" | "berman" => ExperimentConfig::default(),
            _ => small(1),
        };
        let report = run(info.name, &cfg).unwrap_or_else(|e| panic!("{}: {e}", info.name));
        assert_eq!(report.experiment, info.name);
        assert!(!report.rows.is_empty(), "{}", info.name);
        assert!(
            report.rows.iter().all(|r| r.len() == report.columns.len()),
            "{}",
            info.name
        );
        let json = report.json(&cfg, 0.0);
        assert_eq!(json["experiment"], info.name);
        assert!(
            report
                .text()
                .contains(if report.passed() { "PASS" } else { "FAIL" })
                || report.gates.is_empty()
        );
    }
}
