use dualfem::experiments::{run_config, write_csv, Experiment, ExperimentConfig, BINGHAM_HEADER, SCALAR_HEADER};

fn small(name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(name).unwrap();
    c.levels = if c.experiment.is_vector() { 0 } else { 1 };
    c.grade_depth = 1;
    c.max_iter = 12;
    c
}

fn csv_text(c: &ExperimentConfig) -> String {
    let s = run_config(c).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, c.experiment, &s).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn headers_match_column_contract() {
    for name in ["plaplace", "optdesign", "pstokes"] {
        assert_eq!(csv_text(&small(name)).lines().next().unwrap(), SCALAR_HEADER);
    }
    let text = csv_text(&small("bingham"));
    assert_eq!(text.lines().next().unwrap(), BINGHAM_HEADER);
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[3].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn runs_are_byte_identical() {
    for name in ["plaplace", "pstokes", "bingham"] {
        let c = small(name);
        assert_eq!(csv_text(&c), csv_text(&c), "{name}");
    }
}

#[test]
fn error_columns_match_definitions() {
    let c = small("plaplace");
    let s = run_config(&c).unwrap();
    let text = csv_text(&c);
    let footer = text.lines().last().unwrap();
    let j_ref: f64 = footer.strip_prefix("# jref = ").unwrap().parse().unwrap();
    assert_eq!(j_ref, s.j_ref);
    for (line, r) in text.lines().skip(1).zip(&s.records) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols[1], r.primal - j_ref);
        assert_eq!(cols[2], r.dual + j_ref);
        assert!(cols[1] >= 0.0 && cols[2] >= -1e-12);
    }
}

#[test]
fn fixed_schedule_uses_reciprocal_epsilon() {
    let mut c = small("bingham");
    c.set("eps_policy", "fixed").unwrap();
    c.max_iter = 4;
    let s = run_config(&c).unwrap();
    let eps: Vec<f64> = s.records.iter().map(|r| r.epsilon.unwrap()).collect();
    assert_eq!(eps, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
    assert_eq!(c.experiment, Experiment::Bingham);
}

#[test]
fn alternative_schemes_share_the_reference() {
    let mut c = small("plaplace");
    c.set("scheme", "newton").unwrap();
    let s = run_config(&c).unwrap();
    assert!(s.records.iter().all(|r| r.primal >= s.j_ref));
}
