use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rep4ex(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rep4ex")).args(args).current_dir(dir).env_remove("REP4EX_SEED").output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_data_writes_hidden_columns_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = rep4ex(&["gen-data", "--experiment", "extrap1d-fig3", "--n", "50", "--with-hidden", "--out", "d.csv"], dir.path());
    ok(&out);
    let csv = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "a_1,x_1,x_2,y,z_1,v_1,u");
    assert_eq!(lines.count(), 50);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    assert_eq!(side["with_hidden"], true);
    assert_eq!(side["master_seed"], 0);

    ok(&rep4ex(&["gen-data", "--experiment", "unmix-fig2", "--n", "30", "--out", "u.csv"], dir.path()));
    let head = fs::read_to_string(dir.path().join("u.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(!head.contains("z_") && head.starts_with("a_1,a_2,x_1"), "{head}");
}

#[test]
fn seed_flag_and_environment_agree() {
    let dir = tempfile::tempdir().unwrap();
    ok(&rep4ex(&["gen-data", "--experiment", "unmix-fig2", "--n", "20", "--seed", "9", "--out", "flag.csv"], dir.path()));
    let env = Command::new(env!("CARGO_BIN_EXE_rep4ex"))
        .args(["gen-data", "--experiment", "unmix-fig2", "--n", "20", "--out", "env.csv"])
        .current_dir(dir.path())
        .env("REP4EX_SEED", "9")
        .output()
        .unwrap();
    ok(&env);
    assert_eq!(fs::read(dir.path().join("flag.csv")).unwrap(), fs::read(dir.path().join("env.csv")).unwrap());
}

#[test]
fn dumped_model_round_trips_through_eval() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--experiment", "unmix-fig2", "--n", "120", "--epochs", "3", "--lambda", "10"];
    let mut args = vec!["dump-model"];
    args.extend(base);
    args.extend(["--out", "m.json"]);
    ok(&rep4ex(&args, dir.path()));
    let mut again = args.clone();
    *again.last_mut().unwrap() = "m2.json";
    ok(&rep4ex(&again, dir.path()));
    let m1 = fs::read(dir.path().join("m.json")).unwrap();
    assert_eq!(m1, fs::read(dir.path().join("m2.json")).unwrap());

    let mut gen = vec!["gen-data"];
    gen.extend(base);
    gen.extend(["--with-hidden", "--out", "d.csv"]);
    ok(&rep4ex(&gen, dir.path()));
    let out = rep4ex(&["eval-model", "--model", "m.json", "--data", "d.csv"], dir.path());
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    for key in ["reconstruction:", "mmr:", "r_squared:"] {
        assert!(stdout.contains(key), "{stdout}");
    }
    let phi = fs::read_to_string(dir.path().join("d.phi.csv")).unwrap();
    assert_eq!(phi.lines().next().unwrap(), "phi_1,phi_2");
    assert_eq!(phi.lines().count(), 121);

    // Parsing and re-serializing leaves the document unchanged.
    let model = rep4ex::models::AutoencoderModel::from_json(std::str::from_utf8(&m1).unwrap()).unwrap();
    assert_eq!(model.to_json().unwrap().as_bytes(), &m1[..]);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"experiment": "unmix-fig2", "repetitons": 3}"#).unwrap();
    let out = rep4ex(&["run-experiment", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("repetitons"), "{err}");

    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(rep4ex(&["run-experiment", "--config", "broken.json"], dir.path()).status.code(), Some(2));
    assert_eq!(rep4ex(&["run-experiment", "--experiment", "fig99"], dir.path()).status.code(), Some(2));
    assert_eq!(rep4ex(&["run-experiment", "--config", "missing.json"], dir.path()).status.code(), Some(2));
    assert_eq!(rep4ex(&["gen-data", "--experiment", "unmix-fig2", "--point", "99"], dir.path()).status.code(), Some(2));
    assert_eq!(rep4ex(&["run-experiment"], dir.path()).status.code(), Some(2));
}

#[test]
fn divergent_training_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment": "unmix-fig2", "n": 100, "autoencoder": {"epochs": 50, "adam": {"lr": 1e200, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}}}"#;
    fs::write(dir.path().join("hot.json"), cfg).unwrap();
    let out = rep4ex(&["dump-model", "--config", "hot.json", "--lambda", "1", "--out", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}
