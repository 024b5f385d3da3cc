use std::path::Path;
use std::process::{Command, Output};

fn znec(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_znec"));
    cmd.args(args).env_remove("ZNEC_SEED");
    if let Some(s) = seed_env {
        cmd.env("ZNEC_SEED", s);
    }
    cmd.output().expect("znec runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "znec failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bounds_reports_p0() {
    let out = stdout(&znec(&["bounds", "--n", "3", "--m", "4", "--a", "4", "--b", "2", "--c", "2", "--z", "2"], None));
    assert!(out.contains("UB         10"), "{out}");
    assert!(out.contains("tight      true"), "{out}");

    let csv = stdout(&znec(&["bounds", "--n", "3", "--m", "4", "--a", "4", "--b", "2", "--c", "2", "--z", "2", "--csv"], None));
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let row = reader.records().next().unwrap().unwrap();
    let ub = headers.iter().position(|h| h == "ub").unwrap();
    assert_eq!(&row[ub], "10");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p0.conf");
    std::fs::write(&path, "# reference network\nn = 3\nm = 4\na = 4\nb = 2\nc = 2\nz = 2\n").unwrap();
    let p = path.to_str().unwrap();
    let out = stdout(&znec(&["--config", p, "bounds"], None));
    assert!(out.contains("UB         10"), "{out}");
    let out = stdout(&znec(&["--config", p, "bounds", "--b", "1"], None));
    assert!(out.contains("UB         9"), "{out}");
}

#[test]
fn simulate_seed_precedence_and_key_blob() {
    let dir = tempfile::tempdir().unwrap();
    let blob = dir.path().join("keys.bin");
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "n=3\nm=4\na=4\nb=2\nc=2\nz=2\nstrategy=hide\nrounds=4\nseed=5\n").unwrap();
    let conf = conf.to_str().unwrap();

    let from_env = stdout(&znec(&["simulate", "--n", "3", "--m", "4", "--a", "4", "--b", "2", "--c", "2", "--z", "2", "--strategy", "hide", "--rounds", "4", "--csv"], Some("5")));
    let from_conf = stdout(&znec(&["--config", conf, "simulate", "--csv"], Some("99")));
    let from_flag = stdout(&znec(&["--config", conf, "simulate", "--csv", "--seed", "5", "--keys-out", blob.to_str().unwrap()], Some("99")));
    assert_eq!(from_env, from_conf);
    assert_eq!(from_conf, from_flag);
    assert!(from_flag.starts_with("round,attacked,feedback"), "{from_flag}");
    assert_eq!(from_flag.lines().count(), 5);

    let bytes = std::fs::read(&blob).unwrap();
    assert_eq!(&bytes[..5], b"ZNEC1");
    let reused = stdout(&znec(&["--config", conf, "simulate", "--csv", "--keys-in", blob.to_str().unwrap()], None));
    assert_eq!(reused, from_flag);
    assert!(Path::new(&blob).exists());
}

#[test]
fn attack_demo_prints_identical_branches() {
    let out = stdout(&znec(&["attack-demo", "--tiny-preset", "tiny"], None));
    assert!(out.contains("identical  true"), "{out}");
}

#[test]
fn sweep_summary_and_bad_strategy() {
    let out = stdout(&znec(&["sweep", "--a-max", "4", "--z-max", "2"], None));
    assert!(out.contains("tight"), "{out}");
    let bad = znec(&["simulate", "--n", "3", "--m", "4", "--a", "4", "--b", "2", "--c", "2", "--z", "2", "--strategy", "bogus"], None);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown strategy"));
}
