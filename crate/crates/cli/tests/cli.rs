use std::path::PathBuf;
use std::process::{Command, Output};

fn qsdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsdc"))
        .args(args)
        .output()
        .expect("spawn qsdc")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Non-comment CSV rows after the header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn meta(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

fn layout_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("layouts/five_cycle.txt")
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn table1_golden() {
    let out = qsdc(&["table1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let got: Vec<(String, String, String)> = rows(&text)
        .into_iter()
        .map(|r| (r[0].clone(), r[2].clone(), r[3].clone()))
        .collect();
    let want = [
        ("3", "8", "0.238095238095"),
        ("4", "20", "0.210526315789"),
        ("5", "60", "0.186440677966"),
        ("6", "28", "0.220721540802"),
        ("8", "24", "0.108695652174"),
        ("10", "60", "0.131487641973"),
    ];
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert_eq!((g.0.as_str(), g.1.as_str(), g.2.as_str()), w);
    }
}

#[test]
fn output_is_byte_deterministic() {
    for args in [
        &["table1"][..],
        &["protocol", "--seed", "11", "--message", "abc"][..],
        &["attack", "--x", "4", "--trials", "50", "--seed", "3"][..],
    ] {
        let a = qsdc(args);
        let b = qsdc(args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), Some(0));
    }
    let a = stdout(&qsdc(&["protocol", "--seed", "1"]));
    let b = stdout(&qsdc(&["protocol", "--seed", "2"]));
    assert_ne!(a, b);
}

#[test]
fn walk_returns_at_multiples_of_recurrence() {
    let text = stdout(&qsdc(&["walk", "--steps", "120"]));
    let r = rows(&text);
    assert_eq!(r.len(), 121);
    for t in [0, 60, 120] {
        let p: f64 = r[t][1].parse().unwrap();
        assert!((p - 1.0).abs() < 1e-9, "t={t}: {p}");
    }
    let p: f64 = r[30][1].parse().unwrap();
    assert!(p < 0.5);
}

#[test]
fn zero_steps_gives_one_row() {
    let r = rows(&stdout(&qsdc(&["walk", "--steps", "0"])));
    assert_eq!(r, vec![vec!["0".to_string(), "1".to_string()]]);
}

#[test]
fn noiseless_sweep_matches_walk() {
    let walk = rows(&stdout(&qsdc(&["walk", "--steps", "60"])));
    let sweep = rows(&stdout(&qsdc(&["noise-sweep", "--steps", "60", "--gamma", "0,0.01"])));
    let zero: Vec<&Vec<String>> = sweep.iter().filter(|r| r[1] == "0").collect();
    assert_eq!(zero.len(), walk.len());
    for (s, w) in zero.iter().zip(&walk) {
        assert_eq!((&s[0], &s[2]), (&w[0], &w[1]));
    }
    let damped: f64 = sweep
        .iter()
        .find(|r| r[0] == "60" && r[1] == "0.01")
        .unwrap()[2]
        .parse()
        .unwrap();
    assert!(damped < 1.0 && damped > 0.0);
}

#[test]
fn protocol_delivers_message() {
    for k in ["3", "5", "8"] {
        let out = qsdc(&["protocol", "--k", k, "--n", "80", "--message", "walk", "--seed", "5"]);
        let text = stdout(&out);
        assert_eq!(out.status.code(), Some(0), "k={k}\n{text}");
        assert_eq!(meta(&text, "message_exact").as_deref(), Some("true"));
        assert_eq!(meta(&text, "message_received").as_deref(), Some("walk"));
        assert!(text.contains("event\tphoton\trole\tell\tt\toutcome"));
    }
}

#[test]
fn majority_vote_under_noise() {
    let out = qsdc(&[
        "protocol", "--reps", "5", "--noise", "depolarizing", "--gamma", "0.0007", "--seed", "9",
    ]);
    let text = stdout(&out);
    assert_eq!(meta(&text, "reps").as_deref(), Some("5"));
    assert!(matches!(out.status.code(), Some(0 | 2)));
    assert_eq!(text.matches("# repetition=").count(), 5);
}

#[test]
fn intercept_resend_batch_within_oracle() {
    let out = qsdc(&[
        "protocol", "--eve", "intercept-resend", "--n", "8", "--trials", "400", "--seed", "4",
    ]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(meta(&text, "within_3sigma").as_deref(), Some("true"));
    assert_eq!(rows(&text).len(), 400);
}

#[test]
fn message_too_long_is_a_usage_error() {
    let out = qsdc(&["protocol", "--n", "4", "--message", "too long"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn untouched_channel_is_never_flagged() {
    let text = stdout(&qsdc(&["attack", "--x", "0", "--trials", "100"]));
    let detections = text
        .lines()
        .find_map(|l| l.strip_prefix("detections\t"))
        .unwrap();
    assert_eq!(detections, "0");
}

#[test]
fn config_file_and_flag_precedence() {
    let cfg = scratch("run.conf", "# walk\nk = 3\nsteps = 8\n");
    let text = stdout(&qsdc(&["walk", "--config", cfg.to_str().unwrap()]));
    assert_eq!(meta(&text, "k").as_deref(), Some("3"));
    let r = rows(&text);
    assert_eq!(r.len(), 9);
    assert_eq!(r[8][1], "1");
    let text = stdout(&qsdc(&["walk", "--config", cfg.to_str().unwrap(), "--steps", "2"]));
    assert_eq!(rows(&text).len(), 3);
}

#[test]
fn output_file() {
    let dest = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("table.csv");
    let out = qsdc(&["table1", "--out", dest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&dest).unwrap(), qsdc(&["table1"]).stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(qsdc(&["walk", "--bogus"]).status.code(), Some(1));
    assert_eq!(qsdc(&["--help"]).status.code(), Some(0));
    assert_eq!(qsdc(&["--version"]).status.code(), Some(0));
    assert_eq!(qsdc(&[]).status.code(), Some(1));
    assert_eq!(qsdc(&["walk", "--k", "abc"]).status.code(), Some(1));
    assert_eq!(qsdc(&["walk", "--reps", "2"]).status.code(), Some(1));
    let cfg = scratch("bad.conf", "colour=red\n");
    assert_eq!(
        qsdc(&["walk", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(
        qsdc(&["walk", "--config", "/nonexistent/qsdc.conf"]).status.code(),
        Some(1)
    );
}

#[test]
fn canonical_layout_verifies() {
    for args in [
        vec!["verify-optics".to_string()],
        vec!["verify-optics".into(), layout_file().to_str().unwrap().into()],
        vec!["verify-optics".into(), "sorter-bank".into(), "--k".into(), "8".into()],
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_qsdc")).args(&args).output().unwrap();
        let text = stdout(&out);
        assert_eq!(out.status.code(), Some(0), "{args:?}\n{text}");
        assert_eq!(rows(&text)[0][2], "true");
    }
}

#[test]
fn corrupted_layout_fails_verification() {
    let good = std::fs::read_to_string(layout_file()).unwrap();
    let bad = scratch("bad_spp.txt", &good.replace("spp path=4 m=6", "spp path=4 m=5"));
    let out = qsdc(&["verify-optics", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(rows(&stdout(&out))[0][2], "false");

    let swapped = scratch("bad_hwp.txt", &good.replace("hwp\n", "hwp rho=0.5\n"));
    assert_eq!(qsdc(&["verify-optics", swapped.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn empty_layout_is_identity() {
    let empty = scratch("empty.txt", "cycle k=5\n");
    let p = empty.to_str().unwrap();
    assert_eq!(qsdc(&["verify-optics", p, "--reference", "identity"]).status.code(), Some(0));
    assert_eq!(qsdc(&["verify-optics", p]).status.code(), Some(2));
}

#[test]
fn unparsable_layout_is_a_usage_error() {
    let bad = scratch("garbage.txt", "cycle k=5\nwidget\n");
    assert_eq!(qsdc(&["verify-optics", bad.to_str().unwrap()]).status.code(), Some(1));
}
