use std::fs;
use std::path::Path;
use std::process::Command;

use selfwalk::cli::{parse_header, run_cli, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

struct Outcome {
    code: u8,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("selfwalk").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(cli(&["--help"]).code, EXIT_PASS);
    let v = cli(&["--version"]);
    assert_eq!(v.code, EXIT_PASS);
    assert!(v.stdout.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = cli(&["run", "--preset", "tsrw", "--stepz", "10"]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(!o.stderr.is_empty());
}

#[test]
fn half_offset_literal_must_be_height_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--kernel", "-1/2:1", "--steps", "10", "--out-dir", path_str(dir.path())]);
    assert_eq!(o.code, EXIT_USAGE, "{}", o.stderr);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none(), "nothing written on a usage error");
}

#[test]
fn unknown_preset_is_a_usage_error() {
    assert_eq!(cli(&["classify", "--preset", "nope", "--steps", "10"]).code, EXIT_USAGE);
}

#[test]
fn gibbs_check_refuses_indefinite_kernel() {
    let o = cli(&["gibbs-check", "--preset", "third_derivative", "--w", "1", "--H", "1"]);
    assert_eq!(o.code, EXIT_USAGE, "{}{}", o.stdout, o.stderr);
}

#[test]
fn gibbs_check_tsrw_passes() {
    let o = cli(&["gibbs-check", "--preset", "tsrw", "--w", "1", "--H", "2"]);
    assert_eq!(o.code, EXIT_PASS, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.contains("rn_identity = PASS"));
}

#[test]
fn empty_sweep_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = cli(&["sweep", "--grid", "circle", "--angles", "0", "--steps", "100", "--out", path_str(&out)]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(!out.exists());
}

#[test]
fn run_writes_trajectory_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let d = path_str(dir.path());
    let o = cli(&["run", "--preset", "tsrw", "--steps", "500", "--seed", "3", "--out-dir", d, "--name", "w"]);
    assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
    let traj = fs::read_to_string(dir.path().join("w_trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert!(lines.next().unwrap().starts_with("# selfwalk "));
    assert_eq!(lines.next().unwrap(), "n,position,range_min,range_max");
    let rows: Vec<Vec<i64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.first().unwrap()[0], 0);
    assert_eq!(rows.last().unwrap()[0], 500);
    for r in &rows {
        assert!(r[2] <= r[1] && r[1] <= r[3]);
    }
    let profile = fs::read_to_string(dir.path().join("w_profile.csv")).unwrap();
    let total: u64 = profile.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 500, "every step crosses exactly one edge");
}

#[test]
fn header_regenerates_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let o = cli(&[
        "classify", "--kernel", "-3/2:-2;-1/2:1;1/2:1", "--steps", "3000", "--seeds", "3", "--master-seed", "9",
        "--out", path_str(&first),
    ]);
    assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
    let original = fs::read(&first).unwrap();
    let text = String::from_utf8(original.clone()).unwrap();
    let mut args = parse_header(text.lines().next().unwrap()).unwrap();
    let second = dir.path().join("second.csv");
    args.extend(["--out".to_string(), path_str(&second).to_string()]);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(cli(&argv).code, EXIT_PASS);
    assert_eq!(fs::read(&second).unwrap(), original);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    let from_file = dir.path().join("file.csv");
    let from_flags = dir.path().join("flags.csv");
    fs::write(&config, format!("threads = 1\n[classify]\npreset = \"ballistic\"\nsteps = 2000\nseeds = 2\nout = {:?}\n", path_str(&from_file)))
        .unwrap();
    assert_eq!(cli(&["--config", path_str(&config), "classify"]).code, EXIT_PASS);
    let o = cli(&["classify", "--preset", "ballistic", "--steps", "2000", "--seeds", "2", "--out", path_str(&from_flags)]);
    assert_eq!(o.code, EXIT_PASS);
    assert_eq!(fs::read(from_file).unwrap(), fs::read(from_flags).unwrap());

    fs::write(&config, "[classify]\nstep = 10\n").unwrap();
    assert_eq!(cli(&["--config", path_str(&config), "classify"]).code, EXIT_USAGE);
}

#[test]
fn sweep_resumes_from_completion_markers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let base = ["sweep", "--a-range", "-1:0:1", "--b-range", "1:2:1", "--seeds", "2", "--steps", "2000"];
    let with_out = |extra: &[&'static str]| {
        let mut v: Vec<String> = base.iter().map(|s| s.to_string()).collect();
        v.extend(extra.iter().map(|s| s.to_string()));
        v.extend(["--out".to_string(), path_str(&out).to_string()]);
        v
    };
    let run = |args: Vec<String>| {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        cli(&argv)
    };

    let o = run(with_out(&[]));
    assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
    let reference = fs::read_to_string(&out).unwrap();
    let parts = dir.path().join("sweep.csv.parts");
    assert!(!parts.exists(), "markers are removed after a complete sweep");
    let head = reference.lines().next().unwrap();
    assert_eq!(reference.lines().count(), 2 + 4 * 2);

    // A marker from this sweep is trusted; one from a different sweep is not.
    fs::create_dir_all(&parts).unwrap();
    fs::write(parts.join("point-000000.csv"), format!("{head}\nSENTINEL\n")).unwrap();
    fs::write(parts.join("point-000001.csv"), "# selfwalk other\nSTALE\n").unwrap();
    let o = run(with_out(&[]));
    assert_eq!(o.code, EXIT_PASS);
    assert!(o.stdout.contains("resumed_points = 1"), "{}", o.stdout);
    let resumed = fs::read_to_string(&out).unwrap();
    assert!(resumed.contains("SENTINEL"));
    assert!(!resumed.contains("STALE"));
    let without_point_0 = |s: &str| -> Vec<String> {
        s.lines().filter(|l| !l.starts_with("-1,1,") && *l != "SENTINEL").map(str::to_string).collect()
    };
    assert_eq!(without_point_0(&resumed), without_point_0(&reference));

    fs::create_dir_all(&parts).unwrap();
    fs::write(parts.join("point-000000.csv"), format!("{head}\nSENTINEL\n")).unwrap();
    let o = run(with_out(&["--fresh"]));
    assert_eq!(o.code, EXIT_PASS);
    assert!(o.stdout.contains("resumed_points = 0"));
    assert_eq!(fs::read_to_string(&out).unwrap(), reference);
}

#[test]
fn commands_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = path_str(&out);
    let commands: Vec<Vec<&str>> = vec![
        vec!["classify", "--preset", "tsrw", "--steps", "3000", "--seeds", "6", "--out", o],
        vec!["sweep", "--grid", "circle", "--angles", "5", "--seeds", "2", "--steps", "2000", "--out", o],
        vec!["stuck-scan", "--k-min", "1", "--k-max", "2", "--seeds", "2", "--steps", "20000", "--out", o],
        vec!["coupling-check", "--steps", "3000", "--seeds", "4", "--out", o],
    ];
    for command in commands {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let mut argv = vec!["--threads", threads];
            argv.extend(&command);
            let r = cli(&argv);
            assert!(r.code == EXIT_PASS || r.code == EXIT_FAIL, "{command:?}: {}", r.stderr);
            outputs.push((r.code, r.stdout, fs::read(&out).unwrap()));
        }
        assert!(outputs[0] == outputs[1], "{command:?} differs between 1 and 3 threads");
    }
}

#[test]
fn coupling_check_writes_per_seed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let scenario = dir.path().join("scenario.csv");
    let o = cli(&[
        "coupling-check", "--steps", "20000", "--seeds", "5", "--first-x", "50", "--out", path_str(&out),
        "--scenario", path_str(&scenario),
    ]);
    assert!(o.code == EXIT_PASS || o.code == EXIT_FAIL, "{}", o.stderr);
    assert!(o.stdout.contains("parity_violations = 0"), "{}", o.stdout);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2 + 5);
    let scenario = fs::read_to_string(&scenario).unwrap();
    assert!(scenario.lines().nth(1).unwrap().starts_with("x,sigma_x,e1,e2,e3,e4,M_x,recursion_ok"));
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_selfwalk");
    let ok = Command::new(bin).args(["--version"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("selfwalk"));
    let bad = Command::new(bin).args(["run", "--kernel", "-1/2:1", "--steps", "10"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(i32::from(EXIT_USAGE)));
}
