use geobayes::bayes::{conditional_moments, PosteriorDraws};
use geobayes::io::{parse_dataset_csv, read_dataset_csv};
use geobayes::krige::{dedup_locations, neighborhood};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geobayes(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geobayes"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, seed: &str, n: &str) -> String {
    let o = geobayes(dir, &["synth", "--seed", seed, "--n", n]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("synth.csv").to_str().unwrap().to_string()
}

#[test]
fn synth_is_deterministic_per_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), "3", "40");
    synth(b.path(), "3", "40");
    let fa = fs::read(a.path().join("synth.csv")).unwrap();
    assert_eq!(fa, fs::read(b.path().join("synth.csv")).unwrap());
    synth(b.path(), "4", "40");
    assert_ne!(fa, fs::read(b.path().join("synth.csv")).unwrap());
    let (d, _) = parse_dataset_csv(&fa).unwrap();
    assert_eq!(d.len(), 40);
    assert!(d.values().iter().all(|&v| v > 0.0));
}

#[test]
fn synth_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = geobayes(dir.path(), &["synth"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("synth.csv").exists());
}

#[test]
fn header_only_input_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    fs::write(&p, "EASTING,NORTHING,VALUE\n").unwrap();
    let o = geobayes(dir.path(), &["variogram", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty dataset"), "{}", stderr(&o));
}

#[test]
fn bad_field_reports_its_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    let mut text = String::from("EASTING,NORTHING,VALUE\n");
    for i in 0..10 {
        let v = if i == 6 { "abc".to_string() } else { format!("{}", 1.0 + i as f64) };
        text.push_str(&format!("{},{},{v}\n", i as f64, 2.0 * i as f64));
    }
    fs::write(&p, text).unwrap();
    let o = geobayes(dir.path(), &["variogram", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("row 7") && e.contains("VALUE"), "{e}");
}

#[test]
fn kriging_at_the_data_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "5", "30");
    let data = read_dataset_csv(Path::new(&input)).unwrap().0;
    for method in ["simple", "ordinary", "universal", "bayes"] {
        let o = geobayes(
            dir.path(),
            &[
                "krige",
                "--input",
                &input,
                "--log",
                "--method",
                method,
                "--model",
                "kind=exponential nugget=0.0 sill=1.5 range=60.0",
                "--at-data",
            ],
        );
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        let text = fs::read_to_string(dir.path().join("krige.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,prediction,sd,n_neighbors,status"));
        let mut n = 0;
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let pred: f64 = f[2].parse().unwrap();
            let sd: f64 = f[3].parse().unwrap();
            assert!((pred - data.values()[i].ln()).abs() < 1e-8, "{method} row {i}");
            assert!(sd < 1e-6, "{method} row {i}: sd {sd}");
            assert_eq!(f[5], "ok");
            n += 1;
        }
        assert_eq!(n, 30);
    }
}

#[test]
fn point_density_with_one_draw_is_lognormal() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "8", "120");
    let draws = dir.path().join("draws.csv");
    let row = [0.05, 1.2, 90.0, 0.5, 0.4, 30.0, 1.5];
    let text = format!(
        "nugget,sill1,range1,nu1,sill2,range2,nu2,objective,converged\n{},0.0,true\n",
        row.map(|v| v.to_string()).join(",")
    );
    fs::write(&draws, text).unwrap();
    let o = geobayes(
        dir.path(),
        &["density", "--input", &input, "--draws", draws.to_str().unwrap(), "--at", "-20,15", "--radius", "60"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let log_data = read_dataset_csv(Path::new(&input)).unwrap().0.log_transformed().unwrap();
    let x0 = [-20.0, 15.0];
    let nb = dedup_locations(&neighborhood(&log_data, &x0, 60.0).unwrap()).0;
    let draw = PosteriorDraws::new(vec![row]).unwrap().rows()[0];
    let (m, v) = conditional_moments(&x0, &nb, &draw, 0.0, 10000.0).unwrap();
    let out = fs::read_to_string(dir.path().join("density_point.csv")).unwrap();
    let mut checked = 0;
    for line in out.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let y = f[0];
        let want = (-(y.ln() - m).powi(2) / (2.0 * v)).exp() / (y * (2.0 * std::f64::consts::PI * v).sqrt());
        if want > 1e-200 {
            assert!((f[1] - want).abs() <= 1e-9 * want, "y={y}: {} vs {want}", f[1]);
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn failed_commands_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "9", "30");
    // krige.csv is written before the heatmap request is rejected
    let o = geobayes(
        dir.path(),
        &["krige", "--input", &input, "--model", "kind=spherical nugget=0.1 sill=1.0 range=50.0", "--at", "0,0", "--pgm"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("--pgm needs --grid"), "{}", stderr(&o));
    assert!(!dir.path().join("krige.csv").exists());
    assert!(!dir.path().join("krige.pgm").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(geobayes(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(geobayes(dir.path(), &["krige", "--grid", "1", "2"]).status.code(), Some(1));
    let input = synth(dir.path(), "2", "20");
    let both = geobayes(
        dir.path(),
        &["krige", "--input", &input, "--model", "kind=exponential nugget=0.0 sill=1.0 range=5.0", "--at", "0,0", "--at-data"],
    );
    assert_eq!(both.status.code(), Some(1));
    let bad_model = geobayes(dir.path(), &["krige", "--input", &input, "--model", "kind=matern sill=1.0", "--at", "0,0"]);
    assert_eq!(bad_model.status.code(), Some(1));
    assert!(stderr(&bad_model).contains("invalid model specification"), "{}", stderr(&bad_model));
    let help = Command::new(env!("CARGO_BIN_EXE_geobayes")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# synthetic run\nseed = 21\nn = 25\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = geobayes(dir.path(), &["synth", "--config", c]);
    assert!(o.status.success(), "{}", stderr(&o));
    let from_cfg = fs::read(dir.path().join("synth.csv")).unwrap();
    assert_eq!(parse_dataset_csv(&from_cfg).unwrap().0.len(), 25);
    let o = geobayes(dir.path(), &["synth", "--seed", "21", "--n", "25"]);
    assert!(o.status.success());
    assert_eq!(fs::read(dir.path().join("synth.csv")).unwrap(), from_cfg);
    let o = geobayes(dir.path(), &["synth", "--config", c, "--n", "12"]);
    assert!(o.status.success());
    assert_eq!(read_dataset_csv(&dir.path().join("synth.csv")).unwrap().0.len(), 12);
    fs::write(&cfg, "seed = 1\nseed = 2\n").unwrap();
    assert_eq!(geobayes(dir.path(), &["synth", "--config", c]).status.code(), Some(1));
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = synth(d, "13", "120");
    let run = |args: &[&str]| {
        let o = geobayes(d, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    run(&["variogram", "--input", &input, "--log", "--estimator", "huber"]);
    let vario = d.join("variogram.csv");
    run(&["fit", "--input", vario.to_str().unwrap(), "--family", "exponential"]);
    let model = d.join("model.txt");
    run(&["simulate", "--seed", "3", "--model-file", model.to_str().unwrap(), "--grid", "6", "5", "-100", "100", "-80", "80", "--n-sims", "4"]);
    let simb = fs::read(d.join("sims.simb")).unwrap();
    let batch = geobayes::io::decode_simbatch(&simb).unwrap();
    assert_eq!(batch.shape(), (30, 4));
    run(&["posterior", "--input", &input, "--log", "--seed", "4", "--n-sims", "12"]);
    let post = d.join("posterior.csv");
    run(&["density", "--input", &input, "--draws", post.to_str().unwrap(), "--grid", "5", "4", "-100", "100", "-80", "80", "--pgm"]);
    assert!(fs::read_to_string(d.join("density.pgm")).unwrap().starts_with("P2\n5 4\n"));
    run(&["copula-fit", "--draws", post.to_str().unwrap()]);
    let summary = fs::read_to_string(d.join("copula.txt")).unwrap();
    assert!(summary.starts_with("family=frank theta="), "{summary}");
    let joint = fs::read_to_string(d.join("joint_density.csv")).unwrap();
    assert!(joint.starts_with("nugget,sill1,range1,nue1,sill2,range2,nue2,dichte\n"));
}

#[test]
fn numeric_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("wild.csv");
    let mut text = String::from("lag_center,mean_pair_distance,gamma_hat,n_pairs\n");
    for i in 1..=10 {
        let g = if i % 2 == 1 { 1e300 } else { 1e-300 };
        text.push_str(&format!("{i}.0,{i}.0,{g:e},10\n"));
    }
    fs::write(&p, text).unwrap();
    let o = geobayes(dir.path(), &["fit", "--input", p.to_str().unwrap(), "--family", "exponential"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("fit.csv").exists());
}
