use std::path::Path;
use std::process::{Command, Output};

use selfmod_cli::output::read_histories_from;
use selfmod_cli::plot::{Frame, SeriesStats};

fn selfmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfmod")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Flags that keep runs small enough for a unit-test budget.
const SMALL: [&str; 4] = ["--steps", "20", "--hidden-width", "6"];

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    args.extend(extra);
    selfmod(&args)
}

#[test]
fn run_writes_one_row_per_seed_and_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let o = run_small(&csv, &["--seeds", "0..5", "--iterations", "100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 501);
    assert_eq!(
        lines[0],
        "seed,iteration,total_env_steps,parent_fitness,child_fitness,best_fitness,nonempty_buckets,range_min,range_max"
    );
    assert!(!text.contains('\r'));
    let rows = read_histories_from(&csv).unwrap();
    assert_eq!(rows.iter().filter(|r| r.seed == 4).count(), 100);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, mode) in [(&a, "fme"), (&b, "fme")] {
        assert!(run_small(path, &["--seeds", "3,7", "--iterations", "30", "--mode", mode]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    assert!(run_small(&c, &["--seeds", "3,7", "--iterations", "30", "--mode", "hillclimb"]).status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn auto_reward_feed_is_logged() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let o = run_small(&csv, &["--env", "bandit-swap", "--feed-reward", "auto", "--iterations", "2", "--seeds", "0"]);
    assert!(o.status.success());
    let log = stdout(&o);
    let line = log.lines().find(|l| l.starts_with("config:")).unwrap();
    assert!(line.contains("env=bandit-swap"));
    assert!(line.contains("feed_reward=on"));

    let o = run_small(&csv, &["--env", "bandit", "--iterations", "2", "--seeds", "0"]);
    assert!(stdout(&o).contains("feed_reward=off"));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    std::fs::write(&cfg, "# small run\niterations = 7\nseeds=1,2\nsampling=greedy\n").unwrap();
    let csv = dir.path().join("h.csv");
    let o = run_small(&csv, &["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("iterations=7 seeds=1,2"));
    assert!(stdout(&o).contains("sampling=greedy"));
    assert_eq!(read_histories_from(&csv).unwrap().len(), 14);

    let o = run_small(&csv, &["--config", cfg.to_str().unwrap(), "--iterations", "3"]);
    assert!(o.status.success());
    assert_eq!(read_histories_from(&csv).unwrap().len(), 6);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let o = run_small(&csv, &["--env", "pong"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pong"));

    assert_eq!(selfmod(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(selfmod(&["run", "--feed-reward", "maybe"]).status.code(), Some(1));

    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "colour=blue\n").unwrap();
    assert_eq!(run_small(&csv, &["--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(selfmod(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("missing").join("h.csv");
    let o = run_small(&csv, &["--iterations", "2", "--seeds", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn sweep_reports_each_sigma_and_the_best() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let mut args = vec!["sweep", "--out", out.to_str().unwrap(), "--iterations", "5", "--seeds", "0,1"];
    args.extend(SMALL);

    let mut single = args.clone();
    single.extend(["--sigmas", "0.01"]);
    assert!(selfmod(&single).status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("sigma,mean_final_best\n0.01,"));

    let o = selfmod(&args);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5);
    let max = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    let best = rows.iter().find(|r| r.1 == max).unwrap().0;
    assert!(stdout(&o).contains(&format!("best sigma: {best}")));

    assert_eq!(selfmod(&["sweep", "--sigmas", "0.1,-1"]).status.code(), Some(1));
}

fn write_csv(path: &Path, rows: &[(u64, usize, f64)]) {
    let mut text = String::from(
        "seed,iteration,total_env_steps,parent_fitness,child_fitness,best_fitness,nonempty_buckets,range_min,range_max\n",
    );
    for (seed, it, best) in rows {
        text += &format!("{seed},{it},{},0.5,0.5,{best},1,0,{best}\n", (it + 2) * 10);
    }
    std::fs::write(path, text).unwrap();
}

fn polyline_ys(svg: &str) -> Vec<f64> {
    let start = svg.find(r#"class="mean""#).unwrap();
    let points = &svg[start..];
    let points = &points[points.find("points=\"").unwrap() + 8..];
    let points = &points[..points.find('"').unwrap()];
    points.split(' ').map(|p| p.split_once(',').unwrap().1.parse().unwrap()).collect()
}

#[test]
fn constant_fitness_plots_a_flat_line_with_no_band() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flat.csv");
    write_csv(&csv, &[(0, 0, 0.75), (0, 1, 0.75), (0, 2, 0.75)]);
    let svg = dir.path().join("flat.svg");
    let o = selfmod(&["plot", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    let ys = polyline_ys(&text);
    assert_eq!(ys.len(), 3);
    assert!(ys.iter().all(|y| *y == ys[0]));

    let stats = SeriesStats::from_rows("flat", &read_histories_from(&csv).unwrap());
    assert_eq!(stats.std, vec![0.0; 3]);
}

#[test]
fn band_half_width_is_the_seed_standard_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("five.csv");
    let values = [0.1, 0.2, 0.3, 0.4, 0.5];
    let mut rows = Vec::new();
    for (seed, v) in values.iter().enumerate() {
        rows.push((seed as u64, 0, *v));
        rows.push((seed as u64, 1, 0.9));
    }
    write_csv(&csv, &rows);
    let stats = SeriesStats::from_rows("five", &read_histories_from(&csv).unwrap());
    // Deviations from 0.3 are 0.2, 0.1, 0, 0.1, 0.2: variance 0.1 / 5.
    assert!((stats.mean[0] - 0.3).abs() < 1e-15);
    assert!((stats.std[0] - 0.02f64.sqrt()).abs() < 1e-15);
    assert_eq!(stats.std[1], 0.0);

    let f = Frame::fit(std::slice::from_ref(&stats));
    let half = (f.py(stats.mean[0] - stats.std[0]) - f.py(stats.mean[0] + stats.std[0])) / 2.0;
    let scale = f.py(0.0) - f.py(1.0);
    assert!((half / scale - 0.02f64.sqrt()).abs() < 1e-12);

    let svg = dir.path().join("five.svg");
    assert!(selfmod(&["plot", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]).status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().contains(r#"class="band""#));
}

#[test]
fn malformed_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "a,b\n1,2\n").unwrap();
    let svg = dir.path().join("bad.svg");
    let o = selfmod(&["plot", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    write_csv(&csv, &[(0, 0, 0.5)]);
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text = text.replace("0.5,0.5,0.5", "0.5,0.5,oops");
    std::fs::write(&csv, text).unwrap();
    assert_eq!(selfmod(&["plot", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn equivalence_check_passes() {
    let o = selfmod(&["verify-equivalence", "--seeds", "0..3", "--steps", "200", "--hidden-width", "8"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches(": match").count(), 3);
}

#[test]
fn meta_bandit_preset_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["preset", "fig3", "--out-dir", dir.path().to_str().unwrap(), "--iterations", "3"];
    args.extend(["--seeds", "0,1"]);
    args.extend(SMALL);
    let o = selfmod(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["fig3-reward.csv", "fig3-no-reward.csv", "fig3-eval.csv", "fig3.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let eval = std::fs::read_to_string(dir.path().join("fig3-eval.csv")).unwrap();
    assert_eq!(eval.lines().count(), 5);
}

#[test]
fn bandit_preset_writes_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["preset", "fig2-left", "--out-dir", dir.path().to_str().unwrap(), "--iterations", "3"];
    args.extend(["--seeds", "0"]);
    args.extend(SMALL);
    let o = selfmod(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("tuned sigma:"));
    for f in ["fig2-left-fme.csv", "fig2-left-hillclimb.csv", "fig2-left-sweep.csv", "fig2-left.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
