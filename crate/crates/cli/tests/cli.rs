use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn unipred(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unipred"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn singleton_class_passes_with_zero_entropy() {
    let tmp = tempfile::tempdir().unwrap();
    let o = unipred(
        &["verify-bounds"],
        &configs().join("singleton.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json = std::fs::read_to_string(tmp.path().join("bounds_n8.json")).unwrap();
    let reports: serde_json::Value = serde_json::from_str(&json).unwrap();
    for report in reports.as_array().unwrap() {
        assert_eq!(report["entropy"]["h"].as_f64(), Some(0.0));
        for rel in report["relations"].as_array().unwrap() {
            let verdict = rel["verdict"].as_str().unwrap();
            assert!(verdict == "pass" || verdict == "skipped", "{rel}");
        }
    }
}

#[test]
fn shipped_two_bernoulli_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = unipred(
        &["verify-bounds"],
        &configs().join("two_bernoulli.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for n in [4, 6, 8, 10, 12, 14] {
        assert!(tmp.path().join(format!("bounds_n{n}.json")).exists());
    }
    assert!(tmp.path().join("trends.json").exists());
}

#[test]
fn mixed_class_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = unipred(
        &["verify-bounds"],
        &configs().join("mixed_class.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn monte_carlo_mode_is_rejected_by_verify_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = unipred(
        &["verify-bounds"],
        &configs().join("monte_carlo.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exact"));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        // unknown true measure
        "true_measure = \"nope\"\ncomponents = [{ family = \"bernoulli\", id = \"a\", theta = 0.5, weight = 1.0 }]",
        // exact horizon beyond the cap
        "true_measure = \"a\"\nhorizons = [40]\ncomponents = [{ family = \"bernoulli\", id = \"a\", theta = 0.5, weight = 1.0 }]",
        // weights above one
        "true_measure = \"a\"\ncomponents = [{ family = \"bernoulli\", id = \"a\", theta = 0.5, weight = 1.5 }]",
        // unknown key
        "colour = \"blue\"",
    ];
    for text in cases {
        let cfg = write_config(tmp.path(), text);
        let o = unipred(&["verify-bounds"], &cfg, &tmp.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
}

#[test]
fn monte_carlo_needs_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "true_measure = \"a\"\nmode = \"monte-carlo\"\nsamples = 100\nhorizons = [20]\n\
                components = [{ family = \"bernoulli\", id = \"a\", theta = 0.5, weight = 1.0 }]";
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    assert_eq!(unipred(&["simulate"], &cfg, &out).status.code(), Some(2));
    let o = unipred(&["simulate", "--seed", "3"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(out.join("expectations_n20.csv").exists());
}

#[test]
fn simulate_monte_carlo_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "true_measure = \"b\"\nmode = \"monte-carlo\"\nsamples = 2000\nseed = 11\nhorizons = [24]\n\
                components = [\n  { family = \"bernoulli\", id = \"a\", theta = 0.25, weight = 0.5 },\n  \
                { family = \"bernoulli\", id = \"b\", theta = 0.75, weight = 0.5 },\n]";
    let cfg = write_config(tmp.path(), text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(
        unipred(&["simulate", "--threads", "2"], &cfg, &a)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        unipred(&["simulate", "--threads", "1"], &cfg, &b)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
}

const SMALL_GRID: &str = "[inequalities]\ngrid_count = 200\nsamples = 12\n";

#[test]
fn inequality_scans_pass_on_the_admissible_region() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_GRID);
    let out = tmp.path().join("out");
    let o = unipred(&["inequalities"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for name in ["basic2", "basic1", "basic4", "kulbound"] {
        assert!(out.join(format!("{name}.csv")).exists(), "{name}");
    }
}

#[test]
fn explore_mode_logs_violations_without_failing() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL_GRID}which = [\"basic2\"]\nexplore = [{{ inequality = \"basic2\", a = 1.0, b = 1.05 }}]\n"
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = unipred(&["inequalities"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("inequalities_summary.json")).unwrap(),
    )
    .unwrap();
    let explore = &summary.as_array().unwrap()[1];
    assert_eq!(explore["mode"], "explore");
    assert!(explore["violations"].as_u64().unwrap() > 0);
}

#[test]
fn malformed_grid_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    for text in [
        "[inequalities]\neps_b = 0.0\n",
        "[inequalities]\ngrid_count = 1\n",
        "[inequalities]\nwhich = [\"basic9\"]\n",
    ] {
        let cfg = write_config(tmp.path(), text);
        let o = unipred(&["inequalities"], &cfg, &tmp.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
}

fn dice_config(dir: &Path, extra: &str) -> PathBuf {
    write_config(
        dir,
        &format!("seed = 5\n[dicegame]\nrounds = 3000\ngames = 20\npredictors = [\"theta-mu\", \"mu\"]\n{extra}"),
    )
}

#[test]
fn dicegame_profit_rates_match_closed_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dice_config(tmp.path(), "");
    let out = tmp.path().join("out");
    let o = unipred(&["dicegame"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("dicegame_summary.json")).unwrap())
            .unwrap();
    let rate = |i: usize| {
        summary["predictors"][i]["mean_profit_per_round"]
            .as_f64()
            .unwrap()
    };
    // 60000 rounds in total; the per-round profit has standard deviation below 2.5
    assert!((rate(0) - 1.0 / 3.0).abs() < 0.05, "{}", rate(0));
    assert!((rate(1) + 2.0 / 9.0).abs() < 0.05, "{}", rate(1));
    assert!((summary["turnaround_bound"].as_f64().unwrap() - 227.5).abs() < 0.1);
}

#[test]
fn dicegame_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dice_config(tmp.path(), "dealer = \"feedback\"\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(unipred(&["dicegame"], &cfg, &a).status.code(), Some(0));
    assert_eq!(
        unipred(&["dicegame", "--threads", "1"], &cfg, &b)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));

    let c = tmp.path().join("c");
    assert_eq!(
        unipred(&["dicegame", "--seed", "6"], &cfg, &c)
            .status
            .code(),
        Some(0)
    );
    assert_ne!(read_dir_sorted(&a), read_dir_sorted(&c));
}

#[test]
fn unwinnable_game_names_the_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dice_config(tmp.path(), "stake_cents = 400\n");
    let o = unipred(&["dicegame"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stake/payout"));
}

#[test]
fn approximate_m_writes_a_reloadable_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[semimeasure]\nmachine = \"echo\"\ncap = 10\nfuel = 64\ndepth = 6\n",
    );
    let out = tmp.path().join("out");
    let o = unipred(&["approximate-m"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = std::fs::read_to_string(out.join("semimeasure.json")).unwrap();
    let table = unipred::semimeasure::SemimeasureTable::from_json(&text).unwrap();
    assert_eq!(table.mass(&[true, false, true]).unwrap(), 0.125);
}
