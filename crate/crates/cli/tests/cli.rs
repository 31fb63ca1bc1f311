use std::path::Path;
use std::process::{Command, Output};

fn wrelax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrelax"))
        .args(args)
        .output()
        .unwrap()
}

fn small<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["--materials", "air-water", "--dx", "1/16", "--steps", "10"];
    v.extend_from_slice(extra);
    v
}

fn without_wall_time(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn converged_run_exits_zero_and_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, svg) = (dir.path().join("out.csv"), dir.path().join("out.svg"));
    let out = wrelax(&small(&[
        "--out",
        csv.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
    ]));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("method,k,update_norm,interface_error,wall_time\n"));
    for m in ["jacobi", "gs-dn", "gs-nd", "async"] {
        assert!(text.contains(&format!("summary:{m},")), "{m} missing");
    }
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn iteration_limit_exits_one() {
    let out = wrelax(&small(&["--method", "jacobi", "--kmax", "1"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(
        wrelax(&small(&["--materials", "air-lava"])).status.code(),
        Some(2)
    );
    assert_eq!(wrelax(&small(&["--dx", "0.3"])).status.code(), Some(2));
    assert_eq!(wrelax(&small(&["--relax", "1.5"])).status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let csv = dir.path().join("run.csv");
    std::fs::write(
        &cfg,
        format!("# small run\nmaterials = water-steel\ndx = 1/16\nsteps = 10\nmethod = gs-dn\nout = {}\n", csv.display()),
    )
    .unwrap();
    let out = wrelax(&["--config", cfg.to_str().unwrap(), "--method", "gs-nd"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("summary:gs-nd,") && !text.contains("gs-dn"));
}

#[test]
fn equal_seeds_give_equal_csv_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    for tag in ["a", "b"] {
        let (csv, trace) = (p(&format!("{tag}.csv")), p(&format!("{tag}.trace")));
        let out = wrelax(&small(&[
            "--method",
            "async",
            "--seed",
            "11",
            "--out",
            csv.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]));
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(
        without_wall_time(&p("a.csv")),
        without_wall_time(&p("b.csv"))
    );
    assert_eq!(
        std::fs::read(p("a.trace")).unwrap(),
        std::fs::read(p("b.trace")).unwrap()
    );

    let out = wrelax(&small(&[
        "--method",
        "async",
        "--seed",
        "99",
        "--replay",
        p("a.trace").to_str().unwrap(),
        "--out",
        p("c.csv").to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        without_wall_time(&p("a.csv")),
        without_wall_time(&p("c.csv"))
    );
}

#[test]
fn repeat_writes_aggregate_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rep.csv");
    let out = wrelax(&small(&[
        "--method",
        "async",
        "--repeat",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(0));
    let agg = std::fs::read_to_string(dir.path().join("rep.repeat.csv")).unwrap();
    assert!(agg.starts_with("method,runs,converged,mean_iterations"));
    assert!(agg.lines().nth(1).unwrap().starts_with("async,3,3,"));
}

#[test]
fn relax_table_subcommand() {
    let out = wrelax(&["relax-table", "--materials", "water-steel"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rho_jacobi = 0.35"), "{text}");
}
