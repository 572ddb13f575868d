//! Black-box tests of the `dirac` binary: exit codes, error messages,
//! file formats, and determinism.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dirac"));
    c.env("NO_COLOR", "1");
    c
}

fn work_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dirac-cli-{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data_rows(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with(|c: char| c.is_ascii_alphabetic()))
        .map(|l| l.to_string())
        .collect()
}

/// Confining half-line model: p(x) = x sampled at two nodes, q = 0.
fn write_confining(dir: &PathBuf) -> (PathBuf, PathBuf) {
    let pot = dir.join("confining.csv");
    fs::write(&pot, "x,p,q\n0,0,0\n30,30,0\n").unwrap();
    let cfg = dir.join("window.cfg");
    fs::write(
        &cfg,
        format!(
            "mode = half-line-window\npotential.kind = sampled\npotential.file = {}\ngrid.x_end = 8.0\n",
            pot.display()
        ),
    )
    .unwrap();
    (cfg, pot)
}

#[test]
fn missing_config_names_the_path() {
    let out = bin()
        .args(["solve", "--config", "/nonexistent/run.cfg", "--out", "/dev/null"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("/nonexistent/run.cfg"), "{err}");
}

#[test]
fn solve_is_deterministic_and_matches_the_free_closed_form() {
    let dir = work_dir("solve");
    let cfg = dir.join("free.cfg");
    fs::write(&cfg, "potential.kind = zero\n").unwrap();
    let run = |out: &PathBuf| {
        let st = bin()
            .args(["solve", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .args(["--n-min", "-5", "--n-max", "5"])
            .status()
            .unwrap();
        assert!(st.success());
    };
    let (o1, o2) = (dir.join("spec1.csv"), dir.join("spec2.csv"));
    run(&o1);
    run(&o2);
    let (t1, t2) = (fs::read(&o1).unwrap(), fs::read(&o2).unwrap());
    assert_eq!(t1, t2, "two runs should be byte-identical");

    let text = String::from_utf8(t1).unwrap();
    for row in data_rows(&text) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 6, "{row}");
        let n: f64 = cols[0].parse().unwrap();
        let lambda: f64 = cols[1].parse().unwrap();
        let a: f64 = cols[2].parse().unwrap();
        assert!((lambda - n).abs() <= 1e-9, "{row}");
        assert!((a - PI).abs() <= 1e-8, "{row}");
        assert!(cols[1].contains('e'), "expected scientific notation: {row}");
    }
}

#[test]
fn gradient_of_the_free_ground_state() {
    let dir = work_dir("gradient");
    let cfg = dir.join("free.cfg");
    fs::write(&cfg, "potential.kind = zero\n").unwrap();
    let out_path = dir.join("grad.csv");
    let st = bin()
        .args(["gradient", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .args(["--n", "0"])
        .status()
        .unwrap();
    assert!(st.success());
    let text = fs::read_to_string(&out_path).unwrap();
    let d_alpha: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# d_alpha="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((d_alpha + 1.0 / PI).abs() <= 1e-8);
    // free ground state: h = (0, -1)/sqrt(pi), so d_p = -1/pi and d_q = 0
    for row in data_rows(&text) {
        let cols: Vec<&str> = row.split(',').collect();
        let d_p: f64 = cols[1].parse().unwrap();
        let d_q: f64 = cols[2].parse().unwrap();
        assert!((d_p + 1.0 / PI).abs() <= 1e-8, "{row}");
        assert!(d_q.abs() <= 1e-8, "{row}");
    }
}

#[test]
fn identity_deformation_reproduces_a_sampled_potential() {
    let dir = work_dir("deform-id");
    let pot_path = dir.join("pot.csv");
    let n = 201;
    let mut text = String::from("x,p,q\n");
    for i in 0..n {
        let x = 3.0 * i as f64 / (n - 1) as f64;
        text.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            x,
            0.2 * (x).cos(),
            0.1 * (2.0 * x).sin()
        ));
    }
    fs::write(&pot_path, &text).unwrap();
    let cfg = dir.join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "potential.kind = sampled\npotential.file = {}\ngrid.x_end = 3.0\n",
            pot_path.display()
        ),
    )
    .unwrap();
    let out_path = dir.join("deformed.csv");
    let st = bin()
        .args(["deform", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .args(["--m", "0", "--t", "0.0"])
        .status()
        .unwrap();
    assert!(st.success());
    let got = fs::read_to_string(&out_path).unwrap();
    let (inp, outp) = (data_rows(&text), data_rows(&got));
    assert_eq!(inp.len(), outp.len());
    for (a, b) in inp.iter().zip(&outp) {
        let pa: Vec<f64> = a.split(',').map(|v| v.parse().unwrap()).collect();
        let pb: Vec<f64> = b.split(',').map(|v| v.parse().unwrap()).collect();
        for k in 0..3 {
            assert!((pa[k] - pb[k]).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn removing_a_bound_state_concentrated_in_the_window_is_singular() {
    let dir = work_dir("remove");
    let (cfg, _) = write_confining(&dir);
    let out = bin()
        .args(["surgery", "remove", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out.csv"))
        .args(["--mu", "-0.8"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("theta fell below the floor"), "{err}");
}

#[test]
fn malformed_fit_target_row_names_the_line() {
    let dir = work_dir("fit-bad");
    let cfg = dir.join("free.cfg");
    fs::write(&cfg, "potential.kind = zero\n").unwrap();
    let targets = dir.join("targets.csv");
    fs::write(&targets, "n,lambda\n0,0.25\n1,not-a-number\n").unwrap();
    let out = bin()
        .args(["fit", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("fit.csv"))
        .arg("--targets")
        .arg(&targets)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains(":3"), "{err}");
}

#[test]
fn plan_intermediates_become_numbered_sidecars() {
    let dir = work_dir("plan");
    let cfg = dir.join("window.cfg");
    fs::write(&cfg, "mode = half-line-window\npotential.kind = zero\ngrid.x_end = 8.0\n")
        .unwrap();
    let plan = dir.join("plan.csv");
    fs::write(&plan, "op,nu,t,c\nadd,0.7,,1.0\nscale,0.7,1.0,\n").unwrap();
    let out_path = dir.join("final.csv");
    let st = bin()
        .args(["surgery", "plan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .arg("--plan")
        .arg(&plan)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(out_path.exists());
    assert!(dir.join("final.csv.step1").exists());
    assert!(dir.join("final.csv.step2").exists());
    // last intermediate equals the final potential
    let step2 = fs::read_to_string(dir.join("final.csv.step2")).unwrap();
    let fin = fs::read_to_string(&out_path).unwrap();
    assert_eq!(data_rows(&step2), data_rows(&fin));
}

#[test]
fn no_color_disables_ansi_escapes() {
    let out = bin().args(["verify", "--suite", "surgery"]).output().unwrap();
    assert!(out.status.success());
    assert!(!out.stdout.contains(&0x1b), "found ESC byte in report");
}
