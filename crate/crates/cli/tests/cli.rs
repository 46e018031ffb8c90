use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ncfdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncfdg")).args(args).output().expect("run ncfdg")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn convergence_meets_an_expected_rate() {
    let o = ncfdg(&["convergence", "--problem", "pure_diffusion", "--levels", "4,8,16", "--expect-eoc", "1.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.starts_with("problem,degree,mode,tau,n,h,dofs"));
    assert_eq!(csv.lines().count(), 4);
    assert!(stderr(&o).contains("PASS final energy EOC"));
}

#[test]
fn failed_assertion_exits_with_one() {
    let o = ncfdg(&["convergence", "--levels", "4,8", "--expect-eoc", "3.0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL final energy EOC"));
}

#[test]
fn bad_input_exits_with_two() {
    for args in [
        &["convergence", "--mode", "strict"][..],
        &["convergence", "--problem", "nothing"][..],
        &["convergence", "--levels", "8,4"][..],
        &["consistency", "--problem", "custom", "--expr", "c=x +"][..],
        &["convergence", "--config", "/nonexistent/file.cfg"][..],
        &["mesh-info", "--export-mesh"][..],
    ] {
        let o = ncfdg(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# coarse study\nproblem = polynomial_exactness(2)\ndegree = 2\nlevels = 2,4\nmode = full-df\n").unwrap();
    let o = ncfdg(&["consistency", "--config", path(&cfg), "--levels", "3", "--max-residual", "1e-9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("polynomial_exactness(2),2,3,full-df,"), "{}", rows[0]);
}

#[test]
fn mesh_export_and_import() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("meshes");
    let o = ncfdg(&["mesh-info", "--levels", "4", "--export-mesh", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mesh = out.join("mesh_n4.json");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&mesh).unwrap()).unwrap();
    assert_eq!(doc["vertices"].as_array().unwrap().len(), 25);
    assert_eq!(doc["elements"].as_array().unwrap().len(), 32);

    let o = ncfdg(&["partition-report", "--problem", "degenerate_interface", "--mesh", path(&mesh)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("facet,midpoint_x,midpoint_y,class,a_lambda,max_abs_un,dominance"));
    assert_eq!(lines.clone().count(), 56);
    assert_eq!(lines.filter(|l| l.contains(",AdDf_plus,")).count(), 4);

    let o = ncfdg(&["convergence", "--mesh", path(&mesh)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn matrix_dump_is_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let o = ncfdg(&["consistency", "--levels", "2", "--degree", "1", "--dump-matrix", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mtx = fs::read_to_string(dir.path().join("matrix_n2.mtx")).unwrap();
    let mut lines = mtx.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real general"));
    let dims: Vec<usize> = lines.next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(&dims[..2], &[24, 24]);
    assert_eq!(lines.count(), dims[2]);
    let rhs = fs::read_to_string(dir.path().join("rhs_n2.txt")).unwrap();
    assert_eq!(rhs.lines().count(), 24);
    assert!(dir.path().join("consistency.json").exists());
}

#[test]
fn custom_expression_problem_converges() {
    let o = ncfdg(&[
        "convergence",
        "--problem",
        "custom",
        "--expr",
        "c = sin(pi * x) * exp(y)",
        "--expr",
        "a = eps + 0.5 * x",
        "--expr",
        "u_x = 1.0 - y",
        "--expr",
        "gamma = 1.0",
        "--epsilon",
        "0.1",
        "--levels",
        "4,8,16",
        "--expect-eoc",
        "1.0",
        "--eoc-tol",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn reports_are_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        for cmd in ["convergence", "identities", "compare-penalties"] {
            let o = ncfdg(&[cmd, "--levels", "2,4", "--trials", "2", "--seed", "9", "--out", path(d.path())]);
            assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        }
    }
    for name in ["convergence.csv", "convergence.json", "identities.csv", "compare_penalties.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn krylov_solver_and_dk_tau() {
    let o = ncfdg(&[
        "convergence",
        "--problem",
        "advection_dominated(1e-4)",
        "--levels",
        "4,8",
        "--solver",
        "krylov",
        "--solver-tol",
        "1e-11",
        "--tau",
        "dk",
        "--mode",
        "legacy-all",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let row = csv.lines().nth(2).unwrap();
    assert!(row.contains(",legacy-all,dk,8,"), "{row}");
    let iterations: usize = row.split(',').nth(12).unwrap().parse().unwrap();
    assert!(iterations > 0);
}
