use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbp-interface"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.ini");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL: &str = "[experiment]\nm = 13, 26\nspectrum_m = 13\norders = 4\ninterp = op\n\
                     t_final = 0.5\n[simulate]\nm = 13\nsnapshots = 0, 0.5\n";

#[test]
fn verify_ops_passes_and_perturbation_breaches() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--out", "a", "verify-ops"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(dir.path().join("a/verify.csv")).unwrap();
    assert!(table.starts_with("check,value,target,status"));
    assert!(!table.contains(",FAIL"));

    let out = run(dir.path(), &["--out", "b", "verify-ops", "--perturb"]);
    assert_eq!(out.status.code(), Some(2));
    let table = fs::read_to_string(dir.path().join("b/verify.csv")).unwrap();
    assert!(table.contains(",FAIL"));
}

#[test]
fn spectrum_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut tables = Vec::new();
    for name in ["one", "two"] {
        let out = run(
            dir.path(),
            &["--config", &cfg, "--out", name, "--seed", "5", "spectrum"],
        );
        assert!(
            out.status.code().is_some_and(|c| c != 1),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        tables.push(fs::read(dir.path().join(name).join("spectrum.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    let text = String::from_utf8(tables.remove(0)).unwrap();
    assert!(text.starts_with("method,order,interp,m,rho_tilde,log10_error,rate,seconds"));
    assert!(text.lines().any(|l| l.starts_with("single,4,none,13,")));
}

#[test]
fn converge_writes_rates_for_consecutive_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = run(dir.path(), &["--config", &cfg, "--out", "c", "converge"]);
    assert!(
        out.status.code().is_some_and(|c| c != 1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = sbp_interface::diagnostics::read_records(
        fs::File::open(dir.path().join("c/convergence.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(rows.len(), 4);
    for pair in rows.chunks(2) {
        assert!(pair[0].rate.is_none());
        assert!(pair[1].rate.is_some_and(|q| q < 0.0));
    }
}

#[test]
fn simulate_writes_snapshots_and_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = run(dir.path(), &["--config", &cfg, "--out", "s", "simulate"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = dir.path().join("s");
    assert!(s.join("snapshot_t0.0000.csv").exists());
    assert!(s.join("snapshot_t0.5000.csv").exists());
    let energy = fs::read_to_string(s.join("energy.csv")).unwrap();
    assert!(energy.starts_with("t,E,relative_drift"));
}

#[test]
fn dump_op_writes_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d2.txt");
    let out = run(
        dir.path(),
        &[
            "dump-op",
            "--op",
            "d2",
            "--m",
            "15",
            "--file",
            file.to_str().unwrap(),
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = sbp_interface::sparse::Triplets::read_from(std::io::BufReader::new(
        fs::File::open(&file).unwrap(),
    ))
    .unwrap();
    assert_eq!(t.to_csr().nrows(), 15);
}

#[test]
fn bad_sizes_exit_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["dump-op", "--op", "d2", "--m", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let cfg = write_config(dir.path(), "[experiment]\nm = 51, 26\n");
    let out = run(dir.path(), &["--config", &cfg, "converge"]);
    assert_eq!(out.status.code(), Some(1));
}
