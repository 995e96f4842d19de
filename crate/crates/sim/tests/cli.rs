//! End-to-end runs of the command line binary.

use std::path::Path;
use std::process::Command;

use polyamix_sim::output::read_numeric_csv;

fn polyamix(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_polyamix")).args(args).output().unwrap()
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("polyamix-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn table1_writes_csv_with_metadata() {
    let out = scratch("table1");
    let o = polyamix(&["table1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = first_line(&out.join("table1.csv"));
    assert!(header.starts_with("# {") && header.contains("\"study\":\"table1\""), "{header}");
}

#[test]
fn studies_are_reproducible_and_carry_the_seed() {
    let (a, b) = (scratch("sim2d-a"), scratch("sim2d-b"));
    for dir in [&a, &b] {
        let o = polyamix(&["sim2d", "--runs", "3", "--grid", "32", "--seed", "9", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let read = |d: &Path| std::fs::read_to_string(d.join("sim2d_summary.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(first_line(&a.join("sim2d_summary.csv")).contains("\"seed\":9"));
}

#[test]
fn invalid_input_exits_with_two() {
    let out = scratch("invalid");
    let o = polyamix(&["sim1d", "--runs", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = polyamix(&["conformal", "--alpha", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = polyamix(&["sim2d", "--a0=-1", "--runs", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_exits_with_one() {
    let out = scratch("missing");
    let o = polyamix(&["density", "--model", "/nonexistent/model.json", "--points", "x.csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fit_sample_density_round_trip() {
    let out = scratch("fit");
    std::fs::create_dir_all(&out).unwrap();
    let data = out.join("data.csv");
    let mut text = String::from("x,y\n");
    for i in 0..50 {
        let x = (i as f64 + 0.5) / 50.0;
        text.push_str(&format!("{x},{}\n", (0.8 * x + 0.1).min(1.0)));
    }
    std::fs::write(&data, text).unwrap();
    let dir = out.to_str().unwrap();
    let o = polyamix(&["fit", "--data", data.to_str().unwrap(), "--levels", "2,2", "--a0", "1", "--out", dir]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = out.join("model.json");
    let o = polyamix(&["sample", "--model", model.to_str().unwrap(), "--n", "200", "--out", dir]);
    assert!(o.status.success());
    let samples = read_numeric_csv(&out.join("samples.csv")).unwrap();
    assert_eq!(samples.len(), 200);
    assert!(samples.iter().all(|r| (0.0..=1.0).contains(&r[0]) && (0.0..=1.0).contains(&r[1])));

    let points = out.join("points.csv");
    std::fs::write(&points, "x,y\n0.5,0.5\n0.1,0.9\n").unwrap();
    let o = polyamix(&["density", "--model", model.to_str().unwrap(), "--points", points.to_str().unwrap(), "--out", dir]);
    assert!(o.status.success());
    let dens = read_numeric_csv(&out.join("density.csv")).unwrap();
    assert!(dens[0][2] > dens[1][2]);

    assert!(first_line(&out.join("weights.csv")).contains("\"members\":6"));
}
