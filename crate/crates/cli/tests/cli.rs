use std::fs;
use std::path::Path;
use std::process::Command;

use vprep_cli::output::fmt_num;
use vprep_cli::spec::{diagnostics, paper_defaults, validate_spec, ExperimentSpec, PAPER_DEFAULTS};
use vprep_cli::{run_experiments, Experiment};

fn write_spec(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("spec.toml");
    fs::write(&p, text).unwrap();
    p
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn spec_round_trips() {
    let spec = paper_defaults();
    let again = ExperimentSpec::parse(&spec.to_toml()).unwrap();
    assert_eq!(spec, again);
    assert_eq!(spec.hash(), again.hash());
}

#[test]
fn experiment_names_match_serialized_form() {
    for e in Experiment::ALL {
        let text = format!("name = \"x\"\nexperiments = [\"{}\"]\noutput = \"o\"\n[physics]\nd = 5.0\nb = 10.0\ninitial = {{ v_well = 350.0, v_barrier = 400.0 }}\nfinal = {{ v_well = 100.0, v_barrier = 200.0 }}\n", e.name());
        let spec = ExperimentSpec::parse(&text).unwrap();
        assert_eq!(spec.experiments, vec![e]);
    }
}

#[test]
fn unknown_key_is_an_error_with_position() {
    let text = PAPER_DEFAULTS.replace("dx = 0.05", "dx = 0.05\nd_x = 0.05");
    let err = format!("{:#}", ExperimentSpec::parse(&text).unwrap_err());
    assert!(err.contains("d_x"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn overrides_apply_to_nested_fields() {
    let spec = ExperimentSpec::parse_with_overrides(
        PAPER_DEFAULTS,
        &["numerics.dx=0.04".into(), "physics.final.v_barrier=250".into(), "output=elsewhere".into()],
    )
    .unwrap();
    assert_eq!(spec.numerics.dx, 0.04);
    assert_eq!(spec.physics.target.v_barrier, 250.0);
    assert_eq!(spec.output, "elsewhere");
    assert!(ExperimentSpec::parse_with_overrides(PAPER_DEFAULTS, &["numerics.dx".into()]).is_err());
}

#[test]
fn defaults_validate_clean() {
    assert!(diagnostics(&paper_defaults()).is_empty());
    let dir = tempfile::tempdir().unwrap();
    let p = write_spec(dir.path(), PAPER_DEFAULTS);
    assert!(validate_spec(&p, &[]).unwrap().is_empty());
}

#[test]
fn negative_switch_time_gives_one_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let text = PAPER_DEFAULTS.replace("t_switch = [0.0, 0.058, 0.13, 1.0]", "t_switch = [0.0, -0.058, 0.13, 1.0]");
    let d = validate_spec(&write_spec(dir.path(), &text), &[]).unwrap();
    assert_eq!(d.len(), 1, "{d:?}");
    assert!(d[0].field.contains("t_switch"));
}

#[test]
fn coarse_dx_is_a_resolution_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_spec(dir.path(), PAPER_DEFAULTS);
    let d = validate_spec(&p, &["numerics.dx=0.5".into()]).unwrap();
    let dx: Vec<_> = d.iter().filter(|x| x.field == "numerics.dx").collect();
    assert_eq!(dx.len(), 1, "{d:?}");
    // quotes both the step and the bound
    assert!(dx[0].message.contains("0.5"), "{}", dx[0].message);
    assert!(dx[0].message.contains("0.2017"), "{}", dx[0].message);
}

#[test]
fn unreadable_spec_is_io_error() {
    assert!(validate_spec(Path::new("/nonexistent/spec.toml"), &[]).is_err());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = paper_defaults();
    let only = [Experiment::Poles, Experiment::GroundState, Experiment::DelaySpectrum];
    let a = run_experiments(&spec, Some(&only), Some(&dir.path().join("a"))).unwrap();
    let b = run_experiments(&spec, Some(&only), Some(&dir.path().join("b"))).unwrap();
    assert!(a.all_passed());
    let (ta, tb) = (read_tree(&a.output), read_tree(&b.output));
    assert!(ta.iter().any(|(n, _)| n.ends_with("poles.csv")));
    assert_eq!(ta, tb);
}

#[test]
fn summary_cites_existing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let report = run_experiments(&paper_defaults(), Some(&[Experiment::Poles, Experiment::GroundState]), Some(&out)).unwrap();
    let cited: Vec<_> = report.summary.entries.iter().filter_map(|e| e.source.as_ref().map(|c| (e, c))).collect();
    assert!(cited.len() >= 4);
    for (entry, c) in cited {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(out.join(&c.file)).unwrap();
        let col = rdr.headers().unwrap().iter().position(|h| h == c.column).unwrap();
        let row = rdr.records().nth(c.row - 1).unwrap().unwrap();
        assert_eq!(&row[col], entry.value, "{}", entry.key);
    }
    let text = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(text.contains("[poles/poles.csv:e_re:"));
    assert!(text.contains("check.pole_energy: pass"));
}

#[test]
fn csv_has_metadata_header() {
    let dir = tempfile::tempdir().unwrap();
    let spec = paper_defaults();
    let r = run_experiments(&spec, Some(&[Experiment::Poles]), Some(&dir.path().join("o"))).unwrap();
    let text = fs::read_to_string(r.output.join("poles/poles.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# vprep "));
    assert_eq!(lines[2], format!("# spec-sha256: {}", spec.hash()));
    assert!(lines[3].starts_with("# units: config, kind, k_re [1/um]"));
    assert!(lines[4].starts_with("config,kind,k_re"));
}

#[test]
fn failed_stage_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    // a search strip too shallow to contain the resonance
    let spec = ExperimentSpec::parse_with_overrides(PAPER_DEFAULTS, &["poles.im_k_depth=1e-6".into()]).unwrap();
    let err = run_experiments(&spec, Some(&[Experiment::Poles]), Some(&out)).unwrap_err();
    assert!(format!("{err:#}").contains("stage poles"), "{err:#}");
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn number_format() {
    assert_eq!(fmt_num(134.511248728123), "134.511248728");
    assert_eq!(fmt_num(-1.5e-7), "-1.50000000000e-7");
    assert_eq!(fmt_num(0.0), "0");
    assert_eq!(fmt_num(2.0e-4), "0.000200000000000");
}

fn vprep(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vprep")).args(args).current_dir(cwd).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), PAPER_DEFAULTS);
    let s = spec.to_str().unwrap();

    let ok = vprep(&["validate", s], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    let bad = vprep(&["validate", s, "--set", "decay_curves.t_switch=[-1.0, 0.1, 0.2, 1.0]"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("decay_curves.t_switch"));

    let pass = vprep(&["poles", "--spec", s, "--output", "p"], dir.path());
    assert_eq!(pass.status.code(), Some(0), "{}", String::from_utf8_lossy(&pass.stderr));
    assert!(dir.path().join("p/summary.json").exists());

    let fail = vprep(&["poles", "--spec", s, "--output", "q", "--set", "checks.e_res=[130.0, -1.217]"], dir.path());
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("check.pole_energy: FAIL"));

    let runtime = vprep(&["poles", "--output", "r", "--set", "poles.im_k_depth=1e-6"], dir.path());
    assert_eq!(runtime.status.code(), Some(3));

    let invalid = vprep(&["run", s, "--set", "numerics.dx=0.5", "--output", "s"], dir.path());
    assert_eq!(invalid.status.code(), Some(2));
    assert!(!dir.path().join("s").exists());
}
