//! Command-line front end for the single-cell CMUT simulator.
//!
//! [`run`] parses an argument vector, executes one subcommand and returns
//! the process exit code: 0 on success, 1 on a usage error, 2 when the
//! model rejects the input or the solver fails.

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_FAILURE: u8 = 2;

pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match commands::run(&cli).and_then(|r| commands::emit(&r, &cli, stdout)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("cmut-cell-sim").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn value(csv: &str, quantity: &str) -> f64 {
        csv.lines()
            .find_map(|l| l.strip_prefix(&format!("{quantity},")))
            .and_then(|rest| rest.split(',').next())
            .unwrap()
            .parse()
            .unwrap()
    }

    fn data_rows(csv: &str) -> Vec<&str> {
        csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
    }

    #[test]
    fn help_and_version_exit_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("cap-sweep"));
        assert_eq!(call(&["--version"]).0, EXIT_OK);
    }

    #[test]
    fn usage_errors_exit_one() {
        for args in [
            &["bogus"][..],
            &["disp"],
            &["disp", "--voltage", "abc"],
            &["cap-sweep", "--vary", "colour"],
            &["cap", "--format", "xml"],
        ] {
            let (code, out, err) = call(args);
            assert_eq!(code, EXIT_USAGE, "{args:?}");
            assert!(out.is_empty());
            assert!(err.starts_with("error:"), "{err}");
            assert!(!err.contains('\u{1b}'));
        }
    }

    #[test]
    fn model_errors_exit_two_with_one_line() {
        let cases: [(&[&str], &str); 5] = [
            (&["disp", "--voltage", "40", "--membrane", "Nope"], "Nope"),
            (&["cap", "--cavity-radius", "-1"], "cavity_radius"),
            (&["cap", "--overlap-r", "20"], "overlap_radius"),
            (&["disp", "--voltage", "-5"], "voltage"),
            (
                &["calibrate", "--fixtures", "/nonexistent/ref.csv"],
                "/nonexistent/ref.csv",
            ),
        ];
        for (args, needle) in cases {
            let (code, out, err) = call(args);
            assert_eq!(code, EXIT_FAILURE, "{args:?}");
            assert!(out.is_empty());
            assert_eq!(err.lines().count(), 1, "{err}");
            assert!(err.starts_with("error: ") && err.contains(needle), "{err}");
        }
    }

    #[test]
    fn zero_bias_gives_zero_displacement() {
        let (code, out, _) = call(&["disp", "--voltage", "0"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(value(&out, "center_displacement"), 0.0);
    }

    #[test]
    fn displacement_at_forty_volts() {
        let (code, out, _) = call(&["disp", "--voltage", "40"]);
        assert_eq!(code, EXIT_OK);
        let w = value(&out, "center_displacement");
        assert!((w - 0.0133).abs() < 5e-4, "{w}");
        assert!(out.contains("# solver_stats: iterations="));
    }

    #[test]
    fn gap_sweep_rows_and_trend() {
        let (code, out, _) = call(&[
            "cap-sweep",
            "--vary",
            "gap",
            "--from",
            "0.3",
            "--to",
            "1.0",
            "--step",
            "0.1",
        ]);
        assert_eq!(code, EXIT_OK);
        let rows = data_rows(&out);
        assert_eq!(rows.len(), 8);
        assert!(rows[0].starts_with("0.3,"));
        assert!(rows[7].starts_with("1,"));
        assert!(out.contains("strictly_decreasing"));
    }

    #[test]
    fn json_format() {
        let (code, out, _) = call(&["modes", "--count", "2", "--format", "json"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 2);
        assert!(v["metadata"].is_object());
    }

    #[test]
    fn out_file_matches_stdout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.csv");
        let (code, out, _) = call(&["cap", "--out", path.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert!(out.is_empty());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), call(&["cap"]).1);
    }

    #[test]
    fn materials_file_overlays_builtins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(
            &path,
            r#"{"materials":[{"name":"AlN","density_kg_m3":3260,"relative_permittivity":8.5,"youngs_modulus_gpa":330,"poissons_ratio":0.24}]}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let (code, out, _) = call(&["materials", "list", "--materials", p]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("AlN") && out.contains("Si3N4"));
        let (code, _, _) = call(&["disp", "--voltage", "40", "--membrane", "AlN", "--materials", p]);
        assert_eq!(code, EXIT_OK);

        std::fs::write(&path, "{ not json").unwrap();
        let (code, _, err) = call(&["materials", "list", "--materials", p]);
        assert_eq!(code, EXIT_FAILURE);
        assert!(err.contains("m.json"), "{err}");
    }

    #[test]
    fn repeated_runs_identical() {
        let args = [
            "freq-sweep",
            "--vary",
            "radius",
            "--from",
            "22",
            "--to",
            "24",
            "--step",
            "1",
        ];
        assert_eq!(call(&args).1, call(&args).1);
    }
}
