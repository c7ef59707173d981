//! Locating and running external programs (ffmpeg, COLMAP).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use crate::error::{CliError, CliResult};
use crate::summary::{Run, ToolInvocation};

/// Stderr lines kept in a `ToolFailure`.
const STDERR_TAIL_LINES: usize = 20;

/// Resolves `program` to an executable: a name containing a path separator
/// is taken as a path, anything else is searched on `PATH`.
pub fn resolve(tool: &str, program: &str) -> CliResult<PathBuf> {
    let not_found = |detail: String| CliError::ToolNotFound {
        tool: tool.into(),
        detail,
    };
    if program.is_empty() {
        return Err(not_found("empty executable name".into()));
    }
    let as_path = Path::new(program);
    if as_path.components().count() > 1 || as_path.is_absolute() {
        return if is_executable(as_path) {
            Ok(as_path.to_path_buf())
        } else {
            Err(not_found(format!("{program} is not an executable file")))
        };
    }
    let path = std::env::var_os("PATH").unwrap_or_default();
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|p| is_executable(p))
        .ok_or_else(|| not_found(format!("'{program}' is not on PATH")))
}

#[cfg(unix)]
fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    p.metadata()
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

#[cfg(not(unix))]
fn is_executable(p: &Path) -> bool {
    p.is_file()
}

/// Runs `program args…`, logging and recording the command line. Output is
/// captured; a non-zero exit becomes `ToolFailure` carrying the stderr tail.
pub fn run_tool(run: &mut Run, tool: &str, program: &Path, args: &[OsString]) -> CliResult<()> {
    let mut argv = vec![program.to_string_lossy().into_owned()];
    argv.extend(args.iter().map(|a| a.to_string_lossy().into_owned()));
    log::info!("running {}", argv.join(" "));
    let t0 = Instant::now();
    let output = Command::new(program).args(args).output();
    let wall_seconds = t0.elapsed().as_secs_f64();
    let output = match output {
        Ok(o) => o,
        Err(e) => {
            run.tool(ToolInvocation {
                tool: tool.into(),
                argv,
                exit_status: None,
                wall_seconds,
            });
            return Err(CliError::ToolNotFound {
                tool: tool.into(),
                detail: format!("{}: {e}", program.display()),
            });
        }
    };
    run.tool(ToolInvocation {
        tool: tool.into(),
        argv,
        exit_status: output.status.code(),
        wall_seconds,
    });
    let stderr = String::from_utf8_lossy(&output.stderr);
    for line in stderr.lines() {
        log::debug!("{tool}: {line}");
    }
    if !output.status.success() {
        let lines: Vec<&str> = stderr.lines().collect();
        let tail = lines[lines.len().saturating_sub(STDERR_TAIL_LINES)..].join("\n");
        return Err(CliError::ToolFailure {
            tool: tool.into(),
            status: output.status.to_string(),
            stderr: tail,
        });
    }
    Ok(())
}

/// Builds an argument list from anything path- or string-like.
#[macro_export]
macro_rules! args {
    ($($a:expr),* $(,)?) => {
        [$(::std::ffi::OsString::from($a)),*]
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_tools_are_reported() {
        assert!(matches!(
            resolve("colmap", "definitely-not-a-real-tool-xyz"),
            Err(CliError::ToolNotFound { .. })
        ));
        assert!(matches!(
            resolve("colmap", "/nonexistent/colmap"),
            Err(CliError::ToolNotFound { .. })
        ));
        assert!(matches!(
            resolve("colmap", ""),
            Err(CliError::ToolNotFound { .. })
        ));
    }

    #[cfg(unix)]
    #[test]
    fn finds_tools_on_path_and_captures_failures() {
        let sh = resolve("sh", "sh").unwrap();
        let mut run = crate::summary::Run::new("t", vec![], Default::default(), false);
        run_tool(&mut run, "sh", &sh, &args!["-c", "exit 0"]).unwrap();
        let err = run_tool(&mut run, "sh", &sh, &args!["-c", "echo boom >&2; exit 3"]).unwrap_err();
        match err {
            CliError::ToolFailure { stderr, .. } => assert_eq!(stderr, "boom"),
            other => panic!("{other:?}"),
        }
    }
}
