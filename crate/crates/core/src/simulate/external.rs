//! Subprocess adapter for external simulators.
//!
//! Wire protocol, one process per evaluation: the child receives a single
//! JSON object `{"theta": [...]}` on stdin and must print a single JSON
//! object `{"metrics": [...]}` (or `{"error": "..."}`) on stdout, then
//! exit 0. Timeouts, nonzero exits and malformed output all map to failed
//! runs, never to process-level errors — a crashing simulator is data.

use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::space::{MetricVector, Point};
use crate::Result;

use super::{SimOutcome, Simulator, SimulatorSpec};

#[derive(Serialize)]
struct Request<'a> {
    theta: &'a [f64],
}

#[derive(Deserialize)]
struct Response {
    #[serde(default)]
    metrics: Option<Vec<f64>>,
    #[serde(default)]
    error: Option<String>,
}

/// Runs an external command for each evaluation.
///
/// The command string is interpreted by `sh -c`, so pipelines and arguments
/// work as they would in a shell.
pub struct ExternalSimulator {
    spec: SimulatorSpec,
    command: String,
    timeout: Duration,
}

impl ExternalSimulator {
    pub fn new(command: impl Into<String>, spec: SimulatorSpec, timeout: Duration) -> Self {
        Self {
            spec,
            command: command.into(),
            timeout,
        }
    }

    fn invoke(&self, point: &Point) -> SimOutcome {
        let mut child = match Command::new("/bin/sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
        {
            Ok(c) => c,
            Err(e) => return SimOutcome::Failed(format!("spawn: {e}")),
        };

        let request = serde_json::to_vec(&Request {
            theta: point.coords(),
        })
        .expect("request serializes");
        if let Some(mut stdin) = child.stdin.take() {
            // A child that exits without reading produces EPIPE here; the
            // exit status check below reports it.
            let _ = stdin.write_all(&request);
            let _ = stdin.write_all(b"\n");
        }

        // wait_with_output on a helper thread so the parent can enforce the
        // timeout; on timeout the child is killed via its id.
        let id = child.id();
        let (tx, rx) = mpsc::channel();
        let handle = std::thread::spawn(move || {
            let _ = tx.send(child.wait_with_output());
        });
        let output = match rx.recv_timeout(self.timeout) {
            Ok(Ok(out)) => out,
            Ok(Err(e)) => {
                let _ = handle.join();
                return SimOutcome::Failed(format!("wait: {e}"));
            }
            Err(_) => {
                kill_process(id);
                let _ = handle.join();
                return SimOutcome::Failed("timeout".into());
            }
        };
        let _ = handle.join();

        if !output.status.success() {
            return SimOutcome::Failed("exit".into());
        }
        let parsed: Response = match serde_json::from_slice(&output.stdout) {
            Ok(r) => r,
            Err(_) => return SimOutcome::Failed("protocol".into()),
        };
        if let Some(msg) = parsed.error {
            return SimOutcome::Failed(msg);
        }
        let Some(values) = parsed.metrics else {
            return SimOutcome::Failed("protocol".into());
        };
        if values.len() != self.spec.metric_names.len() {
            return SimOutcome::Failed("protocol".into());
        }
        match MetricVector::new(values) {
            Ok(m) => SimOutcome::Completed(m),
            Err(_) => SimOutcome::Failed("protocol".into()),
        }
    }
}

fn kill_process(id: u32) {
    // SIGKILL via the shell; std::process::Child::kill needs ownership,
    // which the waiting thread holds.
    let _ = Command::new("kill")
        .arg("-9")
        .arg(id.to_string())
        .status();
}

impl Simulator for ExternalSimulator {
    fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn run(&self, point: &Point) -> Result<SimOutcome> {
        self.spec.input_space.check_contains(point)?;
        Ok(self.invoke(point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParameterSpace;

    fn spec() -> SimulatorSpec {
        SimulatorSpec::new(
            ParameterSpace::from_bounds(&[("x", 0.0, 1.0)]).unwrap(),
            vec!["y".into()],
        )
        .unwrap()
    }

    fn run_stub(cmd: &str, timeout_ms: u64) -> SimOutcome {
        let sim = ExternalSimulator::new(cmd, spec(), Duration::from_millis(timeout_ms));
        sim.run(&Point::new(vec![0.5])).unwrap()
    }

    #[test]
    fn echo_stub_returns_metrics_verbatim() {
        let out = run_stub(r#"cat > /dev/null; echo '{"metrics": [42.5]}'"#, 5_000);
        match out {
            SimOutcome::Completed(m) => assert_eq!(m.values(), &[42.5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonzero_exit_fails_with_exit() {
        let out = run_stub("cat > /dev/null; exit 3", 5_000);
        assert_eq!(out, SimOutcome::Failed("exit".into()));
    }

    #[test]
    fn malformed_output_fails_with_protocol() {
        let out = run_stub(r#"cat > /dev/null; echo 'not json'"#, 5_000);
        assert_eq!(out, SimOutcome::Failed("protocol".into()));
        let out = run_stub(r#"cat > /dev/null; echo '{"metrics": [1.0, 2.0]}'"#, 5_000);
        assert_eq!(out, SimOutcome::Failed("protocol".into()));
    }

    #[test]
    fn sleeping_stub_times_out() {
        let out = run_stub("sleep 30", 300);
        assert_eq!(out, SimOutcome::Failed("timeout".into()));
    }

    #[test]
    fn child_error_object_is_reported() {
        let out = run_stub(r#"cat > /dev/null; echo '{"error": "blew up"}'"#, 5_000);
        assert_eq!(out, SimOutcome::Failed("blew up".into()));
    }

    #[test]
    fn child_receives_theta() {
        // the stub echoes theta back as the metric
        let cmd = r#"sed 's/.*\[\([0-9.]*\)\].*/{"metrics": [\1]}/'"#;
        let out = run_stub(cmd, 5_000);
        match out {
            SimOutcome::Completed(m) => assert_eq!(m.values(), &[0.5]),
            other => panic!("{other:?}"),
        }
    }
}
