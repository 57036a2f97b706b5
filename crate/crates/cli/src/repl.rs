//! Line-oriented dialogue with a running scenario.

use std::io::{self, BufRead, Write};

use tgg_core::engine::{GroundingResult, ScenarioSession};

const HELP: &str = "commands: say <text> | step <n> | beliefs | trace | help | quit";

fn describe(r: &GroundingResult) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(s) = r.summary() {
        lines.push(format!("plan {s}"));
    }
    for u in &r.updates {
        lines.push(format!("belief {} {:.3}", u.key, u.posterior));
    }
    if let Some(p) = &r.pending {
        lines.push(format!("pending {} on [{}]", p.fact, p.candidates.join(", ")));
    }
    if lines.is_empty() {
        lines.push("ok".into());
    }
    lines
}

/// Reads commands until end of input or `quit`. Trace output covers only
/// events not printed before.
pub fn repl(ss: &mut ScenarioSession, input: impl BufRead, out: &mut dyn Write) -> io::Result<()> {
    let mut printed = 0;
    writeln!(out, "{HELP}")?;
    for line in input.lines() {
        let line = line?;
        let (cmd, rest) = line.trim().split_once(' ').unwrap_or((line.trim(), ""));
        match cmd {
            "" => {}
            "quit" | "exit" => break,
            "help" => writeln!(out, "{HELP}")?,
            "say" => match ss.ground(rest.trim()) {
                Ok(r) => {
                    for l in describe(&r) {
                        writeln!(out, "{l}")?;
                    }
                }
                Err(e) => writeln!(out, "error: {e}")?,
            },
            "step" => match rest.trim().parse::<usize>() {
                Ok(n) => match ss.step(n) {
                    Ok(updates) => {
                        for u in updates {
                            writeln!(out, "belief {} {:.3}", u.key, u.posterior)?;
                        }
                        writeln!(out, "tick {}", ss.session().last_tick().unwrap_or(0))?;
                    }
                    Err(e) => writeln!(out, "error: {e}")?,
                },
                Err(_) => writeln!(out, "error: step takes a tick count")?,
            },
            "beliefs" => {
                for b in ss.session().beliefs().entries() {
                    writeln!(out, "{}({}) {:.3}", b.predicate, b.entity, b.p)?;
                }
            }
            "trace" => {
                let events = &ss.session().trace()[printed..];
                for e in events {
                    writeln!(out, "{}", serde_json::to_string(e).expect("trace serializes"))?;
                }
                printed += events.len();
            }
            other => writeln!(out, "unknown command `{other}`; {HELP}")?,
        }
    }
    Ok(())
}
