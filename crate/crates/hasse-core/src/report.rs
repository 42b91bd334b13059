//! Structured run reports with two renderings: a stable text form and a
//! versioned JSON form (`schema: "hasse-report/1"`). Both are
//! byte-deterministic for a fixed scenario and seed; timing is opt-in
//! because wall-clock values would break that guarantee.

use serde::Serialize;

pub const SCHEMA: &str = "hasse-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    fn tag(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
        }
    }

    fn ansi(&self) -> &'static str {
        match self {
            Status::Pass => "\x1b[32m",
            Status::Fail => "\x1b[31m",
            Status::Error => "\x1b[33m",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CommandOutcome {
    pub index: usize,
    pub label: String,
    pub status: Status,
    pub detail: Vec<String>,
    /// Diagnostic code when `status` is `error`.
    pub code: Option<String>,
    /// Milliseconds, present only when timing was requested.
    pub timing_ms: Option<u64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub seed: u64,
    pub commands: Vec<CommandOutcome>,
    pub summary: Summary,
    /// True when `--fail-fast` stopped the run early; commands after
    /// the first failure are absent.
    pub aborted: bool,
}

impl Report {
    pub fn new(seed: u64, commands: Vec<CommandOutcome>, aborted: bool) -> Report {
        let summary = Summary {
            total: commands.len(),
            passed: commands.iter().filter(|c| c.status == Status::Pass).count(),
            failed: commands.iter().filter(|c| c.status == Status::Fail).count(),
            errors: commands
                .iter()
                .filter(|c| c.status == Status::Error)
                .count(),
        };
        Report {
            schema: SCHEMA,
            seed,
            commands,
            summary,
            aborted,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0 && self.summary.errors == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render_text(&self, color: bool) -> String {
        let mut out = format!("{} seed={}\n", self.schema, self.seed);
        for c in &self.commands {
            let tag = if color {
                format!("{}{}\x1b[0m", c.status.ansi(), c.status.tag())
            } else {
                c.status.tag().to_string()
            };
            out.push_str(&format!("[{}] {}: {}", c.index, c.label, tag));
            if let Some(code) = &c.code {
                out.push_str(&format!(" [{code}]"));
            }
            if let Some(ms) = c.timing_ms {
                out.push_str(&format!(" ({ms} ms)"));
            }
            out.push('\n');
            for line in &c.detail {
                out.push_str("    ");
                out.push_str(line);
                out.push('\n');
            }
        }
        out.push_str(&format!(
            "summary: total={} passed={} failed={} errors={}{}\n",
            self.summary.total,
            self.summary.passed,
            self.summary.failed,
            self.summary.errors,
            if self.aborted { " (aborted)" } else { "" }
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report::new(
            42,
            vec![
                CommandOutcome {
                    index: 1,
                    label: "validate derivation=d1".into(),
                    status: Status::Pass,
                    detail: vec!["higher Leibniz: pass (checked 40 pairs)".into()],
                    code: None,
                    timing_ms: None,
                },
                CommandOutcome {
                    index: 2,
                    label: "extend derivation=D filter=F".into(),
                    status: Status::Error,
                    detail: vec!["component 1 sends torsion generator 1 outside".into()],
                    code: Some("E013".into()),
                    timing_ms: None,
                },
            ],
            false,
        )
    }

    #[test]
    fn text_rendering_is_stable() {
        let r = sample();
        let text = r.render_text(false);
        assert_eq!(
            text,
            "hasse-report/1 seed=42\n\
             [1] validate derivation=d1: PASS\n    higher Leibniz: pass (checked 40 pairs)\n\
             [2] extend derivation=D filter=F: ERROR [E013]\n    component 1 sends torsion generator 1 outside\n\
             summary: total=2 passed=1 failed=0 errors=1\n"
        );
        assert!(!r.all_passed());
    }

    #[test]
    fn json_has_schema_and_nulls() {
        let r = sample();
        let json = r.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema"], "hasse-report/1");
        assert_eq!(v["commands"][0]["status"], "pass");
        assert!(v["commands"][0]["code"].is_null());
        assert_eq!(v["commands"][1]["code"], "E013");
        assert_eq!(v["summary"]["errors"], 1);
        assert!(json.ends_with('\n'));
    }

    #[test]
    fn color_wraps_status_only() {
        let r = sample();
        let text = r.render_text(true);
        assert!(text.contains("\x1b[32mPASS\x1b[0m"));
        assert!(text.contains("\x1b[33mERROR\x1b[0m"));
    }
}
