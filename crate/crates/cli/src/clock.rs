//! The `--clock` flag: `system`, or `step:<rfc3339>[,<millis>]` for a
//! simulated clock that advances on every read.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use passchain_core::time::{Clock, StepClock, SystemClock, Timestamp};

pub const DEFAULT_STEP: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockSpec {
    System,
    Step { start: Timestamp, step: Duration },
}

impl ClockSpec {
    pub fn build(&self) -> Arc<dyn Clock> {
        match *self {
            ClockSpec::System => Arc::new(SystemClock),
            ClockSpec::Step { start, step } => Arc::new(StepClock::new(start, step)),
        }
    }
}

impl FromStr for ClockSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "system" {
            return Ok(ClockSpec::System);
        }
        let rest = s
            .strip_prefix("step:")
            .ok_or_else(|| format!("expected `system` or `step:<rfc3339>[,<millis>]`, got {s:?}"))?;
        let (start, step) = match rest.split_once(',') {
            Some((start, ms)) => {
                let ms: u64 = ms.parse().map_err(|_| format!("bad step {ms:?}"))?;
                if ms == 0 {
                    return Err("step must be at least 1 ms".into());
                }
                (start, Duration::from_millis(ms))
            }
            None => (rest, DEFAULT_STEP),
        };
        let start = start.parse().map_err(|e| format!("{e}"))?;
        Ok(ClockSpec::Step { start, step })
    }
}

impl fmt::Display for ClockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClockSpec::System => f.write_str("system"),
            ClockSpec::Step { start, step } => write!(f, "step:{start},{}", step.as_millis()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_forms() {
        assert_eq!("system".parse::<ClockSpec>(), Ok(ClockSpec::System));
        let spec: ClockSpec = "step:2021-01-01T00:00:00Z,20".parse().unwrap();
        assert_eq!(spec.to_string(), "step:2021-01-01T00:00:00.000Z,20");
        assert_eq!(spec.to_string().parse::<ClockSpec>(), Ok(spec));
        let clock = spec.build();
        let (a, b) = (clock.now(), clock.now());
        assert_eq!(b.since(a), Duration::from_millis(20));
        assert!(clock.is_simulated());
        assert!(matches!("step:2021-01-01T00:00:00Z".parse(), Ok(ClockSpec::Step { step: DEFAULT_STEP, .. })));
        for bad in ["wall", "step:", "step:yesterday", "step:2021-01-01T00:00:00Z,0", "step:2021-01-01T00:00:00Z,x"] {
            assert!(bad.parse::<ClockSpec>().is_err(), "{bad}");
        }
    }
}
