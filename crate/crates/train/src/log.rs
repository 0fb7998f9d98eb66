use std::fmt::Write as _;

use hgmt_core::TaskKind;

/// One `(stack, task)` loss value of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    /// 1-based step number.
    pub step: u64,
    pub epoch: u64,
    pub stack: usize,
    pub task: TaskKind,
    pub loss: f64,
    pub wallclock_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    /// Weighted total loss of each step, in step order.
    pub totals: Vec<(u64, f64)>,
}

pub const LOG_HEADER: &str = "step, epoch, stack, task, loss, wallclock_ms";

impl TrainLog {
    pub fn extend(&mut self, other: TrainLog) {
        self.records.extend(other.records);
        self.totals.extend(other.totals);
    }

    /// Line-oriented text, one record per line after a header.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(48 * (self.records.len() + 1));
        s.push_str(LOG_HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(s, "{}, {}, {}, {}, {}, {}", r.step, r.epoch, r.stack, r.task, r.loss, r.wallclock_ms).unwrap();
        }
        s
    }

    /// Totals of the steps in `[from, to)`, 1-based.
    pub fn totals_between(&self, from: u64, to: u64) -> Vec<f64> {
        self.totals.iter().filter(|(s, _)| (from..to).contains(s)).map(|(_, v)| *v).collect()
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}
