use std::sync::Mutex;

use crate::report::Alarm;

/// Append-only record of alarms raised by a runtime. Queryable and drainable.
#[derive(Debug, Default)]
pub struct AlarmRegistry {
    alarms: Mutex<Vec<Alarm>>,
}

impl AlarmRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, alarm: Alarm) {
        self.lock().push(alarm);
    }

    pub fn snapshot(&self) -> Vec<Alarm> {
        self.lock().clone()
    }

    pub fn drain(&self) -> Vec<Alarm> {
        std::mem::take(&mut *self.lock())
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.lock().is_empty()
    }

    /// Every alarm as one JSON line each.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for alarm in self.lock().iter() {
            out.push_str(&alarm.to_json_line());
            out.push('\n');
        }
        out
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Vec<Alarm>> {
        // A panic while holding this lock cannot leave the vector half-written.
        self.alarms.lock().unwrap_or_else(|e| e.into_inner())
    }
}
