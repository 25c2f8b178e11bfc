use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Bounds the number of in-flight requests and, optionally, spaces request
/// starts by a fixed interval (a token bucket with a burst of one).
#[derive(Debug)]
pub struct AdmissionGate {
    limit: usize,
    interval: Option<Duration>,
    state: Mutex<GateState>,
    freed: Condvar,
}

#[derive(Debug)]
struct GateState {
    in_flight: usize,
    next_start: Instant,
}

pub struct Permit<'a> {
    gate: &'a AdmissionGate,
}

impl AdmissionGate {
    pub fn new(limit: usize, requests_per_second: Option<f64>) -> Self {
        Self {
            limit: limit.max(1),
            interval: requests_per_second.map(|r| Duration::from_secs_f64(1.0 / r)),
            state: Mutex::new(GateState { in_flight: 0, next_start: Instant::now() }),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().unwrap();
        while st.in_flight >= self.limit {
            st = self.freed.wait(st).unwrap();
        }
        st.in_flight += 1;
        let wait = self.interval.map(|iv| {
            let now = Instant::now();
            let start = st.next_start.max(now);
            st.next_start = start + iv;
            start - now
        });
        drop(st);
        if let Some(w) = wait.filter(|w| !w.is_zero()) {
            std::thread::sleep(w);
        }
        Permit { gate: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.gate.state.lock().unwrap();
        st.in_flight -= 1;
        drop(st);
        self.gate.freed.notify_one();
    }
}
