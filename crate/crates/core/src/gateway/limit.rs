use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{Backend, BackendRequest, BackendResponse, GatewayError, GatewayMode, SharedBackend};

/// Caps concurrent calls to a backend and optionally spaces them out.
pub struct Throttled {
    inner: SharedBackend,
    cap: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
    min_interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl Throttled {
    pub fn new(inner: SharedBackend, cap: usize, min_interval: Duration) -> Self {
        Throttled {
            inner,
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            released: Condvar::new(),
            min_interval,
            next_slot: Mutex::new(None),
        }
    }

    fn acquire(&self) {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cap {
            n = self.released.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
    }

    fn release(&self) {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.released.notify_one();
    }

    fn wait_for_slot(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.min_interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

struct Permit<'a>(&'a Throttled);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        self.0.release();
    }
}

impl Backend for Throttled {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        self.acquire();
        let _permit = Permit(self);
        self.wait_for_slot();
        self.inner.call(request)
    }

    fn label(&self) -> String {
        self.inner.label()
    }

    fn mode(&self) -> GatewayMode {
        self.inner.mode()
    }
}
