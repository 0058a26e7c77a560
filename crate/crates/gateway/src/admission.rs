//! Admission control: a FIFO ticket semaphore capping in-flight requests and
//! a sliding-window token budget.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug, Default)]
struct Queue {
    next_ticket: u64,
    serving: u64,
    in_flight: usize,
}

/// Callers are admitted strictly in arrival order; at most `cap` hold a
/// permit at once.
#[derive(Debug)]
pub struct FifoSemaphore {
    cap: usize,
    state: Mutex<Queue>,
    cv: Condvar,
}

pub struct Permit<'a> {
    sem: &'a FifoSemaphore,
}

impl FifoSemaphore {
    pub fn new(cap: usize) -> Self {
        assert!(cap >= 1, "semaphore capacity must be >= 1");
        Self {
            cap,
            state: Mutex::new(Queue::default()),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut q = self.state.lock().unwrap();
        let ticket = q.next_ticket;
        q.next_ticket += 1;
        while !(q.serving == ticket && q.in_flight < self.cap) {
            q = self.cv.wait(q).unwrap();
        }
        q.serving += 1;
        q.in_flight += 1;
        drop(q);
        // the next ticket may also be admissible
        self.cv.notify_all();
        Permit { sem: self }
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().unwrap().in_flight
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut q = self.sem.state.lock().unwrap();
        q.in_flight -= 1;
        drop(q);
        self.sem.cv.notify_all();
    }
}

/// Token budget over a sliding window. A single request larger than the
/// whole budget is admitted once the window is empty.
#[derive(Debug)]
pub struct TokenBudget {
    budget: u64,
    window: Duration,
    spent: Mutex<VecDeque<(Instant, u64)>>,
}

impl TokenBudget {
    pub fn per_minute(budget: u64) -> Self {
        Self::new(budget, Duration::from_secs(60))
    }

    pub fn new(budget: u64, window: Duration) -> Self {
        Self {
            budget,
            window,
            spent: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until `tokens` fit in the window, then books them. Returns the
    /// time spent waiting.
    pub fn acquire(&self, tokens: u64) -> Duration {
        let began = Instant::now();
        loop {
            let mut spent = self.spent.lock().unwrap();
            let now = Instant::now();
            while spent
                .front()
                .is_some_and(|(t, _)| now.duration_since(*t) >= self.window)
            {
                spent.pop_front();
            }
            let used: u64 = spent.iter().map(|(_, n)| n).sum();
            if spent.is_empty() || used + tokens <= self.budget {
                spent.push_back((now, tokens));
                return began.elapsed();
            }
            let wait = self.window - now.duration_since(spent.front().unwrap().0);
            drop(spent);
            std::thread::sleep(wait.max(Duration::from_millis(1)));
        }
    }
}
