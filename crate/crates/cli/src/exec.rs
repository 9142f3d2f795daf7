use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use estimand_lab_core::mc::Executor;

pub const THREADS_ENV: &str = "ESTIMAND_LAB_THREADS";

/// Scoped worker pool; jobs are claimed from a shared counter and results
/// are put back in job order, so the output does not depend on `threads`.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    threads: usize,
}

impl Threaded {
    pub fn new(threads: usize) -> Threaded {
        Threaded { threads: threads.max(1) }
    }

    /// Worker count from `ESTIMAND_LAB_THREADS` (raw value passed in), or
    /// the available parallelism when unset.
    pub fn from_setting(setting: Option<&str>) -> Result<Threaded, String> {
        match setting.map(str::trim) {
            None | Some("") => Ok(Threaded::new(thread::available_parallelism().map_or(1, |n| n.get()))),
            Some(s) => match s.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Threaded::new(n)),
                _ => Err(format!("{THREADS_ENV} must be a positive integer, got `{s}`")),
            },
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl Executor for Threaded {
    fn map<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let workers = self.threads.min(jobs);
        if workers <= 1 {
            return (0..jobs).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<T>> = (0..jobs).map(|_| None).collect();
        thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let job = next.fetch_add(1, Ordering::Relaxed);
                            if job >= jobs {
                                break done;
                            }
                            done.push((job, f(job)));
                        }
                    })
                })
                .collect();
            for h in handles {
                for (job, value) in h.join().expect("worker panicked") {
                    slots[job] = Some(value);
                }
            }
        });
        slots.into_iter().map(|v| v.expect("every job ran")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_job_order() {
        for threads in [1, 2, 7] {
            let out = Threaded::new(threads).map(100, |j| j * j);
            assert_eq!(out, (0..100).map(|j| j * j).collect::<Vec<_>>());
        }
    }

    #[test]
    fn setting_is_validated() {
        assert_eq!(Threaded::from_setting(Some("3")).unwrap().threads(), 3);
        assert!(Threaded::from_setting(Some("0")).is_err());
        assert!(Threaded::from_setting(Some("many")).is_err());
        assert!(Threaded::from_setting(None).unwrap().threads() >= 1);
    }
}
