//! Bounded scoped parallelism for independent solves.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

pub type Task<'a, T> = Box<dyn FnOnce() -> T + Send + 'a>;

/// Worker count: NORMCRIT_JOBS, then the flag, then the machine's parallelism.
pub fn resolve_jobs(flag: Option<usize>) -> usize {
    let env = std::env::var("NORMCRIT_JOBS").ok().and_then(|s| s.trim().parse::<usize>().ok());
    env.or(flag)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Runs the tasks on at most `jobs` threads; results keep the task order.
pub fn run<'a, T: Send + 'a>(jobs: usize, tasks: Vec<Task<'a, T>>) -> Vec<T> {
    let n = tasks.len();
    if jobs <= 1 || n <= 1 {
        return tasks.into_iter().map(|t| t()).collect();
    }
    let slots: Vec<Mutex<Option<Task<'a, T>>>> = tasks.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..jobs.min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let task = slots[i].lock().unwrap().take().expect("task taken twice");
                let out = task();
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });
    results.into_iter().map(|m| m.into_inner().unwrap().expect("task did not run")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        for jobs in [1, 2, 7] {
            let tasks: Vec<Task<usize>> = (0..20usize).map(|i| Box::new(move || i * i) as Task<usize>).collect();
            assert_eq!(run(jobs, tasks), (0..20usize).map(|i| i * i).collect::<Vec<_>>());
        }
    }
}
