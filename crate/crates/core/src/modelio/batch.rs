//! Order-preserving bounded-concurrency execution.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

/// Applies `op` to every request with at most `max_concurrency` calls in
/// flight. Result `i` belongs to request `i`; failures stay in position.
pub fn run_batch<T, R, E, F>(requests: &[T], max_concurrency: usize, op: F) -> Vec<Result<R, E>>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let workers = max_concurrency.max(1).min(requests.len());
    if workers <= 1 {
        return requests.iter().map(&op).collect();
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let op = &op;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(request) = requests.get(i) else { break };
                if tx.send((i, op(request))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut slots: Vec<Option<Result<R, E>>> = (0..requests.len()).map(|_| None).collect();
    for (i, result) in rx {
        slots[i] = Some(result);
    }
    slots.into_iter().map(|s| s.expect("every request produces exactly one result")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn thousand_requests_in_order() {
        let requests: Vec<u32> = (0..1000).collect();
        let out = run_batch(&requests, 8, |&x| Ok::<_, ()>(x * 2));
        assert_eq!(out.len(), 1000);
        assert!(out.iter().enumerate().all(|(i, r)| *r == Ok(i as u32 * 2)));
    }

    #[test]
    fn concurrency_one_equals_sequential() {
        let requests: Vec<i32> = (-5..5).collect();
        let op = |&x: &i32| if x % 3 == 0 { Err(x) } else { Ok(x) };
        let seq: Vec<_> = requests.iter().map(op).collect();
        assert_eq!(run_batch(&requests, 1, op), seq);
    }

    #[test]
    fn in_flight_bounded() {
        let in_flight = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let requests: Vec<u64> = (0..64).collect();
        let out = run_batch(&requests, 4, |&x| {
            let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_micros(200 + (x * 37) % 500));
            in_flight.fetch_sub(1, Ordering::SeqCst);
            Ok::<_, ()>(x)
        });
        assert_eq!(out.into_iter().map(Result::unwrap).collect::<Vec<_>>(), requests);
        assert!(peak.load(Ordering::SeqCst) <= 4);
    }

    #[test]
    fn empty_input() {
        let out: Vec<Result<(), ()>> = run_batch(&[] as &[u8], 8, |_| Ok(()));
        assert!(out.is_empty());
    }
}
