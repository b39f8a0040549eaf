use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `data`.
pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Deterministic child seed for a named sub-computation.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

pub fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Evaluates `f(lane, item)` for every lane × item, with up to `workers`
/// threads per lane and all lanes running side by side. Results are
/// item-major: index `item * lanes + lane`.
pub fn run_lanes<T, F>(lanes: usize, items: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync,
{
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..lanes * items).map(|_| None).collect());
    let cursors: Vec<AtomicUsize> = (0..lanes).map(|_| AtomicUsize::new(0)).collect();
    std::thread::scope(|s| {
        for (lane, next) in cursors.iter().enumerate() {
            for _ in 0..workers.max(1).min(items) {
                let (slots, f) = (&slots, &f);
                s.spawn(move || loop {
                    let item = next.fetch_add(1, Ordering::SeqCst);
                    if item >= items {
                        break;
                    }
                    let value = f(lane, item);
                    slots.lock().unwrap()[item * lanes + lane] = Some(value);
                });
            }
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.expect("every slot is filled"))
        .collect()
}
