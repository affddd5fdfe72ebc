//! Deterministic per-scene seed derivation. Kept hand-rolled so the
//! mapping never varies across platforms or library versions — output
//! trees must be reproducible from the master seed alone.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Seed for one scene's generator, derived from the master seed and the
/// scene id. Stable across runs, platforms, and worker counts.
pub fn derive_scene_seed(master: u64, scene_id: &str) -> u64 {
    splitmix64(master ^ fnv1a(scene_id.as_bytes()))
}
