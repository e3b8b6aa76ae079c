use std::collections::HashMap;
use std::sync::RwLock;

use dynct_core::data::{Cone, DataSource};
use dynct_core::Vec3;

type Key = (u64, [u64; 3]);

/// Caches ray values keyed by the exact bits of `(s, β)`.
pub struct MemoizedSource<D> {
    inner: D,
    cache: RwLock<HashMap<Key, f64>>,
}

impl<D: DataSource> MemoizedSource<D> {
    pub fn new(inner: D) -> Self {
        Self { inner, cache: RwLock::new(HashMap::new()) }
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    fn key(s: f64, b: &Vec3) -> Key {
        (s.to_bits(), [b.x.to_bits(), b.y.to_bits(), b.z.to_bits()])
    }
}

impl<D: DataSource> DataSource for MemoizedSource<D> {
    fn ray(&self, s: f64, beta: &Vec3) -> dynct_core::Result<f64> {
        let k = Self::key(s, beta);
        if let Some(v) = self.cache.read().expect("cache lock").get(&k) {
            return Ok(*v);
        }
        let v = self.inner.ray(s, beta)?;
        self.cache.write().expect("cache lock").insert(k, v);
        Ok(v)
    }

    fn source_position(&self, s: f64) -> dynct_core::Result<Vec3> {
        self.inner.source_position(s)
    }

    fn support_cone(&self, s: f64) -> dynct_core::Result<Cone> {
        self.inner.support_cone(s)
    }
}
