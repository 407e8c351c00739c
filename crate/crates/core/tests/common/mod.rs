#![allow(dead_code)]

use std::sync::Arc;

use cbir_core::executor::{Engine, Executor, NewImage};
use cbir_core::features::ExtractorParams;
use cbir_core::store::Store;
use cbir_core::synthetic;
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub engine: Engine,
    pub ids: Vec<u64>,
}

/// Fresh store holding `per_class` generated images of each texture.
pub fn fixture(per_class: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let engine = Engine::surf(store, ExtractorParams::default()).unwrap();
    let ids = synthetic::corpus(per_class, seed)
        .into_iter()
        .map(|img| {
            engine
                .insert_image(NewImage {
                    name: img.name,
                    class_label: Some(img.class_label),
                    bytes: img.bytes,
                })
                .unwrap()
        })
        .collect();
    Fixture { dir, engine, ids }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}
