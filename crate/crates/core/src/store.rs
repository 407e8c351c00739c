//! Embedded, file-backed entity store behind a generic CRUD repository.
//!
//! A store is a directory holding `meta.json` (schema version and id
//! counters) and one append-only JSON-lines log per entity collection. Every
//! mutation appends a `put` or `delete` entry; opening the store replays the
//! logs. A `store.lock` file carries an exclusive OS lock so that only one
//! handle may write to a store at a time.
//!
//! Within a process the [`Store`] handle is shared by reference (usually
//! behind an `Arc`). Reads take a shared lock, writes an exclusive one, so a
//! reader always observes the state between two [`Store::write`] calls.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DescriptorSet, HistogramRecord, ImageRecord, Vocabulary};

pub use self::sealed::{Collection, NextIds, Tables};

/// On-disk format version written to `meta.json`.
pub const SCHEMA_VERSION: u32 = 1;

const META_FILE: &str = "meta.json";
const LOCK_FILE: &str = "store.lock";

/// Generic CRUD access to one entity type.
pub trait Repository<T> {
    /// Inserts `entity` and returns its id. Fresh ids are assigned for every
    /// entity except [`DescriptorSet`], which is keyed by its image.
    fn add(&self, entity: T) -> Result<u64>;
    fn get(&self, id: u64) -> Result<T>;
    fn update(&self, entity: T) -> Result<()>;
    /// Removes the entity and everything that depends on it.
    fn delete(&self, id: u64) -> Result<()>;
    fn list(&self, filter: &dyn Fn(&T) -> bool) -> Result<Vec<T>>;
}

/// An entity type the store knows how to persist.
pub trait Entity: sealed::Stored {
    /// Human-readable entity name used in error messages.
    const KIND: &'static str;

    fn id(&self) -> u64 {
        self.key()
    }
}

mod sealed {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Collection {
        Images,
        Descriptors,
        Vocabularies,
        Histograms,
    }

    impl Collection {
        pub const ALL: [Collection; 4] = [
            Collection::Images,
            Collection::Descriptors,
            Collection::Vocabularies,
            Collection::Histograms,
        ];

        pub fn file_name(self) -> &'static str {
            match self {
                Collection::Images => "images.jsonl",
                Collection::Descriptors => "descriptors.jsonl",
                Collection::Vocabularies => "vocabularies.jsonl",
                Collection::Histograms => "histograms.jsonl",
            }
        }

        pub(crate) fn slot(self) -> usize {
            self as usize
        }
    }

    /// Next id to hand out per collection. Ids start at 1 and are never reused.
    #[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
    pub struct NextIds {
        pub image: u64,
        pub vocabulary: u64,
        pub histogram: u64,
    }

    impl Default for NextIds {
        fn default() -> Self {
            Self {
                image: 1,
                vocabulary: 1,
                histogram: 1,
            }
        }
    }

    #[derive(Debug, Default, Clone, PartialEq)]
    pub struct Tables {
        pub(crate) images: BTreeMap<u64, ImageRecord>,
        pub(crate) descriptors: BTreeMap<u64, DescriptorSet>,
        pub(crate) vocabularies: BTreeMap<u64, Vocabulary>,
        pub(crate) histograms: BTreeMap<u64, HistogramRecord>,
    }

    pub enum Dependent {
        Descriptors(u64),
        Histogram(u64),
    }

    pub trait Stored: Sized + Clone + Serialize + DeserializeOwned + Send + Sync + 'static {
        const COLLECTION: Collection;
        fn table(t: &Tables) -> &BTreeMap<u64, Self>;
        fn table_mut(t: &mut Tables) -> &mut BTreeMap<u64, Self>;
        fn key(&self) -> u64;
        fn set_key(&mut self, id: u64);
        /// Counter backing this collection, `None` when the key comes from the entity.
        fn counter(ids: &mut NextIds) -> Option<&mut u64>;
        fn check(&self, t: &Tables, adding: bool) -> Result<()>;
        fn dependents(_id: u64, _t: &Tables) -> Vec<Dependent> {
            Vec::new()
        }
    }
}

use sealed::{Dependent, Stored};

impl Stored for ImageRecord {
    const COLLECTION: Collection = Collection::Images;

    fn table(t: &Tables) -> &BTreeMap<u64, Self> {
        &t.images
    }

    fn table_mut(t: &mut Tables) -> &mut BTreeMap<u64, Self> {
        &mut t.images
    }

    fn key(&self) -> u64 {
        self.id
    }

    fn set_key(&mut self, id: u64) {
        self.id = id;
    }

    fn counter(ids: &mut NextIds) -> Option<&mut u64> {
        Some(&mut ids.image)
    }

    fn check(&self, _t: &Tables, _adding: bool) -> Result<()> {
        self.validate()
    }

    fn dependents(id: u64, t: &Tables) -> Vec<Dependent> {
        let mut deps = Vec::new();
        if t.descriptors.contains_key(&id) {
            deps.push(Dependent::Descriptors(id));
        }
        deps.extend(
            t.histograms
                .values()
                .filter(|h| h.image_id == id)
                .map(|h| Dependent::Histogram(h.id)),
        );
        deps
    }
}

impl Entity for ImageRecord {
    const KIND: &'static str = "image";
}

impl Stored for DescriptorSet {
    const COLLECTION: Collection = Collection::Descriptors;

    fn table(t: &Tables) -> &BTreeMap<u64, Self> {
        &t.descriptors
    }

    fn table_mut(t: &mut Tables) -> &mut BTreeMap<u64, Self> {
        &mut t.descriptors
    }

    fn key(&self) -> u64 {
        self.image_id
    }

    fn set_key(&mut self, id: u64) {
        self.image_id = id;
    }

    fn counter(_ids: &mut NextIds) -> Option<&mut u64> {
        None
    }

    fn check(&self, t: &Tables, adding: bool) -> Result<()> {
        let image = t.images.get(&self.image_id).ok_or_else(|| {
            Error::validation(format!("descriptor set references missing image {}", self.image_id))
        })?;
        if adding && t.descriptors.contains_key(&self.image_id) {
            return Err(Error::validation(format!(
                "image {} already has a descriptor set",
                self.image_id
            )));
        }
        self.validate(image.width, image.height)
    }
}

impl Entity for DescriptorSet {
    const KIND: &'static str = "descriptor set";
}

impl Stored for Vocabulary {
    const COLLECTION: Collection = Collection::Vocabularies;

    fn table(t: &Tables) -> &BTreeMap<u64, Self> {
        &t.vocabularies
    }

    fn table_mut(t: &mut Tables) -> &mut BTreeMap<u64, Self> {
        &mut t.vocabularies
    }

    fn key(&self) -> u64 {
        self.id
    }

    fn set_key(&mut self, id: u64) {
        self.id = id;
    }

    fn counter(ids: &mut NextIds) -> Option<&mut u64> {
        Some(&mut ids.vocabulary)
    }

    fn check(&self, t: &Tables, adding: bool) -> Result<()> {
        self.validate()?;
        self.params.validate()?;
        if !adding {
            if let Some(old) = t.vocabularies.get(&self.id) {
                if old.k != self.k {
                    return Err(Error::validation("the size of an existing vocabulary cannot change"));
                }
            }
        }
        Ok(())
    }

    fn dependents(id: u64, t: &Tables) -> Vec<Dependent> {
        t.histograms
            .values()
            .filter(|h| h.index_id == id)
            .map(|h| Dependent::Histogram(h.id))
            .collect()
    }
}

impl Entity for Vocabulary {
    const KIND: &'static str = "index";
}

impl Stored for HistogramRecord {
    const COLLECTION: Collection = Collection::Histograms;

    fn table(t: &Tables) -> &BTreeMap<u64, Self> {
        &t.histograms
    }

    fn table_mut(t: &mut Tables) -> &mut BTreeMap<u64, Self> {
        &mut t.histograms
    }

    fn key(&self) -> u64 {
        self.id
    }

    fn set_key(&mut self, id: u64) {
        self.id = id;
    }

    fn counter(ids: &mut NextIds) -> Option<&mut u64> {
        Some(&mut ids.histogram)
    }

    fn check(&self, t: &Tables, adding: bool) -> Result<()> {
        if !t.images.contains_key(&self.image_id) {
            return Err(Error::validation(format!(
                "histogram references missing image {}",
                self.image_id
            )));
        }
        let vocab = t.vocabularies.get(&self.index_id).ok_or_else(|| {
            Error::validation(format!("histogram references missing index {}", self.index_id))
        })?;
        self.validate(vocab.k)?;
        let duplicate = t.histograms.values().any(|h| {
            h.image_id == self.image_id && h.index_id == self.index_id && (adding || h.id != self.id)
        });
        if duplicate {
            return Err(Error::validation(format!(
                "image {} already has a histogram for index {}",
                self.image_id, self.index_id
            )));
        }
        Ok(())
    }
}

impl Entity for HistogramRecord {
    const KIND: &'static str = "histogram";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Meta {
    schema_version: u32,
    next_ids: NextIds,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LogEntry<T> {
    Put(T),
    Delete(u64),
}

struct Inner {
    meta: Meta,
    tables: Tables,
    logs: [File; 4],
}

/// Handle on an open store. Holds the store's writer lock until dropped.
pub struct Store {
    dir: PathBuf,
    _lock: File,
    inner: RwLock<Inner>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn storage(path: &Path, what: &str, err: impl std::fmt::Display) -> Error {
    Error::Storage(format!("{what} {}: {err}", path.display()))
}

impl Store {
    /// Opens the store at `path`, creating an empty one if the directory holds
    /// no store yet.
    pub fn open(path: impl AsRef<Path>) -> Result<Store> {
        let dir = path.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| storage(&dir, "cannot create store directory", e))?;

        let lock_path = dir.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| storage(&lock_path, "cannot open lock file", e))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(Error::StoreLocked(dir.display().to_string())),
            Err(TryLockError::Error(e)) => return Err(storage(&lock_path, "cannot lock", e)),
        }

        let corrupt = |reason: String| Error::CorruptStore {
            path: dir.display().to_string(),
            reason,
        };

        let meta_path = dir.join(META_FILE);
        let meta = if meta_path.exists() {
            let text = fs::read_to_string(&meta_path).map_err(|e| storage(&meta_path, "cannot read", e))?;
            let meta: Meta =
                serde_json::from_str(&text).map_err(|e| corrupt(format!("{META_FILE}: {e}")))?;
            if meta.schema_version != SCHEMA_VERSION {
                return Err(corrupt(format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    meta.schema_version
                )));
            }
            meta
        } else {
            if let Some(c) = Collection::ALL.iter().find(|c| dir.join(c.file_name()).exists()) {
                return Err(corrupt(format!("{} present without {META_FILE}", c.file_name())));
            }
            let meta = Meta {
                schema_version: SCHEMA_VERSION,
                next_ids: NextIds::default(),
            };
            write_meta(&dir, &meta)?;
            meta
        };

        let mut tables = Tables::default();
        load::<ImageRecord>(&dir, &mut tables).map_err(corrupt)?;
        load::<DescriptorSet>(&dir, &mut tables).map_err(corrupt)?;
        load::<Vocabulary>(&dir, &mut tables).map_err(corrupt)?;
        load::<HistogramRecord>(&dir, &mut tables).map_err(corrupt)?;
        check_loaded(&meta, &tables).map_err(corrupt)?;

        let open_log = |c: Collection| -> Result<File> {
            let p = dir.join(c.file_name());
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&p)
                .map_err(|e| storage(&p, "cannot open", e))
        };
        let logs = [
            open_log(Collection::Images)?,
            open_log(Collection::Descriptors)?,
            open_log(Collection::Vocabularies)?,
            open_log(Collection::Histograms)?,
        ];

        Ok(Store {
            dir,
            _lock: lock,
            inner: RwLock::new(Inner { meta, tables, logs }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn read_guard(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write_guard(&self) -> RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` against a consistent snapshot of the store.
    pub fn read<R>(&self, f: impl FnOnce(&View<'_>) -> R) -> R {
        let guard = self.read_guard();
        f(&View { tables: &guard.tables })
    }

    /// Runs `f` with exclusive write access. Mutations that succeeded are
    /// persisted even when `f` returns an error later on.
    pub fn write<R>(&self, f: impl FnOnce(&mut Tx<'_>) -> Result<R>) -> Result<R> {
        let mut guard = self.write_guard();
        let mut tx = Tx {
            inner: &mut guard,
            pending: Default::default(),
            meta_dirty: false,
        };
        let out = f(&mut tx);
        tx.commit(&self.dir)?;
        out
    }

    /// A deep copy of every table, used to compare store states.
    pub fn snapshot(&self) -> Tables {
        self.read_guard().tables.clone()
    }

    pub fn next_ids(&self) -> NextIds {
        self.read_guard().meta.next_ids.clone()
    }
}

impl<T: Entity> Repository<T> for Store {
    fn add(&self, entity: T) -> Result<u64> {
        self.write(|tx| tx.add(entity))
    }

    fn get(&self, id: u64) -> Result<T> {
        self.read(|v| v.get::<T>(id).cloned())
    }

    fn update(&self, entity: T) -> Result<()> {
        self.write(|tx| tx.update(entity))
    }

    fn delete(&self, id: u64) -> Result<()> {
        self.write(|tx| tx.delete::<T>(id))
    }

    fn list(&self, filter: &dyn Fn(&T) -> bool) -> Result<Vec<T>> {
        Ok(self.read(|v| v.iter::<T>().filter(|e| filter(e)).cloned().collect()))
    }
}

/// Read-only view of the store's tables.
pub struct View<'a> {
    tables: &'a Tables,
}

impl<'a> View<'a> {
    pub fn get<T: Entity>(&self, id: u64) -> Result<&'a T> {
        T::table(self.tables)
            .get(&id)
            .ok_or_else(|| Error::not_found(T::KIND, id))
    }

    pub fn find<T: Entity>(&self, id: u64) -> Option<&'a T> {
        T::table(self.tables).get(&id)
    }

    /// Entities in ascending id order.
    pub fn iter<T: Entity>(&self) -> impl Iterator<Item = &'a T> + 'a {
        T::table(self.tables).values()
    }

    pub fn count<T: Entity>(&self) -> usize {
        T::table(self.tables).len()
    }

    pub fn histograms_for_index(&self, index_id: u64) -> impl Iterator<Item = &'a HistogramRecord> + 'a {
        self.tables.histograms.values().filter(move |h| h.index_id == index_id)
    }
}

/// Exclusive write access handed out by [`Store::write`].
pub struct Tx<'a> {
    inner: &'a mut Inner,
    pending: [Vec<String>; 4],
    meta_dirty: bool,
}

impl Tx<'_> {
    pub fn view(&self) -> View<'_> {
        View {
            tables: &self.inner.tables,
        }
    }

    pub fn add<T: Entity>(&mut self, mut entity: T) -> Result<u64> {
        let id = match T::counter(&mut self.inner.meta.next_ids) {
            Some(next) => *next,
            None => entity.key(),
        };
        entity.set_key(id);
        entity.check(&self.inner.tables, true)?;
        if let Some(next) = T::counter(&mut self.inner.meta.next_ids) {
            *next += 1;
            self.meta_dirty = true;
        }
        self.append(&LogEntry::Put(&entity), T::COLLECTION)?;
        T::table_mut(&mut self.inner.tables).insert(id, entity);
        Ok(id)
    }

    pub fn update<T: Entity>(&mut self, entity: T) -> Result<()> {
        let id = entity.key();
        if !T::table(&self.inner.tables).contains_key(&id) {
            return Err(Error::not_found(T::KIND, id));
        }
        entity.check(&self.inner.tables, false)?;
        self.append(&LogEntry::Put(&entity), T::COLLECTION)?;
        T::table_mut(&mut self.inner.tables).insert(id, entity);
        Ok(())
    }

    pub fn delete<T: Entity>(&mut self, id: u64) -> Result<()> {
        if !T::table(&self.inner.tables).contains_key(&id) {
            return Err(Error::not_found(T::KIND, id));
        }
        for dep in T::dependents(id, &self.inner.tables) {
            match dep {
                Dependent::Descriptors(d) => self.delete::<DescriptorSet>(d)?,
                Dependent::Histogram(h) => self.delete::<HistogramRecord>(h)?,
            }
        }
        self.append(&LogEntry::<T>::Delete(id), T::COLLECTION)?;
        T::table_mut(&mut self.inner.tables).remove(&id);
        Ok(())
    }

    fn append<T: Serialize>(&mut self, entry: &LogEntry<T>, c: Collection) -> Result<()> {
        let line = serde_json::to_string(entry).map_err(|e| Error::Storage(e.to_string()))?;
        self.pending[c.slot()].push(line);
        Ok(())
    }

    fn commit(&mut self, dir: &Path) -> Result<()> {
        for c in Collection::ALL {
            let lines = std::mem::take(&mut self.pending[c.slot()]);
            if lines.is_empty() {
                continue;
            }
            let mut buf = lines.join("\n");
            buf.push('\n');
            let file = &mut self.inner.logs[c.slot()];
            let path = dir.join(c.file_name());
            file.write_all(buf.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| storage(&path, "cannot append to", e))?;
        }
        if self.meta_dirty {
            write_meta(dir, &self.inner.meta)?;
            self.meta_dirty = false;
        }
        Ok(())
    }
}

fn write_meta(dir: &Path, meta: &Meta) -> Result<()> {
    let tmp = dir.join("meta.json.tmp");
    let target = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Storage(e.to_string()))?;
    fs::write(&tmp, text)
        .and_then(|_| fs::rename(&tmp, &target))
        .map_err(|e| storage(&target, "cannot write", e))
}

fn load<T: Entity>(dir: &Path, tables: &mut Tables) -> std::result::Result<(), String> {
    let path = dir.join(T::COLLECTION.file_name());
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(format!("{}: {e}", path.display())),
    };
    let table = T::table_mut(tables);
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| format!("{}: {e}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry<T> = serde_json::from_str(&line)
            .map_err(|e| format!("{} line {}: {e}", T::COLLECTION.file_name(), n + 1))?;
        match entry {
            LogEntry::Put(e) => {
                table.insert(e.key(), e);
            }
            LogEntry::Delete(id) => {
                table.remove(&id);
            }
        }
    }
    Ok(())
}

fn check_loaded(meta: &Meta, t: &Tables) -> std::result::Result<(), String> {
    let max = |ids: &mut dyn Iterator<Item = u64>| ids.max().unwrap_or(0);
    if max(&mut t.images.keys().copied()) >= meta.next_ids.image
        || max(&mut t.vocabularies.keys().copied()) >= meta.next_ids.vocabulary
        || max(&mut t.histograms.keys().copied()) >= meta.next_ids.histogram
    {
        return Err("record ids exceed the counters in meta.json".into());
    }
    for h in t.histograms.values() {
        if !t.images.contains_key(&h.image_id) || !t.vocabularies.contains_key(&h.index_id) {
            return Err(format!("histogram {} has a dangling reference", h.id));
        }
    }
    if let Some(d) = t.descriptors.keys().find(|id| !t.images.contains_key(id)) {
        return Err(format!("descriptor set for missing image {d}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IndexParams, KeyPoint, DESCRIPTOR_LEN};

    fn image(name: &str) -> ImageRecord {
        ImageRecord {
            id: 0,
            name: name.into(),
            class_label: "a".into(),
            width: 16,
            height: 8,
            bytes: vec![1, 2, 3],
        }
    }

    fn vocab(k: usize) -> Vocabulary {
        Vocabulary {
            id: 0,
            k,
            centroids: vec![vec![0.0; DESCRIPTOR_LEN]; k],
            created_at: 0,
            params: IndexParams { k, ..Default::default() },
        }
    }

    fn unit(i: usize) -> Vec<f64> {
        let mut v = vec![0.0; DESCRIPTOR_LEN];
        v[i] = 1.0;
        v
    }

    #[test]
    fn empty_store_on_fresh_directory() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().join("s")).unwrap();
        store.read(|v| {
            assert_eq!(v.count::<ImageRecord>(), 0);
            assert_eq!(v.count::<HistogramRecord>(), 0);
            assert_eq!(v.count::<Vocabulary>(), 0);
        });
        assert!(dir.path().join("s/meta.json").exists());
    }

    #[test]
    fn add_get_and_missing_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let id = store.add(image("a.png")).unwrap();
        assert_eq!(id, 1);
        let back: ImageRecord = store.get(1).unwrap();
        assert_eq!(back, ImageRecord { id: 1, ..image("a.png") });
        assert!(matches!(
            Repository::<ImageRecord>::delete(&store, 999),
            Err(Error::NotFound { id: 999, .. })
        ));
        assert!(matches!(
            Repository::<ImageRecord>::get(&store, 999),
            Err(Error::NotFound { .. })
        ));
    }

    #[test]
    fn ids_are_not_reused_after_delete_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.add(image("a")).unwrap();
            let b = store.add(image("b")).unwrap();
            Repository::<ImageRecord>::delete(&store, b).unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.add(image("c")).unwrap(), 3);
    }

    #[test]
    fn update_replaces_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            let id = store.add(image("a")).unwrap();
            let mut img: ImageRecord = store.get(id).unwrap();
            img.class_label = "b".into();
            store.update(img).unwrap();
            assert!(matches!(
                store.update(ImageRecord { id: 42, ..image("x") }),
                Err(Error::NotFound { .. })
            ));
        }
        let store = Store::open(dir.path()).unwrap();
        let img: ImageRecord = store.get(1).unwrap();
        assert_eq!(img.class_label, "b");
    }

    #[test]
    fn invalid_entities_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(matches!(
            store.add(ImageRecord { bytes: vec![], ..image("a") }),
            Err(Error::Validation(_))
        ));
        let id = store.add(image("a")).unwrap();
        let bad = DescriptorSet {
            image_id: id,
            descriptors: vec![vec![0.0; 63]],
            points: vec![KeyPoint { x: 1.0, y: 1.0, scale: 1.2, laplacian_sign: 1 }],
        };
        assert!(matches!(store.add(bad), Err(Error::Validation(_))));
        let outside = DescriptorSet {
            image_id: id,
            descriptors: vec![unit(0)],
            points: vec![KeyPoint { x: 16.0, y: 1.0, scale: 1.2, laplacian_sign: 1 }],
        };
        assert!(matches!(store.add(outside), Err(Error::Validation(_))));
        // Histograms must reference existing rows.
        let h = HistogramRecord::from_weights(id, 77, &[1.0, 0.0]);
        assert!(matches!(store.add(h), Err(Error::Validation(_))));
    }

    #[test]
    fn deleting_an_image_cascades() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let a = store.add(image("a")).unwrap();
        let b = store.add(image("b")).unwrap();
        let v = store.add(vocab(2)).unwrap();
        store
            .add(DescriptorSet {
                image_id: a,
                descriptors: vec![unit(3)],
                points: vec![KeyPoint { x: 2.0, y: 3.0, scale: 1.2, laplacian_sign: -1 }],
            })
            .unwrap();
        store.add(HistogramRecord::from_weights(a, v, &[1.0, 0.0])).unwrap();
        store.add(HistogramRecord::from_weights(b, v, &[0.0, 1.0])).unwrap();
        // Manual reference count: two histograms, one of them owned by `a`.
        let before = store.list(&|_: &HistogramRecord| true).unwrap().len();
        let owned_by_a = store.list(&|h: &HistogramRecord| h.image_id == a).unwrap().len();
        Repository::<ImageRecord>::delete(&store, a).unwrap();
        let after = store.list(&|_: &HistogramRecord| true).unwrap();
        assert_eq!(after.len(), before - owned_by_a);
        assert!(after.iter().all(|h| h.image_id != a));
        assert!(Repository::<DescriptorSet>::get(&store, a).is_err());
    }

    #[test]
    fn one_histogram_per_image_and_index() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let a = store.add(image("a")).unwrap();
        let v = store.add(vocab(2)).unwrap();
        store.add(HistogramRecord::from_weights(a, v, &[1.0, 0.0])).unwrap();
        let dup = HistogramRecord::from_weights(a, v, &[0.0, 1.0]);
        assert!(matches!(store.add(dup), Err(Error::Validation(_))));
    }

    #[test]
    fn second_handle_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let _first = Store::open(dir.path()).unwrap();
        assert!(matches!(Store::open(dir.path()), Err(Error::StoreLocked(_))));
    }

    #[test]
    fn lock_is_released_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        drop(Store::open(dir.path()).unwrap());
        Store::open(dir.path()).unwrap();
    }

    #[test]
    fn corrupt_meta_is_reported_not_reinitialized() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.add(image("a")).unwrap();
        }
        fs::write(dir.path().join(META_FILE), "{ not json").unwrap();
        assert!(matches!(Store::open(dir.path()), Err(Error::CorruptStore { .. })));
        // The data file is left alone.
        let data = fs::read_to_string(dir.path().join("images.jsonl")).unwrap();
        assert_eq!(data.lines().count(), 1);
    }

    #[test]
    fn corrupt_log_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        drop(Store::open(dir.path()).unwrap());
        fs::write(dir.path().join("histograms.jsonl"), "{\"put\": 12}\n").unwrap();
        assert!(matches!(Store::open(dir.path()), Err(Error::CorruptStore { .. })));
    }

    #[test]
    fn unwritable_path_is_a_storage_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        fs::write(&file, b"x").unwrap();
        let err = Store::open(file.join("store")).unwrap_err();
        assert!(matches!(err, Error::Storage(_)), "{err:?}");
    }
}
