//! Retrieval evaluation: dataset splitting, per-query precision/recall and
//! Table-style reports.
//!
//! For a query the searchable universe is the set of images indexed under
//! the evaluated index, minus the query image itself. Within it:
//!
//! * `AI`: appropriate images, those sharing the query's class label;
//! * `RI`: images returned by the query;
//! * `rai = |RI ∩ AI|`, `iri = |RI \ AI|`, `anr = |AI \ RI|`;
//! * `inr`: the rest of the universe, neither appropriate nor returned.
//!
//! Precision is `rai / (rai + iri)` and recall `rai / (rai + anr)`; both are
//! 0 when their denominator is empty.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{Engine, Executor, QueryOptions};
use crate::model::{ImageRecord, Vocabulary};
use crate::store::Store;

/// Column header of the CSV report.
pub const CSV_HEADER: &str = "name,RI,AI,rai,iri,anr,inr,precision,recall";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalFactors {
    #[serde(rename = "name")]
    pub query_name: String,
    #[serde(rename = "RI")]
    pub ri: usize,
    #[serde(rename = "AI")]
    pub ai: usize,
    pub rai: usize,
    pub iri: usize,
    pub anr: usize,
    pub inr: usize,
    pub precision: f64,
    pub recall: f64,
}

impl RetrievalFactors {
    /// Checks the counting identities against the size of the universe.
    pub fn check(&self, corpus_size: usize) -> std::result::Result<(), String> {
        if self.ri != self.rai + self.iri {
            return Err(format!("RI {} != rai + iri", self.ri));
        }
        if self.ai != self.rai + self.anr {
            return Err(format!("AI {} != rai + anr", self.ai));
        }
        if self.rai + self.iri + self.anr + self.inr != corpus_size {
            return Err(format!("counts do not add up to {corpus_size}"));
        }
        if !(0.0..=1.0).contains(&self.precision) || !(0.0..=1.0).contains(&self.recall) {
            return Err("precision/recall outside [0, 1]".into());
        }
        if (self.precision * self.ri as f64 - self.rai as f64).abs() > 1e-9
            || (self.recall * self.ai as f64 - self.rai as f64).abs() > 1e-9
        {
            return Err("precision/recall inconsistent with counts".into());
        }
        Ok(())
    }
}

/// Counts the evaluation sets for one query.
///
/// `corpus_size` is the size of the universe both sets are drawn from; it
/// must be at least `|returned ∪ relevant|`.
pub fn compute_factors(
    name: impl Into<String>,
    returned: &BTreeSet<u64>,
    relevant: &BTreeSet<u64>,
    corpus_size: usize,
) -> Result<RetrievalFactors> {
    let rai = returned.intersection(relevant).count();
    let iri = returned.len() - rai;
    let anr = relevant.len() - rai;
    let inr = corpus_size.checked_sub(rai + iri + anr).ok_or_else(|| {
        Error::validation(format!(
            "corpus of {corpus_size} cannot hold {} returned and relevant images",
            rai + iri + anr
        ))
    })?;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(RetrievalFactors {
        query_name: name.into(),
        ri: rai + iri,
        ai: rai + anr,
        rai,
        iri,
        anr,
        inr,
        precision: ratio(rai, rai + iri),
        recall: ratio(rai, rai + anr),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetSplit {
    pub index_set: Vec<u64>,
    pub query_set: Vec<u64>,
    pub seed: u64,
    pub ratio: f64,
}

/// Splits every class into index and query images.
///
/// Each class is shuffled with a generator seeded by `seed` (classes visited
/// in label order) and its first `ceil(ratio * n)` images go to the index,
/// keeping at least one query image per class. Both sets are returned in
/// ascending id order.
pub fn split_dataset(images: &[ImageRecord], ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut classes: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for img in images {
        if img.class_label.trim().is_empty() {
            return Err(Error::validation(format!("image {} has no class label", img.id)));
        }
        classes.entry(img.class_label.as_str()).or_default().push(img.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut index_set = Vec::new();
    let mut query_set = Vec::new();
    for (label, mut ids) in classes {
        if ids.len() < 2 {
            return Err(Error::validation(format!(
                "class {label:?} needs at least 2 images to split, has {}",
                ids.len()
            )));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        // Guard against 0.9 * 10 landing a hair above 9.
        let take = ((ratio * ids.len() as f64) - 1e-9).ceil() as usize;
        let take = take.clamp(1, ids.len() - 1);
        index_set.extend_from_slice(&ids[..take]);
        query_set.extend_from_slice(&ids[take..]);
    }
    index_set.sort_unstable();
    query_set.sort_unstable();
    Ok(DatasetSplit {
        index_set,
        query_set,
        seed,
        ratio,
    })
}

/// Runs one query image against an index and scores the result.
///
/// Relevance is class membership; the universe is the index's image set
/// without the query image.
pub fn simulate_single_query(
    engine: &Engine,
    query_image_id: u64,
    index_id: u64,
    options: &QueryOptions,
) -> Result<RetrievalFactors> {
    let options = QueryOptions { index_id, ..*options };
    let (query, universe) = engine.store().read(|v| -> Result<_> {
        let query = v.get::<ImageRecord>(query_image_id)?.clone();
        v.get::<Vocabulary>(index_id)?;
        let universe: BTreeMap<u64, String> = v
            .histograms_for_index(index_id)
            .filter(|h| h.image_id != query_image_id)
            .filter_map(|h| v.find::<ImageRecord>(h.image_id))
            .map(|img| (img.id, img.class_label.clone()))
            .collect();
        Ok((query, universe))
    })?;

    let result = engine.execute_query(&query.bytes, &options)?;
    let returned: BTreeSet<u64> = result
        .entries
        .iter()
        .map(|e| e.image_id)
        .filter(|id| universe.contains_key(id))
        .collect();
    let relevant: BTreeSet<u64> = universe
        .iter()
        .filter(|(_, label)| **label == query.class_label)
        .map(|(id, _)| *id)
        .collect();
    compute_factors(query.name, &returned, &relevant, universe.len())
}

/// Stored images that have no histogram under the index, ascending.
pub fn unindexed_images(store: &Store, index_id: u64) -> Result<Vec<u64>> {
    store.read(|v| {
        v.get::<Vocabulary>(index_id)?;
        let indexed: BTreeSet<u64> = v.histograms_for_index(index_id).map(|h| h.image_id).collect();
        Ok(v.iter::<ImageRecord>()
            .map(|img| img.id)
            .filter(|id| !indexed.contains(id))
            .collect())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Aggregate {
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
}

impl Aggregate {
    pub fn of(rows: &[RetrievalFactors]) -> Self {
        if rows.is_empty() {
            return Self::default();
        }
        let n = rows.len() as f64;
        Self {
            mean_precision: Some(rows.iter().map(|r| r.precision).sum::<f64>() / n),
            mean_recall: Some(rows.iter().map(|r| r.recall).sum::<f64>() / n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub rows: Vec<RetrievalFactors>,
    pub aggregate: Aggregate,
}

/// Runs every query image and averages precision and recall. Rows follow
/// the order of `query_set`; the first failing query (in that order) aborts
/// the run.
pub fn simulate_multi_query(
    engine: &Engine,
    query_set: &[u64],
    index_id: u64,
    options: &QueryOptions,
) -> Result<SimulationReport> {
    engine.store().read(|v| v.get::<Vocabulary>(index_id).map(|_| ()))?;
    let outcomes: Vec<Result<RetrievalFactors>> = query_set
        .par_iter()
        .map(|&id| simulate_single_query(engine, id, index_id, options).map_err(|e| for_query(e, id)))
        .collect();
    let rows = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let aggregate = Aggregate::of(&rows);
    Ok(SimulationReport { rows, aggregate })
}

fn for_query(err: Error, id: u64) -> Error {
    match err {
        Error::Validation(m) => Error::Validation(format!("query image {id}: {m}")),
        Error::Decode(m) => Error::Decode(format!("query image {id}: {m}")),
        Error::InsufficientData(m) => Error::InsufficientData(format!("query image {id}: {m}")),
        Error::Storage(m) => Error::Storage(format!("query image {id}: {m}")),
        other => other,
    }
}

impl SimulationReport {
    /// CSV with one row per query and a trailing `mean` row carrying the
    /// aggregate precision and recall.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Storage(format!("cannot write report: {e}"));
        w.write_record(CSV_HEADER.split(',')).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.query_name.clone(),
                r.ri.to_string(),
                r.ai.to_string(),
                r.rai.to_string(),
                r.iri.to_string(),
                r.anr.to_string(),
                r.inr.to_string(),
                r.precision.to_string(),
                r.recall.to_string(),
            ])
            .map_err(io)?;
        }
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut footer = vec![String::from("mean")];
        footer.extend(std::iter::repeat_n(String::new(), 6));
        footer.push(fmt(self.aggregate.mean_precision));
        footer.push(fmt(self.aggregate.mean_recall));
        w.write_record(&footer).map_err(io)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
