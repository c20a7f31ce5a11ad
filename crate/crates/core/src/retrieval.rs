//! Shot index persistence, query-by-expression and retrieval metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RetrievalConfig;
use crate::error::{Error, Result};
use crate::facs::{classify_au_set, pattern_database, AuSet, ExpressionLabel, RulePattern};
use crate::image::load_image;
use crate::pipeline::{analyze_frame, Models, ShotFailure, ShotManifest, ShotOutcome, ShotRecord};

pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub label: ExpressionLabel,
    pub pattern: RulePattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotIndex {
    pub version: u32,
    /// Shot ids per expression, in ingestion order.
    pub pools: BTreeMap<ExpressionLabel, Vec<String>>,
    pub records: Vec<ShotRecord>,
    #[serde(default)]
    pub failures: Vec<ShotFailure>,
    pub patterns: Vec<PatternEntry>,
}

impl Default for ShotIndex {
    fn default() -> Self {
        Self::build(&[])
    }
}

impl ShotIndex {
    pub fn build(outcomes: &[ShotOutcome]) -> Self {
        let mut pools: BTreeMap<ExpressionLabel, Vec<String>> = BTreeMap::new();
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for o in outcomes {
            match o {
                Ok(r) => {
                    pools.entry(r.shot_expression).or_default().push(r.shot_id.clone());
                    records.push(r.clone());
                }
                Err(f) => failures.push(f.clone()),
            }
        }
        let patterns = pattern_database()
            .into_iter()
            .map(|(label, p)| PatternEntry {
                label,
                pattern: p.parse().expect("generated patterns parse"),
            })
            .collect();
        Self {
            version: INDEX_VERSION,
            pools,
            records,
            failures,
            patterns,
        }
    }

    pub fn record(&self, shot_id: &str) -> Option<&ShotRecord> {
        self.records.iter().find(|r| r.shot_id == shot_id)
    }

    pub fn pool(&self, label: ExpressionLabel) -> &[String] {
        self.pools.get(&label).map_or(&[], Vec::as_slice)
    }

    /// Ground-truth labels carried by the records, where present.
    pub fn truth(&self) -> BTreeMap<String, ExpressionLabel> {
        self.records
            .iter()
            .filter_map(|r| r.truth.map(|t| (r.shot_id.clone(), t)))
            .collect()
    }

    /// Checks that the pools partition the records by their labels.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut ids = BTreeSet::new();
        for r in &self.records {
            if !ids.insert(r.shot_id.as_str()) {
                return Err(format!("duplicate shot `{}`", r.shot_id));
            }
            if r.frame_labels.len() != r.frame_count || r.frame_patterns.len() != r.frame_count {
                return Err(format!("shot `{}` has inconsistent frame data", r.shot_id));
            }
            if r.key_faces.iter().any(|&k| k >= r.frame_count) {
                return Err(format!("shot `{}` has a key face outside its frames", r.shot_id));
            }
        }
        let mut pooled = 0;
        for (label, members) in &self.pools {
            for id in members {
                match self.record(id) {
                    Some(r) if r.shot_expression == *label => pooled += 1,
                    Some(_) => return Err(format!("shot `{id}` is pooled under the wrong label {label}")),
                    None => return Err(format!("pool {label} names unknown shot `{id}`")),
                }
            }
        }
        if pooled != self.records.len() {
            return Err("pools do not cover every record exactly once".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("index serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let integrity = |e: serde_json::Error| Error::Integrity {
            offset: byte_offset(text, e.line(), e.column()),
            message: e.to_string(),
        };
        let header: Header = serde_json::from_str(text).map_err(integrity)?;
        if header.version > INDEX_VERSION {
            return Err(Error::FutureVersion {
                found: header.version,
                supported: INDEX_VERSION,
            });
        }
        let index: ShotIndex = serde_json::from_str(text).map_err(integrity)?;
        index
            .validate()
            .map_err(|message| Error::Integrity { offset: 0, message })?;
        Ok(index)
    }
}

/// Byte offset of a 1-based line and column as reported by serde_json.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn save_index(index: &ShotIndex, path: &Path) -> Result<()> {
    std::fs::write(path, index.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: &Path) -> Result<ShotIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Integrity {
        offset: e.valid_up_to(),
        message: format!("{}: not UTF-8", path.display()),
    })?;
    ShotIndex::from_json(text)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Aus(AuSet),
    Frame(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub shot_id: String,
    pub score: usize,
    pub shot_expression: ExpressionLabel,
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub label: ExpressionLabel,
    pub pattern: RulePattern,
    pub hits: Vec<QueryHit>,
}

/// Longest run of consecutive key faces whose frame label is `label`.
pub fn longest_run(record: &ShotRecord, label: ExpressionLabel) -> usize {
    let (mut best, mut run) = (0, 0);
    for l in record.key_face_labels() {
        run = if l == label { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

/// Every shot in the label's pool, by longest key-face run then shot id.
pub fn query_label(index: &ShotIndex, label: ExpressionLabel) -> Vec<QueryHit> {
    let mut hits: Vec<QueryHit> = index
        .pool(label)
        .iter()
        .filter_map(|id| index.record(id))
        .map(|r| QueryHit {
            shot_id: r.shot_id.clone(),
            score: longest_run(r, label),
            shot_expression: r.shot_expression,
            frame_count: r.frame_count,
        })
        .collect();
    hits.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.shot_id.cmp(&b.shot_id)));
    hits
}

/// Nearest database label within `radius` bit flips; ties keep database order.
fn hamming_fallback(index: &ShotIndex, pattern: &RulePattern, radius: u32) -> Option<ExpressionLabel> {
    index
        .patterns
        .iter()
        .map(|e| (pattern.hamming(&e.pattern), e.label))
        .filter(|(d, _)| *d <= radius)
        .min_by_key(|(d, _)| *d)
        .map(|(_, l)| l)
}

pub fn query(index: &ShotIndex, probe: &Probe, models: Option<&Models>, cfg: &RetrievalConfig) -> Result<QueryResult> {
    let aus = match probe {
        Probe::Aus(a) => *a,
        Probe::Frame(path) => {
            let models = models.ok_or_else(|| Error::Model("frame probes need trained models (--models)".into()))?;
            let frame = analyze_frame(0, &load_image(path)?, models)?;
            frame.faces.first().map_or_else(AuSet::default, |f| f.aus)
        }
    };
    let c = classify_au_set(aus);
    let mut label = c.label;
    if label == ExpressionLabel::Unknown && cfg.hamming_radius > 0 {
        if let Some(l) = hamming_fallback(index, &c.pattern, cfg.hamming_radius) {
            label = l;
        }
    }
    Ok(QueryResult {
        label,
        pattern: c.pattern,
        hits: query_label(index, label),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub label: ExpressionLabel,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    /// Metrics whose denominator was zero and were reported as 0.
    pub undefined: Vec<String>,
}

fn ratio(num: f64, den: f64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, F_β and accuracy from confusion counts.
pub fn metrics_from_counts(label: ExpressionLabel, tp: usize, fp: usize, fn_: usize, tn: usize, beta: f64) -> Metrics {
    let mut undefined = Vec::new();
    let precision = ratio(tp as f64, (tp + fp) as f64, "precision", &mut undefined);
    let recall = ratio(tp as f64, (tp + fn_) as f64, "recall", &mut undefined);
    let b2 = beta * beta;
    let f_measure = ratio(
        (1.0 + b2) * precision * recall,
        b2 * precision + recall,
        "f_measure",
        &mut undefined,
    );
    let accuracy = ratio((tp + tn) as f64, (tp + fp + fn_ + tn) as f64, "accuracy", &mut undefined);
    Metrics {
        label,
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        f_measure,
        accuracy,
        undefined,
    }
}

/// Scores one query result against ground truth over all indexed shots.
pub fn evaluate(
    result: &QueryResult,
    index: &ShotIndex,
    truth: &BTreeMap<String, ExpressionLabel>,
    beta: f64,
) -> Result<Metrics> {
    let retrieved: BTreeSet<&str> = result.hits.iter().map(|h| h.shot_id.as_str()).collect();
    for id in &retrieved {
        if index.record(id).is_none() {
            return Err(Error::Evaluation(format!("result names unknown shot `{id}`")));
        }
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for r in &index.records {
        let t = truth
            .get(&r.shot_id)
            .ok_or_else(|| Error::Evaluation(format!("no ground truth for shot `{}`", r.shot_id)))?;
        let relevant = *t == result.label;
        match (retrieved.contains(r.shot_id.as_str()), relevant) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(metrics_from_counts(result.label, tp, fp, fn_, tn, beta))
}

/// Queries every expression by label and scores it.
pub fn evaluate_all(index: &ShotIndex, truth: &BTreeMap<String, ExpressionLabel>, beta: f64) -> Result<Vec<Metrics>> {
    ExpressionLabel::EXPRESSIONS
        .iter()
        .map(|&label| {
            let result = QueryResult {
                label,
                pattern: RulePattern::default(),
                hits: query_label(index, label),
            };
            evaluate(&result, index, truth, beta)
        })
        .collect()
}

pub fn truth_from_manifest(manifest: &ShotManifest) -> Result<BTreeMap<String, ExpressionLabel>> {
    let mut out = BTreeMap::new();
    for shot in &manifest.shots {
        if let Some(t) = shot.truth()? {
            out.insert(shot.shot_id.clone(), t);
        }
    }
    Ok(out)
}

/// Aligned-column text table of per-expression metrics.
pub fn metrics_table(metrics: &[Metrics]) -> String {
    let mut out = format!(
        "{:<12} {:>4} {:>4} {:>4} {:>4} {:>9} {:>9} {:>9} {:>9}\n",
        "expression", "tp", "fp", "fn", "tn", "precision", "recall", "F", "accuracy"
    );
    for m in metrics {
        out.push_str(&format!(
            "{:<12} {:>4} {:>4} {:>4} {:>4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}{}\n",
            m.label.name(),
            m.tp,
            m.fp,
            m.fn_,
            m.tn,
            m.precision,
            m.recall,
            m.f_measure,
            m.accuracy,
            if m.undefined.is_empty() {
                String::new()
            } else {
                format!("  (undefined: {})", m.undefined.join(","))
            }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{aggregate_shot, analyze_aus};
    use ExpressionLabel::*;

    fn aus(codes: &[u8]) -> AuSet {
        AuSet::try_from_codes(codes.iter().copied()).unwrap()
    }

    fn shot(id: &str, frames: &[&[u8]]) -> ShotOutcome {
        let analyses: Vec<_> = frames.iter().enumerate().map(|(i, c)| analyze_aus(i, aus(c))).collect();
        Ok(aggregate_shot(id, &analyses).unwrap())
    }

    const H: &[u8] = &[6, 12];
    const S: &[u8] = &[1, 7, 15, 63];

    fn three_shots() -> ShotIndex {
        ShotIndex::build(&[shot("S1", &[H, H]), shot("S2", &[S]), shot("S3", &[H])])
    }

    #[test]
    fn label_filter() {
        let idx = three_shots();
        let r = query(&idx, &Probe::Aus(aus(&[6, 12])), None, &RetrievalConfig::default()).unwrap();
        assert_eq!(r.label, Happiness);
        let ids: Vec<_> = r.hits.iter().map(|h| h.shot_id.as_str()).collect();
        assert_eq!(ids, ["S1", "S3"]);
        let r = query(&idx, &Probe::Aus(AuSet::default()), None, &RetrievalConfig::default()).unwrap();
        assert_eq!(r.label, Neutral);
        assert!(r.hits.is_empty());
    }

    #[test]
    fn longest_run_ranking() {
        let idx = ShotIndex::build(&[shot("S3", &[H, S]), shot("S1", &[H, H, S, H])]);
        let hits = query_label(&idx, Happiness);
        assert_eq!(hits[0].shot_id, "S1");
        assert_eq!(hits[0].score, 2);
        assert_eq!(hits[1].score, 1);
    }

    #[test]
    fn hamming_hook() {
        let idx = three_shots();
        // {6} alone matches no template; one bit away from {6,12}.
        let probe = Probe::Aus(aus(&[6]));
        let exact = query(&idx, &probe, None, &RetrievalConfig::default()).unwrap();
        assert_eq!(exact.label, Unknown);
        let fuzzy = RetrievalConfig {
            hamming_radius: 1,
            ..RetrievalConfig::default()
        };
        assert_eq!(query(&idx, &probe, None, &fuzzy).unwrap().label, Happiness);
    }

    #[test]
    fn round_trip_and_integrity() {
        let idx = three_shots();
        let json = idx.to_json();
        let back = ShotIndex::from_json(&json).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_json(), json);
        let empty = ShotIndex::default();
        assert_eq!(ShotIndex::from_json(&empty.to_json()).unwrap(), empty);

        let cut = &json[..json.len() / 2];
        match ShotIndex::from_json(cut).unwrap_err() {
            Error::Integrity { offset, .. } => assert!(offset <= cut.len()),
            e => panic!("{e}"),
        }
        let future = json.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(
            ShotIndex::from_json(&future),
            Err(Error::FutureVersion { found: 2, supported: 1 })
        ));
        let mut moved = idx.clone();
        moved.pools.get_mut(&Happiness).unwrap().retain(|s| s != "S1");
        moved.pools.get_mut(&Sadness).unwrap().push("S1".into());
        assert!(matches!(ShotIndex::from_json(&moved.to_json()), Err(Error::Integrity { .. })));
    }

    #[test]
    fn byte_offsets() {
        assert_eq!(byte_offset("ab\ncd", 2, 2), 4);
        assert_eq!(byte_offset("ab", 1, 0), 0);
    }

    #[test]
    fn metrics() {
        let m = metrics_from_counts(Happiness, 2, 1, 0, 5, 1.0);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
        assert!((m.f_measure - 0.8).abs() < 1e-12);
        let z = metrics_from_counts(Happiness, 0, 0, 0, 0, 1.0);
        assert_eq!(z.precision, 0.0);
        assert_eq!(z.undefined, ["precision", "recall", "f_measure", "accuracy"]);
    }

    #[test]
    fn evaluation() {
        let idx = three_shots();
        let truth: BTreeMap<_, _> = [("S1", Happiness), ("S2", Sadness), ("S3", Happiness)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let all = evaluate_all(&idx, &truth, 1.0).unwrap();
        let happy = all.iter().find(|m| m.label == Happiness).unwrap();
        assert_eq!((happy.tp, happy.fp, happy.fn_, happy.tn), (2, 0, 0, 1));
        assert_eq!(happy.f_measure, 1.0);
        let bogus = QueryResult {
            label: Happiness,
            pattern: RulePattern::default(),
            hits: vec![QueryHit {
                shot_id: "nope".into(),
                score: 0,
                shot_expression: Happiness,
                frame_count: 1,
            }],
        };
        assert!(evaluate(&bogus, &idx, &truth, 1.0).is_err());
        assert!(metrics_table(&all).lines().count() == 11);
    }
}
