//! Evaluation protocols: NME, MAE, empirical ROC operating points, open-set
//! identification and pose-binned breakdowns.
//!
//! All ROC quantities are step functions of the empirical scores; a pair
//! passes a threshold `t` when its score is `>= t`, higher meaning more
//! similar.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::BBox;
use crate::sampler::{pose_group_with, YAW_GROUP_EDGES};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkEval {
    pub predicted: Vec<[f64; 2]>,
    pub ground_truth: Vec<[f64; 2]>,
    pub bbox: BBox,
}

/// Mean point error normalized by `sqrt(w·h)` of the box, in percent.
pub fn nme(e: &LandmarkEval) -> Result<f64> {
    let norm = e.bbox.area().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("bounding box has zero area".into()));
    }
    if e.predicted.len() != e.ground_truth.len() || e.predicted.is_empty() {
        return Err(Error::InvalidInput(
            "prediction and ground truth differ in length".into(),
        ));
    }
    let sum: f64 = e
        .predicted
        .iter()
        .zip(&e.ground_truth)
        .map(|(p, g)| (p[0] - g[0]).hypot(p[1] - g[1]))
        .sum();
    Ok(100.0 * sum / (e.predicted.len() as f64 * norm))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMean {
    pub mean: f64,
    pub count: usize,
}

/// Mean of `values` grouped by `|yaw|` under right-closed `edges`; empty
/// bins are `None`.
pub fn mean_by_yaw(items: &[(f64, f64)], edges: &[f64]) -> Vec<Option<BinMean>> {
    let mut sums = vec![(0.0, 0usize); edges.len()];
    for &(yaw, v) in items {
        let b = &mut sums[pose_group_with(yaw, edges)];
        b.0 += v;
        b.1 += 1;
    }
    sums.into_iter()
        .map(|(s, n)| {
            (n > 0).then(|| BinMean {
                mean: s / n as f64,
                count: n,
            })
        })
        .collect()
}

/// Per-bin mean NME of `(yaw, eval)` records.
pub fn nme_by_yaw(records: &[(f64, LandmarkEval)], edges: &[f64]) -> Result<Vec<Option<BinMean>>> {
    let vals = records
        .iter()
        .map(|(y, e)| Ok((*y, nme(e)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_by_yaw(&vals, edges))
}

pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(Error::InvalidInput(
            "mae needs equal, non-empty inputs".into(),
        ));
    }
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / predicted.len() as f64)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub far: f64,
    pub tar: f64,
    pub threshold: f64,
}

fn pass_count(scores: &[f64], t: f64) -> usize {
    scores.iter().filter(|&&s| s >= t).count()
}

/// Smallest threshold among the observed scores (plus one step above the
/// largest negative) whose negative pass rate is at most `rate`.
fn operating_threshold(negatives: &[f64], positives: &[f64], rate: f64) -> Result<f64> {
    if negatives.is_empty() {
        return Err(Error::InvalidInput(
            "no negative scores to calibrate a threshold".into(),
        ));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target rate {rate} outside (0, 1)"
        )));
    }
    let n = negatives.len();
    if rate < 1.0 / n as f64 {
        return Err(Error::Unsupported(format!(
            "rate {rate} is below the resolution 1/{n} of the negative set"
        )));
    }
    if negatives.iter().chain(positives).any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut neg = negatives.to_vec();
    neg.sort_by(|a, b| b.total_cmp(a));
    // Largest admissible number of negative passes.
    let allowed = (0..=n)
        .rev()
        .find(|&m| m as f64 / n as f64 <= rate)
        .unwrap_or(0);
    if allowed == n {
        let lowest = neg
            .iter()
            .chain(positives)
            .copied()
            .fold(f64::INFINITY, f64::min);
        return Ok(lowest);
    }
    let floor = neg[allowed];
    let above = neg
        .iter()
        .chain(positives)
        .copied()
        .filter(|&s| s > floor)
        .fold(f64::INFINITY, f64::min);
    Ok(if above.is_finite() {
        above
    } else {
        floor.next_up()
    })
}

pub fn roc_tar_at_far(s: &ScoreSet, far: f64) -> Result<RocPoint> {
    if s.genuine.is_empty() {
        return Err(Error::InvalidInput("no genuine scores".into()));
    }
    let threshold = operating_threshold(&s.imposter, &s.genuine, far)?;
    Ok(RocPoint {
        far,
        tar: pass_count(&s.genuine, threshold) as f64 / s.genuine.len() as f64,
        threshold,
    })
}

pub fn fnmr_at_far(s: &ScoreSet, far: f64) -> Result<f64> {
    Ok(1.0 - roc_tar_at_far(s, far)?.tar)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Cosine,
    /// Negative Euclidean distance.
    NegL2,
}

impl std::str::FromStr for Similarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "neg_l2" | "l2" => Ok(Similarity::NegL2),
            other => Err(Error::InvalidInput(format!("unknown similarity '{other}'"))),
        }
    }
}

impl Similarity {
    pub fn score(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Similarity::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot / (na * nb)
                }
            }
            Similarity::NegL2 => -a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEmbedding {
    pub label: String,
    pub embedding: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TpirPoint {
    pub fpir: f64,
    pub tpir: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSetResult {
    pub rank1: f64,
    pub points: Vec<TpirPoint>,
    pub mated: usize,
    pub non_mated: usize,
}

/// Best gallery match of a probe: `(index, score)`, ties to the lowest index.
pub fn top_match(
    probe: &[f64],
    gallery: &[LabeledEmbedding],
    sim: Similarity,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in gallery.iter().enumerate() {
        let s = sim.score(probe, &g.embedding);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

/// Probes whose label is in the gallery are mated; the top scores of the
/// others calibrate each FPIR threshold.
pub fn open_set_tpir(
    probes: &[LabeledEmbedding],
    gallery: &[LabeledEmbedding],
    fpirs: &[f64],
    sim: Similarity,
) -> Result<OpenSetResult> {
    if gallery.is_empty() {
        return Err(Error::InvalidInput("empty gallery".into()));
    }
    let mut mated = Vec::new();
    let mut non_mated = Vec::new();
    for p in probes {
        let (idx, score) = top_match(&p.embedding, gallery, sim).expect("gallery is non-empty");
        if gallery.iter().any(|g| g.label == p.label) {
            mated.push((gallery[idx].label == p.label, score));
        } else {
            non_mated.push(score);
        }
    }
    if non_mated.is_empty() {
        return Err(Error::InvalidInput(
            "no non-mated probes for FPIR calibration".into(),
        ));
    }
    let correct_scores: Vec<f64> = mated.iter().filter(|m| m.0).map(|m| m.1).collect();
    let all_mated: Vec<f64> = mated.iter().map(|m| m.1).collect();
    let denom = mated.len().max(1) as f64;
    let points = fpirs
        .iter()
        .map(|&fpir| {
            let threshold = operating_threshold(&non_mated, &all_mated, fpir)?;
            Ok(TpirPoint {
                fpir,
                tpir: pass_count(&correct_scores, threshold) as f64 / denom,
                threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OpenSetResult {
        rank1: correct_scores.len() as f64 / denom,
        points,
        mated: mated.len(),
        non_mated: non_mated.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id_a: String,
    pub id_b: String,
    pub score: f64,
    pub genuine: bool,
    pub yaw_a: Option<f64>,
    pub yaw_b: Option<f64>,
}

impl ScoredPair {
    /// Larger absolute yaw of the two images.
    pub fn pair_yaw(&self) -> Option<f64> {
        Some(self.yaw_a?.abs().max(self.yaw_b?.abs()))
    }
}

pub fn score_set(pairs: &[ScoredPair]) -> ScoreSet {
    let mut s = ScoreSet::default();
    for p in pairs {
        if p.genuine {
            s.genuine.push(p.score);
        } else {
            s.imposter.push(p.score);
        }
    }
    s
}

/// Template yaw statistic: the larger absolute yaw within each template,
/// averaged over the two templates.
pub fn template_pair_yaw(yaws_a: &[f64], yaws_b: &[f64]) -> Option<f64> {
    let max_abs = |v: &[f64]| v.iter().map(|y| y.abs()).reduce(f64::max);
    Some((max_abs(yaws_a)? + max_abs(yaws_b)?) / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinTar {
    pub tar: f64,
    pub genuine: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub far: f64,
    pub threshold: f64,
    /// Per yaw group; `None` where the group holds no genuine pair.
    pub bins: Vec<Option<BinTar>>,
}

/// TAR per pair-yaw group at thresholds fixed on the whole pair set.
pub fn covariate_breakdown(pairs: &[ScoredPair], fars: &[f64]) -> Result<Vec<CovariateRow>> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); YAW_GROUP_EDGES.len()];
    for p in pairs.iter().filter(|p| p.genuine) {
        let yaw = p
            .pair_yaw()
            .ok_or_else(|| Error::InvalidInput(format!("pair {}/{} lacks yaw", p.id_a, p.id_b)))?;
        groups[pose_group_with(yaw, &YAW_GROUP_EDGES)].push(p.score);
    }
    let all = score_set(pairs);
    fars.iter()
        .map(|&far| {
            let pt = roc_tar_at_far(&all, far)?;
            Ok(CovariateRow {
                far,
                threshold: pt.threshold,
                bins: groups
                    .iter()
                    .map(|g| {
                        (!g.is_empty()).then(|| BinTar {
                            tar: pass_count(g, pt.threshold) as f64 / g.len() as f64,
                            genuine: g.len(),
                        })
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Mean within each media group, mean of the group means, L2-normalized.
pub fn template_pool(groups: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    let groups: Vec<&Vec<Vec<f64>>> = groups.iter().filter(|g| !g.is_empty()).collect();
    let dim = groups
        .first()
        .map(|g| g[0].len())
        .ok_or_else(|| Error::InvalidInput("empty template".into()))?;
    let mut acc = vec![0.0; dim];
    for g in &groups {
        let mut mean = vec![0.0; dim];
        for e in g.iter() {
            if e.len() != dim {
                return Err(Error::InvalidInput("embedding dimensions differ".into()));
            }
            mean.iter_mut().zip(e).for_each(|(m, x)| *m += x);
        }
        acc.iter_mut()
            .zip(&mean)
            .for_each(|(a, m)| *a += m / g.len() as f64);
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("pooled template has zero norm".into()));
    }
    Ok(acc.into_iter().map(|x| x / norm).collect())
}

#[derive(Deserialize)]
struct ScoreRow {
    id_a: String,
    id_b: String,
    score: f64,
    label: String,
    #[serde(default)]
    yaw_a: Option<f64>,
    #[serde(default)]
    yaw_b: Option<f64>,
}

/// Reads `id_a,id_b,score,label[,yaw_a,yaw_b]` with a header row; labels
/// are `1`/`0` or `true`/`false`.
pub fn read_score_csv(path: &Path) -> Result<Vec<ScoredPair>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize::<ScoreRow>()
        .map(|row| {
            let r = row?;
            let genuine = match r.label.trim() {
                "1" | "true" | "genuine" => true,
                "0" | "false" | "imposter" => false,
                other => return Err(Error::InvalidInput(format!("bad pair label '{other}'"))),
            };
            Ok(ScoredPair {
                id_a: r.id_a,
                id_b: r.id_b,
                score: r.score,
                genuine,
                yaw_a: r.yaw_a,
                yaw_b: r.yaw_b,
            })
        })
        .collect()
}

/// Reads headerless `label,x0,x1,...` rows.
pub fn read_embedding_csv(path: &Path) -> Result<Vec<LabeledEmbedding>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let mut it = rec.iter();
            let label = it.next().unwrap_or_default().to_string();
            let embedding = it
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad embedding value '{v}': {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LabeledEmbedding { label, embedding })
        })
        .collect()
}

#[derive(Deserialize)]
struct ValueRow {
    predicted: f64,
    truth: f64,
}

/// Reads `predicted,truth` rows (header row required, extra columns ignored)
/// as two parallel columns, e.g. for [`mae`].
pub fn read_value_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = (Vec::new(), Vec::new());
    for row in rdr.deserialize::<ValueRow>() {
        let r = row?;
        out.0.push(r.predicted);
        out.1.push(r.truth);
    }
    Ok(out)
}
