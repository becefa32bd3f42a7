//! Dataset-level augmentation planning: yaw binning, per-identity yaw
//! entropy, random and entropy-driven planners under a synthetic/real cap,
//! and the per-task view menus.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pose::EulerOffsets;
use crate::render::LightId;
use crate::{Error, Result};

/// Right-closed upper edges of the absolute-yaw groups.
pub const YAW_GROUP_EDGES: [f64; 5] = [10.0, 30.0, 50.0, 70.0, 90.0];
pub const DEFAULT_RATIO_CAP: f64 = 0.5;
pub const DEFAULT_NEAR_FRONTAL_DEG: f64 = 15.0;

/// Half the maximum entropy over five groups, `ln(5)/2`.
pub fn default_entropy_cutoff() -> f64 {
    5f64.ln() / 2.0
}

/// Index of the first edge `>= |yaw|`; yaws beyond the last edge fall in
/// the last group.
pub fn pose_group_with(yaw_deg: f64, edges: &[f64]) -> usize {
    let a = yaw_deg.abs();
    edges
        .iter()
        .position(|&e| a <= e)
        .unwrap_or(edges.len() - 1)
}

pub fn pose_group(yaw_deg: f64) -> usize {
    pose_group_with(yaw_deg, &YAW_GROUP_EDGES)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl PoseHistogram {
    pub fn new(bin_edges: Vec<f64>) -> Result<Self> {
        if bin_edges.is_empty() || bin_edges.windows(2).any(|w| w[0] >= w[1]) || bin_edges[0] <= 0.0
        {
            return Err(Error::InvalidInput(format!(
                "bin edges must be positive and ascending: {bin_edges:?}"
            )));
        }
        let n = bin_edges.len();
        Ok(PoseHistogram {
            bin_edges,
            counts: vec![0; n],
        })
    }

    pub fn yaw_groups() -> Self {
        PoseHistogram {
            bin_edges: YAW_GROUP_EDGES.to_vec(),
            counts: vec![0; YAW_GROUP_EDGES.len()],
        }
    }

    pub fn from_yaws(yaws: impl IntoIterator<Item = f64>) -> Self {
        let mut h = Self::yaw_groups();
        for y in yaws {
            h.add(y);
        }
        h
    }

    pub fn add(&mut self, yaw_deg: f64) {
        let i = pose_group_with(yaw_deg, &self.bin_edges);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn densities(&self) -> Vec<f64> {
        let t = self.total() as f64;
        self.counts
            .iter()
            .map(|&c| if t > 0.0 { c as f64 / t } else { 0.0 })
            .collect()
    }
}

/// `Σ −p_i ln p_i` over the histogram densities, with `0·ln 0 = 0`.
///
/// Bins with equal counts are summed as one term `(m·c/T)·ln(T/c)`, which
/// makes the one-hot (0) and uniform (`ln n`) cases exact.
pub fn identity_yaw_entropy(hist: &PoseHistogram) -> Result<f64> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::InvalidInput("entropy of an empty histogram".into()));
    }
    let mut counts: Vec<u64> = hist.counts.iter().copied().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    let t = total as f64;
    let mut e = 0.0;
    for run in counts.chunk_by(|a, b| a == b) {
        let c = run[0] as f64;
        e += (run.len() as f64 * c / t) * (t / c).ln();
    }
    Ok(e.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyStat {
    pub identity: String,
    pub entropy: f64,
}

/// A record as seen by the planners.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub identity: String,
    pub yaw_deg: f64,
}

fn histograms<'a>(
    items: impl IntoIterator<Item = (&'a str, f64)>,
) -> BTreeMap<&'a str, PoseHistogram> {
    let mut map: BTreeMap<&str, PoseHistogram> = BTreeMap::new();
    for (id, yaw) in items {
        map.entry(id)
            .or_insert_with(PoseHistogram::yaw_groups)
            .add(yaw);
    }
    map
}

/// Per-identity entropy, ordered by identity.
pub fn identity_entropies(records: &[SampleRecord]) -> Vec<EntropyStat> {
    histograms(records.iter().map(|r| (r.identity.as_str(), r.yaw_deg)))
        .into_iter()
        .map(|(id, h)| EntropyStat {
            identity: id.to_string(),
            entropy: identity_yaw_entropy(&h).expect("histograms are built non-empty"),
        })
        .collect()
}

/// Identities with entropy strictly below `cutoff`.
pub fn entropy_cutoff_selection(stats: &[EntropyStat], cutoff: f64) -> BTreeSet<String> {
    stats
        .iter()
        .filter(|s| s.entropy < cutoff)
        .map(|s| s.identity.clone())
        .collect()
}

pub fn near_frontal(yaw_deg: f64, threshold_deg: f64) -> bool {
    yaw_deg.abs() < threshold_deg
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Landmark,
    Attributes,
    Recognition,
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "landmark" => Ok(Task::Landmark),
            "attributes" => Ok(Task::Attributes),
            "recognition" => Ok(Task::Recognition),
            other => Err(Error::InvalidInput(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewMenu {
    pub offsets: Vec<EulerOffsets>,
}

pub fn task_strategy(task: Task) -> ViewMenu {
    let offsets = match task {
        Task::Landmark | Task::Recognition => [-40.0, -20.0, 20.0, 40.0]
            .into_iter()
            .map(|y| EulerOffsets { yaw: y, pitch: 0.0 })
            .collect(),
        Task::Attributes => {
            let mut v = Vec::new();
            for yaw in [-60.0, -40.0, -20.0, -10.0, 10.0, 20.0, 40.0, 60.0] {
                for pitch in [-20.0, 0.0, 20.0] {
                    v.push(EulerOffsets { yaw, pitch });
                }
            }
            v
        }
    };
    ViewMenu { offsets }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedView {
    pub offsets: EulerOffsets,
    pub light: Option<LightId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationPlan {
    /// Views per source record, in record order.
    pub views: Vec<Vec<PlannedView>>,
    pub real_count: usize,
    pub synth_count: usize,
}

impl AugmentationPlan {
    fn empty(real_count: usize) -> Self {
        AugmentationPlan {
            views: vec![Vec::new(); real_count],
            real_count,
            synth_count: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Random,
    Entropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub scheme: Scheme,
    pub ratio_cap: f64,
    pub entropy_cutoff: f64,
    pub near_frontal_deg: f64,
    /// Attach a uniformly drawn light to each view.
    pub relight: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            scheme: Scheme::Random,
            ratio_cap: DEFAULT_RATIO_CAP,
            entropy_cutoff: default_entropy_cutoff(),
            near_frontal_deg: DEFAULT_NEAR_FRONTAL_DEG,
            relight: true,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_cap >= 0.0 && self.ratio_cap.is_finite()) {
            return Err(Error::Config(format!(
                "ratio_cap must be finite and >= 0, got {}",
                self.ratio_cap
            )));
        }
        if !(self.entropy_cutoff >= 0.0) {
            return Err(Error::Config(format!(
                "entropy_cutoff must be >= 0, got {}",
                self.entropy_cutoff
            )));
        }
        if !(self.near_frontal_deg > 0.0 && self.near_frontal_deg <= 90.0) {
            return Err(Error::Config(format!(
                "near_frontal_deg must be in (0, 90], got {}",
                self.near_frontal_deg
            )));
        }
        Ok(())
    }

    /// Largest synthetic count allowed for `real` records.
    pub fn budget(&self, real: usize) -> usize {
        (self.ratio_cap * real as f64).floor() as usize
    }
}

fn candidate_views(
    records: &[SampleRecord],
    menu: &ViewMenu,
    cfg: &SamplingConfig,
    admissible: &dyn Fn(usize, &EulerOffsets) -> bool,
    include: &dyn Fn(&SampleRecord) -> bool,
) -> Vec<Vec<EulerOffsets>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !include(r) || !near_frontal(r.yaw_deg, cfg.near_frontal_deg) {
                return Vec::new();
            }
            menu.offsets
                .iter()
                .copied()
                .filter(|o| admissible(i, o))
                .collect()
        })
        .collect()
}

fn attach_light(rng: &mut ChaCha8Rng, relight: bool) -> Option<LightId> {
    relight.then(|| LightId::sample(rng))
}

/// Uniform random views for near-frontal records, drawn without replacement
/// in round-robin over a shuffled record order until the cap is reached.
pub fn plan_random(
    records: &[SampleRecord],
    menu: &ViewMenu,
    cfg: &SamplingConfig,
    seed: u64,
    admissible: &dyn Fn(usize, &EulerOffsets) -> bool,
) -> AugmentationPlan {
    let mut plan = AugmentationPlan::empty(records.len());
    let budget = cfg.budget(records.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools = candidate_views(records, menu, cfg, admissible, &|_| true);
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }
    let mut order: Vec<usize> = (0..records.len())
        .filter(|&i| !pools[i].is_empty())
        .collect();
    order.shuffle(&mut rng);
    let mut round = 0;
    while plan.synth_count < budget {
        let mut progressed = false;
        for &i in &order {
            if plan.synth_count == budget {
                break;
            }
            if let Some(&offsets) = pools[i].get(round) {
                let light = attach_light(&mut rng, cfg.relight);
                plan.views[i].push(PlannedView { offsets, light });
                plan.synth_count += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
        round += 1;
    }
    plan
}

/// Record index and one of its admissible views.
type Candidate = (usize, EulerOffsets);

/// Views only for identities whose yaw entropy is below the cutoff. Each
/// round visits the selected identities from lowest entropy up and gives
/// each the single view that raises its entropy the most, provided its
/// entropy does not drop.
pub fn plan_entropy(
    records: &[SampleRecord],
    menu: &ViewMenu,
    cfg: &SamplingConfig,
    seed: u64,
    admissible: &dyn Fn(usize, &EulerOffsets) -> bool,
) -> AugmentationPlan {
    let mut plan = AugmentationPlan::empty(records.len());
    let budget = cfg.budget(records.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stats = identity_entropies(records);
    let selected = entropy_cutoff_selection(&stats, cfg.entropy_cutoff);
    let pools = candidate_views(records, menu, cfg, admissible, &|r| {
        selected.contains(&r.identity)
    });

    let mut hists = histograms(records.iter().map(|r| (r.identity.as_str(), r.yaw_deg)));
    // (identity, remaining (record, offsets) candidates) in visiting order.
    let mut queue: Vec<(&str, f64, Vec<Candidate>)> = stats
        .iter()
        .filter(|s| selected.contains(&s.identity))
        .map(|s| {
            let mut cands: Vec<(usize, EulerOffsets)> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.identity == s.identity)
                .flat_map(|(i, _)| pools[i].iter().map(move |o| (i, *o)))
                .collect();
            cands.shuffle(&mut rng);
            (s.identity.as_str(), s.entropy, cands)
        })
        .collect();
    queue.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));

    let mut active: Vec<bool> = vec![true; queue.len()];
    while plan.synth_count < budget && active.iter().any(|&a| a) {
        for (slot, (id, _, cands)) in queue.iter_mut().enumerate() {
            if plan.synth_count == budget {
                break;
            }
            if !active[slot] {
                continue;
            }
            let hist = hists.get_mut(id).expect("every identity has a histogram");
            let current = identity_yaw_entropy(hist).expect("non-empty");
            let mut best: Option<(usize, f64)> = None;
            for (k, (rec, o)) in cands.iter().enumerate() {
                let mut h = hist.clone();
                h.add(records[*rec].yaw_deg + o.yaw);
                let e = identity_yaw_entropy(&h).expect("non-empty");
                if best.is_none_or(|(_, be)| e > be) {
                    best = Some((k, e));
                }
            }
            match best {
                Some((k, e)) if e >= current => {
                    let (rec, offsets) = cands.remove(k);
                    hist.add(records[rec].yaw_deg + offsets.yaw);
                    let light = attach_light(&mut rng, cfg.relight);
                    plan.views[rec].push(PlannedView { offsets, light });
                    plan.synth_count += 1;
                }
                _ => active[slot] = false,
            }
        }
    }
    plan
}

pub fn plan(
    records: &[SampleRecord],
    menu: &ViewMenu,
    cfg: &SamplingConfig,
    seed: u64,
    admissible: &dyn Fn(usize, &EulerOffsets) -> bool,
) -> AugmentationPlan {
    match cfg.scheme {
        Scheme::Random => plan_random(records, menu, cfg, seed, admissible),
        Scheme::Entropy => plan_entropy(records, menu, cfg, seed, admissible),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub identity: String,
    pub e_before: f64,
    pub e_after: f64,
}

/// Before/after entropy for every identity, the synthetic yaw being the
/// source yaw plus the view's yaw offset.
pub fn entropy_before_after(records: &[SampleRecord], plan: &AugmentationPlan) -> Vec<EntropyRow> {
    let before = histograms(records.iter().map(|r| (r.identity.as_str(), r.yaw_deg)));
    let after = histograms(records.iter().zip(&plan.views).flat_map(|(r, views)| {
        std::iter::once((r.identity.as_str(), r.yaw_deg)).chain(
            views
                .iter()
                .map(move |v| (r.identity.as_str(), r.yaw_deg + v.offsets.yaw)),
        )
    }));
    before
        .iter()
        .map(|(id, h)| EntropyRow {
            identity: id.to_string(),
            e_before: identity_yaw_entropy(h).expect("non-empty"),
            e_after: identity_yaw_entropy(&after[id]).expect("non-empty"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, yaw: f64) -> SampleRecord {
        SampleRecord {
            identity: id.into(),
            yaw_deg: yaw,
        }
    }

    fn any_view(_: usize, _: &EulerOffsets) -> bool {
        true
    }

    // Direct summation over explicit counts.
    fn entropy_oracle(counts: &[u64]) -> f64 {
        let t: u64 = counts.iter().sum();
        let mut e = 0.0;
        for &c in counts {
            if c > 0 {
                let p = c as f64 / t as f64;
                e -= p * p.ln();
            }
        }
        e
    }

    #[test]
    fn group_edges() {
        assert_eq!(pose_group(-5.0), 0);
        assert_eq!(pose_group(10.0), 0);
        assert_eq!(pose_group(30.0), 1);
        assert_eq!(pose_group(30.0001), 2);
        assert_eq!(pose_group(89.0), 4);
        assert_eq!(pose_group(-120.0), 4);
    }

    #[test]
    fn entropy_cases() {
        let one = PoseHistogram {
            bin_edges: YAW_GROUP_EDGES.to_vec(),
            counts: vec![0, 7, 0, 0, 0],
        };
        assert_eq!(identity_yaw_entropy(&one).unwrap(), 0.0);
        let uni = PoseHistogram {
            bin_edges: YAW_GROUP_EDGES.to_vec(),
            counts: vec![3; 5],
        };
        assert_eq!(identity_yaw_entropy(&uni).unwrap(), 5f64.ln());
        let mixed = PoseHistogram {
            bin_edges: YAW_GROUP_EDGES.to_vec(),
            counts: vec![2, 1, 1, 0, 0],
        };
        assert!((identity_yaw_entropy(&mixed).unwrap() - 1.0397207708399179).abs() < 1e-12);
        assert!(identity_yaw_entropy(&PoseHistogram::yaw_groups()).is_err());
    }

    #[test]
    fn cutoff_is_strict() {
        let stats: Vec<EntropyStat> = [("a", 0.2), ("b", 1.0), ("c", 1.6)]
            .iter()
            .map(|(i, e)| EntropyStat {
                identity: i.to_string(),
                entropy: *e,
            })
            .collect();
        assert!(entropy_cutoff_selection(&stats, 0.0).is_empty());
        assert_eq!(
            entropy_cutoff_selection(&stats, 1.0),
            BTreeSet::from(["a".to_string()])
        );
        assert_eq!(entropy_cutoff_selection(&stats, 5f64.ln() + 0.01).len(), 3);
    }

    #[test]
    fn near_frontal_threshold() {
        assert!(near_frontal(3.0, 15.0));
        assert!(!near_frontal(40.0, 15.0));
        assert!(!near_frontal(-15.0, 15.0));
    }

    #[test]
    fn menus() {
        let lm = task_strategy(Task::Landmark);
        assert_eq!(lm.offsets.len(), 4);
        assert_eq!(task_strategy(Task::Recognition), lm);
        let at = task_strategy(Task::Attributes);
        assert!(
            at.offsets.iter().any(|o| o.yaw == 60.0) && at.offsets.iter().any(|o| o.yaw == -60.0)
        );
        assert_eq!(at.offsets.len(), 24);
        assert!("pose".parse::<Task>().is_err());
    }

    #[test]
    fn random_plan_respects_cap_and_seed() {
        let records: Vec<SampleRecord> = (0..100)
            .map(|i| rec(&format!("id{}", i % 10), 0.0))
            .collect();
        let menu = task_strategy(Task::Landmark);
        let cfg = SamplingConfig::default();
        let p = plan_random(&records, &menu, &cfg, 9, &any_view);
        assert_eq!(p.synth_count, 50);
        assert_eq!(p.views.iter().map(Vec::len).sum::<usize>(), 50);
        assert_eq!(p, plan_random(&records, &menu, &cfg, 9, &any_view));
        assert_ne!(p, plan_random(&records, &menu, &cfg, 10, &any_view));

        let zero = SamplingConfig {
            ratio_cap: 0.0,
            ..cfg.clone()
        };
        assert_eq!(
            plan_random(&records, &menu, &zero, 9, &any_view).synth_count,
            0
        );

        let none = plan_random(&records, &menu, &cfg, 9, &|_, o| o.yaw > 100.0);
        assert_eq!(none.synth_count, 0);
    }

    #[test]
    fn random_plan_skips_non_frontal_and_uses_unique_views() {
        let records = vec![rec("a", 0.0), rec("b", 40.0)];
        let cfg = SamplingConfig {
            ratio_cap: 10.0,
            ..Default::default()
        };
        let p = plan_random(&records, &task_strategy(Task::Landmark), &cfg, 1, &any_view);
        assert_eq!(p.views[0].len(), 4);
        assert!(p.views[1].is_empty());
        let yaws: BTreeSet<i64> = p.views[0].iter().map(|v| v.offsets.yaw as i64).collect();
        assert_eq!(yaws.len(), 4);
    }

    #[test]
    fn entropy_plan_raises_zero_entropy_identity() {
        let mut records: Vec<SampleRecord> = (0..4).map(|_| rec("flat", 2.0)).collect();
        records.extend([0.0, 20.0, 40.0, 60.0, 80.0].map(|y| rec("rich", y)));
        let cfg = SamplingConfig {
            scheme: Scheme::Entropy,
            entropy_cutoff: 0.5,
            ..Default::default()
        };
        let p = plan_entropy(&records, &task_strategy(Task::Landmark), &cfg, 3, &any_view);
        assert!(p.synth_count > 0);
        assert!(p.views[4..].iter().all(Vec::is_empty));
        let rows = entropy_before_after(&records, &p);
        let flat = rows.iter().find(|r| r.identity == "flat").unwrap();
        assert_eq!(flat.e_before, 0.0);
        assert!(flat.e_after > 0.0);
    }

    #[test]
    fn entropy_plan_toy_set_never_lowers_entropy() {
        let records = vec![
            rec("a", 0.0),
            rec("a", 5.0),
            rec("a", 35.0),
            rec("b", 0.0),
            rec("c", 3.0),
            rec("c", -4.0),
            rec("c", 12.0),
        ];
        let cfg = SamplingConfig {
            scheme: Scheme::Entropy,
            ratio_cap: 2.0,
            entropy_cutoff: 1.5,
            ..Default::default()
        };
        let p = plan_entropy(
            &records,
            &task_strategy(Task::Attributes),
            &cfg,
            5,
            &any_view,
        );
        for row in entropy_before_after(&records, &p) {
            let before: Vec<u64> = PoseHistogram::from_yaws(
                records
                    .iter()
                    .filter(|r| r.identity == row.identity)
                    .map(|r| r.yaw_deg),
            )
            .counts;
            assert!((row.e_before - entropy_oracle(&before)).abs() < 1e-12);
            assert!(row.e_after >= row.e_before, "{row:?}");
        }
    }

    proptest! {
        #[test]
        fn entropy_bounds_and_permutation(counts in proptest::collection::vec(0u64..20, 5), rot in 0usize..5) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let h = PoseHistogram { bin_edges: YAW_GROUP_EDGES.to_vec(), counts: counts.clone() };
            let e = identity_yaw_entropy(&h).unwrap();
            prop_assert!(e >= 0.0 && e <= 5f64.ln() + 1e-12);
            prop_assert!((e - entropy_oracle(&counts)).abs() < 1e-12);
            let mut perm = counts.clone();
            perm.rotate_left(rot);
            let hp = PoseHistogram { bin_edges: YAW_GROUP_EDGES.to_vec(), counts: perm };
            prop_assert!((identity_yaw_entropy(&hp).unwrap() - e).abs() < 1e-12);
        }

        #[test]
        fn plans_obey_cap(n in 0usize..60, cap in 0.0f64..1.5, seed in 0u64..1000, entropy in any::<bool>()) {
            let records: Vec<SampleRecord> = (0..n).map(|i| rec(&format!("id{}", i % 7), (i % 5) as f64 * 4.0)).collect();
            let cfg = SamplingConfig {
                scheme: if entropy { Scheme::Entropy } else { Scheme::Random },
                ratio_cap: cap,
                ..Default::default()
            };
            let p = plan(&records, &task_strategy(Task::Attributes), &cfg, seed, &any_view);
            prop_assert!(p.synth_count as f64 <= cap * n as f64);
            prop_assert_eq!(p.real_count, n);
        }
    }
}
