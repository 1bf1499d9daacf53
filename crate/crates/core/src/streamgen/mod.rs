//! Benchmark construction (Behavior-IL / Environment-IL) and the online,
//! disjoint, boundary-free episode stream.

use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::{plan_demonstration, Episode, EpisodeStep, Split};
use crate::gridsim::{
    admissible_behaviors, generate_layout, sample_task, Behavior, EnvType, ALL_BEHAVIORS,
    ALL_ENV_TYPES,
};

/// Number of layout variations per environment type in each style pool.
pub const LAYOUT_POOL: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setup {
    BehaviorIl,
    EnvironmentIl,
}

impl Setup {
    pub fn task_keys(self) -> Vec<TaskKey> {
        match self {
            Setup::BehaviorIl => ALL_BEHAVIORS.iter().map(|&b| TaskKey::Behavior(b)).collect(),
            Setup::EnvironmentIl => ALL_ENV_TYPES.iter().map(|&e| TaskKey::Env(e)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKey {
    Behavior(Behavior),
    Env(EnvType),
}

impl TaskKey {
    pub fn label(&self) -> String {
        match self {
            TaskKey::Behavior(b) => b.token().to_string(),
            TaskKey::Env(e) => e.token().to_string(),
        }
    }
}

/// Per-task episode counts for benchmark construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkCounts {
    /// One entry per task (in canonical order), or a single broadcast entry.
    pub train: Vec<usize>,
    pub valid_seen: usize,
    pub valid_unseen: usize,
    /// Environment-IL subsampling to the minimum group size.
    pub balance: bool,
}

impl BenchmarkCounts {
    pub fn uniform(train: usize, valid_seen: usize, valid_unseen: usize) -> Self {
        BenchmarkCounts {
            train: vec![train],
            valid_seen,
            valid_unseen,
            balance: true,
        }
    }

    fn train_for(&self, task_index: usize, n_tasks: usize) -> Result<usize> {
        if self.train.len() == 1 {
            Ok(self.train[0])
        } else if self.train.len() == n_tasks {
            Ok(self.train[task_index])
        } else {
            Err(Error::Unsatisfiable(format!(
                "train counts: expected 1 or {n_tasks} entries, got {}",
                self.train.len()
            )))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Benchmark {
    pub setup: Setup,
    pub seed: u64,
    pub counts: BenchmarkCounts,
    /// Ordered disjoint task groups of training episodes.
    pub task_groups: Vec<(TaskKey, Vec<Arc<Episode>>)>,
    pub valid_seen: Vec<(TaskKey, Vec<Arc<Episode>>)>,
    pub valid_unseen: Vec<(TaskKey, Vec<Arc<Episode>>)>,
}

/// The record a learner receives from the stream. Deliberately carries no
/// task identity (behavior, environment type, split or layout).
#[derive(Debug, Clone, Serialize)]
pub struct StreamSample {
    pub id: u64,
    pub instruction: Vec<u16>,
    pub steps: Arc<Vec<EpisodeStep>>,
}

impl StreamSample {
    pub fn from_episode(ep: &Episode) -> Self {
        StreamSample {
            id: ep.id,
            instruction: ep.instruction.clone(),
            steps: ep.steps.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Generate one episode for a task key. The environment (Behavior-IL) or
/// behavior (Environment-IL) is drawn among admissible combinations.
fn generate_episode<R: Rng>(
    key: TaskKey,
    split: Split,
    id: u64,
    rng: &mut R,
) -> Result<Arc<Episode>> {
    let (env, behavior) = match key {
        TaskKey::Behavior(b) => {
            let envs: Vec<EnvType> = ALL_ENV_TYPES
                .iter()
                .copied()
                .filter(|&e| admissible_behaviors(e).contains(&b))
                .collect();
            (envs[rng.gen_range(0..envs.len())], b)
        }
        TaskKey::Env(e) => {
            let behaviors = admissible_behaviors(e);
            (e, behaviors[rng.gen_range(0..behaviors.len())])
        }
    };
    let seen = split != Split::ValidUnseen;
    let style_seed = rng.gen_range(0..LAYOUT_POOL);
    let layout = Arc::new(generate_layout(env, style_seed, seen));
    let task = sample_task(&layout, behavior, rng)
        .ok_or_else(|| Error::InadmissibleTask(format!("{behavior:?} in {env:?}")))?;
    let mut ep = plan_demonstration(layout, &task, id)?;
    ep.split = split;
    Ok(Arc::new(ep))
}

/// Build a full benchmark: disjoint training task groups plus per-task
/// valid-seen / valid-unseen episode sets. Deterministic per seed.
pub fn build_benchmark(setup: Setup, counts: BenchmarkCounts, seed: u64) -> Result<Benchmark> {
    let keys = setup.task_keys();
    let mut next_id: u64 = 0;
    let mut fresh_id = || {
        let id = next_id;
        next_id += 1;
        id
    };

    let mut task_groups = Vec::new();
    let mut valid_seen = Vec::new();
    let mut valid_unseen = Vec::new();
    for (ti, &key) in keys.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5151_0000 + ti as u64));
        let n = counts.train_for(ti, keys.len())?;
        let mut group = Vec::with_capacity(n);
        for _ in 0..n {
            group.push(generate_episode(key, Split::Train, fresh_id(), &mut rng)?);
        }
        task_groups.push((key, group));

        let mut vs = Vec::with_capacity(counts.valid_seen);
        for _ in 0..counts.valid_seen {
            vs.push(generate_episode(key, Split::ValidSeen, fresh_id(), &mut rng)?);
        }
        valid_seen.push((key, vs));

        let mut vu = Vec::with_capacity(counts.valid_unseen);
        for _ in 0..counts.valid_unseen {
            vu.push(generate_episode(key, Split::ValidUnseen, fresh_id(), &mut rng)?);
        }
        valid_unseen.push((key, vu));
    }

    let mut bench = Benchmark {
        setup,
        seed,
        counts,
        task_groups,
        valid_seen,
        valid_unseen,
    };
    if setup == Setup::EnvironmentIl && bench.counts.balance {
        balance_environments(&mut bench.task_groups, seed);
        balance_environments(&mut bench.valid_seen, seed ^ 1);
        balance_environments(&mut bench.valid_unseen, seed ^ 2);
    }
    Ok(bench)
}

/// Truncate every group to the minimum group size by seeded uniform
/// subsampling (order-preserving). Idempotent: equal groups are unchanged.
pub fn balance_environments<T>(groups: &mut [(TaskKey, Vec<T>)], seed: u64) {
    let min = match groups.iter().map(|(_, g)| g.len()).min() {
        Some(m) => m,
        None => return,
    };
    for (gi, (_, group)) in groups.iter_mut().enumerate() {
        if group.len() == min {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xba1a_0000 + gi as u64));
        let mut keep: Vec<usize> = (0..group.len()).collect();
        keep.shuffle(&mut rng);
        keep.truncate(min);
        keep.sort_unstable();
        let mut idx = 0;
        let mut keep_iter = keep.iter().peekable();
        group.retain(|_| {
            let keep_this = keep_iter.peek() == Some(&&idx);
            if keep_this {
                keep_iter.next();
            }
            idx += 1;
            keep_this
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderingProvenance {
    Explicit,
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub sequence: Vec<TaskKey>,
    pub provenance: OrderingProvenance,
}

/// The five preset task orderings per setup.
pub fn preset_orderings(setup: Setup) -> Vec<Vec<TaskKey>> {
    use Behavior::*;
    use EnvType::*;
    match setup {
        Setup::BehaviorIl => vec![
            vec![Examine, Heat, Pick2Place, Cool, PickPlace, Clean, Movable],
            vec![PickPlace, Pick2Place, Clean, Heat, Examine, Movable, Cool],
            vec![PickPlace, Examine, Movable, Clean, Pick2Place, Cool, Heat],
            vec![Movable, Pick2Place, Examine, PickPlace, Heat, Cool, Clean],
            vec![Clean, PickPlace, Movable, Heat, Cool, Pick2Place, Examine],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(TaskKey::Behavior).collect())
        .collect(),
        Setup::EnvironmentIl => vec![
            vec![Bedroom, Bathroom, Livingroom, Kitchen],
            vec![Bathroom, Bedroom, Kitchen, Livingroom],
            vec![Bedroom, Livingroom, Bathroom, Kitchen],
            vec![Bedroom, Bathroom, Kitchen, Livingroom],
            vec![Bathroom, Kitchen, Bedroom, Livingroom],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(TaskKey::Env).collect())
        .collect(),
    }
}

#[derive(Debug, Clone)]
pub enum OrderingSource {
    Explicit(Vec<TaskKey>),
    /// Index into the preset orderings.
    Preset(usize),
    Seeded(u64),
}

pub fn make_task_ordering(setup: Setup, source: OrderingSource) -> Result<Ordering> {
    let canonical = setup.task_keys();
    let check = |seq: Vec<TaskKey>| -> Result<Vec<TaskKey>> {
        let mut sorted = seq.clone();
        sorted.sort();
        let mut expect = canonical.clone();
        expect.sort();
        if sorted == expect {
            Ok(seq)
        } else {
            Err(Error::InvalidOrdering(format!("{seq:?} is not a permutation of the task set")))
        }
    };
    match source {
        OrderingSource::Explicit(seq) => Ok(Ordering {
            sequence: check(seq)?,
            provenance: OrderingProvenance::Explicit,
        }),
        OrderingSource::Preset(i) => {
            let presets = preset_orderings(setup);
            let seq = presets
                .get(i)
                .cloned()
                .ok_or_else(|| Error::InvalidOrdering(format!("preset index {i} out of range")))?;
            Ok(Ordering {
                sequence: seq,
                provenance: OrderingProvenance::Explicit,
            })
        }
        OrderingSource::Seeded(seed) => {
            let mut seq = canonical;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0dea_0a11);
            seq.shuffle(&mut rng);
            Ok(Ordering {
                sequence: seq,
                provenance: OrderingProvenance::SeededRandom,
            })
        }
    }
}

/// Single-consumer stream of training episodes: tasks in ordering sequence,
/// seeded shuffle within each task, every episode exactly once, no task
/// identity on the records. Task boundary indices are returned separately
/// for the evaluation harness only.
pub struct EpisodeStream {
    samples: std::vec::IntoIter<StreamSample>,
    len: usize,
}

impl EpisodeStream {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl Iterator for EpisodeStream {
    type Item = StreamSample;

    fn next(&mut self) -> Option<StreamSample> {
        self.samples.next()
    }
}

/// Build the stream plus the boundary table (cumulative episode counts at
/// the end of each task). Boundaries are harness-side metadata; the stream
/// records themselves expose none.
pub fn stream(benchmark: &Benchmark, ordering: &Ordering) -> Result<(EpisodeStream, Vec<usize>)> {
    let mut samples = Vec::new();
    let mut boundaries = Vec::new();
    for key in &ordering.sequence {
        let group = benchmark
            .task_groups
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, g)| g)
            .ok_or_else(|| Error::InvalidOrdering(format!("{key:?} not in benchmark")))?;
        let mut task_samples: Vec<StreamSample> =
            group.iter().map(|e| StreamSample::from_episode(e)).collect();
        let shuffle_seed = benchmark.seed ^ stream_task_salt(key);
        task_samples.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        samples.extend(task_samples);
        boundaries.push(samples.len());
    }
    let len = samples.len();
    Ok((
        EpisodeStream {
            samples: samples.into_iter(),
            len,
        },
        boundaries,
    ))
}

fn stream_task_salt(key: &TaskKey) -> u64 {
    match key {
        TaskKey::Behavior(b) => 0x51e0_0000 + *b as u64,
        TaskKey::Env(e) => 0x51e1_0000 + *e as u64,
    }
}

/// Benchmark manifest: episode ids per group and split, one JSON record per
/// line, schema-versioned.
#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub schema: String,
    pub setup: Setup,
    pub task: String,
    pub split: String,
    pub episode_ids: Vec<u64>,
}

pub fn write_manifest<W: Write>(benchmark: &Benchmark, mut w: W) -> Result<()> {
    let groups = [
        ("train", &benchmark.task_groups),
        ("valid_seen", &benchmark.valid_seen),
        ("valid_unseen", &benchmark.valid_unseen),
    ];
    for (split, set) in groups {
        for (key, eps) in set.iter() {
            let rec = ManifestRecord {
                schema: "benchmark-manifest/v1".to_string(),
                setup: benchmark.setup,
                task: key.label(),
                split: split.to_string(),
                episode_ids: eps.iter().map(|e| e.id).collect(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_counts() -> BenchmarkCounts {
        BenchmarkCounts::uniform(6, 2, 2)
    }

    #[test]
    fn behavior_il_has_seven_groups() {
        let b = build_benchmark(Setup::BehaviorIl, small_counts(), 0).unwrap();
        assert_eq!(b.task_groups.len(), 7);
    }

    #[test]
    fn environment_il_has_four_groups() {
        let b = build_benchmark(Setup::EnvironmentIl, small_counts(), 0).unwrap();
        assert_eq!(b.task_groups.len(), 4);
    }

    #[test]
    fn groups_are_disjoint() {
        let b = build_benchmark(Setup::BehaviorIl, small_counts(), 1).unwrap();
        let mut seen: HashSet<u64> = HashSet::new();
        for (_, g) in &b.task_groups {
            for e in g {
                assert!(seen.insert(e.id), "episode {} appears twice", e.id);
            }
        }
    }

    #[test]
    fn balance_reference_counts() {
        // Full-scale group sizes (11056, 3456, 3370, 3141) -> all 3141.
        let keys = Setup::EnvironmentIl.task_keys();
        let mut groups: Vec<(TaskKey, Vec<u32>)> = [11056usize, 3456, 3370, 3141]
            .iter()
            .zip(keys.iter())
            .map(|(&n, &k)| (k, (0..n as u32).collect()))
            .collect();
        balance_environments(&mut groups, 7);
        let sizes: Vec<usize> = groups.iter().map(|(_, g)| g.len()).collect();
        assert_eq!(sizes, vec![3141; 4]);
        assert_eq!(sizes.iter().sum::<usize>(), 12564);
    }

    #[test]
    fn balance_desk_scale_and_idempotent() {
        let keys = Setup::EnvironmentIl.task_keys();
        let mut groups: Vec<(TaskKey, Vec<u32>)> = [300usize, 180, 150, 150]
            .iter()
            .zip(keys.iter())
            .map(|(&n, &k)| (k, (0..n as u32).collect()))
            .collect();
        balance_environments(&mut groups, 7);
        let sizes: Vec<usize> = groups.iter().map(|(_, g)| g.len()).collect();
        assert_eq!(sizes, vec![150; 4]);
        assert_eq!(sizes.iter().sum::<usize>(), 600);
        let before: Vec<Vec<u32>> = groups.iter().map(|(_, g)| g.clone()).collect();
        balance_environments(&mut groups, 99);
        let after: Vec<Vec<u32>> = groups.iter().map(|(_, g)| g.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn preset_ordering_one() {
        use crate::gridsim::Behavior::*;
        let o = make_task_ordering(Setup::BehaviorIl, OrderingSource::Preset(0)).unwrap();
        let expect: Vec<TaskKey> = vec![Examine, Heat, Pick2Place, Cool, PickPlace, Clean, Movable]
            .into_iter()
            .map(TaskKey::Behavior)
            .collect();
        assert_eq!(o.sequence, expect);

        use crate::gridsim::EnvType::*;
        let o = make_task_ordering(Setup::EnvironmentIl, OrderingSource::Preset(0)).unwrap();
        let expect: Vec<TaskKey> = vec![Bedroom, Bathroom, Livingroom, Kitchen]
            .into_iter()
            .map(TaskKey::Env)
            .collect();
        assert_eq!(o.sequence, expect);
    }

    #[test]
    fn seeded_ordering_deterministic_and_valid() {
        let a = make_task_ordering(Setup::BehaviorIl, OrderingSource::Seeded(5)).unwrap();
        let b = make_task_ordering(Setup::BehaviorIl, OrderingSource::Seeded(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sequence.len(), 7);
    }

    #[test]
    fn invalid_explicit_ordering_rejected() {
        use crate::gridsim::Behavior::*;
        let bad = vec![TaskKey::Behavior(Examine), TaskKey::Behavior(Examine)];
        assert!(make_task_ordering(Setup::BehaviorIl, OrderingSource::Explicit(bad)).is_err());
    }

    #[test]
    fn stream_emits_each_episode_once_without_task_fields() {
        let b = build_benchmark(Setup::BehaviorIl, small_counts(), 2).unwrap();
        let ordering = make_task_ordering(Setup::BehaviorIl, OrderingSource::Preset(0)).unwrap();
        let (s, boundaries) = stream(&b, &ordering).unwrap();
        let total: usize = b.task_groups.iter().map(|(_, g)| g.len()).sum();
        let samples: Vec<StreamSample> = s.collect();
        assert_eq!(samples.len(), total);
        assert_eq!(*boundaries.last().unwrap(), total);
        let ids: HashSet<u64> = samples.iter().map(|s| s.id).collect();
        assert_eq!(ids.len(), total);

        // Record schema carries no task identity.
        let json = serde_json::to_value(&samples[0]).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, vec!["id", "instruction", "steps"]);
    }

    #[test]
    fn stream_order_reconstructible() {
        let b = build_benchmark(Setup::BehaviorIl, small_counts(), 3).unwrap();
        let ordering = make_task_ordering(Setup::BehaviorIl, OrderingSource::Preset(1)).unwrap();
        let (s, _) = stream(&b, &ordering).unwrap();
        let got: Vec<u64> = s.map(|x| x.id).collect();

        // Reconstruct with the same per-task shuffles.
        let mut expect = Vec::new();
        for key in &ordering.sequence {
            let group = b.task_groups.iter().find(|(k, _)| k == key).unwrap();
            let mut ids: Vec<u64> = group.1.iter().map(|e| e.id).collect();
            ids.shuffle(&mut ChaCha8Rng::seed_from_u64(b.seed ^ stream_task_salt(key)));
            expect.extend(ids);
        }
        assert_eq!(got, expect);
    }
}
