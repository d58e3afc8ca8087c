//! Construction of the pair dataset A': same-activity window pairs with a
//! binary same-subject flag, balanced across classes and uniform across
//! subject combinations.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabeledDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    ActivityBased,
    ActivityAgnostic,
}

/// Window indices of the source dataset partitioned by (activity, subject).
#[derive(Debug, Clone)]
pub struct PairGroupIndex {
    pub by_activity_subject: BTreeMap<(usize, u32), Vec<usize>>,
    pub subjects: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub a_index: usize,
    pub b_index: usize,
    /// Shared activity label; unset in activity-agnostic mode.
    pub activity: Option<usize>,
    pub subjects: (u32, u32),
    /// 1 iff both windows come from the same subject.
    pub g: u8,
}

#[derive(Debug, Clone)]
pub struct PairDataset {
    pub pairs: Vec<PairSample>,
    pub mode: PairMode,
    pub seed: u64,
}

pub fn enumerate_pair_groups(dataset: &LabeledDataset) -> PairGroupIndex {
    let mut by_activity_subject: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
    for (i, w) in dataset.windows.iter().enumerate() {
        by_activity_subject
            .entry((w.activity, w.subject))
            .or_default()
            .push(i);
    }
    PairGroupIndex {
        by_activity_subject,
        subjects: dataset.subjects.clone(),
    }
}

/// Split `total` draws over `cells` cells with max-min difference <= 1.
fn cell_allocation(total: usize, cells: usize) -> Vec<usize> {
    let base = total / cells;
    let rem = total % cells;
    (0..cells).map(|i| base + usize::from(i < rem)).collect()
}

/// One sampling cell: a set of candidate activities, each with its own pools
/// of window indices on the two sides. Same-subject cells use one pool and
/// draw unordered distinct pairs from it.
struct Cell {
    subjects: (u32, u32),
    same_subject: bool,
    /// (activity or None, left pool, right pool). Right pool empty for
    /// same-subject cells.
    activities: Vec<(Option<usize>, Vec<usize>, Vec<usize>)>,
}

impl Cell {
    fn combos(&self, slot: usize) -> usize {
        let (_, left, right) = &self.activities[slot];
        if self.same_subject {
            left.len() * (left.len() - 1) / 2
        } else {
            left.len() * right.len()
        }
    }

    fn draw_combo(&self, slot: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let (_, left, right) = &self.activities[slot];
        if self.same_subject {
            loop {
                let a = left[rng.gen_range(0..left.len())];
                let b = left[rng.gen_range(0..left.len())];
                if a != b {
                    return (a, b);
                }
            }
        } else {
            (
                left[rng.gen_range(0..left.len())],
                right[rng.gen_range(0..right.len())],
            )
        }
    }

    fn enumerate_unused(
        &self,
        slot: usize,
        used: &HashSet<(usize, usize)>,
    ) -> Vec<(usize, usize)> {
        let (_, left, right) = &self.activities[slot];
        let mut out = Vec::new();
        if self.same_subject {
            for (i, &a) in left.iter().enumerate() {
                for &b in &left[i + 1..] {
                    if !used.contains(&key(a, b)) {
                        out.push((a, b));
                    }
                }
            }
        } else {
            for &a in left {
                for &b in right {
                    if !used.contains(&key(a, b)) {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Draw `count` pairs from one cell: distinct unordered pairs without
/// replacement while the pool lasts, then with replacement.
fn sample_cell(
    cell: &Cell,
    count: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<PairSample>,
) {
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut remaining: Vec<usize> = (0..cell.activities.len())
        .map(|s| cell.combos(s))
        .collect();
    let g = u8::from(cell.same_subject);
    for _ in 0..count {
        let exhausted = remaining.iter().all(|&r| r == 0);
        let slot = if exhausted {
            // with-replacement phase: uniform over all candidate activities
            rng.gen_range(0..cell.activities.len())
        } else {
            let open: Vec<usize> = (0..remaining.len()).filter(|&s| remaining[s] > 0).collect();
            open[rng.gen_range(0..open.len())]
        };
        let (a, b) = if exhausted {
            cell.draw_combo(slot, rng)
        } else {
            let mut found = None;
            for _ in 0..64 {
                let cand = cell.draw_combo(slot, rng);
                if !used.contains(&key(cand.0, cand.1)) {
                    found = Some(cand);
                    break;
                }
            }
            let cand = found.unwrap_or_else(|| {
                let unused = cell.enumerate_unused(slot, &used);
                unused[rng.gen_range(0..unused.len())]
            });
            used.insert(key(cand.0, cand.1));
            remaining[slot] -= 1;
            cand
        };
        out.push(PairSample {
            a_index: a,
            b_index: b,
            activity: cell.activities[slot].0,
            subjects: cell.subjects,
            g,
        });
    }
}

fn build_cells(index: &PairGroupIndex, activity_based: bool) -> Result<(Vec<Cell>, Vec<Cell>)> {
    let subjects = &index.subjects;
    let mut activities: Vec<usize> = index
        .by_activity_subject
        .keys()
        .map(|&(a, _)| a)
        .collect();
    activities.dedup();
    activities.sort_unstable();
    activities.dedup();

    let pool = |a: usize, s: u32| -> Vec<usize> {
        index
            .by_activity_subject
            .get(&(a, s))
            .cloned()
            .unwrap_or_default()
    };
    let all_of = |s: u32| -> Vec<usize> {
        let mut v: Vec<usize> = index
            .by_activity_subject
            .iter()
            .filter(|((_, subj), _)| *subj == s)
            .flat_map(|(_, idxs)| idxs.iter().copied())
            .collect();
        v.sort_unstable();
        v
    };

    let mut same = Vec::new();
    for &s in subjects {
        let acts: Vec<(Option<usize>, Vec<usize>, Vec<usize>)> = if activity_based {
            activities
                .iter()
                .filter_map(|&a| {
                    let p = pool(a, s);
                    (p.len() >= 2).then_some((Some(a), p, Vec::new()))
                })
                .collect()
        } else {
            let p = all_of(s);
            if p.len() >= 2 {
                vec![(None, p, Vec::new())]
            } else {
                Vec::new()
            }
        };
        if acts.is_empty() {
            return Err(Error::InfeasibleCell(s.to_string()));
        }
        same.push(Cell {
            subjects: (s, s),
            same_subject: true,
            activities: acts,
        });
    }

    let mut diff = Vec::new();
    for (i, &s1) in subjects.iter().enumerate() {
        for &s2 in &subjects[i + 1..] {
            let acts: Vec<(Option<usize>, Vec<usize>, Vec<usize>)> = if activity_based {
                activities
                    .iter()
                    .filter_map(|&a| {
                        let p1 = pool(a, s1);
                        let p2 = pool(a, s2);
                        (!p1.is_empty() && !p2.is_empty()).then_some((Some(a), p1, p2))
                    })
                    .collect()
            } else {
                vec![(None, all_of(s1), all_of(s2))]
            };
            if acts.is_empty() || acts.iter().any(|(_, l, r)| l.is_empty() || r.is_empty()) {
                return Err(Error::Data(format!(
                    "subjects {s1} and {s2} share no activity with windows on both sides"
                )));
            }
            diff.push(Cell {
                subjects: (s1, s2),
                same_subject: false,
                activities: acts,
            });
        }
    }
    Ok((same, diff))
}

fn sample_with_mode(
    index: &PairGroupIndex,
    target_size: usize,
    seed: u64,
    mode: PairMode,
) -> Result<PairDataset> {
    if index.subjects.len() < 2 {
        return Err(Error::Data("pair sampling needs at least 2 subjects".into()));
    }
    if target_size < 2 {
        return Err(Error::Data("pair dataset size must be at least 2".into()));
    }
    let (same_cells, diff_cells) = build_cells(index, mode == PairMode::ActivityBased)?;
    // odd target sizes give the same-subject class the extra pair
    let diff_count = target_size / 2;
    let same_count = target_size - diff_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(target_size);
    for (cells, alloc) in [
        (&same_cells, cell_allocation(same_count, same_cells.len())),
        (&diff_cells, cell_allocation(diff_count, diff_cells.len())),
    ] {
        for (cell, count) in cells.iter().zip(alloc) {
            sample_cell(cell, count, &mut rng, &mut pairs);
        }
    }
    Ok(PairDataset { pairs, mode, seed })
}

/// Build A': target_size/2 same-subject pairs split equally across |S|
/// cells, target_size/2 different-subject pairs split equally across
/// C(|S|,2) subject combinations, every pair sharing an activity.
pub fn sample_pairs(index: &PairGroupIndex, target_size: usize, seed: u64) -> Result<PairDataset> {
    sample_with_mode(index, target_size, seed, PairMode::ActivityBased)
}

/// Same balance and allocation, but pair members need not share an
/// activity (the D_b ablation's input distribution).
pub fn sample_pairs_activity_agnostic(
    dataset: &LabeledDataset,
    target_size: usize,
    seed: u64,
) -> Result<PairDataset> {
    let index = enumerate_pair_groups(dataset);
    sample_with_mode(&index, target_size, seed, PairMode::ActivityAgnostic)
}

#[derive(Debug, Serialize, Deserialize)]
struct PairFileHeader {
    seed: u64,
    mode: PairMode,
    n: usize,
    source_digest: String,
}

/// JSON-lines pair file: a header record, then one record per pair.
pub fn write_pair_file(path: &Path, pairs: &PairDataset, source_digest: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let header = PairFileHeader {
        seed: pairs.seed,
        mode: pairs.mode,
        n: pairs.pairs.len(),
        source_digest: source_digest.to_owned(),
    };
    let ser = |e: serde_json::Error| Error::Data(format!("pair file serialization: {e}"));
    writeln!(f, "{}", serde_json::to_string(&header).map_err(ser)?)
        .map_err(|e| Error::io(path, e))?;
    for p in &pairs.pairs {
        let rec = serde_json::json!({
            "a": p.a_index,
            "b": p.b_index,
            "activity": p.activity,
            "s_a": p.subjects.0,
            "s_b": p.subjects.1,
            "g": p.g,
        });
        writeln!(f, "{rec}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_pair_file(path: &Path) -> Result<(PairDataset, String)> {
    let f = BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let mut lines = f.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Data("pair file is empty".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: PairFileHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Data(format!("pair file header: {e}")))?;
    let mut pairs = Vec::with_capacity(header.n);
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("pair record: {e}")))?;
        pairs.push(PairSample {
            a_index: v["a"].as_u64().unwrap_or(0) as usize,
            b_index: v["b"].as_u64().unwrap_or(0) as usize,
            activity: v["activity"].as_u64().map(|a| a as usize),
            subjects: (
                v["s_a"].as_u64().unwrap_or(0) as u32,
                v["s_b"].as_u64().unwrap_or(0) as u32,
            ),
            g: v["g"].as_u64().unwrap_or(0) as u8,
        });
    }
    if pairs.len() != header.n {
        return Err(Error::Data(format!(
            "pair file claims {} pairs, found {}",
            header.n,
            pairs.len()
        )));
    }
    Ok((
        PairDataset {
            pairs,
            mode: header.mode,
            seed: header.seed,
        },
        header.source_digest,
    ))
}

/// Shuffle helper used by the trainer: a deterministic permutation of pair
/// indices for one epoch.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx
}
