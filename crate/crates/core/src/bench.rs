//! Scaling benchmark: offline build and randomized online traversal of the
//! generated table models.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

use crate::bundle::ScenarioModel;
use crate::gen::{table_model, Encoding, GenError, ModelFiles};
use crate::graph::{AndOrGraph, Item};
use crate::hier::HierModel;
use crate::task::{FlatModel, Query, TaskModel};

pub const DEFAULT_REPS: usize = 10;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub encodings: Vec<Encoding>,
    pub legs: RangeInclusive<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            encodings: Encoding::ALL.to_vec(),
            legs: 1..=9,
            reps: DEFAULT_REPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        let sd = if xs.len() > 1 { xs.std_dev() } else { 0.0 };
        MeanSd { mean: xs.mean(), sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub encoding: Encoding,
    pub legs: usize,
    pub designed_nodes: usize,
    pub designed_arcs: usize,
    pub spawned_nodes: usize,
    pub spawned_arcs: usize,
    pub reps: usize,
    /// Queries answered per run; identical across repetitions only when
    /// every random choice leads to paths of equal length.
    pub steps: MeanSd,
    pub offline_s: MeanSd,
    pub online_s: MeanSd,
    /// Per-repetition online times, in repetition order.
    pub online_samples: Vec<f64>,
}

/// Builds the runtime model: path enumeration and, for hierarchies,
/// instance spawning and transition checks.
pub fn build(files: &ModelFiles) -> ScenarioModel {
    if files.is_hierarchical() {
        let h = HierModel::from_designs(&files.root, &files.graphs).expect("generated models are valid");
        ScenarioModel::Hier(Box::new(h))
    } else {
        let g = AndOrGraph::from_spec(&files.graphs[&files.root].spec).expect("generated models are valid");
        ScenarioModel::Flat(FlatModel::new(g))
    }
}

/// Drives `model` to the end: every suggested node is met at once, then one
/// suggested hyper-arc on a live path is picked uniformly at random and completed.
/// Returns the labels of the completed items in order.
pub fn random_traversal<M: TaskModel>(model: &mut M, rng: &mut impl Rng) -> (Query, Vec<String>) {
    let mut trail = Vec::new();
    loop {
        let suggestions = match model.query() {
            Query::Suggestions(s) => s,
            end => return (end, trail),
        };
        let nodes: Vec<_> = suggestions.iter().filter(|c| matches!(c.row.item, Item::Node(_))).collect();
        if !nodes.is_empty() {
            for c in nodes {
                for p in model.active_processes(c.row) {
                    model.deactivate(c.row, &p);
                }
                model.complete(c.row);
                trail.push(c.label.clone());
            }
            continue;
        }
        // Feasible arcs whose every path is dead carry infinite cost.
        let live: Vec<_> = suggestions.iter().filter(|c| c.cost.is_finite()).collect();
        let c = match live.len() {
            0 => &suggestions[rng.gen_range(0..suggestions.len())],
            n => live[rng.gen_range(0..n)],
        };
        for k in 0..model.actions(c.row).len() {
            model.action_done(c.row, k);
        }
        model.complete(c.row);
        trail.push(c.label.clone());
    }
}

fn sizes(files: &ModelFiles, model: &ScenarioModel) -> (usize, usize, usize, usize) {
    let (dn, da) = files.designed_counts();
    match model {
        ScenarioModel::Hier(h) => {
            let s = h.stats();
            (dn, da, s.spawned_nodes, s.spawned_arcs)
        }
        ScenarioModel::Flat(_) => (dn, da, dn, da),
    }
}

/// Each sample repeats its measurement until this much time has
/// accumulated; single traversals of small models take microseconds.
pub const MIN_SAMPLE_S: f64 = 5e-3;
const MIN_CALLS: usize = 5;

/// Median seconds per call of `f`, over as many calls as fit in
/// [`MIN_SAMPLE_S`]. The median discards calls hit by preemption.
/// `setup` runs untimed before every call.
fn sample<S, T>(mut setup: impl FnMut() -> S, mut f: impl FnMut(S) -> T) -> (f64, T) {
    let mut times = Vec::new();
    let mut total = 0.0;
    loop {
        let input = setup();
        let t = Instant::now();
        let out = f(input);
        let dt = t.elapsed().as_secs_f64();
        times.push(dt);
        total += dt;
        if total >= MIN_SAMPLE_S && times.len() >= MIN_CALLS {
            times.sort_by(f64::total_cmp);
            return (times[times.len() / 2], out);
        }
    }
}

/// Measurements of one model, filled one repetition at a time.
struct Series {
    legs: usize,
    files: ModelFiles,
    model: ScenarioModel,
    offline: Vec<f64>,
    online: Vec<f64>,
    steps: Vec<f64>,
}

impl Series {
    fn new(encoding: Encoding, legs: usize) -> Result<Self, GenError> {
        let files = table_model(legs, encoding)?;
        let model = build(&files);
        Ok(Series {
            legs,
            files,
            model,
            offline: Vec::new(),
            online: Vec::new(),
            steps: Vec::new(),
        })
    }

    /// Times one offline build and one seeded traversal. The traversed
    /// model is returned so its drop falls outside the timed region.
    fn measure(&self, seed: u64) -> (f64, f64, usize) {
        let (offline, _) = sample(|| (), |()| build(&self.files));
        let (online, (_, (end, trail))) = sample(
            || (self.model.clone(), ChaCha8Rng::seed_from_u64(seed)),
            |(mut m, mut rng)| {
                let r = random_traversal(&mut m, &mut rng);
                (m, r)
            },
        );
        debug_assert_eq!(end, Query::Solved);
        (offline, online, trail.len())
    }

    fn record(self, encoding: Encoding, reps: usize) -> BenchmarkRecord {
        let (designed_nodes, designed_arcs, spawned_nodes, spawned_arcs) = sizes(&self.files, &self.model);
        BenchmarkRecord {
            encoding,
            legs: self.legs,
            designed_nodes,
            designed_arcs,
            spawned_nodes,
            spawned_arcs,
            reps,
            steps: MeanSd::of(&self.steps),
            offline_s: MeanSd::of(&self.offline),
            online_s: MeanSd::of(&self.online),
            online_samples: self.online,
        }
    }
}

/// Records for one encoding over `legs`. Repetition `r` draws its choices
/// from a generator seeded with `seed + r`. Repetitions go round-robin
/// over the leg counts, after one untimed warm-up round, so slow drift of
/// the machine spreads evenly instead of bending the curve.
pub fn bench_encoding(
    encoding: Encoding,
    legs: RangeInclusive<usize>,
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchmarkRecord>, GenError> {
    let mut series = legs.map(|l| Series::new(encoding, l)).collect::<Result<Vec<_>, _>>()?;
    for s in &series {
        s.measure(seed);
    }
    for r in 0..reps {
        let rep_seed = seed.wrapping_add(r as u64);
        for s in &mut series {
            let (offline, online, steps) = s.measure(rep_seed);
            s.offline.push(offline);
            s.online.push(online);
            s.steps.push(steps as f64);
        }
    }
    Ok(series.into_iter().map(|s| s.record(encoding, reps)).collect())
}

pub fn bench_one(encoding: Encoding, legs: usize, reps: usize, seed: u64) -> Result<BenchmarkRecord, GenError> {
    Ok(bench_encoding(encoding, legs..=legs, reps, seed)?.remove(0))
}

/// Every configured (encoding, legs) pair; legs beyond an encoding's limit
/// are skipped.
pub fn run_benchmark(cfg: &BenchConfig) -> Vec<BenchmarkRecord> {
    let mut out = Vec::new();
    for &enc in &cfg.encodings {
        let lo = (*cfg.legs.start()).max(1);
        let hi = (*cfg.legs.end()).min(enc.max_legs());
        if lo <= hi {
            out.extend(bench_encoding(enc, lo..=hi, cfg.reps, cfg.seed).expect("legs clamped to the valid range"));
        }
    }
    out
}

pub const CSV_HEADER: &str = "encoding,legs,designed_nodes,designed_arcs,spawned_nodes,spawned_arcs,reps,steps_mean,offline_mean_s,offline_sd_s,online_mean_s,online_sd_s";

pub fn write_csv(records: &[BenchmarkRecord]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.9},{:.9},{:.9},{:.9}",
            r.encoding,
            r.legs,
            r.designed_nodes,
            r.designed_arcs,
            r.spawned_nodes,
            r.spawned_arcs,
            r.reps,
            r.steps.mean,
            r.offline_s.mean,
            r.offline_s.sd,
            r.online_s.mean,
            r.online_s.sd
        );
    }
    out
}

/// Whitespace-separated columns for plotting online time against legs on a
/// log scale: `legs` then mean and sd per encoding, `nan` where absent.
pub fn write_plot_data(records: &[BenchmarkRecord]) -> String {
    let mut encodings: Vec<Encoding> = records.iter().map(|r| r.encoding).collect();
    encodings.dedup();
    let mut legs: Vec<usize> = records.iter().map(|r| r.legs).collect();
    legs.sort_unstable();
    legs.dedup();
    let mut out = String::from("# legs");
    for e in &encodings {
        let _ = write!(out, " {e}_mean {e}_sd");
    }
    out.push('\n');
    for l in legs {
        let _ = write!(out, "{l}");
        for &e in &encodings {
            match records.iter().find(|r| r.encoding == e && r.legs == l) {
                Some(r) => {
                    let _ = write!(out, " {:.9} {:.9}", r.online_s.mean, r.online_s.sd);
                }
                None => out.push_str(" nan nan"),
            }
        }
        out.push('\n');
    }
    out
}

/// Least-squares fit of `y = b0 + b1 x + b2 x^2` with the two-sided
/// p-value of the quadratic coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub coef: [f64; 3],
    pub se_quadratic: f64,
    pub p_quadratic: f64,
}

pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Option<QuadraticFit> {
    let n = xs.len();
    if n != ys.len() || n < 4 {
        return None;
    }
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let row = [1.0, x, x * x];
        for i in 0..3 {
            xty[i] += row[i] * y;
            for j in 0..3 {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let inv = invert3(xtx)?;
    let coef: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| inv[i][j] * xty[j]).sum());
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - coef[0] - coef[1] * x - coef[2] * x * x).powi(2))
        .sum();
    let df = (n - 3) as f64;
    let se = (rss / df * inv[2][2]).sqrt();
    let p = if se == 0.0 {
        if coef[2] == 0.0 { 1.0 } else { 0.0 }
    } else {
        let t = StudentsT::new(0.0, 1.0, df).ok()?;
        2.0 * (1.0 - t.cdf((coef[2] / se).abs()))
    };
    Some(QuadraticFit {
        coef,
        se_quadratic: se,
        p_quadratic: p,
    })
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |r: usize, s: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
        m[r1][s1] * m[r2][s2] - m[r1][s2] * m[r2][s1]
    };
    let det: f64 = (0..3).map(|j| m[0][j] * c(0, j)).sum();
    if det.abs() < f64::EPSILON * 1e3 {
        return None;
    }
    Some(std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) / det)))
}

/// Online samples of one encoding as (legs, seconds) pairs.
pub fn samples(records: &[BenchmarkRecord], encoding: Encoding) -> (Vec<f64>, Vec<f64>) {
    records
        .iter()
        .filter(|r| r.encoding == encoding)
        .flat_map(|r| r.online_samples.iter().map(move |&t| (r.legs as f64, t)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic_is_recovered() {
        let xs: Vec<f64> = (1..=9).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + 0.5 * x + 0.25 * x * x).collect();
        let f = quadratic_fit(&xs, &ys).unwrap();
        for (got, want) in f.coef.iter().zip([2.0, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = [[4.0, 1.0, 2.0], [1.0, 3.0, 0.5], [2.0, 0.5, 5.0]];
        let inv = invert3(m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
