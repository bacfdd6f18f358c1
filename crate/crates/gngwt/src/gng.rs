//! Growing neural gas: a graph of neurons that adapts to a point cloud,
//! grown by error-threshold insertion, pruned by edge aging and
//! diverged-vertex removal, and trained over multiple epochs until the
//! consistency error stops improving.

use std::collections::HashMap;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::mesh::TriangleMesh;
use crate::spatial::SpatialIndex;

/// Signals presented per epoch, capped to bound runtime on large clouds.
pub const EPOCH_SIGNAL_CAP: usize = 100_000;

/// Hard stop for the retraining loop when the convergence test never fires.
pub const MAX_EPOCHS: usize = 200;

/// The six learning parameters.
///
/// `eps_b`/`eps_n` are the winner/neighbor move fractions, `t_gamma` the
/// accumulated-error threshold that triggers vertex insertion, `a_max` the
/// edge age limit, `alpha` the error split factor on insertion, and `d`
/// the per-signal error decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GngParams {
    pub eps_b: f64,
    pub eps_n: f64,
    pub t_gamma: f64,
    pub a_max: u32,
    pub alpha: f64,
    pub d: f64,
}

impl GngParams {
    /// Hand-tuned values used to seed the optimizer.
    pub fn seed_defaults() -> Self {
        Self {
            eps_b: 0.2,
            eps_n: 0.006,
            t_gamma: 3.0,
            a_max: 60,
            alpha: 0.5,
            d: 0.995,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !(0.0..=1.0).contains(&self.eps_b) {
            return fail(format!("eps_b {} outside [0, 1]", self.eps_b));
        }
        if !(0.0..=0.2).contains(&self.eps_n) {
            return fail(format!("eps_n {} outside [0, 0.2]", self.eps_n));
        }
        if self.eps_n > self.eps_b {
            return fail(format!(
                "eps_n {} exceeds eps_b {}; neighbors may not move more than the winner",
                self.eps_n, self.eps_b
            ));
        }
        if !(self.t_gamma > 0.0 && self.t_gamma <= 5.0) {
            return fail(format!("t_gamma {} outside (0, 5]", self.t_gamma));
        }
        if !(50..=250).contains(&self.a_max) {
            return fail(format!("a_max {} outside [50, 250]", self.a_max));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.d) {
            return fail(format!("d {} outside [0, 1]", self.d));
        }
        Ok(())
    }
}

impl Default for GngParams {
    /// Values found by the swarm optimizer on the synthetic prototype.
    fn default() -> Self {
        Self {
            eps_b: 0.0739138,
            eps_n: 0.00870156,
            t_gamma: 2.72645,
            a_max: 133,
            alpha: 0.521687,
            d: 0.999321,
        }
    }
}

/// Neuron graph. Slots are stable across removals (a free list recycles
/// them), so indices held by callers stay valid until `compact`.
#[derive(Clone, Debug, PartialEq)]
pub struct GngModel {
    positions: Vec<Point3<f64>>,
    errors: Vec<f64>,
    alive: Vec<bool>,
    /// Sorted neighbor slot lists; the single source of edge iteration
    /// order (`ages` is looked up, never iterated, for determinism).
    adjacency: Vec<Vec<u32>>,
    ages: HashMap<(u32, u32), u32>,
    free: Vec<u32>,
    live_count: usize,
    insertions: u64,
    /// Growth ceiling: threshold insertions are skipped at the cap so
    /// degenerate parameters cannot blow up the per-signal search.
    max_neurons: usize,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl GngModel {
    /// Two neurons at distinct randomly chosen cloud points, one edge of
    /// age zero, errors zero.
    pub fn init(cloud: &PointCloud, seed: u64) -> Result<Self> {
        if cloud.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                actual: cloud.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.gen_range(0..cloud.len());
        let b = loop {
            let b = rng.gen_range(0..cloud.len());
            if b != a {
                break b;
            }
        };
        Self::from_parts(
            vec![cloud.points()[a], cloud.points()[b]],
            vec![0.0, 0.0],
            &[(0, 1)],
        )
    }

    /// Builds a model from explicit state (errors finite and non-negative,
    /// edge endpoints in range, no self-loops). Edge ages start at zero.
    pub fn from_parts(
        positions: Vec<Point3<f64>>,
        errors: Vec<f64>,
        edges: &[(u32, u32)],
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::TooFewNeurons {
                needed: 1,
                actual: 0,
            });
        }
        if positions.len() != errors.len() {
            return Err(Error::InvalidParams(format!(
                "{} positions but {} errors",
                positions.len(),
                errors.len()
            )));
        }
        for (i, e) in errors.iter().enumerate() {
            if !(e.is_finite() && *e >= 0.0) {
                return Err(Error::InvalidParams(format!("error {e} at neuron {i}")));
            }
        }
        let n = positions.len();
        let live_count = n;
        let mut model = Self {
            positions,
            errors,
            alive: vec![true; n],
            adjacency: vec![Vec::new(); n],
            ages: HashMap::new(),
            free: Vec::new(),
            live_count,
            insertions: 0,
            max_neurons: usize::MAX,
        };
        for &(a, b) in edges {
            if a == b || a as usize >= n || b as usize >= n {
                return Err(Error::InvalidParams(format!("bad edge ({a}, {b})")));
            }
            model.add_edge(a, b);
        }
        Ok(model)
    }

    pub fn neuron_count(&self) -> usize {
        self.live_count
    }

    pub fn edge_count(&self) -> usize {
        self.ages.len()
    }

    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    pub fn set_max_neurons(&mut self, cap: usize) {
        self.max_neurons = cap;
    }

    pub fn live_indices(&self) -> Vec<u32> {
        (0..self.alive.len() as u32)
            .filter(|&i| self.alive[i as usize])
            .collect()
    }

    pub fn position(&self, i: u32) -> Point3<f64> {
        debug_assert!(self.alive[i as usize]);
        self.positions[i as usize]
    }

    pub fn error(&self, i: u32) -> f64 {
        debug_assert!(self.alive[i as usize]);
        self.errors[i as usize]
    }

    pub fn neighbors(&self, i: u32) -> &[u32] {
        &self.adjacency[i as usize]
    }

    pub fn edge_age(&self, a: u32, b: u32) -> Option<u32> {
        self.ages.get(&key(a, b)).copied()
    }

    /// Undirected edges with endpoints ascending, in deterministic order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.ages.len());
        for i in 0..self.adjacency.len() as u32 {
            if !self.alive[i as usize] {
                continue;
            }
            for &j in &self.adjacency[i as usize] {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub(crate) fn add_edge(&mut self, a: u32, b: u32) {
        debug_assert!(a != b);
        for (from, to) in [(a, b), (b, a)] {
            let list = &mut self.adjacency[from as usize];
            if let Err(pos) = list.binary_search(&to) {
                list.insert(pos, to);
            }
        }
        self.ages.insert(key(a, b), 0);
    }

    pub(crate) fn remove_edge(&mut self, a: u32, b: u32) {
        for (from, to) in [(a, b), (b, a)] {
            let list = &mut self.adjacency[from as usize];
            if let Ok(pos) = list.binary_search(&to) {
                list.remove(pos);
            }
        }
        self.ages.remove(&key(a, b));
    }

    fn remove_neuron(&mut self, i: u32) {
        debug_assert!(self.adjacency[i as usize].is_empty());
        self.alive[i as usize] = false;
        self.errors[i as usize] = 0.0;
        self.free.push(i);
        self.live_count -= 1;
    }

    fn add_neuron(&mut self, position: Point3<f64>, error: f64) -> u32 {
        self.live_count += 1;
        if let Some(slot) = self.free.pop() {
            self.positions[slot as usize] = position;
            self.errors[slot as usize] = error;
            self.alive[slot as usize] = true;
            debug_assert!(self.adjacency[slot as usize].is_empty());
            slot
        } else {
            self.positions.push(position);
            self.errors.push(error);
            self.alive.push(true);
            self.adjacency.push(Vec::new());
            (self.positions.len() - 1) as u32
        }
    }

    /// Two nearest live neurons to `signal`; ties break to the lowest slot.
    fn two_nearest(&self, signal: &Point3<f64>) -> Result<(u32, u32, f64)> {
        if self.live_count < 2 {
            return Err(Error::TooFewNeurons {
                needed: 2,
                actual: self.live_count,
            });
        }
        let mut b1 = (f64::INFINITY, u32::MAX);
        let mut b2 = (f64::INFINITY, u32::MAX);
        for i in 0..self.positions.len() {
            if !self.alive[i] {
                continue;
            }
            let d = (self.positions[i] - signal).norm_squared();
            if d < b1.0 {
                b2 = b1;
                b1 = (d, i as u32);
            } else if d < b2.0 {
                b2 = (d, i as u32);
            }
        }
        Ok((b1.1, b2.1, b1.0))
    }

    /// One adaptation step. `params` are assumed valid (checked at the
    /// epoch level).
    ///
    /// In order: find the two nearest neurons; accumulate the squared
    /// distance on the winner; move winner and its neighbors toward the
    /// signal; age the winner's edges; create/refresh the winner–runner-up
    /// edge; drop over-aged edges and any neuron they leave isolated;
    /// insert a midpoint neuron if the winner's error passed the
    /// threshold; decay all errors.
    pub fn present_signal(&mut self, params: &GngParams, signal: &Point3<f64>) -> Result<()> {
        let (w1, w2, d_sq) = self.two_nearest(signal)?;
        let w1u = w1 as usize;

        self.errors[w1u] += d_sq;

        let delta = signal - self.positions[w1u];
        self.positions[w1u] += params.eps_b * delta;
        // Clone: neighbor moves must not observe list mutation (there is
        // none here, but the borrow of self.adjacency would pin self).
        let neighbors: Vec<u32> = self.adjacency[w1u].clone();
        for &n in &neighbors {
            let step = (signal - self.positions[n as usize]) * params.eps_n;
            self.positions[n as usize] += step;
        }

        for &n in &neighbors {
            *self.ages.get_mut(&key(w1, n)).expect("edge exists") += 1;
        }

        self.add_edge(w1, w2);

        let mut touched = vec![w1];
        for &n in &neighbors {
            if self.ages.get(&key(w1, n)).copied().unwrap_or(0) > params.a_max {
                self.remove_edge(w1, n);
                touched.push(n);
            }
        }
        for n in touched {
            if self.alive[n as usize] && self.adjacency[n as usize].is_empty() {
                self.remove_neuron(n);
            }
        }

        if self.errors[w1u] > params.t_gamma && self.live_count < self.max_neurons {
            // Winner still has the runner-up edge, so a neighbor exists.
            let q = *self.adjacency[w1u]
                .iter()
                .max_by(|&&a, &&b| {
                    self.errors[a as usize]
                        .partial_cmp(&self.errors[b as usize])
                        .unwrap()
                        // On equal errors prefer the lowest index: reversed
                        // index order makes max_by keep it.
                        .then(b.cmp(&a))
                })
                .expect("winner has at least one neighbor");
            let mid = Point3::from(
                (self.positions[w1u].coords + self.positions[q as usize].coords) * 0.5,
            );
            self.errors[w1u] *= params.alpha;
            self.errors[q as usize] *= params.alpha;
            let r = self.add_neuron(mid, self.errors[w1u]);
            self.remove_edge(w1, q);
            self.add_edge(w1, r);
            self.add_edge(r, q);
            self.insertions += 1;
        }

        for i in 0..self.errors.len() {
            if self.alive[i] {
                self.errors[i] *= params.d;
            }
        }
        Ok(())
    }

    /// Presents `min(|cloud|, EPOCH_SIGNAL_CAP)` noisy signals, then drops
    /// neurons that diverged from the input distribution.
    pub fn train_epoch(
        &mut self,
        params: &GngParams,
        ctx: &TrainingContext,
        seed: u64,
    ) -> Result<()> {
        params.validate()?;
        let n = ctx.cloud.len().min(EPOCH_SIGNAL_CAP);
        self.max_neurons = growth_cap(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = if ctx.noise_sigma > 0.0 {
            Some(Normal::new(0.0, ctx.noise_sigma).expect("sigma is positive and finite"))
        } else {
            None
        };
        for _ in 0..n {
            let mut s = ctx.cloud.points()[rng.gen_range(0..ctx.cloud.len())];
            if let Some(dist) = &noise {
                s.x += dist.sample(&mut rng);
                s.y += dist.sample(&mut rng);
                s.z += dist.sample(&mut rng);
            }
            self.present_signal(params, &s)?;
        }
        self.remove_diverged(ctx.index, ctx.divergence_threshold);
        Ok(())
    }

    /// Removes neurons farther from their nearest cloud point than
    /// `threshold`, along with their incident edges. Returns the count.
    pub fn remove_diverged(&mut self, index: &SpatialIndex, threshold: f64) -> usize {
        let mut removed = 0;
        for i in self.live_indices() {
            if index.nearest_distance(&self.positions[i as usize]) > threshold {
                for n in self.adjacency[i as usize].clone() {
                    self.remove_edge(i, n);
                }
                self.remove_neuron(i);
                removed += 1;
            }
        }
        removed
    }

    /// Mean distance from live neurons to their nearest cloud point.
    pub fn consistency_error(&self, index: &SpatialIndex) -> Result<f64> {
        self.consistency_error_with(index, Parallelism::default())
    }

    pub fn consistency_error_with(&self, index: &SpatialIndex, par: Parallelism) -> Result<f64> {
        if self.live_count == 0 {
            return Err(Error::TooFewNeurons {
                needed: 1,
                actual: 0,
            });
        }
        let live = self.live_indices();
        let dists = par.map(&live, |&i| {
            index.nearest_distance(&self.positions[i as usize])
        });
        // Sequential sum keeps the result independent of the strategy.
        Ok(dists.iter().sum::<f64>() / dists.len() as f64)
    }

    /// Lifts every 3-clique of the graph to a triangle. Faces are emitted
    /// in ascending index order; winding is not yet meaningful.
    pub fn extract_faces(&self) -> Result<TriangleMesh> {
        if self.live_count < 3 {
            return Err(Error::TooFewNeurons {
                needed: 3,
                actual: self.live_count,
            });
        }
        let live = self.live_indices();
        let mut slot_to_vertex = vec![u32::MAX; self.positions.len()];
        let mut vertices = Vec::with_capacity(live.len());
        for (vi, &slot) in live.iter().enumerate() {
            slot_to_vertex[slot as usize] = vi as u32;
            vertices.push(self.positions[slot as usize]);
        }
        let mut faces = Vec::new();
        for &i in &live {
            let adj = &self.adjacency[i as usize];
            for (a, &j) in adj.iter().enumerate() {
                if j <= i {
                    continue;
                }
                for &k in &adj[a + 1..] {
                    debug_assert!(k > j);
                    if self.adjacency[j as usize].binary_search(&k).is_ok() {
                        faces.push([
                            slot_to_vertex[i as usize],
                            slot_to_vertex[j as usize],
                            slot_to_vertex[k as usize],
                        ]);
                    }
                }
            }
        }
        TriangleMesh::new(vertices, faces, None)
    }

    /// Renumbers live neurons to a contiguous range, dropping dead slots.
    pub fn compact(&mut self) {
        let live = self.live_indices();
        let mut remap = vec![u32::MAX; self.positions.len()];
        for (new, &old) in live.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut ages = HashMap::with_capacity(self.ages.len());
        let mut adjacency = vec![Vec::new(); live.len()];
        for (new, &old) in live.iter().enumerate() {
            adjacency[new] = self.adjacency[old as usize]
                .iter()
                .map(|&n| remap[n as usize])
                .collect();
            adjacency[new].sort_unstable();
            for &n in &self.adjacency[old as usize] {
                let (a, b) = key(old, n);
                let age = self.ages[&(a, b)];
                ages.insert(key(remap[a as usize], remap[b as usize]), age);
            }
        }
        self.positions = live
            .iter()
            .map(|&i| self.positions[i as usize])
            .collect();
        self.errors = live.iter().map(|&i| self.errors[i as usize]).collect();
        self.alive = vec![true; live.len()];
        self.adjacency = adjacency;
        self.ages = ages;
        self.free.clear();
    }

    #[cfg(test)]
    pub(crate) fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.positions.len();
        if self.alive.len() != n || self.errors.len() != n || self.adjacency.len() != n {
            return Err("parallel arrays out of sync".into());
        }
        if self.live_count != self.alive.iter().filter(|a| **a).count() {
            return Err("live_count mismatch".into());
        }
        if self.live_count < 2 {
            return Err(format!("only {} live neurons", self.live_count));
        }
        let mut edge_pairs = 0;
        for i in 0..n {
            if !self.alive[i] {
                if !self.adjacency[i].is_empty() {
                    return Err(format!("dead neuron {i} has edges"));
                }
                continue;
            }
            if !(self.errors[i].is_finite() && self.errors[i] >= 0.0) {
                return Err(format!("error {} at neuron {i}", self.errors[i]));
            }
            if !self.adjacency[i].windows(2).all(|w| w[0] < w[1]) {
                return Err(format!("adjacency of {i} not sorted/unique"));
            }
            for &j in &self.adjacency[i] {
                if j as usize == i {
                    return Err(format!("self-loop at {i}"));
                }
                if !self.alive[j as usize] {
                    return Err(format!("edge ({i}, {j}) to dead neuron"));
                }
                if self.adjacency[j as usize].binary_search(&(i as u32)).is_err() {
                    return Err(format!("edge ({i}, {j}) not symmetric"));
                }
                if !self.ages.contains_key(&key(i as u32, j)) {
                    return Err(format!("edge ({i}, {j}) missing age"));
                }
                edge_pairs += 1;
            }
        }
        if self.ages.len() * 2 != edge_pairs {
            return Err("age table does not match adjacency".into());
        }
        if self.neuron_count() as u64 > 2 + self.insertions {
            return Err("more neurons than 2 + insertions".into());
        }
        Ok(())
    }
}

/// Neuron ceiling for an epoch of `signals` presentations.
fn growth_cap(signals: usize) -> usize {
    (signals / 25).clamp(64, 2000)
}

/// Shared read-only training inputs plus the two derived scales: the
/// signal noise amplitude and the diverged-neuron distance threshold,
/// both proportional to the cloud's median nearest-neighbor spacing.
pub struct TrainingContext<'a> {
    pub cloud: &'a PointCloud,
    pub index: &'a SpatialIndex,
    pub noise_sigma: f64,
    pub divergence_threshold: f64,
}

impl<'a> TrainingContext<'a> {
    pub fn new(cloud: &'a PointCloud, index: &'a SpatialIndex) -> Result<Self> {
        let spacing = cloud.median_nn_spacing()?;
        Ok(Self {
            cloud,
            index,
            noise_sigma: 0.25 * spacing,
            divergence_threshold: 10.0 * spacing,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochEntry {
    pub epoch: usize,
    pub epsilon: f64,
    pub neurons: usize,
    pub edges: usize,
}

/// Per-epoch training observability record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochTrace {
    pub entries: Vec<EpochEntry>,
}

impl EpochTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,epsilon,neurons,edges\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.epsilon, e.neurons, e.edges
            ));
        }
        out
    }

    pub fn min_epsilon(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|e| e.epsilon)
            .fold(None, |acc, e| Some(acc.map_or(e, |a: f64| a.min(e))))
    }
}

/// Trains until the epoch consistency error strictly worsens (or
/// [`MAX_EPOCHS`]), then returns the state with the minimum recorded
/// error, compacted, plus the full trace including the rejected epoch.
pub fn reconstruct(
    cloud: &PointCloud,
    params: &GngParams,
    seed: u64,
) -> Result<(GngModel, EpochTrace)> {
    reconstruct_with(cloud, params, seed, None, Parallelism::default())
}

pub fn reconstruct_with(
    cloud: &PointCloud,
    params: &GngParams,
    seed: u64,
    noise_sigma_override: Option<f64>,
    par: Parallelism,
) -> Result<(GngModel, EpochTrace)> {
    params.validate()?;
    let index = SpatialIndex::build(cloud)?;
    let mut ctx = TrainingContext::new(cloud, &index)?;
    if let Some(sigma) = noise_sigma_override {
        ctx.noise_sigma = sigma;
    }

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let init_seed: u64 = master.gen();
    let mut model = GngModel::init(cloud, init_seed)?;

    let mut trace = EpochTrace::default();
    let mut best: Option<(f64, GngModel)> = None;
    let mut prev = f64::INFINITY;
    for epoch in 0..MAX_EPOCHS {
        let epoch_seed: u64 = master.gen();
        model.train_epoch(params, &ctx, epoch_seed)?;
        let epsilon = model.consistency_error_with(&index, par)?;
        trace.entries.push(EpochEntry {
            epoch,
            epsilon,
            neurons: model.neuron_count(),
            edges: model.edge_count(),
        });
        if best.as_ref().map_or(true, |(b, _)| epsilon < *b) {
            best = Some((epsilon, model.clone()));
        }
        if epsilon > prev {
            break;
        }
        prev = epsilon;
    }

    let (_, mut best_model) = best.expect("at least one epoch runs");
    best_model.compact();
    Ok((best_model, trace))
}
