//! Trainers over a flat parameter vector: imperialist competitive algorithm,
//! global-best particle swarm, and full-batch gradient descent with momentum.
//!
//! All randomness comes from one seeded ChaCha stream per run, consumed in
//! population index order. Fitness evaluations of a whole population run on
//! the rayon pool but results are collected and reduced in index order, so a
//! run is bit-identical regardless of thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Sample;
use crate::nn;
use crate::{Error, Result};

/// Deterministic cost of a candidate vector.
pub trait Fitness: Sync {
    fn cost(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Fitness for F {
    fn cost(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

pub trait Differentiable: Fitness {
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Training-set MSE of an MLP as a function of its flat weights.
#[derive(Debug, Clone)]
pub struct MlpObjective<'a> {
    layers: Vec<usize>,
    data: &'a [Sample],
}

impl<'a> MlpObjective<'a> {
    pub fn new(layers: &[usize], data: &'a [Sample]) -> Result<Self> {
        // validates shapes and emptiness once up front
        nn::MlpModel::zeros(layers)?.mse_cost(data)?;
        Ok(Self { layers: layers.to_vec(), data })
    }

    pub fn dim(&self) -> usize {
        nn::n_params(&self.layers)
    }
}

impl Fitness for MlpObjective<'_> {
    fn cost(&self, x: &[f64]) -> f64 {
        nn::mse_flat(&self.layers, x, self.data)
    }
}

impl Differentiable for MlpObjective<'_> {
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        nn::gradient_flat(&self.layers, x, self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bounds {
    /// Same `[lo, hi]` box side for every dimension.
    Uniform(f64, f64),
    PerDim(Vec<(f64, f64)>),
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::Uniform(-5.0, 5.0)
    }
}

impl Bounds {
    fn resolve(&self, dim: usize) -> Result<Vec<(f64, f64)>> {
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let b = match self {
            Bounds::Uniform(lo, hi) => vec![(*lo, *hi); dim],
            Bounds::PerDim(v) if v.len() == dim => v.clone(),
            Bounds::PerDim(v) => {
                return Err(Error::Config(format!("{} bounds for dimension {dim}", v.len())))
            }
        };
        if let Some(i) = b.iter().position(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Config(format!("bounds {:?} at dimension {i}", b[i])));
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub best_weights: Vec<f64>,
    pub best_cost: f64,
    /// Best-so-far cost after each iteration.
    pub history: Vec<f64>,
    /// Best cost among the initial candidates, before any update.
    pub initial_cost: f64,
}

fn evaluate<F: Fitness + ?Sized>(f: &F, xs: &[&[f64]]) -> Vec<f64> {
    xs.par_iter()
        .map(|x| {
            let c = f.cost(x);
            if c.is_nan() {
                f64::INFINITY
            } else {
                c
            }
        })
        .collect()
}

fn uniform_point(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()
}

fn progress(verbose: bool, iter: usize, best: f64) {
    if verbose {
        eprintln!("iter={iter} best={best}");
    }
}

#[derive(Debug, Clone)]
struct Country {
    pos: Vec<f64>,
    cost: f64,
}

#[derive(Debug, Clone)]
struct Empire {
    imperialist: Country,
    colonies: Vec<Country>,
}

impl Empire {
    fn total_cost(&self, zeta: f64) -> f64 {
        let mean = if self.colonies.is_empty() {
            0.0
        } else {
            self.colonies.iter().map(|c| c.cost).sum::<f64>() / self.colonies.len() as f64
        };
        self.imperialist.cost + zeta * mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaConfig {
    pub n_countries: usize,
    pub n_imperialists: usize,
    /// Assimilation coefficient.
    pub beta: f64,
    /// Per-colony revolution probability per decade.
    pub p_revolution: f64,
    /// Weight of the mean colony cost in an empire's total cost.
    pub zeta: f64,
    pub n_decades: usize,
    pub bounds: Bounds,
    pub seed: u64,
    pub verbose: bool,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            n_countries: 30,
            n_imperialists: 3,
            beta: 2.0,
            p_revolution: 0.1,
            zeta: 0.1,
            n_decades: 400,
            bounds: Bounds::default(),
            seed: 42,
            verbose: false,
        }
    }
}

impl IcaConfig {
    fn validate(&self) -> Result<()> {
        if !(self.n_imperialists > 0 && self.n_imperialists < self.n_countries) {
            return Err(Error::Config(format!(
                "{} imperialists among {} countries",
                self.n_imperialists, self.n_countries
            )));
        }
        if !(0.0..=1.0).contains(&self.p_revolution) {
            return Err(Error::Config(format!("revolution probability {}", self.p_revolution)));
        }
        if !(self.beta > 0.0) || !(self.zeta >= 0.0) {
            return Err(Error::Config(format!("beta {} / zeta {}", self.beta, self.zeta)));
        }
        Ok(())
    }
}

/// Population bookkeeping after a decade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IcaCensus {
    pub empires: usize,
    pub colonies: usize,
}

impl IcaCensus {
    pub fn countries(&self) -> usize {
        self.empires + self.colonies
    }
}

/// Normalized powers `|(c_k − max c) / Σ(c − max c)|`; uniform when every
/// cost is equal.
fn normalized_powers(costs: &[f64]) -> Vec<f64> {
    let worst = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = costs.iter().map(|c| c - worst).collect();
    let total: f64 = shifted.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return vec![1.0 / costs.len() as f64; costs.len()];
    }
    shifted.iter().map(|s| (s / total).abs()).collect()
}

fn roulette(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // rounding can leave u marginally above the last weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Index of the first maximum.
fn argmax(xs: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in xs.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the first minimum.
fn argmin(xs: impl IntoIterator<Item = f64>) -> Option<usize> {
    argmax(xs.into_iter().map(|x| -x))
}

/// Imperialist competitive algorithm, steppable one decade at a time.
pub struct Ica<'f, F: Fitness + ?Sized> {
    f: &'f F,
    cfg: IcaConfig,
    bounds: Vec<(f64, f64)>,
    rng: ChaCha8Rng,
    empires: Vec<Empire>,
    best: Country,
    history: Vec<f64>,
    initial_cost: f64,
}

impl<'f, F: Fitness + ?Sized> Ica<'f, F> {
    pub fn new(f: &'f F, dim: usize, cfg: IcaConfig) -> Result<Self> {
        cfg.validate()?;
        let bounds = cfg.bounds.resolve(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let positions: Vec<Vec<f64>> =
            (0..cfg.n_countries).map(|_| uniform_point(&mut rng, &bounds)).collect();
        let costs = evaluate(f, &positions.iter().map(Vec::as_slice).collect::<Vec<_>>());
        let mut countries: Vec<Country> = positions
            .into_iter()
            .zip(costs)
            .map(|(pos, cost)| Country { pos, cost })
            .collect();
        // stable: ties keep index order
        countries.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        let best = countries[0].clone();

        let mut colonies = countries.split_off(cfg.n_imperialists);
        colonies.shuffle(&mut rng);
        let imperialists = countries;

        let n_colonies = colonies.len();
        let powers = normalized_powers(&imperialists.iter().map(|c| c.cost).collect::<Vec<_>>());
        let mut counts: Vec<usize> =
            powers.iter().map(|p| (p * n_colonies as f64).round() as usize).collect();
        // the strongest absorbs the rounding remainder
        let mut assigned: usize = counts.iter().sum();
        while assigned > n_colonies {
            let i = (0..counts.len()).rev().find(|&i| counts[i] > 0).expect("positive total");
            counts[i] -= 1;
            assigned -= 1;
        }
        counts[0] += n_colonies - assigned;

        let mut rest = colonies.into_iter();
        let empires = imperialists
            .into_iter()
            .zip(counts)
            .map(|(imperialist, k)| Empire { imperialist, colonies: rest.by_ref().take(k).collect() })
            .collect();

        let initial_cost = best.cost;
        Ok(Self { f, cfg, bounds, rng, empires, best, history: Vec::new(), initial_cost })
    }

    pub fn census(&self) -> IcaCensus {
        IcaCensus {
            empires: self.empires.len(),
            colonies: self.empires.iter().map(|e| e.colonies.len()).sum(),
        }
    }

    pub fn best_cost(&self) -> f64 {
        self.best.cost
    }

    /// Every country position, imperialists first within each empire.
    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.empires.iter().flat_map(|e| {
            std::iter::once(e.imperialist.pos.as_slice()).chain(e.colonies.iter().map(|c| c.pos.as_slice()))
        })
    }

    fn absorb_best(&mut self, c: &Country) {
        if c.cost < self.best.cost {
            self.best = c.clone();
        }
    }

    /// Assimilation, revolution, exchange, competition and elimination.
    pub fn decade(&mut self) {
        let (beta, p_rev) = (self.cfg.beta, self.cfg.p_revolution);
        for e in &mut self.empires {
            let imp = &e.imperialist.pos;
            for col in &mut e.colonies {
                for (d, x) in col.pos.iter_mut().enumerate() {
                    let (lo, hi) = self.bounds[d];
                    let step = beta * self.rng.random::<f64>() * (imp[d] - *x);
                    *x = (*x + step).clamp(lo, hi);
                }
                if self.rng.random::<f64>() < p_rev {
                    col.pos = uniform_point(&mut self.rng, &self.bounds);
                }
            }
        }

        let moved: Vec<&[f64]> =
            self.empires.iter().flat_map(|e| e.colonies.iter().map(|c| c.pos.as_slice())).collect();
        let mut costs = evaluate(self.f, &moved).into_iter();
        for e in &mut self.empires {
            for col in &mut e.colonies {
                col.cost = costs.next().expect("one cost per colony");
            }
        }
        let mut improved = None;
        for e in &self.empires {
            for col in &e.colonies {
                if col.cost < improved.as_ref().map_or(self.best.cost, |c: &Country| c.cost) {
                    improved = Some(col.clone());
                }
            }
        }
        if let Some(c) = improved {
            self.absorb_best(&c);
        }

        for e in &mut self.empires {
            if let Some(i) = argmin(e.colonies.iter().map(|c| c.cost)) {
                if e.colonies[i].cost < e.imperialist.cost {
                    std::mem::swap(&mut e.colonies[i], &mut e.imperialist);
                }
            }
        }

        if self.empires.len() > 1 {
            self.compete();
        }
        self.eliminate();

        self.history.push(self.best.cost);
        progress(self.cfg.verbose, self.history.len(), self.best.cost);
    }

    /// Roulette over the normalized total powers of every empire but `skip`.
    fn pick_receiver(&mut self, skip: usize) -> usize {
        let zeta = self.cfg.zeta;
        let candidates: Vec<usize> = (0..self.empires.len()).filter(|&i| i != skip).collect();
        let totals: Vec<f64> = candidates.iter().map(|&i| self.empires[i].total_cost(zeta)).collect();
        let powers = normalized_powers(&totals);
        candidates[roulette(&mut self.rng, &powers)]
    }

    fn compete(&mut self) {
        let zeta = self.cfg.zeta;
        let weakest = argmax(self.empires.iter().map(|e| e.total_cost(zeta))).expect("non-empty");
        let Some(victim) = argmax(self.empires[weakest].colonies.iter().map(|c| c.cost)) else {
            return;
        };
        let colony = self.empires[weakest].colonies.remove(victim);
        let receiver = self.pick_receiver(weakest);
        self.empires[receiver].colonies.push(colony);
    }

    fn eliminate(&mut self) {
        while self.empires.len() > 1 {
            let Some(dead) = self.empires.iter().position(|e| e.colonies.is_empty()) else {
                break;
            };
            let receiver = self.pick_receiver(dead);
            let fallen = self.empires[dead].imperialist.clone();
            self.empires[receiver].colonies.push(fallen);
            self.empires.remove(dead);
        }
    }

    pub fn run(mut self) -> OptimizerResult {
        for _ in 0..self.cfg.n_decades {
            self.decade();
        }
        self.into_result()
    }

    pub fn into_result(self) -> OptimizerResult {
        OptimizerResult {
            best_weights: self.best.pos,
            best_cost: self.best.cost,
            history: self.history,
            initial_cost: self.initial_cost,
        }
    }
}

pub fn train_ica<F: Fitness + ?Sized>(f: &F, dim: usize, cfg: &IcaConfig) -> Result<OptimizerResult> {
    Ok(Ica::new(f, dim, cfg.clone())?.run())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub w_start: f64,
    pub w_end: f64,
    pub c1: f64,
    pub c2: f64,
    /// Velocity clamp as a fraction of each dimension's range.
    pub v_max_frac: f64,
    pub bounds: Bounds,
    pub seed: u64,
    pub verbose: bool,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 200,
            n_iterations: 400,
            w_start: 0.9,
            w_end: 0.4,
            c1: 2.0,
            c2: 2.0,
            v_max_frac: 0.2,
            bounds: Bounds::default(),
            seed: 42,
            verbose: false,
        }
    }
}

impl PsoConfig {
    fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config(format!("{} particles", self.n_particles)));
        }
        if [self.w_start, self.w_end, self.c1, self.c2].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("inertia and acceleration must be non-negative".into()));
        }
        if !(self.v_max_frac > 0.0 && self.v_max_frac <= 1.0) {
            return Err(Error::Config(format!("velocity clamp fraction {}", self.v_max_frac)));
        }
        Ok(())
    }

    fn inertia(&self, iter: usize) -> f64 {
        if self.n_iterations <= 1 {
            return self.w_start;
        }
        let t = iter as f64 / (self.n_iterations - 1) as f64;
        self.w_start + (self.w_end - self.w_start) * t
    }
}

#[derive(Debug, Clone)]
struct Particle {
    pos: Vec<f64>,
    vel: Vec<f64>,
    best_pos: Vec<f64>,
    best_cost: f64,
}

/// Global-best particle swarm, steppable one iteration at a time.
pub struct Swarm<'f, F: Fitness + ?Sized> {
    f: &'f F,
    cfg: PsoConfig,
    bounds: Vec<(f64, f64)>,
    v_max: Vec<f64>,
    rng: ChaCha8Rng,
    particles: Vec<Particle>,
    gbest: Vec<f64>,
    gbest_cost: f64,
    history: Vec<f64>,
    initial_cost: f64,
}

impl<'f, F: Fitness + ?Sized> Swarm<'f, F> {
    pub fn new(f: &'f F, dim: usize, cfg: PsoConfig) -> Result<Self> {
        cfg.validate()?;
        let bounds = cfg.bounds.resolve(dim)?;
        let v_max: Vec<f64> = bounds.iter().map(|(lo, hi)| cfg.v_max_frac * (hi - lo)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut init = Vec::with_capacity(cfg.n_particles);
        for _ in 0..cfg.n_particles {
            let pos = uniform_point(&mut rng, &bounds);
            let vel: Vec<f64> = v_max.iter().map(|&v| rng.random_range(-v..v)).collect();
            init.push((pos, vel));
        }
        let costs = evaluate(f, &init.iter().map(|(p, _)| p.as_slice()).collect::<Vec<_>>());
        let particles: Vec<Particle> = init
            .into_iter()
            .zip(&costs)
            .map(|((pos, vel), &cost)| Particle { best_pos: pos.clone(), pos, vel, best_cost: cost })
            .collect();
        let g = argmin(costs.iter().copied()).expect("at least two particles");
        Ok(Self {
            f,
            gbest: particles[g].pos.clone(),
            gbest_cost: costs[g],
            initial_cost: costs[g],
            cfg,
            bounds,
            v_max,
            rng,
            particles,
            history: Vec::new(),
        })
    }

    pub fn gbest_cost(&self) -> f64 {
        self.gbest_cost
    }

    pub fn pbest_costs(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.best_cost).collect()
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.particles.iter().map(|p| p.pos.as_slice())
    }

    /// One synchronous iteration; returns each particle's new cost.
    pub fn step(&mut self) -> Vec<f64> {
        let iter = self.history.len();
        let w = self.cfg.inertia(iter);
        let (c1, c2) = (self.cfg.c1, self.cfg.c2);
        for p in &mut self.particles {
            for d in 0..p.pos.len() {
                let r1 = self.rng.random::<f64>();
                let r2 = self.rng.random::<f64>();
                let v = w * p.vel[d]
                    + c1 * r1 * (p.best_pos[d] - p.pos[d])
                    + c2 * r2 * (self.gbest[d] - p.pos[d]);
                p.vel[d] = v.clamp(-self.v_max[d], self.v_max[d]);
                let (lo, hi) = self.bounds[d];
                p.pos[d] = (p.pos[d] + p.vel[d]).clamp(lo, hi);
            }
        }
        let costs = evaluate(self.f, &self.particles.iter().map(|p| p.pos.as_slice()).collect::<Vec<_>>());
        for (p, &c) in self.particles.iter_mut().zip(&costs) {
            if c < p.best_cost {
                p.best_cost = c;
                p.best_pos.clone_from(&p.pos);
            }
            if c < self.gbest_cost {
                self.gbest_cost = c;
                self.gbest.clone_from(&p.pos);
            }
        }
        self.history.push(self.gbest_cost);
        progress(self.cfg.verbose, self.history.len(), self.gbest_cost);
        costs
    }

    pub fn run(mut self) -> OptimizerResult {
        for _ in 0..self.cfg.n_iterations {
            self.step();
        }
        self.into_result()
    }

    pub fn into_result(self) -> OptimizerResult {
        OptimizerResult {
            best_weights: self.gbest,
            best_cost: self.gbest_cost,
            history: self.history,
            initial_cost: self.initial_cost,
        }
    }
}

pub fn train_pso<F: Fitness + ?Sized>(f: &F, dim: usize, cfg: &PsoConfig) -> Result<OptimizerResult> {
    Ok(Swarm::new(f, dim, cfg.clone())?.run())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Initial weights are drawn from `[−init_range, init_range]`.
    pub init_range: f64,
    pub seed: u64,
    pub verbose: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self { lr: 0.01, momentum: 0.9, epochs: 5000, init_range: 0.5, seed: 42, verbose: false }
    }
}

/// Full-batch gradient descent with classical momentum:
/// `v ← μ·v − η·∇f(w)`, `w ← w + v`.
pub fn train_gd<F: Differentiable + ?Sized>(f: &F, dim: usize, cfg: &GdConfig) -> Result<OptimizerResult> {
    if !(cfg.lr >= 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::Config(format!("learning rate {} / momentum {}", cfg.lr, cfg.momentum)));
    }
    if dim == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = cfg.init_range;
    let mut w: Vec<f64> = (0..dim).map(|_| rng.random_range(-r..=r)).collect();
    let mut vel = vec![0.0; dim];
    let mut best = (w.clone(), f64::INFINITY);
    let mut history = Vec::with_capacity(cfg.epochs);
    let initial_cost = f.cost(&w);

    for epoch in 0..cfg.epochs {
        let cost = f.cost(&w);
        if !cost.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        if cost < best.1 {
            best = (w.clone(), cost);
        }
        history.push(best.1);
        progress(cfg.verbose, epoch + 1, best.1);
        let g = f.gradient(&w);
        for ((wi, vi), gi) in w.iter_mut().zip(&mut vel).zip(&g) {
            *vi = cfg.momentum * *vi - cfg.lr * gi;
            *wi += *vi;
        }
    }
    if cfg.epochs == 0 {
        best.1 = initial_cost;
    }
    Ok(OptimizerResult { best_weights: best.0, best_cost: best.1, history, initial_cost })
}
