//! Particle swarm search over the six GNG training parameters.
//!
//! Each agent's position is a point in [`ParamSpace`]; fitness is the
//! (ε, η) pair from a full reconstruction of the cloud, compared with the
//! Pareto test [`theta`]. All randomness is derived from the run seed, so
//! a run is reproducible regardless of evaluation parallelism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::gng::{reconstruct_with, GngParams};
use crate::quality::{eta_with, theta, QualityScores};

/// Inertia weight.
pub const W: f64 = 0.729;
/// Cognitive acceleration (pull toward the agent's own best).
pub const C1: f64 = 1.49445;
/// Social acceleration (pull toward the swarm best).
pub const C2: f64 = 1.49445;
/// Default number of agents.
pub const DEFAULT_SWARM_SIZE: usize = 20;

/// Scores assigned when a position cannot be evaluated; dominated by any
/// real evaluation.
pub const SENTINEL_SCORES: QualityScores = QualityScores {
    epsilon: f64::INFINITY,
    eta: 1.0,
};

const DIMS: usize = 6;

/// Axis-aligned search box over (eps_b, eps_n, t_gamma, a_max, alpha, d).
/// a_max travels as a real number and is rounded on decode.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpace {
    pub low: [f64; DIMS],
    pub high: [f64; DIMS],
}

impl Default for ParamSpace {
    fn default() -> Self {
        ParamSpace {
            low: [0.0, 0.0, 0.0, 50.0, 0.0, 0.0],
            high: [1.0, 0.2, 5.0, 250.0, 1.0, 1.0],
        }
    }
}

impl ParamSpace {
    pub fn validate(&self) -> Result<()> {
        for d in 0..DIMS {
            if !(self.low[d] < self.high[d]) {
                return Err(Error::InvalidParams(format!(
                    "parameter space dimension {d} is empty: [{}, {}]",
                    self.low[d], self.high[d]
                )));
            }
        }
        Ok(())
    }

    pub fn range(&self, dim: usize) -> f64 {
        self.high[dim] - self.low[dim]
    }

    pub fn contains(&self, position: &[f64; DIMS]) -> bool {
        (0..DIMS).all(|d| position[d] >= self.low[d] && position[d] <= self.high[d])
    }

    pub fn clamp(&self, position: &mut [f64; DIMS]) -> [bool; DIMS] {
        let mut clamped = [false; DIMS];
        for d in 0..DIMS {
            if position[d] < self.low[d] {
                position[d] = self.low[d];
                clamped[d] = true;
            } else if position[d] > self.high[d] {
                position[d] = self.high[d];
                clamped[d] = true;
            }
        }
        clamped
    }

    pub fn encode(params: &GngParams) -> [f64; DIMS] {
        [
            params.eps_b,
            params.eps_n,
            params.t_gamma,
            f64::from(params.a_max),
            params.alpha,
            params.d,
        ]
    }

    /// Rounds a_max to the nearest integer and validates the result; a
    /// position inside the box can still fail (eps_n > eps_b, t_gamma =
    /// 0), which [`evaluate`] maps to [`SENTINEL_SCORES`].
    pub fn decode(&self, position: &[f64; DIMS]) -> Result<GngParams> {
        let params = GngParams {
            eps_b: position[0],
            eps_n: position[1],
            t_gamma: position[2],
            a_max: position[3].round() as u32,
            alpha: position[4],
            d: position[5],
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub position: [f64; DIMS],
    pub velocity: [f64; DIMS],
    pub best_position: [f64; DIMS],
    pub best_scores: QualityScores,
}

/// One evaluation record; `is_global_best` marks rows that replaced the
/// swarm best when processed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: u32,
    pub agent: u32,
    pub epsilon: f64,
    pub eta: f64,
    pub is_global_best: bool,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("iteration,agent,epsilon,eta,is_global_best\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration, r.agent, r.epsilon, r.eta, r.is_global_best
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub space: ParamSpace,
    pub agents: Vec<Agent>,
    pub best_position: [f64; DIMS],
    pub best_scores: QualityScores,
    pub iteration: u32,
    pub history: Vec<HistoryRow>,
    pub run_seed: u64,
}

// Derived-seed streams; keeping them disjoint means adding a consumer
// never shifts another stream's values.
const STREAM_INIT: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_KIN: u64 = 3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(run_seed: u64, stream: u64, iteration: u64, agent: u64) -> u64 {
    splitmix(run_seed ^ splitmix(stream ^ splitmix(iteration ^ splitmix(agent))))
}

/// Places agent 0 exactly on `seed_params`; every other agent is
/// perturbed uniformly within ±25% of each dimension's range, clamped.
/// All agents start with a velocity uniform in ±10% of range.
pub fn init_swarm(
    space: &ParamSpace,
    seed_params: &GngParams,
    swarm_size: usize,
    run_seed: u64,
) -> Result<SwarmState> {
    space.validate()?;
    seed_params.validate()?;
    if swarm_size == 0 {
        return Err(Error::InvalidParams("swarm_size must be at least 1".into()));
    }
    let anchor = ParamSpace::encode(seed_params);
    if !space.contains(&anchor) {
        return Err(Error::SeedOutOfBounds(format!(
            "seed parameters {anchor:?} lie outside the search space"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, STREAM_INIT, 0, 0));
    let mut agents = Vec::with_capacity(swarm_size);
    for i in 0..swarm_size {
        let mut position = anchor;
        if i > 0 {
            for d in 0..DIMS {
                let spread = 0.25 * space.range(d);
                position[d] = anchor[d] + rng.gen_range(-spread..=spread);
            }
            space.clamp(&mut position);
        }
        let mut velocity = [0.0; DIMS];
        for (d, v) in velocity.iter_mut().enumerate() {
            let spread = 0.10 * space.range(d);
            *v = rng.gen_range(-spread..=spread);
        }
        agents.push(Agent {
            position,
            velocity,
            best_position: position,
            best_scores: SENTINEL_SCORES,
        });
    }
    Ok(SwarmState {
        space: space.clone(),
        agents,
        best_position: anchor,
        best_scores: SENTINEL_SCORES,
        iteration: 0,
        history: Vec::new(),
        run_seed,
    })
}

/// Scores one position: ε of the reconstructed model, η of its 3-clique
/// faces. Any failure (undecodable position, degenerate training, no
/// faces) yields [`SENTINEL_SCORES`] so the agent keeps moving.
pub fn evaluate(
    space: &ParamSpace,
    position: &[f64; DIMS],
    cloud: &PointCloud,
    gng_seed: u64,
    par: Parallelism,
) -> QualityScores {
    let Ok(params) = space.decode(position) else {
        return SENTINEL_SCORES;
    };
    let Ok((model, trace)) = reconstruct_with(cloud, &params, gng_seed, None, par) else {
        return SENTINEL_SCORES;
    };
    let Some(epsilon) = trace.min_epsilon() else {
        return SENTINEL_SCORES;
    };
    let Ok(mesh) = model.extract_faces() else {
        return SENTINEL_SCORES;
    };
    match eta_with(&mesh, par) {
        Ok(eta) => QualityScores { epsilon, eta },
        Err(_) => SENTINEL_SCORES,
    }
}

/// One velocity/position update for a single agent. Exposed as a pure
/// function so the arithmetic can be checked against hand simulation;
/// `r1`/`r2` are the per-dimension random factors in [0, 1).
pub fn kinematic_update(
    space: &ParamSpace,
    position: &[f64; DIMS],
    velocity: &[f64; DIMS],
    personal_best: &[f64; DIMS],
    global_best: &[f64; DIMS],
    r1: &[f64; DIMS],
    r2: &[f64; DIMS],
) -> ([f64; DIMS], [f64; DIMS]) {
    let mut new_pos = [0.0; DIMS];
    let mut new_vel = [0.0; DIMS];
    for d in 0..DIMS {
        new_vel[d] = W * velocity[d]
            + C1 * r1[d] * (personal_best[d] - position[d])
            + C2 * r2[d] * (global_best[d] - position[d]);
        new_pos[d] = position[d] + new_vel[d];
    }
    for (d, was_clamped) in space.clamp(&mut new_pos).into_iter().enumerate() {
        if was_clamped {
            new_vel[d] = 0.0;
        }
    }
    (new_pos, new_vel)
}

pub fn step(state: &mut SwarmState, cloud: &PointCloud) -> Result<()> {
    step_with(state, cloud, Parallelism::default())
}

/// Evaluates every agent (concurrently if requested), then applies
/// personal/global best updates and kinematics in agent order.
pub fn step_with(state: &mut SwarmState, cloud: &PointCloud, par: Parallelism) -> Result<()> {
    let iteration = state.iteration;
    let run_seed = state.run_seed;
    let space = state.space.clone();
    let positions: Vec<[f64; DIMS]> = state.agents.iter().map(|a| a.position).collect();
    let scores = par.map_indexed(&positions, |i, position| {
        let gng_seed = derive_seed(run_seed, STREAM_EVAL, u64::from(iteration), i as u64);
        evaluate(&space, position, cloud, gng_seed, par)
    });

    for (i, scores) in scores.into_iter().enumerate() {
        let agent = &mut state.agents[i];
        if theta(&agent.best_scores, &scores) {
            agent.best_scores = scores;
            agent.best_position = agent.position;
        }
        let mut is_global_best = false;
        if theta(&state.best_scores, &scores) {
            state.best_scores = scores;
            state.best_position = state.agents[i].position;
            is_global_best = true;
        }
        state.history.push(HistoryRow {
            iteration,
            agent: i as u32,
            epsilon: scores.epsilon,
            eta: scores.eta,
            is_global_best,
        });
    }

    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(run_seed, STREAM_KIN, u64::from(iteration), 0));
    for agent in &mut state.agents {
        let r1: [f64; DIMS] = std::array::from_fn(|_| rng.gen());
        let r2: [f64; DIMS] = std::array::from_fn(|_| rng.gen());
        let (position, velocity) = kinematic_update(
            &state.space,
            &agent.position,
            &agent.velocity,
            &agent.best_position,
            &state.best_position,
            &r1,
            &r2,
        );
        agent.position = position;
        agent.velocity = velocity;
    }
    state.iteration += 1;
    Ok(())
}

/// Full search from the stock seed parameters over the default space.
pub fn optimize(
    cloud: &PointCloud,
    iterations: u32,
    swarm_size: usize,
    run_seed: u64,
) -> Result<(GngParams, Vec<HistoryRow>)> {
    optimize_with(
        cloud,
        &ParamSpace::default(),
        &GngParams::seed_defaults(),
        iterations,
        swarm_size,
        run_seed,
        Parallelism::default(),
    )
}

pub fn optimize_with(
    cloud: &PointCloud,
    space: &ParamSpace,
    seed_params: &GngParams,
    iterations: u32,
    swarm_size: usize,
    run_seed: u64,
    par: Parallelism,
) -> Result<(GngParams, Vec<HistoryRow>)> {
    if iterations == 0 {
        return Err(Error::InvalidParams("iterations must be at least 1".into()));
    }
    let mut state = init_swarm(space, seed_params, swarm_size, run_seed)?;
    for i in 0..iterations {
        step_with(&mut state, cloud, par)?;
        log::debug!(
            "pso iteration {i}: best epsilon {:.6} eta {:.4}",
            state.best_scores.epsilon,
            state.best_scores.eta
        );
    }
    let params = state.space.decode(&state.best_position)?;
    Ok((params, state.history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn unit_space() -> ParamSpace {
        ParamSpace {
            low: [0.0; DIMS],
            high: [1.0; DIMS],
        }
    }

    /// Points on the surface of a small cube; enough structure for GNG to
    /// form triangles quickly.
    fn tiny_cloud() -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = Vec::new();
        for _ in 0..60 {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(-1.0..1.0);
            let axis = rng.gen_range(0..3usize);
            let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let mut p = [u, v, side];
            p.rotate_right(axis);
            pts.push(Point3::new(p[0], p[1], p[2]));
        }
        PointCloud::new(pts, None).unwrap()
    }

    #[test]
    fn default_space_matches_documented_ranges() {
        let s = ParamSpace::default();
        assert_eq!(s.low, [0.0, 0.0, 0.0, 50.0, 0.0, 0.0]);
        assert_eq!(s.high, [1.0, 0.2, 5.0, 250.0, 1.0, 1.0]);
        s.validate().unwrap();
    }

    #[test]
    fn seed_agent_sits_exactly_on_seed_column() {
        let state = init_swarm(
            &ParamSpace::default(),
            &GngParams::seed_defaults(),
            5,
            42,
        )
        .unwrap();
        assert_eq!(state.agents[0].position, [0.2, 0.006, 3.0, 60.0, 0.5, 0.995]);
        assert_eq!(state.agents[0].best_position, state.agents[0].position);
        assert_eq!(state.best_position, state.agents[0].position);
    }

    #[test]
    fn initial_agents_stay_near_the_seed_and_in_bounds() {
        let space = ParamSpace::default();
        let anchor = ParamSpace::encode(&GngParams::seed_defaults());
        let state = init_swarm(&space, &GngParams::seed_defaults(), 50, 7).unwrap();
        for agent in &state.agents {
            assert!(space.contains(&agent.position));
            for d in 0..DIMS {
                let spread = 0.25 * space.range(d);
                assert!(agent.position[d] >= (anchor[d] - spread).max(space.low[d]) - 1e-12);
                assert!(agent.position[d] <= (anchor[d] + spread).min(space.high[d]) + 1e-12);
                assert!(agent.velocity[d].abs() <= 0.10 * space.range(d) + 1e-12);
            }
        }
    }

    #[test]
    fn init_is_deterministic() {
        let space = ParamSpace::default();
        let seed = GngParams::seed_defaults();
        let a = init_swarm(&space, &seed, 8, 99).unwrap();
        let b = init_swarm(&space, &seed, 8, 99).unwrap();
        assert_eq!(a, b);
        let c = init_swarm(&space, &seed, 8, 100).unwrap();
        assert_ne!(a.agents[1].position, c.agents[1].position);
    }

    #[test]
    fn seed_outside_space_is_rejected() {
        let mut space = ParamSpace::default();
        space.high[0] = 0.1; // eps_b range now excludes the 0.2 seed
        let err = init_swarm(&space, &GngParams::seed_defaults(), 4, 1).unwrap_err();
        assert!(matches!(err, Error::SeedOutOfBounds(_)));
        assert!(matches!(
            init_swarm(&ParamSpace::default(), &GngParams::seed_defaults(), 0, 1),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn undecodable_position_scores_the_sentinel() {
        let cloud = tiny_cloud();
        let space = ParamSpace::default();
        // eps_n > eps_b
        let scores = evaluate(
            &space,
            &[0.05, 0.2, 3.0, 60.0, 0.5, 0.995],
            &cloud,
            1,
            Parallelism::Sequential,
        );
        assert_eq!(scores, SENTINEL_SCORES);
        // t_gamma at the closed lower bound of the box is not trainable
        let scores = evaluate(
            &space,
            &[0.2, 0.006, 0.0, 60.0, 0.5, 0.995],
            &cloud,
            1,
            Parallelism::Sequential,
        );
        assert_eq!(scores, SENTINEL_SCORES);
    }

    #[test]
    fn evaluation_is_reproducible_and_finite_on_real_params() {
        let cloud = tiny_cloud();
        let space = ParamSpace::default();
        let pos = ParamSpace::encode(&GngParams::seed_defaults());
        let a = evaluate(&space, &pos, &cloud, 17, Parallelism::Sequential);
        let b = evaluate(&space, &pos, &cloud, 17, Parallelism::Sequential);
        assert_eq!(a, b);
        assert!(a.epsilon.is_finite());
        assert!(a.eta >= 0.0 && a.eta < 1.0);
    }

    #[test]
    fn kinematics_match_hand_simulation() {
        let space = unit_space();
        let (pos, vel) = kinematic_update(
            &space,
            &[0.2; DIMS],
            &[0.1; DIMS],
            &[0.4; DIMS],
            &[0.8; DIMS],
            &[0.5; DIMS],
            &[0.5; DIMS],
        );
        // 0.729*0.1 + 1.49445*0.5*0.2 + 1.49445*0.5*0.6 = 0.67068
        for d in 0..DIMS {
            assert!((vel[d] - 0.67068).abs() < 1e-12);
            assert!((pos[d] - 0.87068).abs() < 1e-12);
        }
    }

    #[test]
    fn clamped_dimension_zeroes_velocity() {
        let space = unit_space();
        let (pos, vel) = kinematic_update(
            &space,
            &[0.9; DIMS],
            &[0.0; DIMS],
            &[1.0; DIMS],
            &[1.0; DIMS],
            &[1.0; DIMS],
            &[1.0; DIMS],
        );
        // 1.49445*0.1*2 = 0.29889 of velocity, which overshoots 1.0.
        for d in 0..DIMS {
            assert_eq!(pos[d], 1.0);
            assert_eq!(vel[d], 0.0);
        }
    }

    #[test]
    fn agent_at_the_optimum_with_zero_velocity_stays_put() {
        let space = unit_space();
        let x = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let (pos, vel) =
            kinematic_update(&space, &x, &[0.0; DIMS], &x, &x, &[0.9; DIMS], &[0.2; DIMS]);
        assert_eq!(pos, x);
        assert_eq!(vel, [0.0; DIMS]);
    }

    #[test]
    fn positions_stay_in_bounds_under_kinematic_fuzzing() {
        let space = ParamSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut pos = ParamSpace::encode(&GngParams::seed_defaults());
        let mut vel = [0.0; DIMS];
        for _ in 0..1000 {
            let rand_point = |rng: &mut ChaCha8Rng| {
                let mut p = [0.0; DIMS];
                for (d, x) in p.iter_mut().enumerate() {
                    *x = rng.gen_range(space.low[d]..=space.high[d]);
                }
                p
            };
            let pb = rand_point(&mut rng);
            let gb = rand_point(&mut rng);
            let r1: [f64; DIMS] = std::array::from_fn(|_| rng.gen());
            let r2: [f64; DIMS] = std::array::from_fn(|_| rng.gen());
            (pos, vel) = kinematic_update(&space, &pos, &vel, &pb, &gb, &r1, &r2);
            assert!(space.contains(&pos), "escaped bounds: {pos:?}");
        }
    }

    #[test]
    fn swarm_history_grows_by_one_row_per_agent_per_step() {
        let cloud = tiny_cloud();
        let mut state = init_swarm(
            &ParamSpace::default(),
            &GngParams::seed_defaults(),
            3,
            11,
        )
        .unwrap();
        for _ in 0..2 {
            step_with(&mut state, &cloud, Parallelism::Sequential).unwrap();
        }
        assert_eq!(state.iteration, 2);
        assert_eq!(state.history.len(), 6);
        let csv = history_csv(&state.history);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,agent,epsilon,eta,is_global_best"
        );
        assert_eq!(csv.lines().count(), 7);
        for (k, line) in csv.lines().skip(1).enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            assert_eq!(fields[0], (k / 3).to_string());
            assert_eq!(fields[1], (k % 3).to_string());
        }
    }

    #[test]
    fn swarm_run_is_deterministic() {
        let cloud = tiny_cloud();
        let run = || {
            let mut state = init_swarm(
                &ParamSpace::default(),
                &GngParams::seed_defaults(),
                3,
                21,
            )
            .unwrap();
            for _ in 0..2 {
                step_with(&mut state, &cloud, Parallelism::Sequential).unwrap();
            }
            state
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn global_best_improves_monotonically_under_theta() {
        let cloud = tiny_cloud();
        let mut state = init_swarm(
            &ParamSpace::default(),
            &GngParams::seed_defaults(),
            4,
            3,
        )
        .unwrap();
        for _ in 0..5 {
            step_with(&mut state, &cloud, Parallelism::Sequential).unwrap();
        }
        let mut incumbent = SENTINEL_SCORES;
        for row in &state.history {
            let scores = QualityScores {
                epsilon: row.epsilon,
                eta: row.eta,
            };
            if row.is_global_best {
                assert!(theta(&incumbent, &scores));
                incumbent = scores;
            } else {
                // Rows not flagged must not have dominated the incumbent.
                assert!(!theta(&incumbent, &scores));
            }
        }
        assert_eq!(incumbent, state.best_scores);
        // Nothing recorded dominates the final best.
        for row in &state.history {
            let scores = QualityScores {
                epsilon: row.epsilon,
                eta: row.eta,
            };
            assert!(!theta(&state.best_scores, &scores));
        }
    }

    #[test]
    fn single_agent_with_zero_velocity_returns_the_seed() {
        let cloud = tiny_cloud();
        let space = ParamSpace::default();
        let seed = GngParams::seed_defaults();
        let mut state = init_swarm(&space, &seed, 1, 77).unwrap();
        state.agents[0].velocity = [0.0; DIMS];
        for _ in 0..3 {
            step_with(&mut state, &cloud, Parallelism::Sequential).unwrap();
        }
        assert_eq!(state.agents[0].position, ParamSpace::encode(&seed));
        assert_eq!(state.space.decode(&state.best_position).unwrap(), seed);
    }

    #[test]
    fn optimize_rejects_zero_iterations() {
        let cloud = tiny_cloud();
        assert!(matches!(
            optimize(&cloud, 0, 2, 1),
            Err(Error::InvalidParams(_))
        ));
    }
}
