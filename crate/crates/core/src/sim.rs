//! Per-cycle simulation loop and repeated-run experiments.
//!
//! A cycle runs: allocate → collect → infer every attribute → update the
//! attribute weights (learning schemes only) → append a trace. Cycle 0 is a
//! bootstrap drawn uniformly at random for every scheme, since priority
//! estimation needs at least one cycle of inferred history.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{allocate_ewata, allocate_gpsta, allocate_oomta, allocate_unsta};
use crate::config::{RunConfig, Scheme};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{average_cost, cycle_error, ErrorAccumulator, ErrorNormalizer};
use crate::inference::{holdout_residuals, infer_cycle, InferenceStrategy};
use crate::model::{collect, AllocationPlan, CellId, CostModel, MeasurementStore, Participant};
use crate::mpi::{quantile_loss, unified_priority, update_weights, AttributeWeights, LossNormalizer};
use crate::nts::{assign_tasks, default_distance_floor, match_nearest, value_iteration, Mdp, NtsParams};
use crate::spe::{compute_priorities, PriorityScores, SpeParams};

/// SplitMix64 finalizer; used to derive independent per-repeat seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repeat `r` for a base seed.
pub fn repeat_seed(base: u64, r: usize) -> u64 {
    splitmix64(base.wrapping_add(r as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub cycle: usize,
    pub selected: Vec<CellId>,
    /// Mean travel cost per participant this cycle.
    pub cost: f64,
    /// Normalized sensing error summed over attributes.
    pub error: f64,
    /// Weights used for this cycle's allocation.
    pub weights: Vec<f64>,
    pub raw_losses: Vec<f64>,
    pub losses: Vec<f64>,
}

/// Mutable state carried across cycles. Cloning it snapshots the run.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub cycle: usize,
    pub store: MeasurementStore,
    pub weights: AttributeWeights,
    pub participants: Vec<Participant>,
    pub rng: ChaCha8Rng,
    pub plans: Vec<AllocationPlan>,
    pub traces: Vec<CycleTrace>,
    loss_normalizer: LossNormalizer,
    last_raw_loss: Vec<f64>,
    error_acc: ErrorAccumulator,
}

/// Immutable context of one run: dataset restricted to the used attributes
/// plus derived parameters.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: RunConfig,
    pub dataset: Dataset,
    pub strategy: InferenceStrategy,
    pub spe: SpeParams,
    pub nts: NtsParams,
    pub cost: CostModel,
    pub normalizer: ErrorNormalizer,
}

impl Simulator {
    pub fn new(config: &RunConfig, dataset: &Dataset) -> Result<Self> {
        config.validate(dataset.cells(), dataset.attributes(), dataset.cycles())?;
        let dataset = dataset.with_attributes(config.attributes_used)?;
        let hp = &config.hyperparameters;
        let geom = &dataset.geometry;
        let nts = NtsParams {
            gamma: hp.gamma,
            beta: hp.beta,
            theta_conv: hp.theta_conv,
            d_floor_km: hp.d_floor_km.unwrap_or_else(|| default_distance_floor(geom)),
            literal: hp.literal_bellman,
        };
        let spe = SpeParams {
            alpha_te: hp.alpha_te,
            alpha_smi: hp.alpha_smi,
            window: hp.entropy_window,
            sigma_floor: hp.sigma_floor,
            normalize: hp.normalize_priorities,
        };
        let store = dataset.store()?;
        let normalizer = ErrorNormalizer::from_truth(&store, 1..dataset.cycles());
        Ok(Self {
            strategy: InferenceStrategy::from_config(config.inference, hp),
            cost: CostModel::new(hp.cost_per_km)?,
            config: config.clone(),
            dataset,
            spe,
            nts,
            normalizer,
        })
    }

    pub fn cycles(&self) -> usize {
        self.dataset.cycles()
    }

    /// Fresh state for a run seeded with `seed`: participants start at
    /// uniformly random cells.
    pub fn initial_state(&self, seed: u64) -> Result<SimulationState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = self.dataset.cells();
        let participants = (0..self.config.participants)
            .map(|id| Participant { id, current_cell: rng.random_range(0..x) })
            .collect();
        let a = self.dataset.attributes();
        let hp = &self.config.hyperparameters;
        Ok(SimulationState {
            cycle: 0,
            store: self.dataset.store()?,
            weights: AttributeWeights::uniform(a, hp.eta, hp.delta)?,
            participants,
            rng,
            plans: Vec::new(),
            traces: Vec::new(),
            loss_normalizer: LossNormalizer::new(a),
            last_raw_loss: vec![0.0; a],
            error_acc: ErrorAccumulator::default(),
        })
    }

    /// Priority scores per attribute from IS history up to the previous cycle.
    pub fn priorities(&self, state: &SimulationState) -> Result<Vec<PriorityScores>> {
        let y = state.cycle;
        if y == 0 {
            return Err(Error::Domain("priorities need at least one processed cycle".into()));
        }
        (0..self.dataset.attributes())
            .map(|a| {
                let history = (0..self.dataset.cells())
                    .map(|x| {
                        state.store.is_series(a, x, y - 1).ok_or_else(|| {
                            Error::Domain(format!("IS history incomplete for attribute {a}, cell {x}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                compute_priorities(&history, a, y, &self.spe)
            })
            .collect()
    }

    /// The allocation this run's scheme would make at the state's cycle.
    pub fn plan_cycle(&self, state: &mut SimulationState) -> Result<AllocationPlan> {
        let y = state.cycle;
        let geom = &self.dataset.geometry;
        if y == 0 {
            let cells = index::sample(&mut state.rng, geom.len(), self.config.participants).into_vec();
            return match_nearest(0, &cells, &state.participants, geom);
        }
        match self.config.scheme {
            Scheme::UnsTa => allocate_unsta(&mut state.rng, y, &state.participants, geom),
            Scheme::GpsTa => allocate_gpsta(&self.priorities(state)?, &state.participants, geom),
            Scheme::EwaTa => allocate_ewata(&self.priorities(state)?, &state.participants, geom),
            Scheme::OoMta => {
                let ups = unified_priority(&self.priorities(state)?, &state.weights)?;
                allocate_oomta(&ups, &state.participants, geom)
            }
            Scheme::QcoTa => {
                let ups = unified_priority(&self.priorities(state)?, &state.weights)?;
                let mdp = Mdp::new(&ups.ups, geom, &self.nts)?;
                let qrs = value_iteration(&mdp, y)?;
                assign_tasks(&qrs, Some(&ups.ups), &state.participants, geom)
            }
        }
    }

    /// Executes `plan` at the state's cycle: collect, infer, learn, trace.
    pub fn apply_plan(&self, state: &mut SimulationState, plan: AllocationPlan) -> Result<()> {
        let y = state.cycle;
        if y >= self.cycles() {
            return Err(Error::Domain(format!("cycle {y} beyond horizon {}", self.cycles())));
        }
        if plan.cycle != y {
            return Err(Error::Domain(format!("plan for cycle {} applied at cycle {y}", plan.cycle)));
        }
        plan.validate(self.config.participants, self.dataset.cells())?;
        let geom = &self.dataset.geometry;
        collect(&mut state.store, &mut state.participants, &plan)?;
        let attributes = self.dataset.attributes();
        for a in 0..attributes {
            let row = infer_cycle(&self.strategy, &state.store, geom, y, a)?;
            state.store.set_is_row(a, y, &row)?;
        }

        let weights_used = state.weights.w.clone();
        let mut raw_losses = vec![0.0; attributes];
        let mut losses = vec![0.0; attributes];
        if self.config.scheme.learns_weights() {
            for a in 0..attributes {
                let collected = state.store.collected(a, y);
                let residuals = holdout_residuals(&self.strategy, &collected, geom)?;
                let raw = quantile_loss(&residuals, state.weights.delta).unwrap_or(state.last_raw_loss[a]);
                state.last_raw_loss[a] = raw;
                raw_losses[a] = raw;
                losses[a] = state.loss_normalizer.observe(a, raw);
            }
            state.weights = update_weights(&state.weights, &losses)?;
        }

        let cost = plan.total_cost(&self.cost, geom) / self.config.participants as f64;
        let error = cycle_error(&state.store, &self.normalizer, y)?;
        if y >= 1 {
            state.error_acc.push_cycle(&state.store, y)?;
        }
        state.traces.push(CycleTrace {
            cycle: y,
            selected: plan.selected_cells.clone(),
            cost,
            error,
            weights: weights_used,
            raw_losses,
            losses,
        });
        state.plans.push(plan);
        state.cycle += 1;
        Ok(())
    }

    pub fn run_cycle(&self, state: &mut SimulationState) -> Result<()> {
        let plan = self.plan_cycle(state)?;
        self.apply_plan(state, plan)
    }

    /// Runs every cycle of the dataset for one seed.
    pub fn run(&self, seed: u64) -> Result<RunResult> {
        let mut state = self.initial_state(seed)?;
        while state.cycle < self.cycles() {
            self.run_cycle(&mut state)?;
        }
        self.summarize(seed, &state)
    }

    /// Metrics over the evaluated horizon (every cycle after the bootstrap).
    pub fn summarize(&self, seed: u64, state: &SimulationState) -> Result<RunResult> {
        if state.cycle < 2 {
            return Err(Error::Domain("run has no evaluated cycles yet".into()));
        }
        let epsilon = state.error_acc.value(&self.normalizer);
        let phi = average_cost(&state.plans[1..], &self.cost, &self.dataset.geometry, self.config.participants)?;
        Ok(RunResult { seed, epsilon, phi, traces: state.traces.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    /// Aggregated normalized sensing error.
    pub epsilon: f64,
    /// Average per-participant travel cost.
    pub phi: f64,
    pub traces: Vec<CycleTrace>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: RunConfig,
    pub epsilon_mean: f64,
    pub epsilon_sd: f64,
    pub phi_mean: f64,
    pub phi_sd: f64,
    pub runs: Vec<RunResult>,
    /// Ground-truth range used to normalize each attribute's error.
    pub error_ranges: Vec<f64>,
}

/// Runs `repeats` independent seeds (derived from `cfg.seed`) in parallel.
pub fn run_experiment(cfg: &RunConfig, dataset: &Dataset, repeats: usize) -> Result<ExperimentResult> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let sim = Simulator::new(cfg, dataset)?;
    let runs = (0..repeats)
        .into_par_iter()
        .map(|r| sim.run(repeat_seed(cfg.seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = runs.iter().map(|r| r.epsilon).collect();
    let phi: Vec<f64> = runs.iter().map(|r| r.phi).collect();
    let (epsilon_mean, epsilon_sd) = mean_sd(&eps);
    let (phi_mean, phi_sd) = mean_sd(&phi);
    Ok(ExperimentResult {
        config: cfg.clone(),
        epsilon_mean,
        epsilon_sd,
        phi_mean,
        phi_sd,
        runs,
        error_ranges: sim.normalizer.ranges.clone(),
    })
}
