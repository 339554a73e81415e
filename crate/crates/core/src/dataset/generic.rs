use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::network::{check_range, uniform};
use crate::dataset::{
    label_window, split_dataset, window_trace, Dataset, EventClass, FaultinessRule, SplitFractions, WindowPeak,
    WindowSample,
};
use crate::error::{Error, Result};
use crate::otdr::{
    add_noise_in_place, noise_sigma, render_region, splitter_index, FaultScenario, OtdrTrace, PonTopology, SimConfig,
};
use crate::rng::{derive_seed, stream_rng};

/// Recipe for the generic window dataset.
///
/// Half of the scenarios use the configured topology with faults restricted
/// to `fault_branches`; the other half use random topologies. Every scenario
/// starts its windows at a random phase after the splitter so reflections
/// land anywhere inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericRecipe {
    /// Total records after balancing (per class: `target_count / 7`).
    pub target_count: usize,
    /// Scenarios simulated before balancing; 0 means `target_count`.
    pub scenario_count: usize,
    pub pnr_range_db: (f64, f64),
    pub window_len: usize,
    pub region_len: usize,
    /// Branch ids of the configured topology that may carry a fault.
    pub fault_branches: Vec<usize>,
    /// Branch count range of random topologies.
    pub random_branches: (usize, usize),
    pub fault_probability: f64,
    pub attenuation_range_db: (f64, f64),
    /// Probability that a fault is a break rather than an attenuator.
    pub break_probability: f64,
    /// Scarce classes are oversampled to `balance_ratio × quota`.
    pub balance_ratio: f64,
    pub rule: FaultinessRule,
    pub fractions: SplitFractions,
    pub seed: u64,
    pub config_digest: [u8; 32],
}

impl Default for GenericRecipe {
    fn default() -> Self {
        GenericRecipe {
            target_count: 14_000,
            scenario_count: 0,
            pnr_range_db: (10.0, 30.0),
            window_len: 30,
            region_len: 280,
            fault_branches: vec![1, 3, 4, 5],
            random_branches: (4, 8),
            fault_probability: 0.4,
            attenuation_range_db: (3.0, 8.0),
            break_probability: 0.05,
            balance_ratio: 1.0,
            rule: FaultinessRule::default(),
            fractions: SplitFractions::default(),
            seed: 0,
            config_digest: [0; 32],
        }
    }
}

impl GenericRecipe {
    pub fn validate(&self, topo: &PonTopology) -> Result<()> {
        if self.target_count < EventClass::ALL.len() {
            return Err(Error::config("target_count", "must cover every class at least once"));
        }
        check_range("pnr_min", self.pnr_range_db)?;
        check_range("generic_attenuation_min_db", self.attenuation_range_db)?;
        if self.window_len == 0 || self.region_len < self.window_len {
            return Err(Error::config("window_len", "must be positive and fit inside region_len"));
        }
        for p in [self.fault_probability, self.break_probability] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config("generic_fault_probability", format!("probability {p} outside [0, 1]")));
            }
        }
        if !(self.balance_ratio > 0.0 && self.balance_ratio <= 1.0) {
            return Err(Error::config("balance_ratio", format!("{} outside (0, 1]", self.balance_ratio)));
        }
        let (lo, hi) = self.random_branches;
        if lo == 0 || lo > hi {
            return Err(Error::config("generic_branches", format!("invalid range {lo}..{hi}")));
        }
        for &b in &self.fault_branches {
            if topo.branch(b).is_none() {
                return Err(Error::config("fault_branches", format!("branch {b} is not in the topology")));
            }
        }
        Ok(())
    }
}

/// A clean labeled window plus the noise level of its scenario, so that
/// fresh noise can be drawn for oversampled copies.
#[derive(Debug, Clone)]
struct PooledWindow {
    clean: WindowSample,
    sigma: f64,
}

/// Clean measured and reference renders of one scenario, with reflection
/// ground truth in absolute indices.
#[derive(Debug, Clone)]
pub struct ScenarioRender {
    pub trace: OtdrTrace,
    pub peaks: Vec<WindowPeak>,
}

/// Render the region `[start, start + len)` of `scen` and attach each
/// reflection's level in the healthy reference render.
pub fn render_scenario(
    topo: &PonTopology,
    scen: &FaultScenario,
    cfg: &SimConfig,
    start: usize,
    len: usize,
) -> Result<ScenarioRender> {
    let trace = render_region(topo, scen, cfg, start, len)?;
    let reference = if scen.fault_count() == 0 {
        trace.clone()
    } else {
        let healthy = FaultScenario { branch_attenuation_db: Default::default(), ..scen.clone() };
        render_region(topo, &healthy, cfg, start, len)?
    };
    let peaks = trace
        .ground_truth
        .iter()
        .map(|p| {
            let r = reference.peak_for_branch(p.branch_id).expect("reference holds every live reflector");
            WindowPeak {
                branch_id: p.branch_id,
                index: start + p.peak_index,
                level: p.peak_height,
                reference_level: r.peak_height,
            }
        })
        .collect();
    Ok(ScenarioRender { trace, peaks })
}

fn draw_scenario<R: Rng + ?Sized>(
    base: &PonTopology,
    recipe: &GenericRecipe,
    use_base: bool,
    rng: &mut R,
) -> Result<(PonTopology, FaultScenario)> {
    let (topo, eligible) = if use_base {
        (base.clone(), recipe.fault_branches.clone())
    } else {
        let n = rng.random_range(recipe.random_branches.0..=recipe.random_branches.1);
        let t = PonTopology::random(
            rng,
            n,
            base.feeder_length_m,
            base.split_ratio,
            (base.min_gap_m.max(1.0), 5.0),
            (base.min_gap_m, base.max_gap_m),
        )?;
        let ids = (1..=n).collect();
        (t, ids)
    };
    let mut scen = FaultScenario::healthy().with_max_faults(topo.branches.len());
    for b in eligible {
        if rng.random_bool(recipe.fault_probability) {
            let a = if rng.random_bool(recipe.break_probability) {
                f64::INFINITY
            } else {
                uniform(rng, recipe.attenuation_range_db)
            };
            scen.branch_attenuation_db.insert(b, a);
        }
    }
    Ok((topo, scen))
}

fn scenario_windows(
    base: &PonTopology,
    cfg: &SimConfig,
    recipe: &GenericRecipe,
    s: u64,
    stream_seed: u64,
) -> Result<(Vec<PooledWindow>, u64)> {
    let mut rng = stream_rng(stream_seed, s);
    let (topo, scen) = draw_scenario(base, recipe, s % 2 == 0, &mut rng)?;
    let start = splitter_index(&topo, cfg)?;
    let render = render_scenario(&topo, &scen, cfg, start, recipe.region_len)?;
    let pnr = uniform(&mut rng, recipe.pnr_range_db);
    let h_max = render.trace.tallest_peak_excess().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let sigma = noise_sigma(h_max, pnr);
    let phase = rng.random_range(0..recipe.window_len);
    let shells = window_trace(&render.trace, recipe.window_len, recipe.window_len, start + phase)?;
    let mut out = Vec::with_capacity(shells.len());
    let mut rejected = 0;
    for shell in shells {
        match label_window(&shell, &render.peaks, &recipe.rule, pnr) {
            Ok(clean) => out.push(PooledWindow { clean, sigma }),
            Err(Error::Dataset(_)) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, rejected))
}

fn noisy<R: Rng + ?Sized>(w: &PooledWindow, rng: &mut R) -> WindowSample {
    let mut s = w.clean.clone();
    add_noise_in_place(&mut s.values, w.sigma, rng);
    s
}

/// Simulate scenarios, cut and label windows, balance classes and split.
pub fn build_generic_dataset(
    topo: &PonTopology,
    cfg: &SimConfig,
    recipe: &GenericRecipe,
) -> Result<Dataset<WindowSample>> {
    recipe.validate(topo)?;
    let scenarios = if recipe.scenario_count == 0 { recipe.target_count } else { recipe.scenario_count };
    let stream_seed = derive_seed(recipe.seed, "generic-scenarios");
    let per_scenario = (0..scenarios as u64)
        .into_par_iter()
        .map(|s| scenario_windows(topo, cfg, recipe, s, stream_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut pools: Vec<Vec<PooledWindow>> = vec![Vec::new(); EventClass::ALL.len()];
    let mut rejected = 0;
    for (windows, rej) in per_scenario {
        rejected += rej;
        for w in windows {
            pools[w.clean.event_class.index()].push(w);
        }
    }
    let missing: Vec<String> =
        EventClass::ALL.iter().filter(|c| pools[c.index()].is_empty()).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::Dataset(format!("no examples generated for {}", missing.join(", "))));
    }
    let quota = recipe.target_count / EventClass::ALL.len();
    let floor = ((recipe.balance_ratio * quota as f64).ceil() as usize).min(quota);
    let noise_seed = derive_seed(recipe.seed, "generic-noise");
    let records = pools
        .into_par_iter()
        .enumerate()
        .map(|(c, mut pool)| {
            let mut rng = stream_rng(noise_seed, c as u64);
            pool.shuffle(&mut rng);
            let mut out: Vec<WindowSample> = pool.iter().take(quota).map(|w| noisy(w, &mut rng)).collect();
            let natural = out.len();
            for k in natural..floor {
                out.push(noisy(&pool[k % natural], &mut rng));
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut ds = Dataset::new(records, EventClass::ALL.len(), recipe.seed, recipe.config_digest);
    ds.rejected = rejected;
    split_dataset(ds, recipe.fractions, derive_seed(recipe.seed, "split"))
}
