use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{split_dataset, Dataset, NetworkSample, SplitFractions};
use crate::error::{Error, Result};
use crate::otdr::{
    add_noise_in_place, decompose_peaks, distance_to_index, noise_sigma, FaultScenario, OtdrTrace, PeakProfile,
    PonTopology, SimConfig,
};
use crate::rng::{derive_seed, stream_rng};

/// Min-max scale to [0, 1].
pub fn normalize_minmax(values: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = crate::otdr::min_max(values)?;
    Ok(values.iter().map(|&v| (v - lo) / (hi - lo)).collect())
}

/// Clean normalized analysis region with the isolated profile of every peak.
#[derive(Debug, Clone)]
pub struct CleanRegion {
    pub trace: OtdrTrace,
    pub profiles: Vec<PeakProfile>,
}

impl CleanRegion {
    pub fn render(topo: &PonTopology, scen: &FaultScenario, cfg: &SimConfig, start: usize, len: usize) -> Result<Self> {
        let (trace, profiles) = decompose_peaks(topo, scen, cfg, start, len)?;
        Ok(CleanRegion { trace, profiles })
    }

    pub fn sample(&self) -> NetworkSample {
        NetworkSample { values: self.trace.samples.clone(), label: 0, pnr_db: f64::INFINITY }
    }

    fn profile(&self, branch_id: usize) -> Result<&PeakProfile> {
        self.profiles
            .iter()
            .find(|p| p.branch_id == branch_id)
            .ok_or_else(|| Error::Dataset(format!("branch {branch_id} has no peak in this region")))
    }
}

/// Scale one reflection's excess over its local baseline by `factor` and set
/// the label to that branch. `factor = 0` removes the reflection.
pub fn reduce_reflection_height(
    sample: &NetworkSample,
    region: &CleanRegion,
    branch_id: usize,
    factor: f64,
) -> Result<NetworkSample> {
    if !(0.0..=1.0).contains(&factor) {
        return Err(Error::Dataset(format!("height factor {factor} outside [0, 1]")));
    }
    let profile = region.profile(branch_id)?;
    if profile.excess.len() != sample.values.len() {
        return Err(Error::Shape(format!("sample of {} values, profile of {}", sample.values.len(), profile.excess.len())));
    }
    let values = sample.values.iter().zip(&profile.excess).map(|(&v, &e)| v - (1.0 - factor) * e).collect();
    Ok(NetworkSample { values, label: branch_id, pnr_db: sample.pnr_db })
}

/// Recipe for the network-dependent dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRecipe {
    pub per_class_count: usize,
    pub pnr_range_db: (f64, f64),
    /// One-way attenuation equivalent of the height reduction; the factor is
    /// `10^(−2a/10)`.
    pub attenuation_range_db: (f64, f64),
    pub break_fraction: f64,
    /// Extra loss after the feeder, drawn per record; `(0, 0)` for none.
    pub feeder_loss_range_db: (f64, f64),
    /// Samples kept before the first reflection.
    pub region_lead: usize,
    pub region_len: usize,
    pub fractions: SplitFractions,
    pub seed: u64,
    pub config_digest: [u8; 32],
}

impl Default for NetworkRecipe {
    fn default() -> Self {
        NetworkRecipe {
            per_class_count: 1000,
            pnr_range_db: (5.0, 30.0),
            attenuation_range_db: (1.0, 10.0),
            break_fraction: 0.05,
            feeder_loss_range_db: (0.0, 0.0),
            region_lead: 10,
            region_len: 280,
            fractions: SplitFractions::default(),
            seed: 0,
            config_digest: [0; 32],
        }
    }
}

impl NetworkRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.per_class_count == 0 {
            return Err(Error::config("per_class_count", "must be positive"));
        }
        check_range("pnr_min", self.pnr_range_db)?;
        check_range("attenuation_min_db", self.attenuation_range_db)?;
        check_range("feeder_extra_loss_db", self.feeder_loss_range_db)?;
        if self.attenuation_range_db.0 < 0.0 {
            return Err(Error::config("attenuation_min_db", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.break_fraction) {
            return Err(Error::config("break_fraction", format!("{} outside [0, 1]", self.break_fraction)));
        }
        if self.region_len == 0 {
            return Err(Error::config("region_len", "must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn check_range(key: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::config(key, format!("invalid range [{lo}, {hi}]")));
    }
    Ok(())
}

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Absolute index where the network analysis region starts.
pub fn network_region_start(topo: &PonTopology, cfg: &SimConfig, lead: usize) -> Result<usize> {
    let first = topo
        .branches
        .iter()
        .find(|b| b.has_reflector)
        .ok_or_else(|| Error::Topology("no reflector-terminated branch".into()))?;
    let idx = distance_to_index(topo.branch_end_m(first), cfg)?;
    idx.checked_sub(lead).ok_or_else(|| Error::config("region_lead", format!("{lead} reaches before sample 0")))
}

/// Draw one record of class `label` (0 = normal) from a clean region.
pub fn draw_network_sample<R: Rng + ?Sized>(
    region: &CleanRegion,
    label: usize,
    recipe: &NetworkRecipe,
    rng: &mut R,
) -> Result<NetworkSample> {
    let pnr = uniform(rng, recipe.pnr_range_db);
    let mut sample = region.sample();
    let mut excess: Vec<(usize, f64)> = region.trace.ground_truth.iter().map(|p| (p.branch_id, p.excess())).collect();
    if label > 0 {
        let factor = if rng.random_bool(recipe.break_fraction) {
            0.0
        } else {
            10f64.powf(-2.0 * uniform(rng, recipe.attenuation_range_db) / 10.0)
        };
        sample = reduce_reflection_height(&sample, region, label, factor)?;
        for e in excess.iter_mut().filter(|e| e.0 == label) {
            e.1 *= factor;
        }
    }
    let h_max = excess.iter().map(|e| e.1).fold(0.0, f64::max);
    add_noise_in_place(&mut sample.values, noise_sigma(h_max, pnr), rng);
    sample.pnr_db = pnr;
    Ok(sample)
}

/// Build `per_class_count` records for each of `B + 1` classes, class-major,
/// then split them.
pub fn build_network_dataset(
    topo: &PonTopology,
    cfg: &SimConfig,
    recipe: &NetworkRecipe,
) -> Result<Dataset<NetworkSample>> {
    recipe.validate()?;
    let classes = topo.branches.len() + 1;
    let start = network_region_start(topo, cfg, recipe.region_lead)?;
    let render = |loss: f64| {
        CleanRegion::render(topo, &FaultScenario::healthy().with_feeder_loss(loss), cfg, start, recipe.region_len)
    };
    let fixed = if recipe.feeder_loss_range_db.0 == recipe.feeder_loss_range_db.1 {
        Some(render(recipe.feeder_loss_range_db.0)?)
    } else {
        None
    };
    if let Some(r) = &fixed {
        for b in &topo.branches {
            r.profile(b.branch_id)?;
        }
    }
    let stream_seed = derive_seed(recipe.seed, "network-records");
    let total = classes * recipe.per_class_count;
    let records = (0..total)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(stream_seed, k as u64);
            let label = k / recipe.per_class_count;
            match &fixed {
                Some(r) => draw_network_sample(r, label, recipe, &mut rng),
                None => {
                    let loss = uniform(&mut rng, recipe.feeder_loss_range_db);
                    draw_network_sample(&render(loss)?, label, recipe, &mut rng)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset::new(records, classes, recipe.seed, recipe.config_digest);
    split_dataset(ds, recipe.fractions, derive_seed(recipe.seed, "split"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmax_examples() {
        assert_eq!(normalize_minmax(&[0.0, 5.0, 10.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_minmax(&[2.0, 4.0, 3.0]).unwrap(), vec![0.0, 1.0, 0.5]);
        let v = vec![0.0, 0.25, 1.0, 0.5];
        assert_eq!(normalize_minmax(&v).unwrap(), v);
        assert!(normalize_minmax(&[3.0, 3.0]).is_err());
    }

    fn region() -> CleanRegion {
        let topo = PonTopology::default();
        let cfg = SimConfig::default();
        let start = network_region_start(&topo, &cfg, 10).unwrap();
        CleanRegion::render(&topo, &FaultScenario::healthy(), &cfg, start, 280).unwrap()
    }

    #[test]
    fn region_starts_before_first_peak() {
        let r = region();
        assert_eq!(r.trace.ground_truth[0].peak_index, 10);
        assert_eq!(r.profiles.len(), 8);
    }

    #[test]
    fn reduction_examples() {
        let r = region();
        let s = r.sample();
        let same = reduce_reflection_height(&s, &r, 3, 1.0).unwrap();
        assert_eq!(same.values, s.values);
        assert_eq!(same.label, 3);

        let p = r.trace.peak_for_branch(3).unwrap();
        let reduced = reduce_reflection_height(&s, &r, 3, 0.251).unwrap();
        let ratio = (reduced.values[p.peak_index] - p.baseline) / (s.values[p.peak_index] - p.baseline);
        assert!((ratio - 0.251).abs() < 0.01, "ratio {ratio}");

        let gone = reduce_reflection_height(&s, &r, 5, 0.0).unwrap();
        let p5 = r.trace.peak_for_branch(5).unwrap();
        assert!((gone.values[p5.peak_index] - p5.baseline).abs() < 1e-9);

        // untouched outside the reduced peak's support
        let p1 = r.trace.peak_for_branch(1).unwrap();
        assert_eq!(gone.values[p1.peak_index], s.values[p1.peak_index]);

        assert!(reduce_reflection_height(&s, &r, 9, 0.5).is_err());
        assert!(reduce_reflection_height(&s, &r, 1, 1.5).is_err());
    }

    #[test]
    fn small_dataset() {
        let recipe = NetworkRecipe { per_class_count: 10, seed: 3, ..Default::default() };
        let ds = build_network_dataset(&PonTopology::default(), &SimConfig::default(), &recipe).unwrap();
        assert_eq!(ds.len(), 90);
        assert_eq!(ds.class_counts(), vec![10; 9]);
        assert!(ds.records.iter().all(|r| r.values.len() == 280 && (5.0..30.0).contains(&r.pnr_db)));
        let again = build_network_dataset(&PonTopology::default(), &SimConfig::default(), &recipe).unwrap();
        assert_eq!(ds, again);
        let bad = NetworkRecipe { per_class_count: 0, ..Default::default() };
        assert!(build_network_dataset(&PonTopology::default(), &SimConfig::default(), &bad).is_err());
    }
}
