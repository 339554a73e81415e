use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

/// One drop fiber behind the splitter, identified by its 1-based id.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub branch_id: usize,
    /// Fiber length beyond the splitter in meters.
    pub length_m: f64,
    pub has_reflector: bool,
}

/// Feeder, splitter and the monitored branches of a PON.
///
/// Branches not listed here still exist (the splitter has `split_ratio`
/// ports) and contribute Rayleigh backscatter, but carry no reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct PonTopology {
    pub feeder_length_m: f64,
    pub split_ratio: usize,
    pub branches: Vec<BranchSpec>,
    pub min_gap_m: f64,
    pub max_gap_m: f64,
}

pub const DEFAULT_BRANCH_LENGTHS_M: [f64; 8] = [3.0, 5.0, 10.0, 12.0, 18.0, 21.0, 26.0, 30.0];

impl Default for PonTopology {
    fn default() -> Self {
        PonTopology::new(1000.0, 128, &DEFAULT_BRANCH_LENGTHS_M).expect("default topology is valid")
    }
}

impl PonTopology {
    /// Reflector-terminated branches with ids `1..=lengths.len()`, gap bounds 2–6 m.
    pub fn new(feeder_length_m: f64, split_ratio: usize, lengths_m: &[f64]) -> Result<Self> {
        Self::with_gap_bounds(feeder_length_m, split_ratio, lengths_m, 2.0, 6.0)
    }

    pub fn with_gap_bounds(
        feeder_length_m: f64,
        split_ratio: usize,
        lengths_m: &[f64],
        min_gap_m: f64,
        max_gap_m: f64,
    ) -> Result<Self> {
        let branches = lengths_m
            .iter()
            .enumerate()
            .map(|(i, &length_m)| BranchSpec { branch_id: i + 1, length_m, has_reflector: true })
            .collect();
        let topo = PonTopology { feeder_length_m, split_ratio, branches, min_gap_m, max_gap_m };
        topo.validate()?;
        Ok(topo)
    }

    /// Random reflector topology: first branch length uniform in `first_m`,
    /// consecutive gaps uniform in the gap bounds.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_branches: usize,
        feeder_length_m: f64,
        split_ratio: usize,
        first_m: (f64, f64),
        gap_m: (f64, f64),
    ) -> Result<Self> {
        let mut lengths = Vec::with_capacity(n_branches);
        let mut len = rng.random_range(first_m.0..=first_m.1);
        for _ in 0..n_branches {
            lengths.push(len);
            len += rng.random_range(gap_m.0..=gap_m.1);
        }
        Self::with_gap_bounds(feeder_length_m, split_ratio, &lengths, gap_m.0, gap_m.1)
    }

    /// Zero-branch topology sharing this one's feeder and splitter.
    pub fn bare(&self) -> Self {
        PonTopology { branches: Vec::new(), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feeder_length_m > 0.0) || !self.feeder_length_m.is_finite() {
            return Err(Error::Topology(format!("feeder length {} must be positive", self.feeder_length_m)));
        }
        if self.split_ratio == 0 || !self.split_ratio.is_power_of_two() {
            return Err(Error::Topology(format!("split ratio {} is not a power of two", self.split_ratio)));
        }
        if self.branches.len() > self.split_ratio {
            return Err(Error::Topology(format!(
                "{} branches exceed split ratio {}",
                self.branches.len(),
                self.split_ratio
            )));
        }
        if !(self.min_gap_m > 0.0) || self.max_gap_m < self.min_gap_m {
            return Err(Error::Topology(format!("gap bounds [{}, {}] invalid", self.min_gap_m, self.max_gap_m)));
        }
        for (i, b) in self.branches.iter().enumerate() {
            if b.branch_id != i + 1 {
                return Err(Error::Topology(format!("branch ids must run 1..=N, found {} at position {}", b.branch_id, i)));
            }
            if !(b.length_m > 0.0) || !b.length_m.is_finite() {
                return Err(Error::Topology(format!("branch {} length {} must be positive", b.branch_id, b.length_m)));
            }
        }
        // Tolerance absorbs rounding in configured decimal lengths.
        const SLACK: f64 = 1e-9;
        for w in self.branches.windows(2) {
            let gap = w[1].length_m - w[0].length_m;
            if gap <= 0.0 {
                return Err(Error::Topology(format!(
                    "branch lengths must be strictly increasing ({} then {})",
                    w[0].length_m, w[1].length_m
                )));
            }
            if gap < self.min_gap_m - SLACK || gap > self.max_gap_m + SLACK {
                return Err(Error::Topology(format!(
                    "gap {:.3} m between branches {} and {} outside [{}, {}]",
                    gap, w[0].branch_id, w[1].branch_id, self.min_gap_m, self.max_gap_m
                )));
            }
        }
        Ok(())
    }

    pub fn branch(&self, branch_id: usize) -> Option<&BranchSpec> {
        self.branches.iter().find(|b| b.branch_id == branch_id)
    }

    pub fn reflector_count(&self) -> usize {
        self.branches.iter().filter(|b| b.has_reflector).count()
    }

    /// Distance from the OTDR to the end of a branch.
    pub fn branch_end_m(&self, b: &BranchSpec) -> f64 {
        self.feeder_length_m + b.length_m
    }
}

/// Per-branch attenuation state plus optional extra loss right after the feeder.
///
/// Attenuations are one-way dB; `f64::INFINITY` marks a fiber break.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultScenario {
    pub branch_attenuation_db: BTreeMap<usize, f64>,
    pub feeder_extra_loss_db: f64,
    pub max_simultaneous_faults: usize,
}

impl Default for FaultScenario {
    fn default() -> Self {
        FaultScenario { branch_attenuation_db: BTreeMap::new(), feeder_extra_loss_db: 0.0, max_simultaneous_faults: 1 }
    }
}

impl FaultScenario {
    pub fn healthy() -> Self {
        Self::default()
    }

    pub fn single(branch_id: usize, attenuation_db: f64) -> Self {
        let mut s = Self::default();
        s.branch_attenuation_db.insert(branch_id, attenuation_db);
        s
    }

    pub fn single_break(branch_id: usize) -> Self {
        Self::single(branch_id, f64::INFINITY)
    }

    pub fn with_max_faults(mut self, n: usize) -> Self {
        self.max_simultaneous_faults = n;
        self
    }

    pub fn with_feeder_loss(mut self, db: f64) -> Self {
        self.feeder_extra_loss_db = db;
        self
    }

    pub fn attenuation(&self, branch_id: usize) -> f64 {
        self.branch_attenuation_db.get(&branch_id).copied().unwrap_or(0.0)
    }

    pub fn is_break(&self, branch_id: usize) -> bool {
        self.attenuation(branch_id).is_infinite()
    }

    pub fn fault_count(&self) -> usize {
        self.branch_attenuation_db.values().filter(|&&a| a != 0.0).count()
    }

    pub fn validate(&self, topo: &PonTopology) -> Result<()> {
        for (&id, &a) in &self.branch_attenuation_db {
            if topo.branch(id).is_none() {
                return Err(Error::Scenario(format!("branch {id} not in topology")));
            }
            if a.is_nan() || a < 0.0 {
                return Err(Error::Scenario(format!("branch {id} attenuation {a} must be >= 0")));
            }
        }
        if !(self.feeder_extra_loss_db >= 0.0) || !self.feeder_extra_loss_db.is_finite() {
            return Err(Error::Scenario(format!("feeder extra loss {} must be finite and >= 0", self.feeder_extra_loss_db)));
        }
        let n = self.fault_count();
        if n > self.max_simultaneous_faults {
            return Err(Error::Scenario(format!(
                "{n} faulty branches exceed the limit of {}",
                self.max_simultaneous_faults
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn default_topology_valid() {
        let t = PonTopology::default();
        assert_eq!(t.branches.len(), 8);
        assert_eq!(t.split_ratio, 128);
        assert_eq!(t.reflector_count(), 8);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(PonTopology::new(0.0, 128, &[3.0]).is_err());
        assert!(PonTopology::new(1000.0, 100, &[3.0]).is_err());
        assert!(PonTopology::new(1000.0, 128, &[5.0, 3.0]).is_err());
        // 1 m gap below the 2 m minimum
        assert!(PonTopology::new(1000.0, 128, &[3.0, 4.0]).is_err());
        // 10 m gap above the 6 m maximum
        assert!(PonTopology::new(1000.0, 128, &[3.0, 13.0]).is_err());
        assert!(PonTopology::new(1000.0, 2, &[3.0, 5.0, 7.0]).is_err());
        assert!(PonTopology::new(1000.0, 128, &[]).is_ok());
    }

    #[test]
    fn random_topologies_respect_gap_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t = PonTopology::random(&mut rng, 8, 1000.0, 128, (2.0, 6.0), (2.0, 6.0)).unwrap();
            t.validate().unwrap();
        }
    }

    #[test]
    fn scenario_fault_limit() {
        let topo = PonTopology::default();
        let mut s = FaultScenario::single(3, 5.0);
        s.validate(&topo).unwrap();
        s.branch_attenuation_db.insert(4, 3.0);
        assert!(s.validate(&topo).is_err());
        s.max_simultaneous_faults = 2;
        s.validate(&topo).unwrap();
        assert!(FaultScenario::single(9, 3.0).validate(&topo).is_err());
        assert!(FaultScenario::single(1, -1.0).validate(&topo).is_err());
        assert!(FaultScenario::single_break(2).is_break(2));
    }
}
