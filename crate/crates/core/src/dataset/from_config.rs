use crate::config::KvConfig;
use crate::dataset::{FaultinessRule, GenericRecipe, NetworkRecipe, SplitFractions};
use crate::error::Result;

fn range(cfg: &KvConfig, lo: &str, hi: &str, d: (f64, f64)) -> Result<(f64, f64)> {
    Ok((cfg.get_or(lo, d.0)?, cfg.get_or(hi, d.1)?))
}

impl SplitFractions {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = SplitFractions::default();
        let f = SplitFractions {
            train: cfg.get_or("split_train", d.train)?,
            val: cfg.get_or("split_val", d.val)?,
            test: cfg.get_or("split_test", d.test)?,
        };
        f.validate()?;
        Ok(f)
    }
}

impl NetworkRecipe {
    pub fn from_config(cfg: &KvConfig, seed: u64) -> Result<Self> {
        let d = NetworkRecipe::default();
        let r = NetworkRecipe {
            per_class_count: cfg.get_or("per_class_count", d.per_class_count)?,
            pnr_range_db: range(cfg, "pnr_min", "pnr_max", d.pnr_range_db)?,
            attenuation_range_db: range(cfg, "attenuation_min_db", "attenuation_max_db", d.attenuation_range_db)?,
            break_fraction: cfg.get_or("break_fraction", d.break_fraction)?,
            feeder_loss_range_db: range(cfg, "feeder_loss_min_db", "feeder_loss_max_db", d.feeder_loss_range_db)?,
            region_lead: cfg.get_or("region_lead", d.region_lead)?,
            region_len: cfg.get_or("region_len", d.region_len)?,
            fractions: SplitFractions::from_config(cfg)?,
            seed,
            config_digest: cfg.digest(),
        };
        r.validate()?;
        Ok(r)
    }
}

impl GenericRecipe {
    pub fn from_config(cfg: &KvConfig, seed: u64) -> Result<Self> {
        let d = GenericRecipe::default();
        Ok(GenericRecipe {
            target_count: cfg.get_or("target_count", d.target_count)?,
            scenario_count: cfg.get_or("scenario_count", d.scenario_count)?,
            pnr_range_db: range(cfg, "pnr_min", "pnr_max", d.pnr_range_db)?,
            window_len: cfg.get_or("window_len", d.window_len)?,
            region_len: cfg.get_or("region_len", d.region_len)?,
            fault_branches: cfg.get_list("generic_branches")?.unwrap_or(d.fault_branches),
            random_branches: (
                cfg.get_or("random_branches_min", d.random_branches.0)?,
                cfg.get_or("random_branches_max", d.random_branches.1)?,
            ),
            fault_probability: cfg.get_or("generic_fault_probability", d.fault_probability)?,
            attenuation_range_db: range(
                cfg,
                "generic_attenuation_min_db",
                "generic_attenuation_max_db",
                d.attenuation_range_db,
            )?,
            break_probability: cfg.get_or("generic_break_probability", d.break_probability)?,
            balance_ratio: cfg.get_or("balance_ratio", d.balance_ratio)?,
            rule: FaultinessRule::new(cfg.get_or("faulty_level_threshold", d.rule.faulty_level_threshold)?)?,
            fractions: SplitFractions::from_config(cfg)?,
            seed,
            config_digest: cfg.digest(),
        })
    }
}
