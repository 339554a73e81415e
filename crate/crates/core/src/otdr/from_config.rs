use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::otdr::{FaultScenario, PonTopology, SimConfig, DEFAULT_BRANCH_LENGTHS_M};

impl PonTopology {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let lengths = cfg.get_list::<f64>("branch_lengths_m")?.unwrap_or_else(|| DEFAULT_BRANCH_LENGTHS_M.to_vec());
        PonTopology::with_gap_bounds(
            cfg.get_or("feeder_length_m", 1000.0)?,
            cfg.get_or("split_ratio", 128usize)?,
            &lengths,
            cfg.get_or("min_gap_m", 2.0)?,
            cfg.get_or("max_gap_m", 6.0)?,
        )
    }
}

impl SimConfig {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = SimConfig::default();
        let sim = SimConfig {
            pulse_width_ns: cfg.get_or("pulse_width_ns", d.pulse_width_ns)?,
            sample_interval_ns: cfg.get_or("sample_interval_ns", d.sample_interval_ns)?,
            wavelength_nm: cfg.get_or("wavelength_nm", d.wavelength_nm)?,
            group_index: cfg.get_or("group_index", d.group_index)?,
            attenuation_db_per_km: cfg.get_or("attenuation_db_per_km", d.attenuation_db_per_km)?,
            splitter_loss_db: cfg.get("splitter_loss_db")?,
            reflector_return_db: cfg.get_or("reflector_return_db", d.reflector_return_db)?,
            trace_len: cfg.get_or("trace_len", d.trace_len)?,
            dynamic_range_db: cfg.get_or("dynamic_range_db", d.dynamic_range_db)?,
        };
        sim.validate()?;
        Ok(sim)
    }
}

impl FaultScenario {
    /// `fault.<branch_id> = <one-way dB>` or `= break`.
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let mut scen = FaultScenario {
            feeder_extra_loss_db: cfg.get_or("feeder_extra_loss_db", 0.0)?,
            max_simultaneous_faults: cfg.get_or("max_simultaneous_faults", 1usize)?,
            ..FaultScenario::default()
        };
        for key in cfg.keys() {
            let Some(id) = key.strip_prefix("fault.") else { continue };
            let id: usize = id.parse().map_err(|_| Error::config(key, "branch id must be an integer"))?;
            let raw = cfg.get_str(key).unwrap_or_default();
            let db = if raw.eq_ignore_ascii_case("break") {
                f64::INFINITY
            } else {
                raw.parse::<f64>().map_err(|e| Error::config(key, format!("`{raw}`: {e}")))?
            };
            scen.branch_attenuation_db.insert(id, db);
        }
        Ok(scen)
    }
}
