//! OTDR trace synthesis for multi-branch PONs.

mod from_config;
mod noise;
mod sim;
mod topology;
mod trace;

pub use noise::{add_awgn, add_awgn_with, add_noise_in_place, noise_sigma};
pub use sim::{
    decompose_peaks, distance_to_index, index_to_distance, launch_level_db, normalize_with, render_region,
    render_region_db, splitter_index, synthesize_clean_trace, synthesize_span, to_decibel, PeakProfile, SimConfig,
    PEAK_SUPPORT_FWHM, SPEED_OF_LIGHT_M_S,
};
pub use topology::{BranchSpec, FaultScenario, PonTopology, DEFAULT_BRANCH_LENGTHS_M};
pub use trace::{DisplayMap, OtdrTrace, PeakTruth, TraceScale};
pub(crate) use trace::min_max;
