//! Labeled datasets: the network-dependent sequences and the generic
//! fixed-length windows, with splits and file formats.

mod from_config;
mod generic;
pub mod io;
mod network;
mod records;
mod split;
mod window;

pub use generic::{build_generic_dataset, render_scenario, GenericRecipe, ScenarioRender};
pub use network::{
    build_network_dataset, draw_network_sample, network_region_start, normalize_minmax, reduce_reflection_height,
    CleanRegion, NetworkRecipe,
};
pub use records::{Dataset, EventClass, NetworkSample, Record, SplitTag, WindowSample};
pub use split::{split_dataset, SplitFractions};
pub use window::{label_window, window_trace, FaultinessRule, WindowPeak, WindowShell};
