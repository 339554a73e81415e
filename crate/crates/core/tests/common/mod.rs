#![allow(dead_code)]

use ponwatch::dataset::{
    label_window, render_scenario, Dataset, FaultinessRule, Record, ScenarioRender, SplitFractions, SplitTag,
    WindowSample, WindowShell,
};
use ponwatch::otdr::{splitter_index, FaultScenario, PonTopology, SimConfig};
use ponwatch::rng::stream_rng;
use rand::Rng;

/// Label recomputed sample by sample from the clean trace: event class
/// index, positions, levels and mask, or `None` for a rejected window.
pub fn brute_force_label(
    render: &ScenarioRender,
    start: usize,
    len: usize,
) -> Option<(usize, [f64; 2], [f64; 2], [bool; 2])> {
    let mut found = Vec::new();
    for i in 0..len {
        for p in &render.peaks {
            if p.index == start + i {
                let value = render.trace.samples[p.index - render.trace.start_index];
                found.push((i, value, value < 0.8 * p.reference_level));
            }
        }
    }
    let class = match found.iter().map(|f| f.2).collect::<Vec<_>>().as_slice() {
        [false, false] => 0,
        [true, false] => 1,
        [false, true] => 2,
        [true, true] => 3,
        [false] => 4,
        [true] => 5,
        [] => 6,
        _ => return None,
    };
    let (mut pos, mut lvl, mut mask) = ([0.0; 2], [0.0; 2], [false; 2]);
    for (k, &(i, v, _)) in found.iter().enumerate() {
        pos[k] = i as f64 / len as f64;
        lvl[k] = v;
        mask[k] = true;
    }
    Some((class, pos, lvl, mask))
}

/// A random scenario on a random topology, rendered from the splitter.
pub fn random_render(seed: u64, region_len: usize) -> ScenarioRender {
    let sim = SimConfig::default();
    let mut rng = stream_rng(seed, 11);
    let n = rng.random_range(1..=8);
    let topo = PonTopology::random(&mut rng, n, 1000.0, 128, (2.0, 5.0), (2.0, 6.0)).unwrap();
    let mut scen = FaultScenario::healthy().with_max_faults(n);
    for b in &topo.branches {
        if rng.random_bool(0.4) {
            let a = if rng.random_bool(0.1) { f64::INFINITY } else { rng.random_range(0.2..10.0) };
            scen.branch_attenuation_db.insert(b.branch_id, a);
        }
    }
    let start = splitter_index(&topo, &sim).unwrap();
    render_scenario(&topo, &scen, &sim, start, region_len).unwrap()
}

/// Compare the library labeler with the brute-force one on one window.
pub fn labels_agree(render: &ScenarioRender, start: usize, len: usize) -> bool {
    let o = start - render.trace.start_index;
    let shell = WindowShell { start, values: render.trace.samples[o..o + len].to_vec() };
    let lib: Option<WindowSample> = label_window(&shell, &render.peaks, &FaultinessRule::default(), 20.0).ok();
    match (lib, brute_force_label(render, start, len)) {
        (None, None) => true,
        (Some(w), Some((class, pos, lvl, mask))) => {
            w.event_class.index() == class
                && w.positions == pos
                && w.levels == lvl
                && w.mask == mask
                && w.values == shell.values
        }
        _ => false,
    }
}

/// Every class's split sizes are within one record of the requested fractions.
pub fn stratified_within_one<R: Record>(ds: &Dataset<R>, f: &SplitFractions) -> bool {
    let totals = ds.class_counts();
    [(SplitTag::Train, f.train), (SplitTag::Val, f.val), (SplitTag::Test, f.test)].iter().all(|&(tag, frac)| {
        let mut counts = vec![0usize; ds.num_classes];
        for r in ds.split(tag) {
            counts[r.class()] += 1;
        }
        counts.iter().zip(&totals).all(|(&c, &n)| (c as f64 - frac * n as f64).abs() <= 1.0)
    })
}
