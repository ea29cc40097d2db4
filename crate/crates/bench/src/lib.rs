//! Inputs shared by the criterion benches.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use rosar_core::geometry::{steering_vector, window_for_range};
use rosar_core::io::decode_wgt;
use rosar_core::signal::simulate_if;
use rosar_core::synthesis::{WeightEntry, WeightTable};
use rosar_core::{Complex64, DataMatrix, JitterModel, PointScene, RadarConfig};

/// One revolution of IF data for a point target at (90 deg, 2 m).
pub fn point_scene(cfg: &RadarConfig) -> DataMatrix {
    simulate_if(cfg, &PointScene::single(FRAC_PI_2, 2.0), &JitterModel::none()).expect("default scene simulates")
}

/// Matched weights kept on every `stride`-th tap: a stand-in with the
/// sparsity of a synthesized table, available without running the solver.
pub fn strided_table(cfg: &RadarConfig, bins: &[usize], stride: usize) -> WeightTable {
    let mut table = WeightTable::new(*cfg, Default::default());
    for &bin in bins {
        let range = cfg.bin_range(bin);
        let window = window_for_range(cfg, range).expect("imageable bin");
        let a = steering_vector(cfg, FRAC_PI_2, range, &window).expect("imageable bin");
        let w: Vec<Complex64> = a
            .entries
            .iter()
            .enumerate()
            .map(|(k, v)| if k % stride == 0 { *v } else { Complex64::new(0.0, 0.0) })
            .collect();
        table.insert(WeightEntry::from_weights(cfg, bin, w).expect("window-sized weights"));
    }
    table
}

/// The synthesized default table, when the fixture is present.
pub fn fixture_table() -> Option<WeightTable> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/table_default.wgt");
    decode_wgt(&std::fs::read(path).ok()?).ok()
}
