//! Per-node input features.

use nds_core::{Instance, Variant};

use crate::tape::Mat;

/// Feature row width for a variant: coordinates and relative demand, plus
/// time window data (VRPTW) or relative prize (PCVRP).
pub fn feature_width(variant: Variant) -> usize {
    match variant {
        Variant::Cvrp => 3,
        Variant::Vrptw => 6,
        Variant::Pcvrp => 4,
    }
}

/// `(N+1) x width` feature matrix. Row 0 is the depot: its coordinates
/// followed by zeros. Customer rows hold `x, y, q/Q`, then `a/H, b/H, s/H`
/// for VRPTW (H the depot horizon) or `prize / max prize` for PCVRP.
pub fn build_features(inst: &Instance) -> Mat {
    let width = feature_width(inst.variant());
    let n = inst.n_customers();
    let mut m = Mat::zeros(n + 1, width);
    let coords = inst.coords();
    m.data[0] = coords[0][0];
    m.data[1] = coords[0][1];
    let horizon = inst.horizon();
    let max_prize = (1..=n).map(|i| inst.prize(i)).fold(0.0, f64::max);
    for i in 1..=n {
        let row = &mut m.data[i * width..(i + 1) * width];
        row[0] = coords[i][0];
        row[1] = coords[i][1];
        row[2] = inst.demand(i) / inst.capacity();
        match inst.variant() {
            Variant::Cvrp => {}
            Variant::Vrptw => {
                row[3] = inst.tw_open(i) / horizon;
                row[4] = inst.tw_close(i) / horizon;
                row[5] = inst.service(i) / horizon;
            }
            Variant::Pcvrp => row[3] = inst.prize(i) / max_prize,
        }
    }
    m
}
