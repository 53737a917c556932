//! Exact DTW versus FastDTW on two quaternion series: one reach played at
//! two different speeds. The warp path absorbs the timing difference.

use reachkin::alignment::{dtw, fastdtw, QuaternionSeries};
use reachkin::kinematics::min_jerk;
use reachkin::quat::Quaternion;

fn reach_series(label: &str, duration: f64, samples: usize) -> QuaternionSeries {
    let quats = (0..samples).map(|k| {
        let tau = k as f64 / (samples - 1) as f64;
        Quaternion::from_axis_angle([0.0, 0.0, 1.0], 0.9 * min_jerk(tau))
    });
    QuaternionSeries::from_quats(label, 0.0, duration / (samples - 1) as f64, quats)
}

fn main() {
    let fast_reach = reach_series("fast", 1.0, 40);
    let slow_reach = reach_series("slow", 2.0, 80);

    let exact = dtw(&fast_reach, &slow_reach).expect("non-empty series");
    println!("exact DTW     cost {:.6}  path length {}", exact.cost, exact.k());

    for radius in [0, 1, 4] {
        let approx = fastdtw(&fast_reach, &slow_reach, radius).expect("non-empty series");
        println!(
            "fastdtw r={radius}  cost {:.6}  path length {}  overshoot {:+.2e}",
            approx.cost,
            approx.k(),
            approx.cost - exact.cost
        );
    }

    println!("\nfirst warp-path pairs (fast index -> slow index):");
    for &(i, j) in exact.pairs.iter().take(10) {
        println!("  {i:2} -> {j:2}");
    }
}
