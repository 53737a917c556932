//! Madgwick fusion on raw IMU frames: start the filter 25 degrees off,
//! feed it static gravity readings, and watch the tilt error converge.

use reachkin::fusion::{madgwick_step, FilterState, ImuFrame};
use reachkin::quat::Quaternion;

fn main() {
    let truth = Quaternion::from_axis_angle([0.3, 0.9, 0.0], 0.6);
    let gravity = truth.conjugate().rotate([0.0, 0.0, 1.0]);

    let initial = truth.multiply(&Quaternion::from_axis_angle([1.0, 0.0, 0.0], 25.0_f64.to_radians()));
    let mut state = FilterState::new(initial, 0.1);

    println!("time_s  tilt_error_deg");
    for k in 0..=300 {
        let frame = ImuFrame {
            timestamp: k as f64 * 0.01,
            gyro: [0.0; 3],
            accel: gravity,
            mag: None,
        };
        state = madgwick_step(&state, &frame).expect("monotone timestamps");
        if k % 25 == 0 {
            let est_gravity = state.orientation.conjugate().rotate([0.0, 0.0, 1.0]);
            let dot = est_gravity
                .iter()
                .zip(&gravity)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .clamp(-1.0, 1.0);
            println!("{:5.2}   {:8.3}", k as f64 * 0.01, dot.acos().to_degrees());
        }
    }
    println!(
        "final orientation: ({:+.4}, {:+.4}, {:+.4}, {:+.4})",
        state.orientation.w, state.orientation.x, state.orientation.y, state.orientation.z
    );
}
