//! Fingertip impulse logs to contact events: differentiate force, run the
//! debounced detector, and emit the vibrotactile feedback commands.

use reachkin::contact::{
    detect_contacts, force_from_impulse, ImpulseMode, ImpulseSeries, DEFAULT_DEBOUNCE,
    DEFAULT_FRAME_RATE, DEFAULT_THRESHOLD,
};

fn main() {
    let dt = 1.0 / DEFAULT_FRAME_RATE;
    // Cumulative impulse of a 0.5 s grasp followed by a brief second touch.
    let mut cumulative = Vec::new();
    let mut j = 0.0;
    for k in 0..180 {
        let t = k as f64 * dt;
        let force = if (0.5..1.0).contains(&t) {
            0.8
        } else if (1.8..1.95).contains(&t) {
            0.4
        } else {
            0.0
        };
        j += force * dt;
        cumulative.push(j);
    }
    let timestamps: Vec<f64> = (0..cumulative.len()).map(|k| k as f64 * dt).collect();
    let series = ImpulseSeries::new("index", timestamps, cumulative, ImpulseMode::Cumulative)
        .expect("monotone timestamps");

    let forces = force_from_impulse(&series, dt).expect("at least two samples");
    let events = detect_contacts(
        &forces,
        DEFAULT_THRESHOLD,
        DEFAULT_DEBOUNCE,
        dt,
        0.0,
        &series.fingertip,
    )
    .expect("positive threshold");

    println!("fingertip  onset_s  release_s  peak_N  impulse_Ns");
    for event in &events {
        println!(
            "{:<9}  {:7.3}  {:9.3}  {:6.3}  {:10.4}",
            event.fingertip, event.onset, event.release, event.peak_force, event.impulse
        );
    }
    println!("\nfeedback command stream:");
    for event in &events {
        for command in event.feedback() {
            println!(
                "  t={:6.3}s  vibrate-{} {}",
                command.time,
                if command.vibrate { "on " } else { "off" },
                command.fingertip
            );
        }
    }
}
