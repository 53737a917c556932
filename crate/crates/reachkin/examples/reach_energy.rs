//! The reach-energy model: cost of moving 0.3 m at different speeds, the
//! closed-form optimal duration, and its agreement with a brute scan.

use reachkin::energetics::{optimal_duration, reach_energy, EnergyParams};

fn main() {
    let params = EnergyParams::reaching(1.0).expect("valid constants");
    let d = 0.3;

    println!("T_s    e_J");
    let mut best = (f64::INFINITY, 0.0);
    let mut t = 0.4;
    while t <= 3.0 {
        let e = reach_energy(&params, d, t).expect("positive duration");
        if e < best.0 {
            best = (e, t);
        }
        println!("{t:4.2}   {e:7.3}");
        t += 0.2;
    }

    let tstar = optimal_duration(&params, d).expect("positive distance");
    let estar = reach_energy(&params, d, tstar).unwrap();
    println!("\nanalytic optimum: T* = {tstar:.4} s, e = {estar:.3} J");
    println!("coarse scan minimum was {:.3} J at {:.2} s", best.0, best.1);

    // Mass scales energy linearly and leaves the optimum in place.
    let heavy = EnergyParams::reaching(2.6).unwrap();
    println!(
        "with m = 2.6 kg: e(T*) = {:.3} J, T* = {:.4} s",
        reach_energy(&heavy, d, tstar).unwrap(),
        optimal_duration(&heavy, d).unwrap()
    );
}
