//! Myoelectric grip decoding: train the LDA on a synthetic calibration
//! set, hold out half, and print the confusion matrix.

use reachkin::emg::{confusion_eval, extract_features, lda_train, DEFAULT_DEADZONE, DEFAULT_SHRINKAGE};
use reachkin::ingest::synth::synth_emg_training_set;

fn main() {
    let windows = synth_emg_training_set(42, 6.0, 1.0);
    let features: Vec<_> = windows
        .iter()
        .map(|(w, class)| {
            let f = extract_features(w, DEFAULT_DEADZONE).expect("8-channel window");
            (f.to_vec(), *class)
        })
        .collect();

    let train: Vec<_> = features.iter().step_by(2).cloned().collect();
    let held_out: Vec<_> = features.iter().skip(1).step_by(2).cloned().collect();

    let model = lda_train(&train, DEFAULT_SHRINKAGE).expect("well-conditioned training set");
    let confusion = confusion_eval(&model, &held_out).expect("evaluable set");

    print!("truth\\pred ");
    for class in &confusion.classes {
        print!("{:>11}", class.name());
    }
    println!();
    for (i, class) in confusion.classes.iter().enumerate() {
        print!("{:<11}", class.name());
        for count in &confusion.counts[i] {
            print!("{count:>11}");
        }
        println!();
    }
    println!(
        "\nheld-out accuracy {:.3} over {} windows, lambda {}",
        confusion.accuracy,
        held_out.len(),
        model.lambda()
    );

    // Posterior view of a single window.
    let (class, posteriors) = model.predict(&held_out[0].0).unwrap();
    println!("first held-out window decodes as {class} with posteriors {posteriors:.3?}");
}
