//! Trains the toy recognizer on synthetic digit lines and reports held-out
//! character accuracy after every epoch.
//!
//! cargo run --release -p scriptorium-core --example toy_ocr -- [epochs] [state] [lr] [window]

use scriptorium_core::corpus::{build_plan, random_texts, synthesize_corpus, GlyphSet};
use scriptorium_core::eval::{cer, EquivalenceMap};
use scriptorium_core::segmentation::ReadingOrder;
use scriptorium_core::sequence::{fit_line_height, make_frames, train_toy_with, Alphabet, Sample, ToyModel, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let epochs = arg(1, 40.0) as usize;
    let state = arg(2, 32.0) as usize;
    let lr = arg(3, 0.05);
    let window = arg(4, 7.0) as usize;

    let gs = GlyphSet::builtin_digits(1).unwrap();
    let alphabet = Alphabet::new(gs.symbols()).unwrap();
    let height = gs.height();
    let mut texts = build_plan(&gs, &[]).unwrap().strings;
    texts.extend(random_texts(&gs, 500, 20, 60, 0.15, 1));
    let held_out = random_texts(&gs, 100, 20, 60, 0.15, 2);

    let to_samples = |texts: &[Vec<u32>], seed: u64| -> Vec<Sample> {
        synthesize_corpus(&gs, texts, 0.0, seed)
            .unwrap()
            .into_iter()
            .map(|(img, label, _)| {
                let line = fit_line_height(&img, height, 2);
                let seq = make_frames(&line, window, ReadingOrder::Ltr).unwrap();
                Sample::new(&seq, alphabet.encode(&label).unwrap())
            })
            .collect()
    };
    let train = to_samples(&texts, 10);
    let test = to_samples(&held_out, 20);
    eprintln!("{} training lines, {} frames", train.len(), train.iter().map(|s| s.frames).sum::<usize>());

    let mut model = ToyModel::new(height, window, state, alphabet.classes(), 3);
    let cfg = TrainConfig { epochs: 1, learning_rate: lr, batch_size: 8, clip_norm: 5.0, seed: 4 };
    let start = std::time::Instant::now();
    for e in 0..epochs {
        let cfg = TrainConfig { seed: cfg.seed + e as u64, ..cfg };
        train_toy_with(&mut model, &train, &cfg, |_, _| {}).unwrap();
        let refs: Vec<Vec<u32>> = test.iter().map(|s| s.label.clone()).collect();
        let hyps: Vec<Vec<u32>> = test
            .iter()
            .map(|s| model.transcribe_features(&s.features, s.frames).unwrap())
            .collect();
        let c = cer(&refs, &hyps, &EquivalenceMap::identity()).unwrap();
        eprintln!(
            "epoch {:3} loss {:9.4} acc {:.4} t={:.0}s",
            e + 1,
            model.loss_curve.last().unwrap(),
            1.0 - c,
            start.elapsed().as_secs_f64()
        );
    }
}
