//! Writes the four-class synthetic corpus (WAVs plus manifests) and prints
//! the class counts per split.
//!
//! `cargo run --example synth_corpus -- out_dir [n_per_class] [seed]`

use pdac::data::{synth_generate, Split, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synth_corpus".into());
    let n = args.next().map_or(Ok(8), |s| s.parse())?;
    let seed = args.next().map_or(Ok(0), |s| s.parse())?;
    let corpus = synth_generate(&SynthConfig::new(n, seed), out.as_ref())?;
    for split in Split::ALL {
        let m = corpus.split(split);
        let mut labels = m.labels();
        labels.sort();
        labels.dedup();
        println!(
            "{:<10} {:>4} utterances, labels {labels:?}",
            split.name(),
            m.len()
        );
    }
    println!("label map: {:?}", corpus.label_map.names());
    Ok(())
}
