use buildseg_core::data::generate_synthetic;
use buildseg_core::error::Result;
use clap::Args;

use super::{base_config, echo_config};
use crate::Globals;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scenes per domain.
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Domain to generate: a, b, or both.
    #[arg(long)]
    pub domain: Option<String>,
}

pub fn run(globals: &Globals, args: &SynthArgs) -> Result<()> {
    let mut cfg = base_config(globals)?;
    if let Some(scenes) = args.scenes {
        cfg.synth.scenes = Some(scenes);
    }
    if let Some(domain) = &args.domain {
        cfg.synth.domain = Some(domain.clone());
    }
    cfg.resolve()?;
    echo_config(&cfg)?;

    let root = cfg.out_root()?;
    let scenes = cfg.synth.scenes.expect("resolved");
    let seed = cfg.seed();
    for domain in cfg.synth_domains() {
        let dir = root.join(format!("synthetic_{}", domain.letter()));
        let corpus = generate_synthetic(&dir, seed, scenes, domain)?;
        println!("wrote {} scenes to {}", corpus.n_scenes, corpus.root.display());
    }
    Ok(())
}
