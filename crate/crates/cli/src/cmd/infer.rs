use std::path::PathBuf;

use buildseg_core::data::{image_to_tensor, tile_to_patches, ImageBuf, LabelBuf, PatchPair};
use buildseg_core::data::reassemble_mask;
use buildseg_core::error::{Error, Result};
use buildseg_core::eval::{render_overlay, write_ppm};
use buildseg_core::metrics::Mask;
use buildseg_core::model::{load_checkpoint, Model};
use clap::Args;

use super::{base_config, echo_config, under_out};
use crate::Globals;

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input image (PNG).
    #[arg(long)]
    pub image: PathBuf,
    /// Overlay blend weight.
    #[arg(long)]
    pub alpha: Option<f64>,
}

pub fn run(globals: &Globals, args: &InferArgs) -> Result<()> {
    let mut cfg = base_config(globals)?;
    if let Some(a) = args.alpha {
        cfg.eval.alpha = Some(a);
    }
    cfg.resolve()?;
    echo_config(&cfg)?;

    let ckpt = load_checkpoint(&under_out(&cfg, &args.checkpoint)?)?;
    let model = Model::<f32>::from_checkpoint(&ckpt)?;
    let image = ImageBuf::load_png(&args.image)?;
    let stem = args
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());

    // Tile exactly like fusion does, predict per patch, stitch the valid
    // regions back together.
    let blank = Mask::zeros(image.width(), image.height());
    let tiles = tile_to_patches(&stem, &image, &blank)?;
    let predicted: Vec<PatchPair> = tiles
        .into_iter()
        .map(|tile| {
            let mask = model.predict(&image_to_tensor::<f32>(&tile.image))?;
            PatchPair::new(tile.image, mask, tile.provenance)
        })
        .collect::<Result<_>>()?;
    let mask = reassemble_mask(image.width(), image.height(), &predicted)?;

    let out = cfg.out_root()?;
    let report_dir = out.join("reports");
    std::fs::create_dir_all(&report_dir).map_err(|e| Error::io(&report_dir, e))?;
    let mask_path = report_dir.join(format!("{stem}_mask.png"));
    let bytes: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    LabelBuf::new(image.width(), image.height(), bytes)?.save_png(&mask_path)?;

    let overlay_dir = out.join("overlays");
    std::fs::create_dir_all(&overlay_dir).map_err(|e| Error::io(&overlay_dir, e))?;
    let overlay_path = overlay_dir.join(format!("{stem}_overlay.ppm"));
    write_ppm(&render_overlay(&image, &mask, cfg.alpha())?, &overlay_path)?;

    let total = (image.width() * image.height()) as f64;
    println!(
        "building pixels: {} ({:.2}% of {}x{})",
        mask.count_ones(),
        mask.count_ones() as f64 / total * 100.0,
        image.width(),
        image.height()
    );
    println!("mask: {}", mask_path.display());
    println!("overlay: {}", overlay_path.display());
    Ok(())
}
