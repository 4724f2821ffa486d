//! Finite-difference validation of the assembled model. Every parameter
//! tensor is probed at sampled coordinates and the analytic gradient (f64
//! and f32) is compared against central differences of the f64 loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::metrics::{cross_entropy, Mask};
use crate::scalar::to_f64;
use crate::tensor::{relative_error, Tape, Tensor};

#[derive(Clone, Debug)]
pub struct ModelGradReport {
    /// Parameter coordinates probed.
    pub coords: usize,
    pub max_err_f64: f64,
    pub max_err_f32: f64,
    /// Parameter holding the worst f64 discrepancy.
    pub worst_param: String,
}

fn loss_of(model: &Model<f64>, img: &Tensor<f64>, mask: &Mask) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape)?;
    let img_id = tape.leaf(img.clone())?;
    let logits = model.forward(&mut tape, &bound, img_id)?;
    let loss = cross_entropy(&mut tape, logits, mask)?;
    tape.value(loss).item()
}

/// Checks d(loss)/d(theta) for `coords_per_param` sampled coordinates of every
/// parameter tensor on one random image/mask pair of side `side`.
pub fn check_model_gradients(
    config: &ModelConfig,
    side: usize,
    coords_per_param: usize,
    seed: u64,
) -> Result<ModelGradReport> {
    config.validate()?;
    if coords_per_param == 0 {
        return Err(Error::Config("coords_per_param must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = Tensor::<f64>::from_fn(vec![3, side, side], |_| rng.gen_range(0.0..1.0));
    let mask = Mask::from_fn(side, side, |_, _| u8::from(rng.gen_bool(0.35)));

    let model = Model::<f64>::init(config.clone(), seed)?;

    let mut tape = Tape::new();
    let bound = model.bind(&mut tape)?;
    let img_id = tape.leaf(img.clone())?;
    let logits = model.forward(&mut tape, &bound, img_id)?;
    let loss = cross_entropy(&mut tape, logits, &mask)?;
    tape.backward(loss)?;
    let ad64: Vec<Vec<f64>> =
        bound.ids().iter().map(|&id| tape.grad(id).expect("param reachable").to_vec()).collect();

    let model32 = model.cast::<f32>();
    let mut tape32 = Tape::new();
    let bound32 = model32.bind(&mut tape32)?;
    let img32 = tape32.leaf(img.cast::<f32>())?;
    let logits32 = model32.forward(&mut tape32, &bound32, img32)?;
    let loss32 = cross_entropy(&mut tape32, logits32, &mask)?;
    tape32.backward(loss32)?;
    let ad32: Vec<Vec<f32>> = bound32
        .ids()
        .iter()
        .map(|&id| tape32.grad(id).expect("param reachable").to_vec())
        .collect();

    let h = 1e-5;
    let mut coords = 0usize;
    let mut max64 = 0.0f64;
    let mut max32 = 0.0f64;
    let mut worst = String::new();
    for (p, param) in model.params().entries().iter().enumerate() {
        let numel = param.tensor.numel();
        let picked = rand::seq::index::sample(&mut rng, numel, coords_per_param.min(numel));
        for idx in picked {
            let probe = |delta: f64| -> Result<f64> {
                let mut m = model.clone();
                m.params_mut().entries_mut()[p].tensor.data_mut()[idx] += delta;
                loss_of(&m, &img, &mask)
            };
            let fd = (probe(h)? - probe(-h)?) / (2.0 * h);
            let e64 = relative_error(ad64[p][idx], fd);
            let e32 = relative_error(to_f64(ad32[p][idx]), fd);
            if e64 > max64 {
                max64 = e64;
                worst = param.name.clone();
            }
            max32 = max32.max(e32);
            coords += 1;
        }
    }
    Ok(ModelGradReport { coords, max_err_f64: max64, max_err_f32: max32, worst_param: worst })
}
