//! The four base losses and the per-step composite objectives. All
//! functions are pure and evaluated in f64; batch reduction is the
//! arithmetic mean everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to [EPS, 1-EPS] before any log.
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_d: f64,
    pub w_r: f64,
    pub w_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        // grid-searched values
        LossWeights {
            w_d: 0.1,
            w_r: 0.7,
            w_c: 0.2,
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Mean of squared element differences between a reconstruction and its
/// original window.
pub fn reconstruction_loss(reconstruction: &[f64], original: &[f64]) -> Result<f64> {
    if reconstruction.len() != original.len() || reconstruction.is_empty() {
        return Err(Error::Shape {
            expected: format!("{} elements", original.len()),
            got: format!("{} elements", reconstruction.len()),
        });
    }
    let n = reconstruction.len() as f64;
    Ok(reconstruction
        .iter()
        .zip(original)
        .map(|(r, x)| (r - x) * (r - x))
        .sum::<f64>()
        / n)
}

/// d L_R / d reconstruction.
pub fn reconstruction_loss_grad(reconstruction: &[f64], original: &[f64]) -> Result<Vec<f64>> {
    if reconstruction.len() != original.len() || reconstruction.is_empty() {
        return Err(Error::Shape {
            expected: format!("{} elements", original.len()),
            got: format!("{} elements", reconstruction.len()),
        });
    }
    let n = reconstruction.len() as f64;
    Ok(reconstruction
        .iter()
        .zip(original)
        .map(|(r, x)| 2.0 * (r - x) / n)
        .collect())
}

/// Cross-entropy -log probs[true_label]; the one-hot vector is implicit in
/// the indexing.
pub fn classification_loss(probs: &[f64], true_label: usize) -> Result<f64> {
    if true_label >= probs.len() {
        return Err(Error::Data(format!(
            "label {true_label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-clamp_prob(probs[true_label]).ln())
}

/// d L_C / d probs.
pub fn classification_loss_grad(probs: &[f64], true_label: usize) -> Result<Vec<f64>> {
    if true_label >= probs.len() {
        return Err(Error::Data(format!(
            "label {true_label} out of range for {} classes",
            probs.len()
        )));
    }
    let mut g = vec![0.0; probs.len()];
    g[true_label] = -1.0 / clamp_prob(probs[true_label]);
    Ok(g)
}

/// Standard binary cross-entropy -[g log d + (1-g) log(1-d)].
pub fn discrimination_loss(d: f64, g: u8) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) || !d.is_finite() {
        return Err(Error::Data(format!("discriminator output {d} outside [0,1]")));
    }
    let d = clamp_prob(d);
    let g = f64::from(g);
    Ok(-(g * d.ln() + (1.0 - g) * (1.0 - d).ln()))
}

/// d L_D / d d.
pub fn discrimination_loss_grad(d: f64, g: u8) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) || !d.is_finite() {
        return Err(Error::Data(format!("discriminator output {d} outside [0,1]")));
    }
    let d = clamp_prob(d);
    let g = f64::from(g);
    Ok(-(g / d) + (1.0 - g) / (1.0 - d))
}

/// Non-saturating adversarial objective -log d, applied to pairs labeled
/// g=0: it drives F to make different-subject, same-activity pairs look
/// same-subject.
pub fn adversarial_loss(d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) || !d.is_finite() {
        return Err(Error::Data(format!("discriminator output {d} outside [0,1]")));
    }
    Ok(-clamp_prob(d).ln())
}

/// d L_A / d d.
pub fn adversarial_loss_grad(d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) || !d.is_finite() {
        return Err(Error::Data(format!("discriminator output {d} outside [0,1]")));
    }
    Ok(-1.0 / clamp_prob(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStep {
    Step1,
    Step2,
    Step3Sub1,
    Step3Sub2,
}

/// Batch-mean loss components available for a step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepLossInputs {
    pub l_r: Option<f64>,
    pub l_c: Option<f64>,
    pub l_d: Option<f64>,
    pub l_a: Option<f64>,
}

/// Per-block objectives for one step; blocks not trained in the step are
/// absent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepObjectives {
    pub f: Option<f64>,
    pub r: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
}

fn need(v: Option<f64>, name: &str, step: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Data(format!("{step} requires component {name}")))
}

/// The per-step composites: step 1 trains F and R on the reconstruction
/// loss alone; step 2 trains all blocks (F on L_R + L_C); step 3.1 trains
/// F and C on w_D*L_A + w_R*L_R + w_C*L_C; step 3.2 trains D on L_D.
pub fn step_losses(
    step: TrainStep,
    inputs: StepLossInputs,
    weights: LossWeights,
) -> Result<StepObjectives> {
    match step {
        TrainStep::Step1 => {
            let l_r = need(inputs.l_r, "L_R", "step 1")?;
            Ok(StepObjectives {
                f: Some(l_r),
                r: Some(l_r),
                ..Default::default()
            })
        }
        TrainStep::Step2 => {
            let l_r = need(inputs.l_r, "L_R", "step 2")?;
            let l_c = need(inputs.l_c, "L_C", "step 2")?;
            let l_d = need(inputs.l_d, "L_D", "step 2")?;
            Ok(StepObjectives {
                f: Some(l_r + l_c),
                r: Some(l_r),
                c: Some(l_c),
                d: Some(l_d),
            })
        }
        TrainStep::Step3Sub1 => {
            let l_r = need(inputs.l_r, "L_R", "step 3.1")?;
            let l_c = need(inputs.l_c, "L_C", "step 3.1")?;
            let l_a = need(inputs.l_a, "L_A", "step 3.1")?;
            let obj = weights.w_d * l_a + weights.w_r * l_r + weights.w_c * l_c;
            Ok(StepObjectives {
                f: Some(obj),
                c: Some(obj),
                ..Default::default()
            })
        }
        TrainStep::Step3Sub2 => {
            let l_d = need(inputs.l_d, "L_D", "step 3.2")?;
            Ok(StepObjectives {
                d: Some(l_d),
                ..Default::default()
            })
        }
    }
}
