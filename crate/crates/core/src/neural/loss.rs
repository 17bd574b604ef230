use serde::{Deserialize, Serialize};

use super::context::EpisodeContext;
use crate::envs::EnvState;
use crate::error::NeuralError;
use crate::scalar::Scalar;

/// Training objective. Every kind is averaged over the batch.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LossKind {
    /// `-log p(a)`.
    CrossEntropy,
    /// `-A log p(a) + (R - V)^2 / 2`.
    A2c,
    /// `-max(A, 0) log p(a) + w max(R - V, 0)^2 / 2`.
    SilPaac { value_weight: f64 },
    /// `-min(rho A, clip(rho, 1 - eps, 1 + eps) A) + (R - V)^2 / 2`
    /// with `rho = p(a) / p_old(a)`.
    PpoClip { clip: f64 },
    /// `(R - V)^2 / 2`.
    ValueMse,
}

impl LossKind {
    pub fn sil_paac() -> Self {
        LossKind::SilPaac { value_weight: 0.01 }
    }

    pub fn ppo() -> Self {
        LossKind::PpoClip { clip: 0.2 }
    }

    pub fn needs_value(self) -> bool {
        !matches!(self, LossKind::CrossEntropy)
    }
}

/// Per-transition supervision. Fields a loss kind does not use are
/// ignored; `advantage` is a constant weight, never differentiated.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Target<T> {
    pub action: usize,
    pub ret: T,
    pub advantage: T,
    pub old_prob: T,
}

impl<T: Scalar> Target<T> {
    pub fn action(action: usize) -> Self {
        Target {
            action,
            ret: T::zero(),
            advantage: T::zero(),
            old_prob: T::one(),
        }
    }

    pub fn actor_critic(action: usize, ret: T, advantage: T) -> Self {
        Target {
            action,
            ret,
            advantage,
            old_prob: T::one(),
        }
    }

    pub fn ppo(action: usize, ret: T, advantage: T, old_prob: T) -> Self {
        Target {
            action,
            ret,
            advantage,
            old_prob,
        }
    }
}

/// One training example: a state with its episode context, legal-action
/// mask and target.
#[derive(Clone, Debug)]
pub struct Sample<'a, T> {
    pub state: &'a EnvState,
    pub ctx: &'a EpisodeContext<T>,
    pub mask: &'a [bool],
    pub target: Target<T>,
}

pub(crate) struct SampleLoss<T> {
    pub loss: T,
    pub dlogits: Vec<T>,
    pub dvalue: T,
}

/// Loss of one sample and its derivatives with respect to the logits and
/// the value output. Through the masked softmax,
/// `d log p(a) / d logit_j = [j = a] - p_j` on legal `j` and zero elsewhere.
pub(crate) fn sample_loss<T: Scalar>(
    kind: LossKind,
    target: &Target<T>,
    probs: &[T],
    mask: &[bool],
    value: Option<T>,
) -> Result<SampleLoss<T>, NeuralError> {
    let a = target.action;
    let uses_action = !matches!(kind, LossKind::ValueMse);
    if uses_action && !mask.get(a).copied().unwrap_or(false) {
        return Err(NeuralError::Shape(format!("target action {a} is not legal")));
    }
    let v = match (kind.needs_value(), value) {
        (true, None) => return Err(NeuralError::MissingValueHead),
        (_, v) => v.unwrap_or(T::zero()),
    };
    // d(-log p(a)) / d logits
    let dnll = || -> Vec<T> {
        probs
            .iter()
            .zip(mask)
            .enumerate()
            .map(|(j, (&p, &ok))| {
                if !ok {
                    T::zero()
                } else if j == a {
                    p - T::one()
                } else {
                    p
                }
            })
            .collect()
    };
    let scaled = |w: T| -> Vec<T> { dnll().into_iter().map(|d| d * w).collect() };
    let half = T::from_f64_lossy(0.5);
    let zeros = || vec![T::zero(); probs.len()];
    let nll = || -probs[a].ln();
    let out = match kind {
        LossKind::CrossEntropy => SampleLoss {
            loss: nll(),
            dlogits: dnll(),
            dvalue: T::zero(),
        },
        LossKind::A2c => {
            let adv = target.advantage;
            let err = target.ret - v;
            SampleLoss {
                loss: adv * nll() + half * err * err,
                dlogits: scaled(adv),
                dvalue: -err,
            }
        }
        LossKind::SilPaac { value_weight } => {
            let w = T::from_f64_lossy(value_weight);
            let adv = target.advantage.max(T::zero());
            let err = (target.ret - v).max(T::zero());
            SampleLoss {
                loss: adv * nll() + w * half * err * err,
                dlogits: scaled(adv),
                dvalue: -w * err,
            }
        }
        LossKind::PpoClip { clip } => {
            if target.old_prob <= T::zero() {
                return Err(NeuralError::ZeroOldProbability);
            }
            let eps = T::from_f64_lossy(clip);
            let adv = target.advantage;
            let rho = probs[a] / target.old_prob;
            let unclipped = rho * adv;
            let clipped = rho.max(T::one() - eps).min(T::one() + eps) * adv;
            let err = target.ret - v;
            // the clipped branch is constant in the parameters wherever it
            // is strictly smaller
            let dlogits = if unclipped <= clipped { scaled(rho * adv) } else { zeros() };
            SampleLoss {
                loss: -unclipped.min(clipped) + half * err * err,
                dlogits,
                dvalue: -err,
            }
        }
        LossKind::ValueMse => {
            let err = target.ret - v;
            SampleLoss {
                loss: half * err * err,
                dlogits: zeros(),
                dvalue: -err,
            }
        }
    };
    Ok(out)
}
