use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// `alpha * mean Huber(delta)` over continuous entries plus
/// `beta * mean BCE-with-logits` over discrete entries. An absent feature
/// class contributes nothing.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_loss(
    tape: &mut Tape,
    pred_cont: Option<Var>,
    true_cont: Option<Var>,
    pred_disc_logits: Option<Var>,
    true_disc: Option<Var>,
    alpha: f64,
    beta: f64,
    delta: f64,
) -> Result<Var> {
    let mut terms = Vec::with_capacity(2);
    match (pred_cont, true_cont) {
        (Some(p), Some(t)) => {
            let h = tape.huber_mean(p, t, delta)?;
            terms.push(tape.scale(h, alpha)?);
        }
        (None, None) => {}
        _ => return Err(Error::config("continuous prediction and target must both be present")),
    }
    match (pred_disc_logits, true_disc) {
        (Some(p), Some(t)) => {
            if let Some(bad) = tape.value(t).data().iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::data(format!("discrete target {bad} is not 0 or 1")));
            }
            let b = tape.bce_with_logits_mean(p, t)?;
            terms.push(tape.scale(b, beta)?);
        }
        (None, None) => {}
        _ => return Err(Error::config("discrete prediction and target must both be present")),
    }
    match terms.as_slice() {
        [] => Err(Error::config("hybrid loss needs at least one feature class")),
        [one] => Ok(*one),
        [a, b] => tape.add(*a, *b),
        _ => unreachable!(),
    }
}
