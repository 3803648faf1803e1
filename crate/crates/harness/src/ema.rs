use pnda_nn::Module;

use crate::{HarnessError, Result};

/// `target <- m * target + (1 - m) * online`, element-wise.
pub fn momentum_update_slice(online: &[f32], target: &mut [f32], momentum: f64) -> Result<()> {
    if !(0.0..1.0).contains(&momentum) {
        return Err(HarnessError::Config(format!("EMA momentum must lie in [0, 1), got {momentum}")));
    }
    if online.len() != target.len() {
        return Err(HarnessError::Shape(format!("EMA over {} vs {} values", online.len(), target.len())));
    }
    let m = momentum as f32;
    for (t, o) in target.iter_mut().zip(online) {
        *t = m * *t + (1.0 - m) * o;
    }
    Ok(())
}

/// Parameter-wise EMA. Both modules must list the same shapes in the same order.
pub fn momentum_update(online: &dyn Module, target: &mut dyn Module, momentum: f64) -> Result<()> {
    let src = online.params();
    let mut dst = target.params_mut();
    if src.len() != dst.len() {
        return Err(HarnessError::Shape(format!("EMA over {} vs {} parameters", src.len(), dst.len())));
    }
    if let Some((s, d)) = src.iter().zip(dst.iter()).find(|(s, d)| s.shape != d.shape) {
        return Err(HarnessError::Shape(format!("EMA parameter {} {:?} vs {} {:?}", s.name, s.shape, d.name, d.shape)));
    }
    for (s, d) in src.iter().zip(dst.iter_mut()) {
        momentum_update_slice(&s.value, &mut d.value, momentum)?;
    }
    Ok(())
}
