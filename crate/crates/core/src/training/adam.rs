use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Running moments, one buffer per parameter slice, created on first use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimState {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub t: u64,
}

#[derive(Clone, Debug, Default)]
pub struct Adam {
    pub params: AdamParams,
    pub state: OptimState,
}

impl Adam {
    pub fn new(params: AdamParams) -> Self {
        Adam {
            params,
            state: OptimState::default(),
        }
    }

    /// One bias-corrected update of every slice in `params`.
    pub fn step(&mut self, params: &mut [&mut [f32]], grads: &[&[f32]], lr: f64) -> Result<()> {
        if !(lr >= 0.0) {
            return Err(Error::invalid("adam_step", format!("learning rate {lr} must be nonnegative")));
        }
        if params.len() != grads.len() {
            return Err(Error::invalid(
                "adam_step",
                format!("{} parameter slices but {} gradients", params.len(), grads.len()),
            ));
        }
        let st = &mut self.state;
        if st.m.is_empty() {
            st.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            st.v = st.m.clone();
        }
        if st.m.len() != params.len() {
            return Err(Error::invalid(
                "adam_step",
                format!("state holds {} slices, got {}", st.m.len(), params.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != st.m[i].len() {
                return Err(Error::invalid(
                    "adam_step",
                    format!("slice {i}: parameter {} gradient {} state {}", p.len(), g.len(), st.m[i].len()),
                ));
            }
        }
        st.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(st.t as i32);
        let c2 = 1.0 - beta2.powi(st.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(st.m.iter_mut().zip(st.v.iter_mut())) {
            for j in 0..p.len() {
                let gj = g[j] as f64;
                let mj = beta1 * m[j] as f64 + (1.0 - beta1) * gj;
                let vj = beta2 * v[j] as f64 + (1.0 - beta2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                let upd = lr * (mj / c1) / ((vj / c2).sqrt() + eps);
                p[j] = (p[j] as f64 - upd) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut a = Adam::new(AdamParams::default());
        let mut p = vec![1.0f32, 1.0];
        a.step(&mut [&mut p], &[&[0.3, -4.0]], 0.01).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-6);
        assert!((p[1] - 1.01).abs() < 1e-6);
        assert_eq!(a.state.t, 1);
    }

    #[test]
    fn zero_lr_and_zero_grad_are_identity() {
        let mut a = Adam::new(AdamParams::default());
        let mut p = vec![0.5f32, -2.0, 7.0];
        let before = p.clone();
        for _ in 0..5 {
            a.step(&mut [&mut p], &[&[1.0, -1.0, 3.0]], 0.0).unwrap();
        }
        assert_eq!(p, before);
        let mut b = Adam::new(AdamParams::default());
        for _ in 0..5 {
            b.step(&mut [&mut p], &[&[0.0; 3]], 0.1).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn mismatches_are_rejected() {
        let mut a = Adam::new(AdamParams::default());
        let mut p = vec![0.0f32; 2];
        assert!(a.step(&mut [&mut p], &[&[0.0; 3]], 0.1).is_err());
        assert!(a.step(&mut [&mut p], &[], 0.1).is_err());
        assert!(a.step(&mut [&mut p], &[&[0.0; 2]], -1.0).is_err());
        assert_eq!(a.state.t, 0);
    }
}
