use alloc::vec;
use alloc::vec::Vec;

use super::Winners;
use crate::error::{dim_err, Error, Result};
use crate::tensor::Tensor;

/// Maxout over contiguous groups of `group` inputs: `B x J` to `B x J/group`.
///
/// This is a max-plus layer whose weights are zero inside each group and
/// `-inf` elsewhere, so winners and gradients follow the same rules.
pub fn maxout_head(y: &Tensor, group: usize) -> Result<(Tensor, Winners)> {
    let (b, j) = y.dims2()?;
    if group == 0 || j % group != 0 {
        return Err(dim_err!("group size {group} does not divide {j}"));
    }
    if !y.is_finite() {
        return Err(Error::Domain("maxout input contains -inf".into()));
    }
    let units = j / group;
    let mut z = Vec::with_capacity(b * units);
    let mut win = Vec::with_capacity(b * units);
    for r in 0..b {
        let row = y.row(r);
        for u in 0..units {
            let mut best = u * group;
            for jj in u * group + 1..(u + 1) * group {
                if row[jj] > row[best] {
                    best = jj;
                }
            }
            z.push(row[best]);
            win.push(best);
        }
    }
    Ok((Tensor::from_arithmetic(vec![b, units], z)?, Winners::new(b, units, win)))
}

pub fn maxout_backward(grad_z: &Tensor, winners: &Winners, inputs: usize) -> Result<Tensor> {
    let (b, u) = grad_z.dims2()?;
    if winners.batch() != b || winners.outputs() != u {
        return Err(dim_err!("gradient is {b}x{u}, winners are {}x{}", winners.batch(), winners.outputs()));
    }
    let mut gy = vec![0.0; b * inputs];
    for r in 0..b {
        for c in 0..u {
            let j = winners.get(r, c);
            if j >= inputs {
                return Err(Error::Internal(alloc::format!("winner {j} out of range for {inputs} inputs")));
            }
            gy[r * inputs + j] += grad_z.data()[r * u + c];
        }
    }
    Tensor::from_arithmetic(vec![b, inputs], gy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxplus::maxplus_forward;
    use crate::rng::SeededRng;
    use crate::tensor::seeded_uniform;

    #[test]
    fn full_group_is_global_max() {
        let mut rng = SeededRng::new(5);
        let y = seeded_uniform(&mut rng, &[4, 6], -1.0, 1.0).unwrap();
        let (z, _) = maxout_head(&y, 6).unwrap();
        let (reference, _) = maxplus_forward(&y, &Tensor::zeros(&[6, 1]), None).unwrap();
        assert_eq!(z, reference);
    }

    #[test]
    fn unit_group_is_identity() {
        let mut rng = SeededRng::new(6);
        let y = seeded_uniform(&mut rng, &[3, 5], -1.0, 1.0).unwrap();
        assert_eq!(maxout_head(&y, 1).unwrap().0, y);
    }

    #[test]
    fn pairs_match_loop_oracle() {
        let mut rng = SeededRng::new(7);
        let y = seeded_uniform(&mut rng, &[3, 8], -1.0, 1.0).unwrap();
        let (z, _) = maxout_head(&y, 2).unwrap();
        for r in 0..3 {
            for u in 0..4 {
                let a = y.get(&[r, 2 * u]).unwrap();
                let b = y.get(&[r, 2 * u + 1]).unwrap();
                assert_eq!(z.get(&[r, u]).unwrap(), a.max(b));
            }
        }
    }

    #[test]
    fn group_must_divide() {
        assert!(maxout_head(&Tensor::zeros(&[1, 5]), 2).is_err());
        assert!(maxout_head(&Tensor::zeros(&[1, 5]), 0).is_err());
    }

    #[test]
    fn backward_routes_to_winner() {
        let y = Tensor::from_rows(&[[1.0, 3.0, 2.0, 0.0]]).unwrap();
        let (_, w) = maxout_head(&y, 2).unwrap();
        let g = maxout_backward(&Tensor::from_rows(&[[0.5, -1.0]]).unwrap(), &w, 4).unwrap();
        assert_eq!(g.data(), &[0.0, 0.5, -1.0, 0.0]);
    }
}
