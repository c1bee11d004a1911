//! SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 on
//! [0,1] images, plus its analytic gradient with respect to the first image.
//! Windows are zero-padded at borders; forward and backward use the same
//! padded convolution so the gradient is exact for the implemented function.

use crate::raster::{ScalarMap, VectorMap};
use nalgebra::Vector3;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 1e-4; // (K1 * L)^2
const C2: f64 = 9e-4; // (K2 * L)^2

fn kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let r = (WINDOW / 2) as isize;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as isize - r;
        *v = (-(d * d) as f64 / (2.0 * SIGMA * SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable zero-padded Gaussian filtering.
fn blur(map: &ScalarMap) -> ScalarMap {
    let k = kernel();
    let r = (WINDOW / 2) as isize;
    let (w, h) = (map.width(), map.height());
    let horiz = ScalarMap::from_fn(w, h, |u, v| {
        let mut acc = 0.0;
        for (i, &kv) in k.iter().enumerate() {
            let uu = u as isize + i as isize - r;
            if uu >= 0 && (uu as usize) < w {
                acc += kv * map.get(uu as usize, v);
            }
        }
        acc
    });
    ScalarMap::from_fn(w, h, |u, v| {
        let mut acc = 0.0;
        for (i, &kv) in k.iter().enumerate() {
            let vv = v as isize + i as isize - r;
            if vv >= 0 && (vv as usize) < h {
                acc += kv * horiz.get(u, vv as usize);
            }
        }
        acc
    })
}

fn channel(map: &VectorMap, c: usize) -> ScalarMap {
    ScalarMap::from_fn(map.width(), map.height(), |u, v| map.get(u, v)[c])
}

/// Mean SSIM over pixels and channels.
pub fn ssim(x: &VectorMap, y: &VectorMap) -> f64 {
    ssim_impl(x, y, false).0
}

/// Mean SSIM and its gradient with respect to `x`.
pub fn ssim_with_grad(x: &VectorMap, y: &VectorMap) -> (f64, VectorMap) {
    let (v, g) = ssim_impl(x, y, true);
    (v, g.unwrap())
}

fn ssim_impl(x: &VectorMap, y: &VectorMap, want_grad: bool) -> (f64, Option<VectorMap>) {
    assert_eq!(x.width(), y.width());
    assert_eq!(x.height(), y.height());
    let (w, h) = (x.width(), x.height());
    let n = (w * h * 3) as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| VectorMap::filled(w, h, Vector3::zeros()));

    for c in 0..3 {
        let xc = channel(x, c);
        let yc = channel(y, c);
        let mu_x = blur(&xc);
        let mu_y = blur(&yc);
        let xx = blur(&ScalarMap::from_fn(w, h, |u, v| xc.get(u, v) * xc.get(u, v)));
        let yy = blur(&ScalarMap::from_fn(w, h, |u, v| yc.get(u, v) * yc.get(u, v)));
        let xy = blur(&ScalarMap::from_fn(w, h, |u, v| xc.get(u, v) * yc.get(u, v)));

        let mut u_mu = ScalarMap::filled(w, h, 0.0);
        let mut u_sxx = ScalarMap::filled(w, h, 0.0);
        let mut u_sxy = ScalarMap::filled(w, h, 0.0);
        for v in 0..h {
            for u in 0..w {
                let (mx, my) = (mu_x.get(u, v), mu_y.get(u, v));
                let sxx = xx.get(u, v) - mx * mx;
                let syy = yy.get(u, v) - my * my;
                let sxy = xy.get(u, v) - mx * my;
                let a1 = 2.0 * mx * my + C1;
                let a2 = 2.0 * sxy + C2;
                let b1 = mx * mx + my * my + C1;
                let b2 = sxx + syy + C2;
                let s = (a1 * a2) / (b1 * b2);
                total += s;
                if want_grad {
                    // partials of s at this window
                    let ds_dmx = 2.0 * my * a2 / (b1 * b2) - 2.0 * mx * a1 * a2 / (b1 * b1 * b2);
                    let ds_dsxx = -a1 * a2 / (b1 * b2 * b2);
                    let ds_dsxy = 2.0 * a1 / (b1 * b2);
                    // including the mean-subtraction inside sxx and sxy:
                    // d sxx/d mu_x = -2 mu_x, d sxy/d mu_x = -mu_y
                    u_mu.set(
                        u,
                        v,
                        ds_dmx - 2.0 * mx * ds_dsxx - my * ds_dsxy,
                    );
                    u_sxx.set(u, v, ds_dsxx);
                    u_sxy.set(u, v, ds_dsxy);
                }
            }
        }
        if let Some(grad) = grad.as_mut() {
            // transpose convolutions: d blur(f)/d x(r) spreads f's weights
            let t_mu = blur(&u_mu);
            let t_xx = blur(&u_sxx);
            let t_xy = blur(&u_sxy);
            for v in 0..h {
                for u in 0..w {
                    // d xx / d x = 2x, d xy / d x = y (inside the window sums)
                    let g = t_mu.get(u, v)
                        + 2.0 * xc.get(u, v) * t_xx.get(u, v)
                        + yc.get(u, v) * t_xy.get(u, v);
                    let mut cur = grad.get(u, v);
                    cur[c] = g / n;
                    grad.set(u, v, cur);
                }
            }
        }
    }
    (total / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct nested-loop reference implementation (independent of the
    /// separable-filter fast path).
    fn ssim_reference(x: &VectorMap, y: &VectorMap) -> f64 {
        let k1d = kernel();
        let (w, h) = (x.width(), x.height());
        let r = (WINDOW / 2) as isize;
        let mut total = 0.0;
        for c in 0..3 {
            for pv in 0..h as isize {
                for pu in 0..w as isize {
                    let mut mx = 0.0;
                    let mut my = 0.0;
                    let mut sxx = 0.0;
                    let mut syy = 0.0;
                    let mut sxy = 0.0;
                    for dv in -r..=r {
                        for du in -r..=r {
                            let (qu, qv) = (pu + du, pv + dv);
                            if qu < 0 || qv < 0 || qu >= w as isize || qv >= h as isize {
                                continue;
                            }
                            let wgt = k1d[(du + r) as usize] * k1d[(dv + r) as usize];
                            let xv = x.get(qu as usize, qv as usize)[c];
                            let yv = y.get(qu as usize, qv as usize)[c];
                            mx += wgt * xv;
                            my += wgt * yv;
                            sxx += wgt * xv * xv;
                            syy += wgt * yv * yv;
                            sxy += wgt * xv * yv;
                        }
                    }
                    sxx -= mx * mx;
                    syy -= my * my;
                    sxy -= mx * my;
                    let s = ((2.0 * mx * my + C1) * (2.0 * sxy + C2))
                        / ((mx * mx + my * my + C1) * (sxx + syy + C2));
                    total += s;
                }
            }
        }
        total / (w * h * 3) as f64
    }

    fn random_image(w: usize, h: usize, seed: u64) -> VectorMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VectorMap::from_fn(w, h, |_, _| {
            Vector3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            )
        })
    }

    #[test]
    fn identical_images_give_one() {
        let x = random_image(24, 18, 3);
        assert!((ssim(&x, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_pair_matches_reference() {
        let x = VectorMap::filled(20, 20, Vector3::repeat(0.5));
        let y = VectorMap::filled(20, 20, Vector3::repeat(0.6));
        let fast = ssim(&x, &y);
        let slow = ssim_reference(&x, &y);
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        assert!(fast < 1.0);
    }

    #[test]
    fn random_pair_matches_reference() {
        let x = random_image(17, 13, 5);
        let y = random_image(17, 13, 6);
        let fast = ssim(&x, &y);
        let slow = ssim_reference(&x, &y);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = random_image(10, 8, 7);
        let y = random_image(10, 8, 8);
        let (_, grad) = ssim_with_grad(&x, &y);
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let (u, v, c) = (
                rng.random_range(0..10usize),
                rng.random_range(0..8usize),
                rng.random_range(0..3usize),
            );
            let mut xp = x.clone();
            let mut cur = xp.get(u, v);
            cur[c] += h;
            xp.set(u, v, cur);
            let mut xm = x.clone();
            let mut cur = xm.get(u, v);
            cur[c] -= h;
            xm.set(u, v, cur);
            let fd = (ssim(&xp, &y) - ssim(&xm, &y)) / (2.0 * h);
            let an = grad.get(u, v)[c];
            assert!(
                (fd - an).abs() < 1e-6 * fd.abs().max(an.abs()).max(1e-3),
                "({u},{v},{c}): fd {fd} vs {an}"
            );
        }
    }
}
