use rand_distr::{Distribution, StandardNormal};

use crate::rng::Rng;
use crate::scalar::Scalar;

/// LOS vehicle-to-vehicle path loss in dB with a 3 m distance floor.
pub fn path_loss_v2v<T: Scalar>(distance: T, carrier_ghz: T) -> T {
    let d = distance.max(T::lit(3.0));
    T::lit(22.7) * d.log10() + T::lit(41.0) + T::lit(20.0) * (carrier_ghz / T::lit(5.0)).log10()
}

/// Vehicle-to-BS path loss in dB over the 3-D distance, with a 10 m floor.
pub fn path_loss_v2i<T: Scalar>(distance: T) -> T {
    let d = distance.max(T::lit(10.0));
    T::lit(128.1) + T::lit(37.6) * (d / T::lit(1000.0)).log10()
}

/// One update of distance-correlated log-normal shadowing (dB).
///
/// `S' = rho * S + sqrt(1 - rho^2) * N(0, std_db)` with
/// `rho = exp(-moved / decorrelation)`; the stationary marginal is
/// `N(0, std_db)`.
pub fn shadowing(prev_db: f64, moved: f64, std_db: f64, decorrelation: f64, rng: &mut Rng) -> f64 {
    let rho = if decorrelation > 0.0 { (-moved.abs() / decorrelation).exp() } else { 0.0 };
    let z: f64 = StandardNormal.sample(rng);
    rho * prev_db + (1.0 - rho * rho).sqrt() * std_db * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn v2v_floor_value() {
        let expected = 22.7 * 3f64.log10() + 41.0 + 20.0 * 0.4f64.log10();
        assert!((path_loss_v2v(3.0f64, 2.0) - expected).abs() < 1e-12);
        assert!((expected - 43.87).abs() < 0.005);
        assert_eq!(path_loss_v2v(0.0f64, 2.0), path_loss_v2v(3.0f64, 2.0));
    }

    #[test]
    fn v2i_reference_points() {
        assert!((path_loss_v2i(1000.0f64) - 128.1).abs() < 1e-12);
        assert!((path_loss_v2i(100.0f64) - 90.5).abs() < 1e-12);
        assert_eq!(path_loss_v2i(1.0f64), path_loss_v2i(10.0f64));
    }

    #[test]
    fn monotone_in_distance() {
        let mut prev_v2v = path_loss_v2v(3.0f64, 2.0);
        let mut prev_v2i = path_loss_v2i(10.0f64);
        for k in 1..200 {
            let d = 3.0 + 10.0 * k as f64;
            let a = path_loss_v2v(d, 2.0);
            let b = path_loss_v2i(d + 10.0);
            assert!(a > prev_v2v && b > prev_v2i);
            prev_v2v = a;
            prev_v2i = b;
        }
    }

    #[test]
    fn generic_over_f32() {
        let a = path_loss_v2i(100.0f32);
        assert!((a - 90.5).abs() < 1e-4);
    }

    #[test]
    fn shadowing_limits() {
        let mut r = rng::seeded(3, 0);
        assert_eq!(shadowing(4.2, 0.0, 3.0, 10.0, &mut r), 4.2);
        // Far move: independent of the previous value.
        let mut a = rng::seeded(5, 0);
        let mut b = rng::seeded(5, 0);
        let x = shadowing(100.0, 1e6, 3.0, 10.0, &mut a);
        let y = shadowing(-100.0, 1e6, 3.0, 10.0, &mut b);
        assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn shadowing_stationary_std() {
        let mut r = rng::seeded(17, 0);
        let n = 100_000;
        let mut s = 0.0;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            s = shadowing(s, 5.0, 3.0, 10.0, &mut r);
            sum += s;
            sum2 += s * s;
        }
        let mean = sum / n as f64;
        let std = (sum2 / n as f64 - mean * mean).sqrt();
        assert!((std - 3.0).abs() / 3.0 < 0.02, "std {std}");
    }
}
