use rand_distr::{Distribution, Normal};

use crate::Pose2d;

use super::{rng_for, OdometrySample, SimNoiseConfig, Stream};

/// Dead-reckoned pose chain from perturbed true increments. Frame `k` is trajectory
/// index `k`; the first pose is the true first pose.
pub fn simulate_odometry(traj: &[Pose2d], noise: &SimNoiseConfig) -> Vec<OdometrySample> {
    let mut rng = rng_for(noise.seed, Stream::Odometry);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(traj.len());
    let Some(first) = traj.first() else {
        return out;
    };
    let mut pose = *first;
    out.push(OdometrySample { frame: 0, pose });
    for (k, pair) in traj.windows(2).enumerate() {
        let inc = pair[0].between(&pair[1]);
        let dist = inc.translation().norm();
        let s = dist.sqrt();
        let (nx, ny, nt): (f64, f64, f64) = (unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng));
        let noisy = Pose2d::new(
            inc.x + noise.odo_trans_sigma * s * nx,
            inc.y + noise.odo_trans_sigma * s * ny,
            inc.theta + noise.odo_drift_bias * dist + noise.odo_rot_sigma * s * nt,
        );
        pose = pose.compose(&noisy);
        out.push(OdometrySample {
            frame: k as u64 + 1,
            pose,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize, step: f64) -> Vec<Pose2d> {
        (0..=n).map(|i| Pose2d::new(5.0 + i as f64 * step, 3.0, 0.0)).collect()
    }

    #[test]
    fn zero_noise_is_ground_truth() {
        let traj: Vec<Pose2d> = (0..200)
            .map(|i| Pose2d::new(i as f64 * 0.1, (i as f64 * 0.05).sin(), 0.02 * i as f64))
            .collect();
        let odo = simulate_odometry(&traj, &SimNoiseConfig::noiseless(1));
        for (o, t) in odo.iter().zip(&traj) {
            assert!(o.pose.distance(t) < 1e-9);
            assert!(crate::wrap_angle(o.pose.theta - t.theta).abs() < 1e-12);
        }
        assert!(odo.windows(2).all(|w| w[0].frame < w[1].frame));
    }

    #[test]
    fn yaw_bias_matches_closed_form() {
        let (n, step, bias) = (1000usize, 0.1, 0.001);
        let traj = straight(n, step);
        let noise = SimNoiseConfig {
            odo_drift_bias: bias,
            ..SimNoiseConfig::noiseless(1)
        };
        let odo = simulate_odometry(&traj, &noise);
        let last = odo.last().unwrap().pose;
        assert!((last.theta - 0.1).abs() < 1e-12);
        // geometric series: Σ_{j<n} step·e^{i j φ}, φ = bias·step
        let phi = bias * step;
        let (re, im) = {
            let (c, s) = ((n as f64 * phi).cos(), (n as f64 * phi).sin());
            let (dc, ds) = (1.0 - phi.cos(), -phi.sin());
            let (nr, ni) = (1.0 - c, -s);
            let den = dc * dc + ds * ds;
            (step * (nr * dc + ni * ds) / den, step * (ni * dc - nr * ds) / den)
        };
        assert!((last.x - (5.0 + re)).abs() < 1e-9, "{} vs {}", last.x, 5.0 + re);
        assert!((last.y - (3.0 + im)).abs() < 1e-9);
        // error grows monotonically along the straight route
        let errs: Vec<f64> = odo.iter().zip(&traj).map(|(o, t)| o.pose.distance(t)).collect();
        assert!(errs.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn seeded_determinism() {
        let traj = straight(300, 0.1);
        let noise = SimNoiseConfig { seed: 42, ..Default::default() };
        assert_eq!(simulate_odometry(&traj, &noise), simulate_odometry(&traj, &noise));
        let other = SimNoiseConfig { seed: 43, ..Default::default() };
        assert_ne!(simulate_odometry(&traj, &noise), simulate_odometry(&traj, &other));
    }
}
