use super::factors::*;
use super::*;
use crate::{Pose2d, Vec2d};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn tangent_diff(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], crate::wrap_angle(a[2] - b[2])]
}

const H: f64 = 1e-6;

fn rand_pose(rng: &mut ChaCha8Rng) -> Pose2d {
    Pose2d::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-3.0..3.0))
}

fn rand_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec2d {
    Vec2d::new(rng.random_range(-r..r), rng.random_range(-r..r))
}

fn bump_pose(p: &Pose2d, k: usize, h: f64) -> Pose2d {
    let mut v = [p.x, p.y, p.theta];
    v[k] += h;
    Pose2d { x: v[0], y: v[1], theta: v[2] }
}

fn bump_vec(p: Vec2d, k: usize, h: f64) -> Vec2d {
    if k == 0 {
        Vec2d::new(p.x + h, p.y)
    } else {
        Vec2d::new(p.x, p.y + h)
    }
}

fn pad<const N: usize>(e: [f64; N]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..N].copy_from_slice(&e);
    out
}

fn check_block(analytic: &Block<f64>, numeric: &[[f64; 3]; 3], rows: usize, cols: usize, what: &str) {
    for r in 0..rows {
        for c in 0..cols {
            let (a, n) = (analytic[r][c], numeric[r][c]);
            let err = (a - n).abs() / n.abs().max(1.0);
            assert!(err < 1e-5, "{what} J[{r}][{c}]: analytic {a} vs numeric {n}");
        }
    }
}

/// Central differences of a residual with `rows` components over a `cols`-dim input.
fn numeric<F: Fn(usize, f64) -> [f64; 3]>(rows: usize, cols: usize, f: F) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    for c in 0..cols {
        let (p, m) = (f(c, H), f(c, -H));
        let d = tangent_diff(p, m);
        for r in 0..rows {
            // only the 3-dim pose residuals carry an angle in the last slot
            let diff = if rows == 3 { d[r] } else { p[r] - m[r] };
            j[r][c] = diff / (2.0 * H);
        }
    }
    j
}

#[test]
fn odometry_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let (ti, tj) = (rand_pose(&mut rng), rand_pose(&mut rng));
        let z = ti.between(&tj).compose(&Pose2d::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.5..0.5),
        ));
        let (_, ji, jj) = relative_jacobians(&ti, &tj, &z);
        check_block(&ji, &numeric(3, 3, |k, h| relative_residual(&bump_pose(&ti, k, h), &tj, &z)), 3, 3, "odo/i");
        check_block(&jj, &numeric(3, 3, |k, h| relative_residual(&ti, &bump_pose(&tj, k, h), &z)), 3, 3, "odo/j");
    }
}

#[test]
fn registration_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let t = rand_pose(&mut rng);
        let (s, o) = (rand_vec(&mut rng, 30.0), rand_vec(&mut rng, 8.0));
        let (_, jp, js) = registration_jacobians(&t, s, o);
        check_block(&jp, &numeric(2, 3, |k, h| pad(registration_residual(&bump_pose(&t, k, h), s, o))), 2, 3, "reg/pose");
        check_block(&js, &numeric(2, 2, |k, h| pad(registration_residual(&t, bump_vec(s, k, h), o))), 2, 2, "reg/slot");
    }
}

#[test]
fn adjacent_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let base = rng.random_range(-PI..PI);
        let wk = Vec2d::from_angle(base).scale(2.5);
        let wp = Vec2d::from_angle(base + rng.random_range(-0.1..0.1)).scale(if rng.random_bool(0.5) { 2.5 } else { -2.5 });
        let sp = rand_vec(&mut rng, 30.0);
        let sk = sp + Vec2d::from_angle(base).scale(rng.random_range(2.0..3.0)) + rand_vec(&mut rng, 0.3);
        let (_, jk, jp) = adjacent_jacobians(sk, wk, sp, wp);
        check_block(&jk, &numeric(2, 2, |k, h| pad(adjacent_residual(bump_vec(sk, k, h), wk, sp, wp))), 2, 2, "adj/k");
        check_block(&jp, &numeric(2, 2, |k, h| pad(adjacent_residual(sk, wk, bump_vec(sp, k, h), wp))), 2, 2, "adj/p");
    }
}

#[test]
fn vertical_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 100 {
        let d = GlobalDirection::new(Vec2d::from_angle(rng.random_range(-PI..PI))).unwrap();
        let (sk, sp) = (rand_vec(&mut rng, 10.0), rand_vec(&mut rng, 10.0));
        let delta = sk - sp;
        let (a, b) = (delta.dot(d.dir()).abs(), delta.dot(d.perp()).abs());
        // stay away from the branch switch and the kink at zero
        if (a - b).abs() < 1e-3 || a.min(b) < 1e-3 {
            continue;
        }
        let (_, jk, jp) = vertical_jacobians(sk, sp, &d);
        check_block(&jk, &numeric(1, 2, |k, h| [vertical_residual(bump_vec(sk, k, h), sp, &d), 0.0, 0.0]), 1, 2, "vert/k");
        check_block(&jp, &numeric(1, 2, |k, h| [vertical_residual(sk, bump_vec(sp, k, h), &d), 0.0, 0.0]), 1, 2, "vert/p");
        checked += 1;
    }
}

#[test]
fn unary_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let m = rand_pose(&mut rng);
        let t = m.compose(&Pose2d::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)));
        let (_, j) = unary_jacobian(&t, &m);
        check_block(&j, &numeric(3, 3, |k, h| unary_residual(&bump_pose(&t, k, h), &m)), 3, 3, "unary");
    }
}

fn diag3(a: f64, b: f64, c: f64) -> Information<f64> {
    Information::diagonal(&[a, b, c]).unwrap()
}

fn iso2(w: f64) -> Information<f64> {
    Information::isotropic(2, w).unwrap()
}

#[test]
fn prior_alone_keeps_identity() {
    let mut g = FactorGraph::new();
    g.add_pose(0, Pose2d::new(0.3, -0.2, 0.1)).unwrap();
    g.add_prior(0, Pose2d::identity(), diag3(1e6, 1e6, 1e6)).unwrap();
    let rep = g.optimize(&OptimizerSettings::default()).unwrap();
    let p = g.pose(0).unwrap();
    assert!(p.x.abs() < 1e-6 && p.y.abs() < 1e-6 && p.theta.abs() < 1e-6);
    assert!(rep.converged && rep.final_cost <= rep.initial_cost);
}

#[test]
fn second_prior_and_missing_prior_rejected() {
    let mut g = FactorGraph::new();
    g.add_pose(0, Pose2d::identity()).unwrap();
    g.add_pose(1, Pose2d::new(1.0, 0.0, 0.0)).unwrap();
    g.add_factor(Factor::Odometry {
        from: 0,
        to: 1,
        relative: Pose2d::new(1.0, 0.0, 0.0),
        info: diag3(1.0, 1.0, 1.0),
    })
    .unwrap();
    assert!(matches!(g.optimize(&OptimizerSettings::default()), Err(Error::GaugeDeficient)));
    g.add_prior(0, Pose2d::identity(), diag3(1.0, 1.0, 1.0)).unwrap();
    assert!(matches!(g.add_prior(1, Pose2d::identity(), diag3(1.0, 1.0, 1.0)), Err(Error::DuplicatePrior)));
    assert!(matches!(g.add_prior(7, Pose2d::identity(), diag3(1.0, 1.0, 1.0)), Err(Error::DuplicatePrior) | Err(Error::UnknownNode(_))));
    assert!(matches!(
        g.add_factor(Factor::Registration { pose: 0, slot: 9, obs: Vec2d::zero(), info: iso2(1.0) }),
        Err(Error::UnknownNode(_))
    ));
}

#[test]
fn information_validation() {
    assert!(Information::<f64>::diagonal(&[1.0, 0.0]).is_err());
    assert!(Information::<f64>::diagonal(&[]).is_err());
    let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
    assert!(Information::from_matrix(3, m).is_ok());
    let bad = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    assert!(Information::from_matrix(2, bad).is_err());
    let asym = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    assert!(Information::from_matrix(2, asym).is_err());
    let mut g = FactorGraph::new();
    g.add_pose(0, Pose2d::identity()).unwrap();
    assert!(g.add_prior(0, Pose2d::identity(), iso2(1.0)).is_err());
}

#[test]
fn prior_against_fixed_neighbour_matches_closed_form() {
    // node 1 fixed at x = 1; prior pulls node 0 to 0, odometry says the gap is 0.5
    let (wp, wo) = (1.0, 3.0);
    let mut g = FactorGraph::new();
    g.add_pose(0, Pose2d::new(0.2, 0.0, 0.0)).unwrap();
    g.add_pose(1, Pose2d::new(1.0, 0.0, 0.0)).unwrap();
    g.set_fixed(NodeKey::Pose(1), true).unwrap();
    g.add_prior(0, Pose2d::identity(), diag3(wp, wp, wp)).unwrap();
    g.add_factor(Factor::Odometry {
        from: 0,
        to: 1,
        relative: Pose2d::new(0.5, 0.0, 0.0),
        info: diag3(wo, wo, wo),
    })
    .unwrap();
    g.optimize(&OptimizerSettings::default()).unwrap();
    let x = g.pose(0).unwrap().x;
    let expect = wo * 0.5 / (wp + wo);
    assert!((x - expect).abs() < 1e-9, "{x} vs {expect}");
    assert!(g.pose(0).unwrap().y.abs() < 1e-12);
}

#[test]
fn single_registration_snaps_slot() {
    let mut g = FactorGraph::new();
    let t = Pose2d::new(2.0, 1.0, 0.7);
    g.add_pose(0, t).unwrap();
    g.add_prior(0, t, diag3(1e6, 1e6, 1e6)).unwrap();
    g.add_slot(5, Vec2d::zero(), Vec2d::new(2.5, 0.0)).unwrap();
    let obs = Vec2d::new(3.0, -1.5);
    g.add_factor(Factor::Registration { pose: 0, slot: 5, obs, info: iso2(400.0) }).unwrap();
    g.optimize(&OptimizerSettings::default()).unwrap();
    let s = g.slot(5).unwrap().position;
    assert!((s - t.transform_point(obs)).norm() < 1e-9);
    // entry vector is metadata and survives untouched
    assert_eq!(g.slot(5).unwrap().entry, Vec2d::new(2.5, 0.0));
}

/// Three poses and two slots, with 0.1 m of injected odometry error.
fn toy_graph() -> FactorGraph<f64> {
    let truth = [Pose2d::identity(), Pose2d::new(2.0, 0.0, 0.1), Pose2d::new(4.0, 0.4, 0.2)];
    let slots = [Vec2d::new(2.0, 3.0), Vec2d::new(4.5, 3.2)];
    let mut g = FactorGraph::new();
    for (i, p) in truth.iter().enumerate() {
        g.add_pose(i as u64, p.compose(&Pose2d::new(0.05 * i as f64, -0.03, 0.01))).unwrap();
    }
    for (k, s) in slots.iter().enumerate() {
        g.add_slot(10 + k as u64, *s + Vec2d::new(0.2, 0.1), Vec2d::new(2.5, 0.0)).unwrap();
    }
    g.add_prior(0, truth[0], diag3(1e6, 1e6, 1e6)).unwrap();
    for i in 0..2 {
        let mut z = truth[i].between(&truth[i + 1]);
        z.x += 0.1;
        g.add_factor(Factor::Odometry { from: i as u64, to: i as u64 + 1, relative: z, info: diag3(100.0, 100.0, 1000.0) })
            .unwrap();
    }
    for (i, p) in truth.iter().enumerate() {
        for (k, s) in slots.iter().enumerate() {
            let obs = p.inverse_transform_point(*s);
            g.add_factor(Factor::Registration { pose: i as u64, slot: 10 + k as u64, obs, info: iso2(400.0) }).unwrap();
        }
    }
    g.add_factor(Factor::Adjacent { k: 11, p: 10, info: iso2(25.0) }).unwrap();
    g
}

/// Dense Gauss–Newton with finite-difference Jacobians and Gaussian elimination.
fn dense_oracle(g: &FactorGraph<f64>) -> Vec<f64> {
    let pose_ids: Vec<u64> = g.poses().map(|(id, _)| id).collect();
    let slot_ids: Vec<u64> = g.slots().map(|(id, _)| id).collect();
    let n = 3 * pose_ids.len() + 2 * slot_ids.len();
    let pack = |g: &FactorGraph<f64>| {
        let mut x = Vec::new();
        for (_, p) in g.poses() {
            x.extend([p.x, p.y, p.theta]);
        }
        for (_, s) in g.slots() {
            x.extend([s.position.x, s.position.y]);
        }
        x
    };
    let unpack = |g: &mut FactorGraph<f64>, x: &[f64]| {
        for (i, id) in pose_ids.iter().enumerate() {
            g.set_pose(*id, Pose2d { x: x[3 * i], y: x[3 * i + 1], theta: x[3 * i + 2] }).unwrap();
        }
        let o = 3 * pose_ids.len();
        for (k, id) in slot_ids.iter().enumerate() {
            g.set_slot_position(*id, Vec2d::new(x[o + 2 * k], x[o + 2 * k + 1])).unwrap();
        }
    };
    let mut work = g.clone();
    let mut x = pack(&work);
    for _ in 0..50 {
        let mut hm = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for f in work.factors().to_vec() {
            unpack(&mut work, &x);
            let e = work.residual(&f).unwrap();
            let d = e.len();
            let mut j = vec![vec![0.0; n]; d];
            for c in 0..n {
                let mut xp = x.clone();
                xp[c] += H;
                unpack(&mut work, &xp);
                let ep = work.residual(&f).unwrap();
                let mut xm = x.clone();
                xm[c] -= H;
                unpack(&mut work, &xm);
                let em = work.residual(&f).unwrap();
                for r in 0..d {
                    j[r][c] = (ep[r] - em[r]) / (2.0 * H);
                }
            }
            let info = f.info();
            for a in 0..n {
                for r in 0..d {
                    if j[r][a] == 0.0 {
                        continue;
                    }
                    for m in 0..d {
                        let w = j[r][a] * info.get(r, m);
                        b[a] -= w * e[m];
                        for c in 0..n {
                            hm[a][c] += w * j[m][c];
                        }
                    }
                }
            }
        }
        // Gaussian elimination with partial pivoting
        let mut aug: Vec<Vec<f64>> = hm.iter().zip(&b).map(|(row, bi)| row.iter().copied().chain([*bi]).collect()).collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &k| aug[i][col].abs().total_cmp(&aug[k][col].abs())).unwrap();
            aug.swap(col, piv);
            for r in col + 1..n {
                let f = aug[r][col] / aug[col][col];
                for c in col..=n {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
        let mut dx = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| aug[r][c] * dx[c]).sum();
            dx[r] = (aug[r][n] - s) / aug[r][r];
        }
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        if dx.iter().all(|d| d.abs() < 1e-13) {
            break;
        }
    }
    x
}

#[test]
fn toy_graph_matches_dense_oracle() {
    let mut g = toy_graph();
    let expect = dense_oracle(&g);
    let rep = g.optimize(&OptimizerSettings::default()).unwrap();
    assert!(rep.converged);
    let mut got = Vec::new();
    for (_, p) in g.poses() {
        got.extend([p.x, p.y, p.theta]);
    }
    for (_, s) in g.slots() {
        got.extend([s.position.x, s.position.y]);
    }
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-6, "{got:?}\n{expect:?}");
    }
    assert!(rep.per_kind[&FactorKind::Registration].count == 6);
    assert!(rep.final_cost > 0.0);
}

#[test]
fn gauge_translation_gives_same_optimum() {
    let mut a = toy_graph();
    let mut b = toy_graph();
    let shift = Pose2d::new(3.0, -2.0, 0.0);
    let ids: Vec<(u64, Pose2d)> = b.poses().collect();
    for (id, p) in ids {
        b.set_pose(id, Pose2d::new(p.x + shift.x, p.y + shift.y, p.theta)).unwrap();
    }
    let sl: Vec<(u64, SlotNode<f64>)> = b.slots().collect();
    for (id, s) in sl {
        b.set_slot_position(id, s.position + shift.translation()).unwrap();
    }
    a.optimize(&OptimizerSettings::default()).unwrap();
    b.optimize(&OptimizerSettings::default()).unwrap();
    for ((_, pa), (_, pb)) in a.poses().zip(b.poses()) {
        assert!(pa.distance(&pb) < 1e-6 && (pa.theta - pb.theta).abs() < 1e-6);
    }
    for ((_, sa), (_, sb)) in a.slots().zip(b.slots()) {
        assert!((sa.position - sb.position).norm() < 1e-6);
    }
}

#[test]
fn accepted_steps_never_increase_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..10 {
        let mut g = toy_graph();
        let ids: Vec<(u64, Pose2d)> = g.poses().collect();
        for (id, p) in ids.into_iter().skip(1) {
            g.set_pose(id, p.compose(&Pose2d::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.2..0.2))))
                .unwrap();
        }
        let d = GlobalDirection::new(Vec2d::new(1.0, 0.0)).unwrap();
        g.add_factor(Factor::GlobalVertical { k: 11, p: 10, dir: d, info: Information::scalar(25.0).unwrap() }).unwrap();
        let settings = OptimizerSettings { max_iters: 1, ..Default::default() };
        let mut last = g.total_cost().unwrap();
        for _ in 0..15 {
            let rep = g.optimize(&settings).unwrap();
            assert!(rep.final_cost <= rep.initial_cost);
            assert!((rep.initial_cost - last).abs() <= 1e-9 * last.max(1.0));
            last = rep.final_cost;
        }
    }
}

#[test]
fn zero_noise_chain_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut truth = vec![Pose2d::new(1.0, 2.0, 0.3)];
    for _ in 0..30 {
        let step = Pose2d::new(0.5, 0.0, rng.random_range(-0.1..0.1));
        truth.push(truth.last().unwrap().compose(&step));
    }
    let mut g = FactorGraph::new();
    for (i, p) in truth.iter().enumerate() {
        g.add_pose(i as u64, *p).unwrap();
    }
    g.add_prior(0, truth[0], diag3(1e6, 1e6, 1e6)).unwrap();
    for i in 0..truth.len() - 1 {
        let z = truth[i].between(&truth[i + 1]);
        g.add_factor(Factor::Odometry { from: i as u64, to: i as u64 + 1, relative: z, info: diag3(100.0, 100.0, 100.0) }).unwrap();
    }
    let rep = g.optimize(&OptimizerSettings::default()).unwrap();
    assert!(rep.final_cost < 1e-12);
    for (i, p) in g.poses() {
        assert!(p.distance(&truth[i as usize]) < 1e-6);
    }
}

#[test]
fn removing_slot_drops_its_factors() {
    let mut g = toy_graph();
    let before = g.factors().len();
    g.remove_slot(11).unwrap();
    // three registrations and one adjacency touched slot 11
    assert_eq!(g.factors().len(), before - 4);
    assert!(g.factors().iter().all(|f| !f.touches(NodeKey::Slot(11))));
    g.optimize(&OptimizerSettings::default()).unwrap();
}

#[test]
fn fixed_nodes_do_not_move() {
    let mut g = toy_graph();
    g.set_fixed(NodeKey::Slot(10), true).unwrap();
    let before = g.slot(10).unwrap();
    g.optimize(&OptimizerSettings::default()).unwrap();
    assert_eq!(g.slot(10).unwrap(), before);
}

#[test]
fn dump_lists_nodes_and_factors() {
    let g = toy_graph();
    let d = g.dump().unwrap();
    assert_eq!(d["poses"].as_array().unwrap().len(), 3);
    assert_eq!(d["slots"].as_array().unwrap().len(), 2);
    assert_eq!(d["factors"].as_array().unwrap().len(), g.factors().len());
    assert_eq!(d["factors"][0]["kind"], "prior");
    assert!(d["cost"].as_f64().unwrap() > 0.0);
}

#[test]
fn optimizes_in_single_precision() {
    let mut g: FactorGraph<f32> = FactorGraph::new();
    g.add_pose(0, crate::Pose2f::identity()).unwrap();
    g.add_pose(1, crate::Pose2f::new(1.2, 0.1, 0.05)).unwrap();
    g.add_prior(0, crate::Pose2f::identity(), Information::diagonal(&[1e4, 1e4, 1e4]).unwrap()).unwrap();
    g.add_factor(Factor::Odometry {
        from: 0,
        to: 1,
        relative: crate::Pose2f::new(1.0, 0.0, 0.0),
        info: Information::diagonal(&[1.0, 1.0, 1.0]).unwrap(),
    })
    .unwrap();
    g.optimize(&OptimizerSettings::default()).unwrap();
    let p = g.pose(1).unwrap();
    assert!((p.x - 1.0).abs() < 1e-3 && p.y.abs() < 1e-3 && p.theta.abs() < 1e-3);
}
