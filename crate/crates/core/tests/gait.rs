use servo_sysid::gait::{
    Foot, DEFAULT_DOUBLE_SUPPORT, DEFAULT_STANCE_WIDTH, DEFAULT_STEP_DURATION, DEFAULT_Z_COM,
};
use servo_sysid::metrics::GRAVITY;
use servo_sysid::*;

fn command(vx: f64, vy: f64, wz: f64) -> VelocityCommand {
    VelocityCommand { vx, vy, wz }
}

fn marching_plan(steps: usize) -> FootstepPlan {
    plan_footsteps(
        command(0.0, 0.0, 0.0),
        steps,
        DEFAULT_STEP_DURATION,
        DEFAULT_STANCE_WIDTH,
    )
    .unwrap()
}

/// Periodic solution of `x'' = w2 (x - p)` by second-order central differences
/// on a cyclic grid. Solves the cyclic tridiagonal system with the
/// Sherman–Morrison correction.
fn periodic_fd(p: &[f64], h: f64, w2: f64) -> Vec<f64> {
    let n = p.len();
    let off = 1.0 / (h * h);
    let diag = -2.0 / (h * h) - w2;
    let rhs: Vec<f64> = p.iter().map(|v| -w2 * v).collect();

    let thomas = |d: &[f64], r: &[f64]| {
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        c[0] = off / d[0];
        y[0] = r[0] / d[0];
        for i in 1..n {
            let m = d[i] - off * c[i - 1];
            c[i] = off / m;
            y[i] = (r[i] - off * y[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        y
    };
    let gamma = -diag;
    let mut d = vec![diag; n];
    d[0] -= gamma;
    d[n - 1] -= off * off / gamma;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = off;
    let y = thomas(&d, &rhs);
    let z = thomas(&d, &u);
    let factor = (y[0] + off / gamma * y[n - 1]) / (1.0 + z[0] + off / gamma * z[n - 1]);
    y.iter().zip(&z).map(|(a, b)| a - factor * b).collect()
}

#[test]
fn marching_in_place_footholds() {
    let plan = marching_plan(6);
    for s in &plan.steps {
        assert_eq!(s.position[0], 0.0);
        let expected = if s.foot == Foot::Left { 0.04 } else { -0.04 };
        assert!((s.position[1] - expected).abs() < 1e-15);
    }
    assert_eq!(plan.steps[0].foot, Foot::Left);
}

#[test]
fn forward_walk_advances_per_step() {
    let plan = plan_footsteps(command(0.1, 0.0, 0.0), 4, 0.5, DEFAULT_STANCE_WIDTH).unwrap();
    for w in plan.steps.windows(2) {
        assert!((w[1].position[0] - w[0].position[0] - 0.05).abs() < 1e-12);
    }
}

#[test]
fn turning_headings_increase() {
    let plan = plan_footsteps(command(0.0, 0.0, 0.3), 6, 0.5, DEFAULT_STANCE_WIDTH).unwrap();
    for w in plan.steps.windows(2) {
        assert!(w[1].heading > w[0].heading);
    }
}

#[test]
fn zmp_stays_in_support_region() {
    for cmd in [
        command(0.0, 0.0, 0.0),
        command(0.15, 0.0, 0.0),
        command(0.05, 0.05, 0.4),
        command(-0.1, 0.02, -0.2),
    ] {
        let plan = plan_footsteps(cmd, 8, DEFAULT_STEP_DURATION, DEFAULT_STANCE_WIDTH).unwrap();
        let zmp = zmp_reference(&plan, 0.005).unwrap();
        for (i, p) in zmp.zmp.iter().enumerate() {
            let t = i as f64 * zmp.dt;
            let feet = plan.support_at(t);
            match feet.as_slice() {
                [single] => assert!(dist(*p, single.position) < 1e-12, "t={t}"),
                [a, b] => {
                    // Point on the segment between the two foot centres.
                    let ab = sub(b.position, a.position);
                    let ap = sub(*p, a.position);
                    let len2 = dot(ab, ab);
                    let s = dot(ap, ab) / len2;
                    assert!((-1e-12..=1.0 + 1e-12).contains(&s), "t={t}");
                    let cross = ab[0] * ap[1] - ab[1] * ap[0];
                    assert!(cross.abs() / len2.sqrt() < 1e-12, "t={t}");
                }
                _ => panic!("unexpected support set"),
            }
        }
    }
}

#[test]
fn mid_double_support_is_midpoint() {
    let plan = marching_plan(4);
    let ds = DEFAULT_DOUBLE_SUPPORT * DEFAULT_STEP_DURATION;
    let t = plan.steps[2].touchdown + ds / 2.0;
    let mid = [
        0.5 * (plan.steps[1].position[0] + plan.steps[2].position[0]),
        0.5 * (plan.steps[1].position[1] + plan.steps[2].position[1]),
    ];
    assert!(dist(plan.zmp_at(t), mid) < 1e-12);
}

#[test]
fn lipm_residual_and_reconstruction() {
    for cmd in [
        command(0.0, 0.0, 0.0),
        command(0.1, 0.0, 0.0),
        command(0.05, -0.03, 0.5),
    ] {
        let plan = plan_footsteps(cmd, 10, DEFAULT_STEP_DURATION, DEFAULT_STANCE_WIDTH).unwrap();
        let zmp = zmp_reference(&plan, 0.01).unwrap();
        let com = com_trajectory(&zmp, DEFAULT_Z_COM).unwrap();
        assert!(com.max_residual(&zmp) <= 1e-6);
        for (a, b) in com.implied_zmp().iter().zip(&zmp.zmp) {
            assert!(dist(*a, *b) <= 1e-6);
        }
    }
}

#[test]
fn marching_in_place_matches_dense_finite_differences() {
    let plan = marching_plan(8);
    let dt = 0.01;
    let zmp = zmp_reference(&plan, dt).unwrap();
    let com = com_trajectory(&zmp, DEFAULT_Z_COM).unwrap();

    let refine = 20;
    let h = dt / refine as f64;
    let n = (plan.duration() / h).round() as usize;
    let w2 = GRAVITY / DEFAULT_Z_COM;
    let dense_p: Vec<f64> = (0..n).map(|i| plan.zmp_at(i as f64 * h)[1]).collect();
    let dense = periodic_fd(&dense_p, h, w2);
    for i in 0..n {
        let (prev, next) = (dense[(i + n - 1) % n], dense[(i + 1) % n]);
        let lhs = (next - 2.0 * dense[i] + prev) / (h * h);
        assert!((lhs - w2 * (dense[i] - dense_p[i])).abs() < 1e-6);
    }

    let mut worst: f64 = 0.0;
    for (i, s) in com.samples.iter().enumerate().take(zmp.zmp.len() - 1) {
        worst = worst.max((s.position[1] - dense[i * refine]).abs());
    }
    println!("dense oracle max deviation {worst:e} m");
    assert!(worst <= 1e-4, "{worst:e}");

    // Lateral sway repeats every step with flipped sign, centred on the midline.
    let per_step = (DEFAULT_STEP_DURATION / dt).round() as usize;
    for i in 0..com.samples.len() - per_step {
        let a = com.samples[i].position[1];
        let b = com.samples[i + per_step].position[1];
        assert!((a + b).abs() < 1e-9, "i={i}");
    }
    let amplitude = com
        .samples
        .iter()
        .map(|s| s.position[1].abs())
        .fold(0.0, f64::max);
    assert!(amplitude > 0.0 && amplitude < DEFAULT_STANCE_WIDTH / 2.0);
}

#[test]
fn constant_zmp_is_a_fixed_point() {
    let zmp = ZmpReference {
        dt: 0.01,
        zmp: vec![[0.03, -0.02]; 200],
    };
    let com = com_trajectory(&zmp, DEFAULT_Z_COM).unwrap();
    for s in &com.samples {
        assert!(dist(s.position, [0.03, -0.02]) < 1e-15);
        assert_eq!(s.velocity, [0.0, 0.0]);
    }
}

#[test]
fn phase_on_unit_circle() {
    for i in 0..1000 {
        let t = i as f64 * 0.0137;
        let ph = phase_signal(t, 0.8).unwrap();
        assert!((ph.sin.hypot(ph.cos) - 1.0).abs() < 1e-15);
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}
