//! Random-instance gradient checks shared by the gradient and acceptance targets.

use hashba::diff::{Tape, Var};
use hashba::field::MlpLayout;
use hashba::geom::{generate_rays, CameraIntrinsics, PoseSE3};
use hashba::hashgrid::{HashGrid, HashGridConfig};
use hashba::render::{composite, composite_backward};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Magnitudes below this are compared absolutely.
const FLOOR: f64 = 1e-6;

/// Worst relative error seen over a batch of checks.
#[derive(Debug, Default, Clone, Copy)]
pub struct GradReport {
    pub worst: f64,
    pub checks: usize,
    pub instances: usize,
}

impl GradReport {
    fn record(&mut self, analytic: f64, fd: f64) {
        let e = rel_err(analytic, fd);
        // NaN must never pass
        self.worst = if e.is_nan() { f64::INFINITY } else { self.worst.max(e) };
        self.checks += 1;
    }
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(FLOOR)
}

fn central(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn random_grid(rng: &mut ChaCha8Rng) -> HashGrid<f64> {
    let config = HashGridConfig {
        dim: rng.random_range(2..=4),
        levels: rng.random_range(2..=6),
        log2_table_size: rng.random_range(6..=10),
        features_per_level: rng.random_range(1..=4),
        base_resolution: rng.random_range(2..=6),
        max_resolution: rng.random_range(16..=96),
    };
    HashGrid::new(config, rng).unwrap()
}

/// A point whose scaled coordinates stay away from cell faces on every level,
/// so a finite-difference step never crosses into a neighboring cell.
fn interior_point(grid: &HashGrid<f64>, h: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..grid.config().dim).map(|_| rng.random_range(0.02..0.98)).collect();
        let clear = grid.resolutions().iter().all(|&n| {
            x.iter().all(|&v| {
                let s = v * n as f64;
                let f = s - s.floor();
                f > 1e3 * h * n as f64 && f < 1.0 - 1e3 * h * n as f64
            })
        });
        if clear {
            return x;
        }
    }
}

fn grid_objective(grid: &HashGrid<f64>, x: &[f64], up: &[f64]) -> f64 {
    let mut out = vec![0.0; grid.output_len()];
    grid.encode(x, &mut out).unwrap();
    out.iter().zip(up).map(|(a, b)| a * b).sum()
}

pub fn hash_table(instances: usize) -> GradReport {
    let mut report = GradReport { instances, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..instances {
        let mut grid = random_grid(&mut rng);
        let x = interior_point(&grid, 1e-7, &mut rng);
        let up: Vec<f64> = (0..grid.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut tg = vec![0.0; grid.params().len()];
        let mut ig = vec![0.0; grid.config().dim];
        grid.encode_backward(&x, &up, &mut tg, &mut ig).unwrap();

        let touched: Vec<usize> = (0..tg.len()).filter(|&i| tg[i] != 0.0).collect();
        assert!(!touched.is_empty());
        let mut picks: Vec<usize> = (0..6).map(|_| touched[rng.random_range(0..touched.len())]).collect();
        picks.extend((0..4).map(|_| rng.random_range(0..tg.len())));
        for i in picks {
            let orig = grid.params()[i];
            let fd = central(
                |v| {
                    grid.params_mut()[i] = v;
                    grid_objective(&grid, &x, &up)
                },
                orig,
                1e-4,
            );
            grid.params_mut()[i] = orig;
            report.record(tg[i], fd);
        }
    }
    report
}

pub fn hash_input(instances: usize) -> GradReport {
    let mut report = GradReport { instances, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let h = 1e-7;
    for _ in 0..instances {
        let grid = random_grid(&mut rng);
        let x = interior_point(&grid, h, &mut rng);
        let up: Vec<f64> = (0..grid.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut tg = vec![0.0; grid.params().len()];
        let mut ig = vec![0.0; grid.config().dim];
        grid.encode_backward(&x, &up, &mut tg, &mut ig).unwrap();
        for d in 0..x.len() {
            let fd = central(
                |v| {
                    let mut y = x.clone();
                    y[d] = v;
                    grid_objective(&grid, &y, &up)
                },
                x[d],
                h,
            );
            report.record(ig[d], fd);
        }
    }
    report
}

pub fn mlp(instances: usize) -> GradReport {
    let mut report = GradReport { instances, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..instances {
        let depth = rng.random_range(1..=3);
        let mut dims = vec![rng.random_range(2..=12)];
        for _ in 0..depth {
            dims.push(rng.random_range(4..=24));
        }
        dims.push(rng.random_range(1..=4));
        let offset = rng.random_range(0..5);
        let layout = MlpLayout::new(&dims, offset);
        let mut params = vec![0.0f64; offset + layout.param_count()];
        layout.init(&mut params, &mut rng);
        for p in params[offset..].iter_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let input: Vec<f64> = (0..layout.inputs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..layout.outputs()).map(|_| rng.random_range(-1.0..1.0)).collect();

        let eval = |params: &[f64], input: &[f64]| {
            let mut acts = vec![0.0; layout.activation_len()];
            layout.forward(params, input, &mut acts);
            layout.output(&acts).iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut acts = vec![0.0; layout.activation_len()];
        layout.forward(&params, &input, &mut acts);
        let mut pg = vec![0.0; params.len()];
        let mut scratch = vec![0.0; layout.activation_len()];
        let mut dg = vec![0.0; input.len()];
        layout.backward(&params, &acts, &up, &mut pg, &mut scratch, Some(&mut dg));
        assert!(pg[..offset].iter().all(|&g| g == 0.0));

        let h = 1e-6;
        for _ in 0..8 {
            let i = rng.random_range(offset..params.len());
            let mut p = params.clone();
            let fd = central(
                |v| {
                    p[i] = v;
                    eval(&p, &input)
                },
                params[i],
                h,
            );
            report.record(pg[i], fd);
        }
        for d in 0..input.len() {
            let mut y = input.clone();
            let fd = central(
                |v| {
                    y[d] = v;
                    eval(&params, &y)
                },
                input[d],
                h,
            );
            report.record(dg[d], fd);
        }
    }
    report
}

pub fn se3_rays(instances: usize) -> GradReport {
    let mut report = GradReport { instances, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for inst in 0..instances {
        let (w, hgt) = (rng.random_range(8..64u32), rng.random_range(8..64u32));
        let f = rng.random_range(20.0..80.0);
        let k = CameraIntrinsics::new(f, f * rng.random_range(0.9..1.1), w as f64 / 2.0, hgt as f64 / 2.0, w, hgt).unwrap();
        let scale = if inst % 5 == 0 { 1e-3 } else { 1.5 };
        let params: [f64; 6] = std::array::from_fn(|_| rng.random_range(-scale..scale));
        let pose = PoseSE3::from_params(params);
        let pix = (rng.random_range(0..w), rng.random_range(0..hgt));
        let g_o = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let g_d = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));

        let objective = |p: [f64; 6]| {
            let r = generate_rays(&k, &PoseSE3::from_params(p), &[pix]).unwrap()[0];
            g_o.dot(&r.origin) + g_d.dot(&r.direction)
        };
        let analytic = pose.jacobian().ray_param_grad(&k.camera_direction(pix.0, pix.1), &g_o, &g_d);
        for j in 0..6 {
            let fd = central(
                |v| {
                    let mut p = params;
                    p[j] = v;
                    objective(p)
                },
                params[j],
                1e-6,
            );
            report.record(analytic[j], fd);
        }
    }
    report
}

pub fn compositing(instances: usize) -> GradReport {
    let mut report = GradReport { instances, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..instances {
        let n = rng.random_range(1..=48);
        let sig: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..30.0)).collect();
        let col: Vec<[f64; 3]> = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect();
        let del: Vec<f64> = (0..n).map(|_| rng.random_range(0.005..0.05)).collect();
        let bg: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let d_rgb: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let d_op = rng.random_range(-1.0..1.0);
        let objective = |s: &[f64], c: &[[f64; 3]], d: &[f64]| {
            let r = composite(s, c, d, bg).unwrap();
            (0..3).map(|k| d_rgb[k] * r.rgb[k]).sum::<f64>() + d_op * r.opacity
        };
        let g = composite_backward(&sig, &col, &del, bg, d_rgb, d_op).unwrap();
        let h = 1e-6;
        for i in 0..n {
            let mut s = sig.clone();
            let fd = central(
                |v| {
                    s[i] = v;
                    objective(&s, &col, &del)
                },
                sig[i],
                h,
            );
            report.record(g.d_sigma[i], fd);
            let mut d = del.clone();
            let fd = central(
                |v| {
                    d[i] = v;
                    objective(&sig, &col, &d)
                },
                del[i],
                h,
            );
            report.record(g.d_delta[i], fd);
            for k in 0..3 {
                let mut c = col.clone();
                let fd = central(
                    |v| {
                        c[i][k] = v;
                        objective(&sig, &c, &del)
                    },
                    col[i][k],
                    h,
                );
                report.record(g.d_color[i][k], fd);
            }
        }
    }
    report
}

#[derive(Clone, Copy)]
enum Op {
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Exp(usize),
    LnSq(usize),
    Sin(usize),
    Cos(usize),
    Sigmoid(usize),
}

fn build(ops: &[Op], inputs: &[f64]) -> (Tape<f64>, Vec<Var>) {
    let mut t = Tape::new();
    let mut vars: Vec<Var> = inputs.iter().map(|&v| t.var(v)).collect();
    for op in ops {
        let v = match *op {
            Op::Add(a, b) => t.add(vars[a], vars[b]),
            Op::Sub(a, b) => t.sub(vars[a], vars[b]),
            Op::Mul(a, b) => t.mul(vars[a], vars[b]),
            Op::Neg(a) => t.neg(vars[a]),
            Op::Scale(a, c) => t.scale(vars[a], c),
            Op::Exp(a) => {
                let s = t.sin(vars[a]);
                t.exp(s)
            }
            Op::LnSq(a) => {
                let sq = t.mul(vars[a], vars[a]);
                let pos = t.add_const(sq, 1.0);
                t.ln(pos)
            }
            Op::Sin(a) => t.sin(vars[a]),
            Op::Cos(a) => t.cos(vars[a]),
            Op::Sigmoid(a) => t.sigmoid(vars[a]),
        };
        vars.push(v);
    }
    (t, vars)
}

pub fn tape_graphs(instances: usize) -> GradReport {
    let mut report = GradReport { instances, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for _ in 0..instances {
        let n_in = rng.random_range(1..=5);
        let inputs: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.5..1.5)).collect();
        let n_ops = rng.random_range(3..=30);
        let mut ops = Vec::with_capacity(n_ops);
        for i in 0..n_ops {
            let avail = n_in + i;
            let a = rng.random_range(0..avail);
            let b = rng.random_range(0..avail);
            ops.push(match rng.random_range(0..10) {
                0 => Op::Add(a, b),
                1 => Op::Sub(a, b),
                2 => Op::Mul(a, b),
                3 => Op::Neg(a),
                4 => Op::Scale(a, rng.random_range(-2.0..2.0)),
                5 => Op::Exp(a),
                6 => Op::LnSq(a),
                7 => Op::Sin(a),
                8 => Op::Cos(a),
                _ => Op::Sigmoid(a),
            });
        }
        let (tape, vars) = build(&ops, &inputs);
        let root = *vars.last().unwrap();
        let grads = tape.backward(root).unwrap();
        for d in 0..n_in {
            let fd = central(
                |v| {
                    let mut x = inputs.clone();
                    x[d] = v;
                    let (t, vs) = build(&ops, &x);
                    t.value(*vs.last().unwrap())
                },
                inputs[d],
                1e-6,
            );
            report.record(grads[vars[d].index()], fd);
        }
    }
    report
}
