//! Straight-line reference implementations used as test oracles. Nothing here
//! calls into the library: the generator, shuffle, probe, optimizer and
//! online-code accounting are written out again from their definitions.

#![allow(dead_code)]

pub struct Xoshiro {
    s: [u64; 4],
}

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Xoshiro {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let s = [
            splitmix_next(&mut state),
            splitmix_next(&mut state),
            splitmix_next(&mut state),
            splitmix_next(&mut state),
        ];
        Self { s }
    }

    pub fn next(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    pub fn below(&mut self, bound: usize) -> usize {
        ((u128::from(self.next()) * bound as u128) >> 64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / 9_007_199_254_740_992.0
    }
}

/// Stream `index` under `seed`: one SplitMix64 step from `seed + index * gamma`.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    splitmix_next(&mut state)
}

pub fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut g = Xoshiro::new(seed);
    let mut v: Vec<usize> = (0..n).collect();
    let mut i = n;
    while i > 1 {
        i -= 1;
        let j = g.below(i + 1);
        v.swap(i, j);
    }
    v
}

/// Two-layer ReLU probe with weights in plain nested vectors.
#[derive(Clone, Debug)]
pub struct RefProbe {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl RefProbe {
    pub fn init(d: usize, h: usize, k: usize, seed: u64) -> Self {
        let mut g = Xoshiro::new(stream_seed(seed, 0));
        let mut draw = |bound: f64| bound * (2.0 * g.unit() - 1.0);
        let a = 1.0 / (d as f64).sqrt();
        let b = 1.0 / (h as f64).sqrt();
        let w1 = (0..h).map(|_| (0..d).map(|_| draw(a)).collect()).collect();
        let b1 = (0..h).map(|_| draw(a)).collect();
        let w2 = (0..k).map(|_| (0..h).map(|_| draw(b)).collect()).collect();
        let b2 = (0..k).map(|_| draw(b)).collect();
        Self { w1, b1, w2, b2 }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.w1.iter().flatten().copied().collect();
        out.extend(&self.b1);
        out.extend(self.w2.iter().flatten());
        out.extend(&self.b2);
        out
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).max(0.0))
            .collect()
    }

    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        let hid = self.hidden(x);
        let logits: Vec<f64> = self
            .w2
            .iter()
            .zip(&self.b2)
            .map(|(row, b)| row.iter().zip(&hid).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.iter().map(|e| e / total).collect()
    }

    pub fn nll(&self, x: &[f64], y: usize) -> f64 {
        -self.probs(x)[y].ln()
    }

    /// Mean loss and gradient over the given examples, by hand-written backprop.
    pub fn grad(&self, xs: &[&[f64]], ys: &[usize]) -> (f64, Vec<f64>) {
        let (h, d, k) = (self.w1.len(), self.w1[0].len(), self.w2.len());
        let mut gw1 = vec![vec![0.0; d]; h];
        let mut gb1 = vec![0.0; h];
        let mut gw2 = vec![vec![0.0; h]; k];
        let mut gb2 = vec![0.0; k];
        let mut loss = 0.0;
        let m = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let hid = self.hidden(x);
            let p = self.probs(x);
            loss += -p[y].ln();
            let dz: Vec<f64> = (0..k).map(|c| (p[c] - f64::from(u8::from(c == y))) / m).collect();
            for c in 0..k {
                gb2[c] += dz[c];
                for j in 0..h {
                    gw2[c][j] += dz[c] * hid[j];
                }
            }
            for j in 0..h {
                if hid[j] <= 0.0 {
                    continue;
                }
                let back: f64 = (0..k).map(|c| dz[c] * self.w2[c][j]).sum();
                gb1[j] += back;
                for i in 0..d {
                    gw1[j][i] += back * x[i];
                }
            }
        }
        let g = RefProbe { w1: gw1, b1: gb1, w2: gw2, b2: gb2 };
        (loss / m, g.flat())
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for row in self.w1.iter_mut() {
            row.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.b1.iter_mut().for_each(|w| *w = it.next().unwrap());
        for row in self.w2.iter_mut() {
            row.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.b2.iter_mut().for_each(|w| *w = it.next().unwrap());
    }
}

pub struct RefTraining {
    pub hidden: usize,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

fn adam_update(theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], t: i32, lr: f64) {
    for i in 0..theta.len() {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        let mh = m[i] / (1.0 - 0.9f64.powi(t));
        let vh = v[i] / (1.0 - 0.999f64.powi(t));
        theta[i] -= lr * mh / (vh.sqrt() + 1e-8);
    }
}

/// Mini-batch Adam training with validation early stopping (or a fixed epoch
/// count when `val` is empty).
#[allow(clippy::too_many_arguments)]
pub fn ref_train(
    xs: &[Vec<f64>],
    ys: &[usize],
    val: &[usize],
    fit: &[usize],
    k: usize,
    seed: u64,
    cfg: &RefTraining,
    fixed_epochs: usize,
) -> RefProbe {
    let d = xs[0].len();
    let mut probe = RefProbe::init(d, cfg.hidden, k, seed);
    let mut theta = probe.flat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut t = 0;
    let mut order_rng = Xoshiro::new(stream_seed(seed, 1));
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut lr = cfg.lr;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut bad = 0;
    let epochs = if val.is_empty() { fixed_epochs } else { cfg.max_epochs };
    for _ in 0..epochs {
        let mut i = order.len();
        while i > 1 {
            i -= 1;
            let j = order_rng.below(i + 1);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch) {
            let bx: Vec<&[f64]> = chunk.iter().map(|&p| xs[fit[p]].as_slice()).collect();
            let by: Vec<usize> = chunk.iter().map(|&p| ys[fit[p]]).collect();
            probe.set_flat(&theta);
            let (_, g) = probe.grad(&bx, &by);
            t += 1;
            adam_update(&mut theta, &mut m, &mut v, &g, t, lr);
        }
        if val.is_empty() {
            continue;
        }
        probe.set_flat(&theta);
        let loss = val.iter().map(|&i| probe.nll(&xs[i], ys[i])).sum::<f64>() / val.len() as f64;
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, theta.clone()));
            bad = 0;
        } else {
            bad += 1;
            lr *= 0.5;
            if bad >= cfg.patience {
                break;
            }
        }
    }
    probe.set_flat(&best.map_or(theta, |(_, w)| w));
    probe
}

pub const REF_FRACTIONS: [f64; 11] = [0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0];

pub fn ref_schedule(n: usize, k: usize) -> Vec<usize> {
    let mut ends: Vec<usize> = Vec::new();
    for (i, f) in REF_FRACTIONS.iter().enumerate() {
        let mut t = (f * n as f64).round() as usize;
        if i == 0 {
            t = t.max(k.max(2));
        } else if t <= ends[i - 1] {
            t = ends[i - 1] + 1;
        }
        ends.push(t);
    }
    assert_eq!(*ends.last().unwrap(), n);
    ends
}

/// Online codelength in bits: uniform code for the first portion, then each
/// block coded by a probe trained on everything before it.
pub fn ref_online_codelength(xs: &[Vec<f64>], ys: &[usize], k: usize, seed: u64, cfg: &RefTraining) -> (f64, Vec<f64>) {
    let n = xs.len();
    let ends = ref_schedule(n, k);
    let order = shuffled(n, stream_seed(seed, 0));
    let mut blocks = Vec::new();
    for i in 0..ends.len() - 1 {
        let probe_seed = stream_seed(seed, i as u64 + 1);
        let seen = &order[..ends[i]];
        let held_n = ((seen.len() as f64 * 0.1).round() as usize).clamp(1, 1000);
        let inner = shuffled(seen.len(), stream_seed(probe_seed, 2));
        let (val, fit): (Vec<usize>, Vec<usize>) = if seen.len() < held_n + 2 {
            (Vec::new(), inner.iter().map(|&p| seen[p]).collect())
        } else {
            (inner[..held_n].iter().map(|&p| seen[p]).collect(), inner[held_n..].iter().map(|&p| seen[p]).collect())
        };
        let probe = ref_train(xs, ys, &val, &fit, k, probe_seed, cfg, 20);
        let nats: f64 = order[ends[i]..ends[i + 1]].iter().map(|&j| probe.nll(&xs[j], ys[j])).sum();
        blocks.push(nats / std::f64::consts::LN_2);
    }
    let total = ends[0] as f64 * (k as f64).log2() + blocks.iter().sum::<f64>();
    (total, blocks)
}
