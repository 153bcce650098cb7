//! The ask/answer planner: a dueling Q-network over planner states.
//!
//! Architecture: one shared affine trunk with ReLU (`2d + k -> hidden`), a
//! value head (`hidden -> 1`), and an advantage head (`hidden -> 2`),
//! combined as `Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')`. The mean
//! centering makes the decomposition identifiable and gives the exact
//! identity `Q(s, Ask) + Q(s, Answer) = 2 V(s)`.
//!
//! The decision rule is `ask_value(s) = sigmoid(Q(s, Ask) - Q(s, Answer))`
//! with Ask chosen when the value is >= 0.5 — monotonicity of the sigmoid
//! makes that the same thing as the Q argmax with ties going to Ask.
//!
//! Training is mean-squared error against caller-supplied targets with
//! analytic gradients and a hand-rolled Adam step; no autograd. Parameters
//! live in one flat vector in fixed (trunk, value head, advantage head)
//! order, which the probe API, the optimizer, and the checkpoint codec all
//! share.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::encoder::State;
use crate::error::{Error, Result};
use crate::rng::{uniform_f64, uniform_index, uniform_range};

/// The two things the system can do with a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Ask,
    Answer,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Ask => 0,
            Action::Answer => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Ask
        } else {
            Action::Answer
        }
    }
}

/// Adam moments; not part of the checkpoint (checkpoints carry inference
/// parameters only).
#[derive(Debug, Clone)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One supervised example for a gradient step: fit `Q(state, action)`
/// toward `target`.
#[derive(Debug, Clone, Copy)]
pub struct TrainExample<'a> {
    pub state: &'a State,
    pub action: Action,
    pub target: f64,
}

/// Dueling Q-network with flat parameter storage.
#[derive(Debug, Clone)]
pub struct QNetwork {
    d: usize,
    k: usize,
    hidden: usize,
    params: Vec<f64>,
    adam: AdamState,
}

/// Offsets into the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    input: usize,
    hidden: usize,
    w1: usize,
    b1: usize,
    wv: usize,
    bv: usize,
    wa: usize,
    ba: usize,
    total: usize,
}

impl Layout {
    fn new(input: usize, hidden: usize) -> Layout {
        let w1 = 0;
        let b1 = w1 + hidden * input;
        let wv = b1 + hidden;
        let bv = wv + hidden;
        let wa = bv + 1;
        let ba = wa + 2 * hidden;
        let total = ba + 2;
        Layout {
            input,
            hidden,
            w1,
            b1,
            wv,
            bv,
            wa,
            ba,
            total,
        }
    }
}

impl QNetwork {
    fn check_dims(d: usize, k: usize, hidden: usize) -> Result<()> {
        if d == 0 || k == 0 || hidden == 0 {
            return Err(Error::InvalidParam(
                "network dims d, k, hidden must all be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Glorot-uniform weights (`limit = sqrt(6 / (fan_in + fan_out))`),
    /// zero biases. Fill order is fixed: trunk, value head, advantage head.
    pub fn init(d: usize, k: usize, hidden: usize, rng: &mut impl RngCore) -> Result<QNetwork> {
        Self::check_dims(d, k, hidden)?;
        let layout = Layout::new(2 * d + k, hidden);
        let mut params = vec![0.0; layout.total];

        let lim_w1 = (6.0 / (layout.input + hidden) as f64).sqrt();
        for slot in params[layout.w1..layout.b1].iter_mut() {
            *slot = uniform_range(rng, -lim_w1, lim_w1);
        }
        let lim_wv = (6.0 / (hidden + 1) as f64).sqrt();
        for slot in params[layout.wv..layout.bv].iter_mut() {
            *slot = uniform_range(rng, -lim_wv, lim_wv);
        }
        let lim_wa = (6.0 / (hidden + 2) as f64).sqrt();
        for slot in params[layout.wa..layout.ba].iter_mut() {
            *slot = uniform_range(rng, -lim_wa, lim_wa);
        }

        Ok(QNetwork {
            d,
            k,
            hidden,
            adam: AdamState {
                m: vec![0.0; layout.total],
                v: vec![0.0; layout.total],
                t: 0,
            },
            params,
        })
    }

    /// All-zero parameters; Q is identically zero. Useful as a neutral
    /// starting point in tests and examples.
    pub fn zeroed(d: usize, k: usize, hidden: usize) -> Result<QNetwork> {
        Self::check_dims(d, k, hidden)?;
        let layout = Layout::new(2 * d + k, hidden);
        Ok(QNetwork {
            d,
            k,
            hidden,
            adam: AdamState {
                m: vec![0.0; layout.total],
                v: vec![0.0; layout.total],
                t: 0,
            },
            params: vec![0.0; layout.total],
        })
    }

    fn layout(&self) -> Layout {
        Layout::new(2 * self.d + self.k, self.hidden)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        2 * self.d + self.k
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Read one parameter by flat index (trunk, value head, advantage head
    /// order — the same order the checkpoint uses).
    pub fn param(&self, i: usize) -> f64 {
        self.params[i]
    }

    /// Overwrite one parameter by flat index.
    pub fn set_param(&mut self, i: usize, value: f64) {
        self.params[i] = value;
    }

    fn flat(&self, state: &State) -> Result<Vec<f64>> {
        let x = state.concatenated();
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(x)
    }

    /// Forward pass pieces: hidden pre-activation, hidden activation,
    /// value, advantages, q-values.
    fn forward(&self, x: &[f64]) -> ForwardPass {
        let l = self.layout();
        let p = &self.params;
        let mut z = vec![0.0; l.hidden];
        for i in 0..l.hidden {
            let row = l.w1 + i * l.input;
            let mut acc = p[l.b1 + i];
            for (j, &xj) in x.iter().enumerate() {
                acc += p[row + j] * xj;
            }
            z[i] = acc;
        }
        let a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();

        let mut value = p[l.bv];
        for i in 0..l.hidden {
            value += p[l.wv + i] * a[i];
        }
        let mut adv = [p[l.ba], p[l.ba + 1]];
        for i in 0..l.hidden {
            adv[0] += p[l.wa + i] * a[i];
            adv[1] += p[l.wa + l.hidden + i] * a[i];
        }
        let mean = (adv[0] + adv[1]) / 2.0;
        let q = [value + adv[0] - mean, value + adv[1] - mean];
        ForwardPass { z, a, value, q }
    }

    /// `[Q(s, Ask), Q(s, Answer)]`.
    pub fn q_values(&self, state: &State) -> Result<[f64; 2]> {
        let x = self.flat(state)?;
        Ok(self.forward(&x).q)
    }

    /// The value-head output `V(s)`; by the mean-centered combination,
    /// `Q(s, Ask) + Q(s, Answer) = 2 V(s)`.
    pub fn state_value(&self, state: &State) -> Result<f64> {
        let x = self.flat(state)?;
        Ok(self.forward(&x).value)
    }

    /// `sigmoid(Q(s, Ask) - Q(s, Answer))`; Ask is indicated at >= 0.5.
    pub fn ask_value(&self, state: &State) -> Result<f64> {
        let q = self.q_values(state)?;
        Ok(sigmoid(q[0] - q[1]))
    }

    /// Greedy action: argmax over Q with ties going to Ask. Equivalent to
    /// `ask_value(s) >= 0.5`.
    pub fn greedy_action(&self, state: &State) -> Result<Action> {
        let q = self.q_values(state)?;
        Ok(if q[0] >= q[1] {
            Action::Ask
        } else {
            Action::Answer
        })
    }

    /// Mean squared error of the batch without touching gradients.
    pub fn loss_only(&self, batch: &[TrainExample<'_>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidParam("empty training batch".into()));
        }
        let mut loss = 0.0;
        for ex in batch {
            let x = self.flat(ex.state)?;
            let q = self.forward(&x).q;
            let e = q[ex.action.index()] - ex.target;
            loss += e * e;
        }
        Ok(loss / batch.len() as f64)
    }

    /// Batch MSE and its exact gradient w.r.t. every parameter, in flat
    /// parameter order. ReLU uses subgradient 0 at exactly 0.
    pub fn loss_and_grad(&self, batch: &[TrainExample<'_>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidParam("empty training batch".into()));
        }
        let l = self.layout();
        let p = &self.params;
        let mut grad = vec![0.0; l.total];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;

        for ex in batch {
            let x = self.flat(ex.state)?;
            let pass = self.forward(&x);
            let ai = ex.action.index();
            let e = pass.q[ai] - ex.target;
            loss += e * e * scale;

            // d loss / d q[ai] for the batch mean of squared errors.
            let g = 2.0 * e * scale;
            // q[a] = v + adv[a] - (adv[0] + adv[1]) / 2
            let dv = g;
            let mut dadv = [-g / 2.0, -g / 2.0];
            dadv[ai] += g;

            // Heads.
            grad[l.bv] += dv;
            grad[l.ba] += dadv[0];
            grad[l.ba + 1] += dadv[1];
            let mut da = vec![0.0; l.hidden];
            for i in 0..l.hidden {
                grad[l.wv + i] += dv * pass.a[i];
                grad[l.wa + i] += dadv[0] * pass.a[i];
                grad[l.wa + l.hidden + i] += dadv[1] * pass.a[i];
                da[i] = dv * p[l.wv + i]
                    + dadv[0] * p[l.wa + i]
                    + dadv[1] * p[l.wa + l.hidden + i];
            }

            // Trunk through the ReLU gate.
            for i in 0..l.hidden {
                if pass.z[i] > 0.0 {
                    let dz = da[i];
                    grad[l.b1 + i] += dz;
                    let row = l.w1 + i * l.input;
                    for (j, &xj) in x.iter().enumerate() {
                        grad[row + j] += dz * xj;
                    }
                }
            }
        }
        Ok((loss, grad))
    }

    /// One Adam step on the batch MSE (beta1 0.9, beta2 0.999, eps 1e-8,
    /// bias-corrected). Returns the loss *before* the update.
    pub fn gradient_step(&mut self, batch: &[TrainExample<'_>], lr: f64) -> Result<f64> {
        if lr <= 0.0 || !lr.is_finite() {
            return Err(Error::InvalidParam(format!("lr must be positive, got {lr}")));
        }
        let (loss, grad) = self.loss_and_grad(batch)?;
        self.adam.t += 1;
        let t = self.adam.t as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (i, &g) in grad.iter().enumerate() {
            self.adam.m[i] = ADAM_BETA1 * self.adam.m[i] + (1.0 - ADAM_BETA1) * g;
            self.adam.v[i] = ADAM_BETA2 * self.adam.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.adam.m[i] / bc1;
            let v_hat = self.adam.v[i] / bc2;
            self.params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        Ok(loss)
    }

    /// Copy the inference parameters of `other` (used for target-network
    /// syncs); optimizer moments are left alone.
    pub fn copy_params_from(&mut self, other: &QNetwork) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::DimMismatch {
                expected: self.params.len(),
                got: other.params.len(),
            });
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    /// Serialize as the `clarion-qnet v1` text format: a header line with
    /// the dims, then one parameter per line with 17 significant digits
    /// (round-trip exact for f64).
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "clarion-qnet v1 {} {} {}", self.d, self.k, self.hidden)?;
        for &p in &self.params {
            writeln!(w, "{p:.16e}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(&display, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(&display, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<QNetwork> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut lines = BufReader::new(file).lines();

        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(&display, e))?
            .ok_or_else(|| Error::Checkpoint(format!("{display}: empty file")))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "clarion-qnet" || parts[1] != "v1" {
            return Err(Error::Checkpoint(format!(
                "{display}: bad header {header:?}"
            )));
        }
        let parse_dim = |s: &str, name: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| {
                Error::Checkpoint(format!("{display}: bad {name} in header: {s:?}"))
            })
        };
        let d = parse_dim(parts[2], "d")?;
        let k = parse_dim(parts[3], "k")?;
        let hidden = parse_dim(parts[4], "hidden")?;
        let mut net = QNetwork::zeroed(d, k, hidden)
            .map_err(|e| Error::Checkpoint(format!("{display}: {e}")))?;

        let expected = net.param_count();
        let mut count = 0;
        for line in lines {
            let line = line.map_err(|e| Error::io(&display, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if count >= expected {
                return Err(Error::Checkpoint(format!(
                    "{display}: more than {expected} parameters"
                )));
            }
            let value: f64 = line.trim().parse().map_err(|_| {
                Error::Checkpoint(format!(
                    "{display}: bad parameter on line {}: {line:?}",
                    count + 2
                ))
            })?;
            net.params[count] = value;
            count += 1;
        }
        if count != expected {
            return Err(Error::Checkpoint(format!(
                "{display}: expected {expected} parameters, found {count}"
            )));
        }
        Ok(net)
    }
}

struct ForwardPass {
    z: Vec<f64>,
    a: Vec<f64>,
    value: f64,
    q: [f64; 2],
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Epsilon-greedy action choice: with probability `epsilon` a uniform
/// action, otherwise the greedy one (ties to Ask). Exactly one `f64` draw
/// is consumed, plus one index draw when exploring.
pub fn select_action(
    net: &QNetwork,
    state: &State,
    epsilon: f64,
    rng: &mut impl RngCore,
) -> Result<Action> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParam(format!(
            "epsilon must be in [0, 1], got {epsilon}"
        )));
    }
    if uniform_f64(rng) < epsilon {
        Ok(Action::from_index(uniform_index(rng, 2)))
    } else {
        net.greedy_action(state)
    }
}
