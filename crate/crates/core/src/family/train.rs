// SPDX-License-Identifier: Apache-2.0

//! Logistic pair scorer and its trainer.

use log::debug;

use super::{FamilyError, FeatureVector};

pub const LEARNING_RATE: f64 = 0.1;
pub const ITERATIONS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub w: [f64; 7],
    pub bias: f64,
}

impl Weights {
    pub const ZERO: Weights = Weights { w: [0.0; 7], bias: 0.0 };

    /// Weights calibrated on the seed-7 default synthetic lake.
    pub const DEFAULT: Weights = Weights {
        w: super::defaults::W,
        bias: super::defaults::BIAS,
    };

    pub const DEFAULT_SEED: u64 = super::defaults::SEED;

    pub fn params(&self) -> [f64; 8] {
        let mut p = [0.0; 8];
        p[..7].copy_from_slice(&self.w);
        p[7] = self.bias;
        p
    }

    pub fn from_params(p: [f64; 8]) -> Weights {
        let mut w = [0.0; 7];
        w.copy_from_slice(&p[..7]);
        Weights { w, bias: p[7] }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite()) && self.bias.is_finite()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `σ(w·f + bias)`.
pub fn score_pair(fv: &FeatureVector, w: &Weights) -> f64 {
    let f = fv.to_array();
    sigmoid(w.w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() + w.bias)
}

/// Numerically stable `log(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss and its gradient (7 weights, then the bias).
pub fn loss_and_gradient(examples: &[(FeatureVector, f64)], w: &Weights) -> (f64, [f64; 8]) {
    let mut loss = 0.0;
    let mut grad = [0.0; 8];
    for (fv, y) in examples {
        let f = fv.to_array();
        let z = w.w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() + w.bias;
        // -[y log σ(z) + (1-y) log(1-σ(z))] = softplus(z) - y z
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for k in 0..7 {
            grad[k] += r * f[k];
        }
        grad[7] += r;
    }
    let n = examples.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

/// Mean logistic loss alone.
pub fn loss(examples: &[(FeatureVector, f64)], w: &Weights) -> f64 {
    loss_and_gradient(examples, w).0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOutcome {
    pub weights: Weights,
    pub loss: f64,
}

/// Full-batch gradient descent from zero weights.
pub fn train_weights(examples: &[(FeatureVector, f64)]) -> Result<TrainOutcome, FamilyError> {
    if examples.iter().any(|(_, y)| *y != 0.0 && *y != 1.0) {
        return Err(FamilyError::Training("labels must be 0 or 1".into()));
    }
    let positives = examples.iter().filter(|(_, y)| *y == 1.0).count();
    if positives == 0 || positives == examples.len() {
        return Err(FamilyError::Training("need at least one example of each label".into()));
    }
    let mut p = Weights::ZERO.params();
    let mut current = 0.0;
    for it in 0..ITERATIONS {
        let (l, g) = loss_and_gradient(examples, &Weights::from_params(p));
        current = l;
        if it % 500 == 0 {
            debug!("iteration {it}: loss {l:.6}");
        }
        for k in 0..8 {
            p[k] -= LEARNING_RATE * g[k];
        }
    }
    let weights = Weights::from_params(p);
    let final_loss = loss(examples, &weights);
    debug!("trained: loss {current:.6} -> {final_loss:.6}");
    Ok(TrainOutcome {
        weights,
        loss: final_loss,
    })
}

/// Text record: `w1..w7`, `bias` and `seed`, one `key = value` per line.
pub fn write_weights(w: &Weights, seed: u64) -> String {
    let mut out = String::new();
    for (k, v) in w.w.iter().enumerate() {
        out.push_str(&format!("w{} = {v:?}\n", k + 1));
    }
    out.push_str(&format!("bias = {:?}\nseed = {seed}\n", w.bias));
    out
}

pub fn parse_weights(text: &str) -> Result<(Weights, u64), FamilyError> {
    let mut w = [None; 7];
    let (mut bias, mut seed) = (None, None);
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| FamilyError::Weights(format!("line {}: {m}", n + 1));
        let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
        let (k, v) = (k.trim(), v.trim());
        let num = || {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad("expected a finite number"))
        };
        match k {
            "bias" => bias = Some(num()?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad("expected an integer seed"))?),
            _ => {
                let idx = k
                    .strip_prefix('w')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|d| (1..=7).contains(d))
                    .ok_or_else(|| bad(&format!("unknown key `{k}`")))?;
                w[idx - 1] = Some(num()?);
            }
        }
    }
    let missing = |k: &str| FamilyError::Weights(format!("missing `{k}`"));
    let mut out = [0.0; 7];
    for (k, v) in w.iter().enumerate() {
        out[k] = v.ok_or_else(|| missing(&format!("w{}", k + 1)))?;
    }
    Ok((
        Weights {
            w: out,
            bias: bias.ok_or_else(|| missing("bias"))?,
        },
        seed.ok_or_else(|| missing("seed"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(f1: f64) -> FeatureVector {
        FeatureVector {
            schema_jaccard: f1,
            ..FeatureVector::default()
        }
    }

    #[test]
    fn zero_weights_score_half() {
        assert_eq!(score_pair(&FeatureVector::default(), &Weights::ZERO), 0.5);
    }

    #[test]
    fn separable_toy_set() {
        let ex = vec![(fv(1.0), 1.0), (fv(0.0), 0.0), (fv(1.0), 1.0), (fv(0.0), 0.0)];
        let out = train_weights(&ex).unwrap();
        for (f, y) in &ex {
            assert_eq!(score_pair(f, &out.weights) >= 0.5, *y == 1.0);
        }
        assert!(out.loss < 0.1);
    }

    #[test]
    fn degenerate_labels() {
        assert!(train_weights(&[(fv(1.0), 1.0)]).is_err());
        assert!(train_weights(&[]).is_err());
        assert!(train_weights(&[(fv(1.0), 1.0), (fv(0.0), 0.5)]).is_err());
    }

    #[test]
    fn weights_text_round_trip() {
        let w = Weights {
            w: [0.1, -2.5, 3.0, 1e-9, 0.0, 7.25, -0.3333333333333333],
            bias: -4.125,
        };
        let (back, seed) = parse_weights(&write_weights(&w, 99)).unwrap();
        assert_eq!((back, seed), (w, 99));
        assert!(parse_weights("w1 = 1").is_err());
        assert!(parse_weights("w8 = 1").is_err());
    }

    #[test]
    fn defaults_are_finite_and_confident_on_identical_tables() {
        assert!(Weights::DEFAULT.is_finite());
        let ones = FeatureVector::from_array([1.0; 7]);
        assert!(score_pair(&ones, &Weights::DEFAULT) > 0.9);
    }
}
