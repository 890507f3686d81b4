// SPDX-License-Identifier: Apache-2.0

//! Shipped scorer weights, produced by `tempolake train --seed 7` on the
//! default synthetic lake.

pub const SEED: u64 = 7;
pub const W: [f64; 7] = [
    0.3801054658647241,
    0.4111254297490718,
    3.0811034310062073,
    4.470424954432953,
    3.012735454944073,
    0.24092337840266348,
    2.783453698533017,
];
pub const BIAS: f64 = -6.089451157455144;
