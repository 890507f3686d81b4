// SPDX-License-Identifier: Apache-2.0

//! Version-aware dataset discovery over data lakes that hold many
//! undocumented versions of the same tables.

pub mod change;
pub mod cli;
pub mod family;
pub mod index;
pub mod lineage;
pub mod pipeline;
pub mod query;
pub mod synth;
pub mod table;
