//! A synthetic instance of the excursion data used by the examples, the
//! tests and the `horseshoe` subcommand when no model file is given.
//!
//! Rates: `a = 0.1`, `b = 1`, `γ₁ = 0.4`, `γ₂ = 0.45`, a node tail block
//! `(−0.5, −0.6)` and a focus block `−0.7 ± 2i`. The entry point of the
//! excursion has `z₂¹ = 0.8`; the exit point carries an odd tail component so
//! that the two mirrored excursions land apart.

use serde::{Deserialize, Serialize};

use crate::global_map::{GlobalMapModel, GlobalMatrix};
use crate::normal_form::{FlowRates, NormalFormPoint, TailBlock, TailRate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub model: GlobalMapModel,
    pub rates: FlowRates,
    pub eta: f64,
}

pub const ETA: f64 = 1.5;
pub const X0_STAR: f64 = 1.0;
pub const Z2_STAR: f64 = 0.8;

pub fn core_matrix() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]
}

pub fn rates() -> FlowRates {
    FlowRates {
        a: 0.1,
        b: 1.0,
        gamma1: 0.4,
        gamma2: 0.45,
        tail: vec![
            TailBlock {
                rate: TailRate::Node { rates: [-0.5, -0.6] },
                parity: [1.0, -1.0],
            },
            TailBlock {
                rate: TailRate::Focus { decay: -0.7, freq: 2.0 },
                parity: [-1.0, -1.0],
            },
        ],
    }
}

pub fn model() -> GlobalMapModel {
    GlobalMapModel {
        q0_star: NormalFormPoint::new(X0_STAR, 0.0, 0.0, 0.0, vec![0.0, 0.8, 0.0, 0.0]),
        q1_star: NormalFormPoint::new(0.0, 0.0, ETA, Z2_STAR, vec![0.0; 4]),
        c: GlobalMatrix::with_identity_tail(core_matrix(), 4),
        quad_bound: 0.0,
        validity_radius: Some(ETA),
    }
}

pub fn instance() -> Instance {
    Instance {
        model: model(),
        rates: rates(),
        eta: ETA,
    }
}
