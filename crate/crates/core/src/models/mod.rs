//! Linear reconstruction, the three nonlinear residual models and their
//! attention-weighted combination.

mod attention;
mod hapke;
mod mixing;

pub use attention::{
    attention_entropy, attention_weights, combined_residual, softmax, AttentionParams,
    ResidualStack, MECHANISMS, MECHANISM_NAMES,
};
pub use hapke::{
    h_function, hapke_residual, refl_to_ssa, ssa_to_refl, HapkeGeometry, HapkeTable, W_UPPER,
};
pub use mixing::{
    endmember_pairs, gbm_residual, lmm_reconstruct, pair_products, ppnm_fit_b, ppnm_residual,
    GbmParams, DEFAULT_B_MAX,
};
pub(crate) use mixing::{gbm_from_products, lmm_unchecked};

/// Index of each mechanism in attention vectors and residual stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Gbm = 0,
    Ppnm = 1,
    Hapke = 2,
}

impl Mechanism {
    pub const ALL: [Mechanism; MECHANISMS] = [Mechanism::Gbm, Mechanism::Ppnm, Mechanism::Hapke];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        MECHANISM_NAMES[self.index()]
    }

    pub fn one_hot(self) -> [f64; MECHANISMS] {
        let mut a = [0.0; MECHANISMS];
        a[self.index()] = 1.0;
        a
    }
}
