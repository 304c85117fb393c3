//! Bit-level transmitter and receiver plumbing: convolutional coding,
//! interleaving, Gray-mapped PAM and LLR bookkeeping.

pub mod bcjr;
pub mod conv;
pub mod interleaver;
pub mod llr;
pub mod pam;

pub use bcjr::{bcjr_decode, BcjrOutput};
pub use conv::ConvCode;
pub use interleaver::Interleaver;
pub use llr::{
    clamp_llr, extrinsic_bit_llrs, log_add, log_sum_exp, posterior_bit_llrs_from_log,
    soft_symbol_mean, soft_symbol_variance, symbol_log_priors, symbol_priors_from_llrs, LlrFrame,
    LlrKind, LLR_CLAMP, PROB_FLOOR,
};
pub use pam::PamConstellation;
