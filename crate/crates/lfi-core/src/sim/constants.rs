//! Summary standardization constants, computed once from 10⁴
//! prior-predictive simulations at seed 20240101 / stream 0 and pinned
//! here so ABC distances are reproducible. The ignored test
//! `regenerate_standardization` in `sim/mod.rs` recomputes and checks them.

pub const LV_STANDARDIZATION_SEED: u64 = 20240101;
pub const LV_STANDARDIZATION_DRAWS: usize = 10_000;

pub const LV_SUMMARY_MEAN: [f64; 9] = [
    9526.861052317183,
    53.19879602648988,
    3.752969969650495,
    6.14508936063273,
    0.21923497056489868,
    0.14714446011855645,
    0.8833667980110498,
    0.7813454793545561,
    0.2609198968509945,
];
pub const LV_SUMMARY_STD: [f64; 9] = [
    73055.80661697163,
    88.14533867853032,
    3.5250720317547057,
    1.2573988154963507,
    0.32518674033134914,
    0.27261714500539264,
    0.16127420167322046,
    0.2609488267172706,
    0.34500331358891484,
];

pub const MG1_STANDARDIZATION_SEED: u64 = 20240102;
pub const MG1_STANDARDIZATION_DRAWS: usize = 10_000;

pub const MG1_SUMMARY_MEAN: [f64; 5] = [
    5.511734916019092,
    16.016285952108916,
    30.37381507698913,
    58.193093339155425,
    168.38161971347898,
];
pub const MG1_SUMMARY_STD: [f64; 5] = [
    8.003947590510005,
    357.65702861686646,
    798.825437938717,
    1770.853199157407,
    4714.178608301187,
];
