mod common;

use common::{gradient_error, gradient_instance};
use rvc_gep::wodt::loss::{logistic_loss, split_entropy, NodeData};

#[test]
fn split_entropy_gradient_matches_differences() {
    for seed in 0..20 {
        let inst = gradient_instance(seed);
        let data = NodeData {
            x: &inst.x,
            y: &inst.y,
            weight: &inst.w,
            dim: inst.dim,
        };
        let err = gradient_error(|t, g| split_entropy(&data, t, g), &inst.theta);
        assert!(err <= 1e-5, "seed {seed}: relative error {err}");
    }
}

#[test]
fn logistic_gradient_matches_differences() {
    for seed in 100..120 {
        let inst = gradient_instance(seed);
        let data = NodeData {
            x: &inst.x,
            y: &inst.y,
            weight: &inst.w,
            dim: inst.dim,
        };
        let err = gradient_error(|t, g| logistic_loss(&data, t, g, 1e-3), &inst.theta);
        assert!(err <= 1e-5, "seed {seed}: relative error {err}");
    }
}
