#pragma once

#include "hierrec/autodiff.hpp"

namespace hierrec {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam. Non-trainable parameters are skipped and never modified.
class Adam {
public:
    Adam(const ad::ParamStore& params, AdamConfig config);

    void step(ad::ParamStore& params, const ad::Gradients& grads);
    long steps() const noexcept { return t_; }

private:
    AdamConfig config_;
    ad::Gradients m_;
    ad::Gradients v_;
    long t_ = 0;
};

/// Rescales `grads` in place so that its global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_global_norm(ad::Gradients& grads, double max_norm);

}  // namespace hierrec
