#include "hierrec/optim.hpp"

#include <cmath>

namespace hierrec {

Adam::Adam(const ad::ParamStore& params, AdamConfig config)
    : config_(config), m_(params), v_(params) {}

void Adam::step(ad::ParamStore& params, const ad::Gradients& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ad::ParamId id{i};
        if (!params.trainable(id)) continue;
        const ad::Matrix& g = grads[id];
        ad::Matrix& m = m_[id];
        ad::Matrix& v = v_[id];
        m = config_.beta1 * m + (1.0 - config_.beta1) * g;
        v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
        params.value(id).array() -=
            config_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
    }
}

double clip_global_norm(ad::Gradients& grads, double max_norm) {
    const double norm = grads.norm();
    if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
    return norm;
}

}  // namespace hierrec
