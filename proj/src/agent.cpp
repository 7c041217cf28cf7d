#include "hierrec/agent.hpp"

#include "hierrec/checkpoint_io.hpp"
#include "hierrec/errors.hpp"
#include "hierrec/rng.hpp"

namespace hierrec {

nlohmann::json to_json(const ModelConfig& c) {
    return {
        {"encoder",
         {{"d_a", c.encoder.d_a}, {"d_z", c.encoder.d_z}, {"d_h", c.encoder.d_h}, {"d_m", c.encoder.d_m},
          {"heads", c.encoder.heads}}},
        {"policy",
         {{"backbone", {{"kind", to_string(c.policy.backbone.kind)}, {"depth", c.policy.backbone.depth}}},
          {"replace_backbone_with_linear", c.policy.replace_backbone_with_linear},
          {"aux_hidden", c.policy.aux_hidden}}},
    };
}

Agent::Agent(CurriculumMap curriculum, ModelConfig config, std::uint64_t init_seed)
    : curriculum_(std::move(curriculum)), config_(std::move(config)) {
    if (config_.policy.replace_backbone_with_linear) config_.policy.backbone.kind = BackboneKind::linear;
    if (config_.policy.aux_hidden < 1) throw ConfigError("aux_hidden must be >= 1");
    Rng rng(init_seed);
    const std::size_t m = curriculum_.num_concepts();
    const std::size_t n = curriculum_.num_questions();
    encoder_ = std::make_unique<Encoder>(params_, config_.encoder, m, n, rng);
    high_ = std::make_unique<DecisionNetwork>(params_, "policy.high", config_.policy.backbone,
                                              config_.encoder.d_m, m, rng);
    low_ = std::make_unique<DecisionNetwork>(params_, "policy.low", config_.policy.backbone,
                                             config_.encoder.d_m, n, rng);
    const auto d_h = static_cast<Eigen::Index>(config_.encoder.d_h);
    const auto hid = static_cast<Eigen::Index>(config_.policy.aux_hidden);
    aux_w1_ = params_.add_uniform("aux.w1", hid, d_h, d_h, rng);
    aux_b1_ = params_.add_zeros("aux.b1", hid, 1);
    aux_w2_ = params_.add_uniform("aux.w2", 1, hid, hid, rng);
    aux_b2_ = params_.add_zeros("aux.b2", 1, 1);
    if (config_.policy.freeze_backbone) {
        for (ad::ParamId id : high_->backbone_params()) params_.set_trainable(id, false);
        for (ad::ParamId id : low_->backbone_params()) params_.set_trainable(id, false);
    }
}

ad::Var Agent::predict_correct(ad::Tape& tape, ad::Var history) const {
    ad::Var hidden = tape.tanh(tape.affine(tape.param(aux_w1_), history, tape.param(aux_b1_)));
    return tape.sigmoid(tape.affine(tape.param(aux_w2_), hidden, tape.param(aux_b2_)));
}

std::uint64_t Agent::config_hash() const {
    std::uint64_t h = mix64(curriculum_.digest());
    return fnv1a(to_json(config_).dump(), h);
}

std::uint64_t Agent::backbone_hash() const {
    std::uint64_t h = fnv1a("backbone");
    for (const DecisionNetwork* net : {high_.get(), low_.get()})
        for (ad::ParamId id : net->backbone_params()) {
            const ad::Matrix& v = params_.value(id);
            h = fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()),
                                       sizeof(double) * static_cast<std::size_t>(v.size())),
                      h);
        }
    return h;
}

void Agent::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
    nlohmann::json meta = {{"config_hash", std::to_string(config_hash())},
                           {"model", to_json(config_)},
                           {"num_concepts", curriculum_.num_concepts()},
                           {"num_questions", curriculum_.num_questions()},
                           {"extra", extra}};
    write_checkpoint(path, kSchema, meta, params_);
}

std::unique_ptr<Agent> Agent::load(const std::filesystem::path& path, CurriculumMap curriculum,
                                   ModelConfig config, nlohmann::json* extra) {
    CheckpointReader reader(path, kSchema);
    auto agent = std::make_unique<Agent>(std::move(curriculum), std::move(config), 0);
    const std::string stored = reader.meta().value("config_hash", std::string{});
    if (stored != std::to_string(agent->config_hash()))
        throw CheckpointMismatch(path.string() +
                                 ": checkpoint was trained under a different curriculum or model config");
    reader.read_params(agent->params_);
    if (extra) *extra = reader.meta().value("extra", nlohmann::json{});
    return agent;
}

}  // namespace hierrec
