#pragma once

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "hierrec/autodiff.hpp"
#include "hierrec/curriculum.hpp"
#include "hierrec/encoder.hpp"
#include "hierrec/policy.hpp"

namespace hierrec {

struct PolicyConfig {
    BackboneConfig backbone;
    /// Concepts chosen per high-level step.
    std::size_t k = 1;
    /// Skip the high level: the low level scores every question.
    bool disable_high = false;
    bool replace_backbone_with_linear = false;
    /// Backbone transforms receive no updates (action embeddings still train).
    bool freeze_backbone = false;
    /// Hidden width of the proficiency head.
    std::size_t aux_hidden = 64;
};

struct ModelConfig {
    EncoderConfig encoder;
    PolicyConfig policy;
};

nlohmann::json to_json(const ModelConfig& config);

/// Encoder, both decision networks and the proficiency head, with all
/// parameters in one store.
class Agent {
public:
    static constexpr const char* kSchema = "hierrec.policy.v1";

    Agent(CurriculumMap curriculum, ModelConfig config, std::uint64_t init_seed);

    Agent(const Agent&) = delete;
    Agent& operator=(const Agent&) = delete;

    const CurriculumMap& curriculum() const noexcept { return curriculum_; }
    const ModelConfig& config() const noexcept { return config_; }
    const Encoder& encoder() const noexcept { return *encoder_; }
    const DecisionNetwork& high() const noexcept { return *high_; }
    const DecisionNetwork& low() const noexcept { return *low_; }
    ad::ParamStore& params() noexcept { return params_; }
    const ad::ParamStore& params() const noexcept { return params_; }

    /// ŷ = sigmoid(f_p(h)) as a 1x1 var.
    ad::Var predict_correct(ad::Tape& tape, ad::Var history) const;

    /// Digest of the curriculum and the architecture-relevant config.
    std::uint64_t config_hash() const;
    /// Digest of the backbone transform parameters of both levels.
    std::uint64_t backbone_hash() const;

    /// `extra` is stored alongside the architecture in the metadata line.
    void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
    /// Throws CheckpointMismatch when the stored config hash differs from
    /// the hash of (curriculum, config).
    static std::unique_ptr<Agent> load(const std::filesystem::path& path, CurriculumMap curriculum,
                                       ModelConfig config, nlohmann::json* extra = nullptr);

private:
    CurriculumMap curriculum_;
    ModelConfig config_;
    ad::ParamStore params_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<DecisionNetwork> high_;
    std::unique_ptr<DecisionNetwork> low_;
    ad::ParamId aux_w1_, aux_b1_, aux_w2_, aux_b2_;
};

}  // namespace hierrec
