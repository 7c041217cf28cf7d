#include "hierrec/config.hpp"

#include <fstream>
#include <sstream>

#include "hierrec/errors.hpp"

namespace hierrec {

using nlohmann::json;

std::string to_string(CurriculumSource source) {
    switch (source) {
        case CurriculumSource::kss_reference: return "kss_reference";
        case CurriculumSource::synthetic: return "synthetic";
        case CurriculumSource::csv: return "csv";
    }
    return "?";
}

namespace {

CurriculumSource curriculum_source_from_string(const std::string& s) {
    if (s == "kss_reference") return CurriculumSource::kss_reference;
    if (s == "synthetic") return CurriculumSource::synthetic;
    if (s == "csv") return CurriculumSource::csv;
    throw ConfigError("curriculum.source must be kss_reference, synthetic or csv, got '" + s + "'");
}

bool compatible(const json& def, const json& given) {
    if (def.is_boolean()) return given.is_boolean();
    if (def.is_number_float()) return given.is_number();
    if (def.is_number_unsigned())
        return given.is_number_unsigned() || (given.is_number_integer() && given.get<std::int64_t>() >= 0);
    if (def.is_number_integer()) return given.is_number_integer();
    if (def.is_string()) return given.is_string();
    if (def.is_array()) return given.is_array();
    if (def.is_object()) return given.is_object();
    return false;
}

void merge(json& base, const json& given, const std::string& where) {
    if (!given.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (auto it = given.begin(); it != given.end(); ++it) {
        const std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        json& slot = base[it.key()];
        if (!compatible(slot, it.value()))
            throw ConfigError("config key '" + key + "' has the wrong type (expected " +
                              std::string(slot.type_name()) + ")");
        if (slot.is_object())
            merge(slot, it.value(), key);
        else
            slot = it.value();
    }
}

template <class T>
T get(const json& j, const char* key) {
    return j.at(key).get<T>();
}

}  // namespace

json to_json(const ExperimentConfig& c) {
    const auto& k = c.simulator.kss;
    const auto& kt = c.simulator.kt;
    const auto& p = c.evaluation.protocol;
    const auto& t = c.training;
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["curriculum"] = {{"source", to_string(c.curriculum.source)},
                       {"path", c.curriculum.path},
                       {"m", c.curriculum.m},
                       {"n", c.curriculum.n},
                       {"extra_concept_prob", c.curriculum.extra_concept_prob}};
    j["simulator"] = {
        {"kind", c.simulator.kind},
        {"kss",
         {{"preset", k.preset},
          {"discrimination", k.discrimination},
          {"guess", k.guess},
          {"mastery_gain", k.mastery_gain},
          {"locked_gain", k.locked_gain},
          {"prereq_threshold", k.prereq_threshold},
          {"ability_cap", k.ability_cap},
          {"max_steps", k.max_steps},
          {"init_ability_max", k.init_ability_max},
          {"target_min", k.target_min},
          {"target_max", k.target_max},
          {"answer_mode", to_string(k.answer_mode)}}},
        {"kt",
         {{"model_path", kt.model_path},
          {"hidden_dim", kt.sim.hidden_dim},
          {"embed_dim", kt.train.embed_dim},
          {"warmup_len", kt.sim.warmup_len},
          {"n_targets", kt.sim.n_targets},
          {"max_steps", kt.sim.max_steps},
          {"answer_mode", to_string(kt.sim.answer_mode)},
          {"epochs", kt.train.epochs},
          {"batch_size", kt.train.batch_size},
          {"learning_rate", kt.train.learning_rate},
          {"heldout_fraction", kt.train.heldout_fraction},
          {"max_grad_norm", kt.train.max_grad_norm}}},
        {"logs", {{"path", c.simulator.logs.path}, {"students", c.simulator.logs.students}, {"steps", c.simulator.logs.steps}}},
    };
    const auto& enc = c.model.encoder;
    j["encoder"] = {{"d_a", enc.d_a}, {"d_z", enc.d_z}, {"d_h", enc.d_h}, {"d_m", enc.d_m}, {"heads", enc.heads}};
    const auto& pol = c.model.policy;
    j["policy"] = {{"backbone", to_string(pol.backbone.kind)},
                   {"depth", pol.backbone.depth},
                   {"k", pol.k},
                   {"disable_high", pol.disable_high},
                   {"replace_backbone_with_linear", pol.replace_backbone_with_linear},
                   {"freeze_backbone", pol.freeze_backbone},
                   {"aux_hidden", pol.aux_hidden}};
    j["training"] = {{"gamma", t.gamma},
                     {"alpha", t.alpha},
                     {"learning_rate", t.learning_rate},
                     {"episodes", t.episodes},
                     {"batch_size", t.batch_size},
                     {"reward_mode", to_string(t.reward_mode)},
                     {"baseline", t.baseline},
                     {"max_grad_norm", t.max_grad_norm},
                     {"warmup_len", t.warmup_len},
                     {"steps", t.steps},
                     {"checkpoint_every", t.checkpoint_every}};
    j["evaluation"] = {{"budgets", p.budgets},
                       {"n_students", p.n_students},
                       {"coldstart", p.coldstart},
                       {"warmup_len", p.warmup_len},
                       {"seeds", p.seeds},
                       {"decode", to_string(c.evaluation.decode)},
                       {"checkpoint", c.evaluation.checkpoint},
                       {"include_random", c.evaluation.include_random},
                       {"sweep", {{"axis", to_string(c.evaluation.sweep.axis)}, {"values", c.evaluation.sweep.values}}}};
    return j;
}

ExperimentConfig config_from_json(const json& given) {
    json j = to_json(ExperimentConfig{});
    merge(j, given, "");
    ExperimentConfig c;
    try {
        c.seed = get<std::uint64_t>(j, "seed");
        c.output_dir = get<std::string>(j, "output_dir");

        const json& cur = j.at("curriculum");
        c.curriculum.source = curriculum_source_from_string(get<std::string>(cur, "source"));
        c.curriculum.path = get<std::string>(cur, "path");
        c.curriculum.m = get<std::size_t>(cur, "m");
        c.curriculum.n = get<std::size_t>(cur, "n");
        c.curriculum.extra_concept_prob = get<double>(cur, "extra_concept_prob");

        const json& sim = j.at("simulator");
        c.simulator.kind = get<std::string>(sim, "kind");
        const json& kss = sim.at("kss");
        auto& k = c.simulator.kss;
        k.preset = get<std::string>(kss, "preset");
        k.discrimination = get<double>(kss, "discrimination");
        k.guess = get<double>(kss, "guess");
        k.mastery_gain = get<double>(kss, "mastery_gain");
        k.locked_gain = get<double>(kss, "locked_gain");
        k.prereq_threshold = get<double>(kss, "prereq_threshold");
        k.ability_cap = get<double>(kss, "ability_cap");
        k.max_steps = get<std::size_t>(kss, "max_steps");
        k.init_ability_max = get<double>(kss, "init_ability_max");
        k.target_min = get<std::size_t>(kss, "target_min");
        k.target_max = get<std::size_t>(kss, "target_max");
        k.answer_mode = answer_mode_from_string(get<std::string>(kss, "answer_mode"));

        const json& kt = sim.at("kt");
        auto& t = c.simulator.kt;
        t.model_path = get<std::string>(kt, "model_path");
        t.sim.hidden_dim = t.train.hidden_dim = get<std::size_t>(kt, "hidden_dim");
        t.train.embed_dim = get<std::size_t>(kt, "embed_dim");
        t.sim.warmup_len = get<std::size_t>(kt, "warmup_len");
        t.sim.n_targets = get<std::size_t>(kt, "n_targets");
        t.sim.max_steps = get<std::size_t>(kt, "max_steps");
        t.sim.answer_mode = answer_mode_from_string(get<std::string>(kt, "answer_mode"));
        t.train.epochs = get<std::size_t>(kt, "epochs");
        t.train.batch_size = get<std::size_t>(kt, "batch_size");
        t.train.learning_rate = get<double>(kt, "learning_rate");
        t.train.heldout_fraction = get<double>(kt, "heldout_fraction");
        t.train.max_grad_norm = get<double>(kt, "max_grad_norm");

        const json& logs = sim.at("logs");
        c.simulator.logs.path = get<std::string>(logs, "path");
        c.simulator.logs.students = get<std::size_t>(logs, "students");
        c.simulator.logs.steps = get<std::size_t>(logs, "steps");

        const json& enc = j.at("encoder");
        c.model.encoder.d_a = get<std::size_t>(enc, "d_a");
        c.model.encoder.d_z = get<std::size_t>(enc, "d_z");
        c.model.encoder.d_h = get<std::size_t>(enc, "d_h");
        c.model.encoder.d_m = get<std::size_t>(enc, "d_m");
        c.model.encoder.heads = get<std::size_t>(enc, "heads");

        const json& pol = j.at("policy");
        auto& p = c.model.policy;
        p.backbone.kind = backbone_kind_from_string(get<std::string>(pol, "backbone"));
        p.backbone.depth = get<std::size_t>(pol, "depth");
        p.k = get<std::size_t>(pol, "k");
        p.disable_high = get<bool>(pol, "disable_high");
        p.replace_backbone_with_linear = get<bool>(pol, "replace_backbone_with_linear");
        p.freeze_backbone = get<bool>(pol, "freeze_backbone");
        p.aux_hidden = get<std::size_t>(pol, "aux_hidden");

        const json& tr = j.at("training");
        auto& tc = c.training;
        tc.gamma = get<double>(tr, "gamma");
        tc.alpha = get<double>(tr, "alpha");
        tc.learning_rate = get<double>(tr, "learning_rate");
        tc.episodes = get<std::size_t>(tr, "episodes");
        tc.batch_size = get<std::size_t>(tr, "batch_size");
        tc.reward_mode = reward_mode_from_string(get<std::string>(tr, "reward_mode"));
        tc.baseline = get<bool>(tr, "baseline");
        tc.max_grad_norm = get<double>(tr, "max_grad_norm");
        tc.warmup_len = get<std::size_t>(tr, "warmup_len");
        tc.steps = get<std::size_t>(tr, "steps");
        tc.checkpoint_every = get<std::size_t>(tr, "checkpoint_every");

        const json& ev = j.at("evaluation");
        auto& pr = c.evaluation.protocol;
        pr.budgets = get<std::vector<std::size_t>>(ev, "budgets");
        pr.n_students = get<std::size_t>(ev, "n_students");
        pr.coldstart = get<bool>(ev, "coldstart");
        pr.warmup_len = get<std::size_t>(ev, "warmup_len");
        pr.seeds = get<std::vector<std::uint64_t>>(ev, "seeds");
        c.evaluation.decode = decode_mode_from_string(get<std::string>(ev, "decode"));
        c.evaluation.checkpoint = get<std::string>(ev, "checkpoint");
        c.evaluation.include_random = get<bool>(ev, "include_random");
        c.evaluation.sweep.axis = sweep_axis_from_string(get<std::string>(ev.at("sweep"), "axis"));
        c.evaluation.sweep.values = get<std::vector<std::size_t>>(ev.at("sweep"), "values");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config value: ") + e.what());
    }
    c.evaluation.protocol.base_seed = c.seed;
    return c;
}

void apply_overrides(json& tree, const std::vector<std::string>& overrides) {
    const json defaults = to_json(ExperimentConfig{});
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + o + "' must look like section.key=value");
        const std::string path = o.substr(0, eq);
        const std::string text = o.substr(eq + 1);

        std::vector<std::string> keys;
        std::stringstream ss(path);
        for (std::string part; std::getline(ss, part, '.');) keys.push_back(part);

        const json* def = &defaults;
        json* slot = &tree;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (!def->is_object() || !def->contains(keys[i]))
                throw ConfigError("unknown config key '" + path + "'");
            def = &(*def)[keys[i]];
            if (i + 1 < keys.size() && !slot->contains(keys[i])) (*slot)[keys[i]] = json::object();
            slot = &(*slot)[keys[i]];
        }
        if (def->is_object()) throw ConfigError("'" + path + "' is a section, not a value");

        json value;
        if (def->is_string()) {
            value = text;
        } else {
            value = json::parse(text, nullptr, false);
            if (value.is_discarded()) throw ConfigError("cannot parse value '" + text + "' for '" + path + "'");
        }
        if (!compatible(*def, value))
            throw ConfigError("override '" + path + "' expects a " + std::string(def->type_name()));
        *slot = value;
    }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    json tree = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        tree = json::parse(in, nullptr, false, /*ignore_comments=*/true);
        if (tree.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
    }
    apply_overrides(tree, overrides);
    ExperimentConfig c = config_from_json(tree);
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    if (curriculum.source == CurriculumSource::csv) {
        if (curriculum.path.empty()) throw ConfigError("curriculum.path is required for the csv source");
        if (!std::filesystem::exists(curriculum.path))
            throw ConfigError("curriculum file not found: " + curriculum.path);
    }
    if (curriculum.source == CurriculumSource::synthetic) {
        if (curriculum.m == 0 || curriculum.n == 0) throw ConfigError("curriculum.m and curriculum.n must be positive");
        if (!(curriculum.extra_concept_prob >= 0.0 && curriculum.extra_concept_prob <= 1.0))
            throw ConfigError("curriculum.extra_concept_prob must be in [0, 1]");
    }
    if (simulator.kind != "kss" && simulator.kind != "kt")
        throw ConfigError("simulator.kind must be 'kss' or 'kt', got '" + simulator.kind + "'");
    if (simulator.kss.preset != "reference" && simulator.kss.preset != "synthetic")
        throw ConfigError("simulator.kss.preset must be 'reference' or 'synthetic'");
    if (simulator.kss.preset == "reference" && curriculum.source != CurriculumSource::kss_reference)
        throw ConfigError("simulator.kss.preset 'reference' needs curriculum.source 'kss_reference'");
    if (simulator.kss.target_min == 0 || simulator.kss.target_min > simulator.kss.target_max)
        throw ConfigError("simulator.kss needs 1 <= target_min <= target_max");
    if (simulator.logs.students == 0) throw ConfigError("simulator.logs.students must be positive");
    model.encoder.validate();
    if (model.policy.k == 0) throw ConfigError("policy.k must be >= 1");
    if (model.policy.backbone.depth == 0) throw ConfigError("policy.depth must be >= 1");
    training.validate();
    if (evaluation.protocol.budgets.empty()) throw ConfigError("evaluation.budgets must not be empty");
    if (evaluation.protocol.n_students == 0) throw ConfigError("evaluation.n_students must be >= 1");
    if (evaluation.protocol.seeds.empty()) throw ConfigError("evaluation.seeds must not be empty");
    if (evaluation.sweep.values.empty()) throw ConfigError("evaluation.sweep.values must not be empty");
}

}  // namespace hierrec
