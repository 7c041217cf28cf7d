#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hierrec/config.hpp"
#include "hierrec/errors.hpp"

using namespace hierrec;
using nlohmann::json;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("defaults survive a json round trip") {
    const ExperimentConfig d;
    const json j = to_json(d);
    const ExperimentConfig back = config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.training.learning_rate == 1e-4);
    CHECK(back.training.gamma == 1.0);
    CHECK(back.training.alpha == 1.0);
    CHECK(back.evaluation.protocol.budgets == std::vector<std::size_t>{10, 30});
}

TEST_CASE("partial documents merge into the defaults") {
    const auto c = config_from_json(json{{"training", {{"episodes", 12}}}, {"seed", 3}});
    CHECK(c.training.episodes == 12);
    CHECK(c.seed == 3);
    CHECK(c.training.batch_size == TrainConfig{}.batch_size);
}

TEST_CASE("unknown keys and wrong types are config errors") {
    CHECK_THROWS_AS(config_from_json(json{{"nope", 1}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"training", {{"epochs", 1}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"training", {{"episodes", "many"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"training", 5}}), ConfigError);
}

TEST_CASE("overrides are typed by the default leaf") {
    json tree = to_json(ExperimentConfig{});
    apply_overrides(tree, {"training.episodes=7", "output_dir=out/x", "evaluation.budgets=[5,15]",
                           "training.baseline=true", "training.learning_rate=5e-4"});
    const auto c = config_from_json(tree);
    CHECK(c.training.episodes == 7);
    CHECK(c.output_dir == "out/x");
    CHECK(c.evaluation.protocol.budgets == std::vector<std::size_t>{5, 15});
    CHECK(c.training.baseline);
    CHECK(c.training.learning_rate == 5e-4);

    CHECK_THROWS_AS(apply_overrides(tree, {"training.nope=1"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(tree, {"training.episodes"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(tree, {"training.episodes=abc"}), ConfigError);
}

TEST_CASE("load_config validates and applies overrides") {
    const auto p = write_temp("hierrec_cfg_ok.json", "{\n  // comment\n  \"seed\": 9\n}\n");
    const auto c = load_config(p, {"training.episodes=3"});
    CHECK(c.seed == 9);
    CHECK(c.evaluation.protocol.base_seed == 9);
    CHECK(c.training.episodes == 3);

    CHECK_THROWS_AS(load_config(p, {"training.learning_rate=0.002"}), ConfigError);
    CHECK_THROWS_AS(load_config(p, {"simulator.kind=iekt"}), ConfigError);
    CHECK_THROWS_AS(load_config(std::filesystem::temp_directory_path() / "missing_hierrec.json"), ConfigError);

    const auto bad = write_temp("hierrec_cfg_bad.json", "{ \"seed\": ");
    CHECK_THROWS_AS(load_config(bad), ConfigError);
    std::filesystem::remove(p);
    std::filesystem::remove(bad);
}
