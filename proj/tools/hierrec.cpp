#include <fstream>
#include <iostream>
#include <streambuf>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hierrec/errors.hpp"
#include "hierrec/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Writes everything to two stream buffers (console and run log).
class TeeBuf final : public std::streambuf {
public:
    TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
    int overflow(int c) override {
        if (c == traits_type::eof()) return traits_type::not_eof(c);
        const auto ch = traits_type::to_char_type(c);
        if (a_->sputc(ch) == traits_type::eof() || (b_ && b_->sputc(ch) == traits_type::eof()))
            return traits_type::eof();
        return c;
    }
    int sync() override {
        const int r = a_->pubsync();
        return (b_ && b_->pubsync() != 0) ? -1 : r;
    }

private:
    std::streambuf* a_;
    std::streambuf* b_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical question recommender: data generation, training and evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "JSON experiment config (defaults when omitted)");
    app.add_option("--set", overrides, "Override a leaf value: section.key=value (repeatable)");

    auto* gen_logs = app.add_subcommand("gen-logs", "Generate interaction logs from the KSS simulator");
    auto* train_kt = app.add_subcommand("train-kt", "Train the knowledge-tracing simulator on logs");
    auto* train = app.add_subcommand("train", "Train the recommendation policy");
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a policy checkpoint against the Random baseline");
    auto* sweep = app.add_subcommand("sweep", "Evaluate a policy checkpoint along one sweep axis");
    for (auto* sub : {gen_logs, train_kt, train, evaluate, sweep}) {
        sub->add_option("-c,--config", config_path, "JSON experiment config");
        sub->add_option("--set", overrides, "Override a leaf value: section.key=value (repeatable)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const hierrec::ExperimentConfig config = hierrec::load_config(config_path, overrides);
        const hierrec::Workspace ws(config.output_dir);
        ws.create();
        std::ofstream run_log(ws.logs() / (command + ".log"), std::ios::trunc);
        TeeBuf tee(std::cout.rdbuf(), run_log ? run_log.rdbuf() : nullptr);
        std::ostream log(&tee);

        if (command == "gen-logs") {
            hierrec::cmd_gen_logs(config, log);
        } else if (command == "train-kt") {
            hierrec::cmd_train_kt(config, log);
        } else if (command == "train") {
            hierrec::cmd_train(config, log);
        } else if (command == "evaluate") {
            hierrec::cmd_evaluate(config, log);
        } else {
            hierrec::cmd_sweep(config, log);
        }
        log.flush();
        return kExitOk;
    } catch (const hierrec::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const hierrec::CheckpointMismatch& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
