#include "hierrec/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "hierrec/errors.hpp"
#include "hierrec/plot.hpp"

namespace hierrec {

void Workspace::create() const {
    for (const auto& dir : {checkpoints(), metrics(), results(), plots(), logs()})
        std::filesystem::create_directories(dir);
}

namespace {

IdDictionary dense_dictionary(std::size_t n) {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return IdDictionary::from_ids(std::move(ids));
}

std::filesystem::path or_default(const std::string& configured, const std::filesystem::path& fallback) {
    return configured.empty() ? fallback : std::filesystem::path(configured);
}

double window_mean(const std::vector<MetricsRow>& rows, std::size_t begin, std::size_t end) {
    if (begin >= end) return 0.0;
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += rows[i].delta;
    return s / static_cast<double>(end - begin);
}

}  // namespace

CurriculumContext build_curriculum(const ExperimentConfig& config) {
    const auto& c = config.curriculum;
    switch (c.source) {
        case CurriculumSource::kss_reference: {
            const std::size_t m = KssConfig::reference().n_items;
            return {CurriculumMap::one_to_one(m), dense_dictionary(m), dense_dictionary(m)};
        }
        case CurriculumSource::synthetic: {
            Rng rng(derive_seed(config.seed, "data", 0));
            return {make_synthetic_curriculum(c.m, c.n, c.extra_concept_prob, rng), dense_dictionary(c.n),
                    dense_dictionary(c.m)};
        }
        case CurriculumSource::csv: {
            if (!std::filesystem::exists(c.path)) throw ConfigError("curriculum file not found: " + c.path);
            CurriculumBundle b = read_curriculum_csv(std::filesystem::path(c.path));
            return {std::move(b.map), std::move(b.questions), std::move(b.concepts)};
        }
    }
    throw ConfigError("unsupported curriculum source");
}

std::unique_ptr<KssSimulator> build_kss(const ExperimentConfig& config, const CurriculumMap& map,
                                        std::size_t max_steps) {
    const auto& s = config.simulator.kss;
    KssConfig k;
    if (s.preset == "reference") {
        k = KssConfig::reference();
    } else {
        Rng rng(derive_seed(config.seed, "data", 1));
        k = KssSimulator::synthetic_config(map, rng);
    }
    k.discrimination = s.discrimination;
    k.guess = s.guess;
    k.mastery_gain = s.mastery_gain;
    k.locked_gain = s.locked_gain;
    k.prereq_threshold = s.prereq_threshold;
    k.ability_cap = s.ability_cap;
    k.max_steps = max_steps ? max_steps : s.max_steps;
    k.init_ability_max = s.init_ability_max;
    k.target_min = s.target_min;
    k.target_max = s.target_max;
    k.answer_mode = s.answer_mode;
    return std::make_unique<KssSimulator>(map, std::move(k));
}

std::filesystem::path logs_path(const ExperimentConfig& config) {
    return or_default(config.simulator.logs.path, Workspace(config.output_dir).logs() / "interactions.csv");
}

std::filesystem::path kt_model_path(const ExperimentConfig& config) {
    return or_default(config.simulator.kt.model_path, Workspace(config.output_dir).checkpoints() / "kt_model.ckpt");
}

std::filesystem::path policy_path(const ExperimentConfig& config) {
    return or_default(config.evaluation.checkpoint, Workspace(config.output_dir).checkpoints() / "policy.ckpt");
}

std::unique_ptr<Simulator> build_simulator(const ExperimentConfig& config, const CurriculumContext& ctx) {
    if (config.simulator.kind == "kss") return build_kss(config, ctx.map);
    const auto path = kt_model_path(config);
    if (!std::filesystem::exists(path))
        throw ConfigError("KT model not found: " + path.string() + " (run train-kt first)");
    auto model = std::make_shared<const KtModel>(KtModel::load(path));
    return std::make_unique<KtSimulator>(ctx.map, std::move(model), config.simulator.kt.sim);
}

std::vector<RawLogRow> generate_logs(const KssSimulator& sim, const IdDictionary& questions,
                                     std::size_t students, std::size_t steps, std::uint64_t seed) {
    if (steps > sim.max_steps()) throw InvalidArgument("log sessions exceed the simulator's max_steps");
    const std::size_t n = sim.curriculum().num_questions();
    std::vector<RawLogRow> rows;
    rows.reserve(students * steps);
    for (std::size_t s = 0; s < students; ++s) {
        Rng rng(derive_seed(seed, "student", s));
        LearningTarget target = sim.sample_targets(rng);
        SessionStart start = sim.reset(target, 0, rng.next_u64());
        for (std::size_t t = 0; t < steps; ++t) {
            const QuestionId q(static_cast<std::int32_t>(rng.below(n)));
            const int y = start.session->answer(q);
            rows.push_back({std::to_string(s), questions.name(q.idx()), y, "1", static_cast<std::int64_t>(t)});
        }
    }
    return rows;
}

GenLogsSummary cmd_gen_logs(const ExperimentConfig& config, std::ostream& log) {
    const Workspace ws(config.output_dir);
    ws.create();
    const CurriculumContext ctx = build_curriculum(config);
    const auto& lc = config.simulator.logs;
    const auto sim = build_kss(config, ctx.map, std::max(lc.steps, config.simulator.kss.max_steps));
    const auto rows = generate_logs(*sim, ctx.questions, lc.students, lc.steps, derive_seed(config.seed, "data", 2));
    GenLogsSummary out{logs_path(config), rows.size()};
    if (out.path.has_parent_path()) std::filesystem::create_directories(out.path.parent_path());
    std::ofstream f(out.path, std::ios::trunc);
    if (!f) throw ConfigError("cannot write logs to " + out.path.string());
    write_log_csv(f, rows);
    std::ofstream cur(ws.logs() / "curriculum.csv", std::ios::trunc);
    write_curriculum_csv(cur, ctx.map);
    log << "gen-logs: " << lc.students << " students x " << lc.steps << " steps = " << rows.size()
        << " rows -> " << out.path.string() << '\n';
    return out;
}

std::string format_auc(const std::optional<double>& auc) {
    if (!auc) return "undefined (single-class held-out labels)";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *auc);
    return buf;
}

TrainKtSummary cmd_train_kt(const ExperimentConfig& config, std::ostream& log) {
    const Workspace ws(config.output_dir);
    const auto path = logs_path(config);
    if (!std::filesystem::exists(path)) throw ConfigError("log file not found: " + path.string());
    ws.create();
    const CurriculumContext ctx = build_curriculum(config);
    const LogParseResult parsed = parse_logs(read_log_csv(path), ctx.questions);
    std::vector<LearningHistory> histories;
    histories.reserve(parsed.sessions.size());
    for (const auto& s : parsed.sessions) histories.push_back(s.history);

    DktTrainConfig dc = config.simulator.kt.train;
    dc.seed = derive_seed(config.seed, "kt", 0);
    DktTrainResult trained = dkt_train(histories, ctx.map.num_questions(), dc);

    TrainKtSummary out;
    out.model_path = kt_model_path(config);
    out.report = trained.report;
    for (const auto& [id, count] : parsed.unknown_questions) out.skipped_rows += count;
    if (out.model_path.has_parent_path()) std::filesystem::create_directories(out.model_path.parent_path());
    trained.model.save(out.model_path);

    std::ofstream m(ws.metrics() / "kt_train.csv", std::ios::trunc);
    m << "epoch,loss\n";
    m.precision(17);
    for (std::size_t e = 0; e < out.report.epoch_loss.size(); ++e) m << e + 1 << ',' << out.report.epoch_loss[e] << '\n';

    if (out.skipped_rows)
        log << "train-kt: skipped " << out.skipped_rows << " rows with unknown question ids\n";
    log << "train-kt: " << out.report.train_sessions << " training sessions, " << out.report.heldout_sessions
        << " held-out sessions\n";
    log << "train-kt: held-out AUC " << format_auc(out.report.heldout_auc) << '\n';
    log << "train-kt: model -> " << out.model_path.string() << '\n';
    return out;
}

TrainSummary cmd_train(const ExperimentConfig& config, std::ostream& log) {
    const Workspace ws(config.output_dir);
    ws.create();
    const CurriculumContext ctx = build_curriculum(config);
    const auto sim = build_simulator(config, ctx);
    if (config.model.policy.k > ctx.map.num_concepts())
        throw ConfigError("policy.k exceeds the number of concepts");
    Agent agent(ctx.map, config.model, derive_seed(config.seed, "init", 0));
    const std::uint64_t train_seed = derive_seed(config.seed, "train", 0);

    auto meta = [&](std::size_t done) {
        return nlohmann::json{{"episodes_done", done},
                              {"simulator", sim->kind()},
                              {"rng", {{"train_seed", train_seed}, {"next_episode", done}}}};
    };
    const CheckpointHook hook = [&](const Agent& a, std::size_t done) {
        a.save(ws.checkpoints() / ("policy_ep" + std::to_string(done) + ".ckpt"), meta(done));
        log << "train: checkpoint at episode " << done << '\n';
    };

    TrainResult result;
    try {
        result = train_run(config.training, *sim, agent, train_seed, hook);
    } catch (const DivergenceDetected&) {
        agent.save(ws.checkpoints() / "policy_last_good.ckpt", meta(0));
        log << "train: divergence detected; last good parameters saved\n";
        throw;
    }

    TrainSummary out;
    out.checkpoint = ws.checkpoints() / "policy.ckpt";
    out.metrics = ws.metrics() / "train.csv";
    out.episodes = result.metrics.size();
    agent.save(out.checkpoint, meta(out.episodes));
    write_metrics_csv(out.metrics, result.metrics);

    const std::size_t w = std::min<std::size_t>(100, out.episodes);
    out.first_window_delta = window_mean(result.metrics, 0, w);
    out.last_window_delta = window_mean(result.metrics, out.episodes - w, out.episodes);

    std::vector<double> x, delta, loss;
    for (const auto& r : result.metrics) {
        x.push_back(static_cast<double>(r.episode));
        delta.push_back(r.delta);
        loss.push_back(r.loss_total);
    }
    write_svg(ws.plots() / "learning_curve.svg",
              {"Training learning effect", "episode", "delta_u (moving average, 100)",
               {{"delta_u", x, moving_average(delta, 100)}}});
    write_svg(ws.plots() / "loss_curve.svg",
              {"Training loss", "episode", "loss_total (moving average, 100)",
               {{"loss_total", x, moving_average(loss, 100)}}});

    log << "train: " << out.episodes << " episodes, mean delta_u first " << w << " = " << out.first_window_delta
        << ", last " << w << " = " << out.last_window_delta << '\n';
    log << "train: checkpoint -> " << out.checkpoint.string() << '\n';
    return out;
}

namespace {

std::unique_ptr<Agent> load_policy(const ExperimentConfig& config, const CurriculumContext& ctx) {
    const auto path = policy_path(config);
    if (!std::filesystem::exists(path)) throw ConfigError("policy checkpoint not found: " + path.string());
    return Agent::load(path, ctx.map, config.model);
}

EvalProtocol protocol_of(const ExperimentConfig& config) {
    EvalProtocol p = config.evaluation.protocol;
    p.base_seed = config.seed;
    return p;
}

void log_result(std::ostream& log, const EvalResult& r, const EvalProtocol& p) {
    for (std::size_t b : p.budgets) {
        std::vector<double> per_seed;
        for (const auto& c : r.cells)
            if (c.budget == b) per_seed.push_back(c.mean);
        const auto [m, s] = mean_std(per_seed);
        log << "evaluate: " << r.policy << " on " << r.simulator << " t=" << b << " mean delta_u " << m
            << " (std over seeds " << s << ")\n";
    }
}

}  // namespace

EvaluateSummary cmd_evaluate(const ExperimentConfig& config, std::ostream& log) {
    const Workspace ws(config.output_dir);
    ws.create();
    const CurriculumContext ctx = build_curriculum(config);
    const auto sim = build_simulator(config, ctx);
    const auto agent = load_policy(config, ctx);
    const EvalProtocol protocol = protocol_of(config);

    EvaluateSummary out;
    AgentRecommender policy(*agent, config.evaluation.decode);
    out.results.push_back(evaluate(policy, *sim, protocol));
    if (config.evaluation.include_random) {
        RandomRecommender random(ctx.map.num_questions());
        out.results.push_back(evaluate(random, *sim, protocol));
    }

    PlotSpec plot{"Learning effect by step budget", "steps", "mean delta_u", {}};
    for (const auto& r : out.results) {
        const auto file = ws.results() / ("eval_" + r.policy + ".csv");
        write_results_csv(file, r);
        out.files.push_back(file);
        PlotSeries s{r.policy, {}, {}};
        for (std::size_t b : protocol.budgets) {
            s.x.push_back(static_cast<double>(b));
            s.y.push_back(r.mean_at(b));
        }
        plot.series.push_back(std::move(s));
        log_result(log, r, protocol);
    }
    const auto svg = ws.plots() / "eval_budgets.svg";
    write_svg(svg, plot);
    out.files.push_back(svg);
    return out;
}

SweepSummary cmd_sweep(const ExperimentConfig& config, std::ostream& log) {
    const Workspace ws(config.output_dir);
    ws.create();
    const CurriculumContext ctx = build_curriculum(config);
    const auto sim = build_simulator(config, ctx);
    const auto agent = load_policy(config, ctx);
    const EvalProtocol protocol = protocol_of(config);
    const SweepAxis axis = config.evaluation.sweep.axis;
    const DecodeMode decode = config.evaluation.decode;

    const RecommenderFactory factory = [&](std::size_t v) -> std::unique_ptr<Recommender> {
        return std::make_unique<AgentRecommender>(*agent, decode, axis == SweepAxis::k_concepts ? v : 0);
    };
    SweepSummary out;
    out.rows = sweep(factory, *sim, axis, config.evaluation.sweep.values, protocol);

    const std::string name = to_string(axis);
    const auto csv = ws.results() / ("sweep_" + name + ".csv");
    write_sweep_csv(csv, axis, out.rows);
    PlotSpec plot{"Learning effect by " + name, name, "mean delta_u", {}};
    for (std::size_t b : protocol.budgets) {
        PlotSeries s{"t=" + std::to_string(b), {}, {}};
        for (const auto& row : out.rows) {
            s.x.push_back(static_cast<double>(row.value));
            s.y.push_back(row.result.mean_at(b));
            log << "sweep: " << name << '=' << row.value << " t=" << b << " mean delta_u " << s.y.back() << '\n';
        }
        plot.series.push_back(std::move(s));
    }
    const auto svg = ws.plots() / ("sweep_" + name + ".svg");
    write_svg(svg, plot);
    out.files = {csv, svg};
    return out;
}

}  // namespace hierrec
