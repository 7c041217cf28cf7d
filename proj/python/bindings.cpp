#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hierrec/errors.hpp"
#include "hierrec/experiment.hpp"

namespace py = pybind11;
using namespace hierrec;

namespace {

ExperimentConfig config_from_text(const std::string& json_text, const std::vector<std::string>& overrides) {
    nlohmann::json tree = json_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(json_text, nullptr, false);
    if (tree.is_discarded()) throw ConfigError("config is not valid JSON");
    apply_overrides(tree, overrides);
    ExperimentConfig c = config_from_json(tree);
    c.validate();
    return c;
}

py::dict eval_result_dict(const EvalResult& r) {
    py::list cells;
    for (const auto& c : r.cells) {
        py::dict d;
        d["budget"] = c.budget;
        d["seed"] = c.seed;
        d["mean"] = c.mean;
        d["std"] = c.std;
        d["samples"] = c.samples;
        cells.append(d);
    }
    py::dict out;
    out["simulator"] = r.simulator;
    out["policy"] = r.policy;
    out["cells"] = cells;
    return out;
}

template <class F>
auto run_logged(F&& f) {
    std::ostringstream log;
    auto result = [&] {
        py::gil_scoped_release release;
        return f(log);
    }();
    return std::make_pair(std::move(result), log.str());
}

}  // namespace

PYBIND11_MODULE(_hierrec, m) {
    m.doc() = "Hierarchical question recommender core";

    static py::exception<Error> base_error(m, "HierrecError");
    static py::exception<ConfigError> config_error(m, "ConfigError", base_error.ptr());
    static py::exception<CheckpointMismatch> mismatch(m, "CheckpointMismatch", base_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const CheckpointMismatch& e) {
            py::set_error(mismatch, e.what());
        } catch (const Error& e) {
            py::set_error(base_error, (std::string(e.kind()) + ": " + e.what()).c_str());
        }
    });

    m.def("learning_effect", &learning_effect, py::arg("e_after"), py::arg("e_before"), py::arg("e_max"));
    m.def("returns", &returns, py::arg("rewards"), py::arg("gamma"));
    m.def("roc_auc", &roc_auc, py::arg("scores"), py::arg("labels"));

    py::class_<CurriculumMap>(m, "CurriculumMap")
        .def_static("build",
                    [](std::size_t mc, std::size_t n, const std::vector<std::pair<int, int>>& edges) {
                        std::vector<Edge> es;
                        for (auto [q, c] : edges) es.push_back({QuestionId(q), ConceptId(c)});
                        return CurriculumMap::build(mc, n, es);
                    },
                    py::arg("m"), py::arg("n"), py::arg("edges"))
        .def_static("one_to_one", &CurriculumMap::one_to_one, py::arg("m"))
        .def_property_readonly("num_concepts", &CurriculumMap::num_concepts)
        .def_property_readonly("num_questions", &CurriculumMap::num_questions)
        .def("concepts_of",
             [](const CurriculumMap& map, int q) {
                 std::vector<int> out;
                 for (ConceptId c : map.concepts_of(QuestionId(q))) out.push_back(c.index);
                 return out;
             })
        .def("questions_of", [](const CurriculumMap& map, int c) {
            std::vector<int> out;
            for (QuestionId q : map.questions_of(ConceptId(c))) out.push_back(q.index);
            return out;
        });

    m.def("questions_for_concepts", [](const CurriculumMap& map, const std::vector<int>& concepts) {
        std::vector<ConceptId> cs;
        for (int c : concepts) cs.emplace_back(c);
        std::vector<int> out;
        for (QuestionId q : questions_for_concepts(map, cs)) out.push_back(q.index);
        return out;
    });

    py::class_<SimulatorSession>(m, "SimulatorSession", py::dynamic_attr())
        .def("answer", [](SimulatorSession& s, int q) { return s.answer(QuestionId(q)); })
        .def("correct_prob", [](const SimulatorSession& s, int q) { return s.correct_prob(QuestionId(q)); })
        .def("mastery",
             [](const SimulatorSession& s, const std::vector<int>& targets) {
                 std::vector<QuestionId> qs;
                 for (int q : targets) qs.emplace_back(q);
                 return s.mastery(LearningTarget(qs));
             })
        .def_property_readonly("steps", &SimulatorSession::steps)
        .def_property_readonly("max_steps", &SimulatorSession::max_steps);

    py::class_<KssSimulator>(m, "KssSimulator")
        .def_static("reference", &KssSimulator::reference)
        .def_property_readonly("max_steps", &KssSimulator::max_steps)
        .def_property_readonly("curriculum", &KssSimulator::curriculum, py::return_value_policy::reference_internal)
        .def(
            "reset",
            [](const KssSimulator& sim, const std::vector<int>& targets, std::size_t warmup_len, std::uint64_t seed) {
                std::vector<QuestionId> qs;
                for (int q : targets) qs.emplace_back(q);
                SessionStart start = sim.reset(LearningTarget(qs), warmup_len, seed);
                std::vector<std::pair<int, int>> history;
                for (const auto& r : start.history) history.emplace_back(r.question.index, r.correct);
                py::object session = py::cast(std::move(start.session));
                session.attr("warmup") = history;
                return session;
            },
            py::arg("targets"), py::arg("warmup_len"), py::arg("seed"), py::keep_alive<0, 1>());

    m.def("default_config", [] { return to_json(ExperimentConfig{}).dump(); });
    m.def("resolve_config",
          [](const std::string& text, const std::vector<std::string>& overrides) {
              return to_json(config_from_text(text, overrides)).dump();
          },
          py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "gen_logs",
        [](const std::string& text, const std::vector<std::string>& overrides) {
            const auto cfg = config_from_text(text, overrides);
            auto [r, log] = run_logged([&](std::ostream& os) { return cmd_gen_logs(cfg, os); });
            py::dict d;
            d["path"] = r.path.string();
            d["rows"] = r.rows;
            d["log"] = log;
            return d;
        },
        py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "train_kt",
        [](const std::string& text, const std::vector<std::string>& overrides) {
            const auto cfg = config_from_text(text, overrides);
            auto [r, log] = run_logged([&](std::ostream& os) { return cmd_train_kt(cfg, os); });
            py::dict d;
            d["model_path"] = r.model_path.string();
            d["heldout_auc"] = r.report.heldout_auc;
            d["epoch_loss"] = r.report.epoch_loss;
            d["log"] = log;
            return d;
        },
        py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "train",
        [](const std::string& text, const std::vector<std::string>& overrides) {
            const auto cfg = config_from_text(text, overrides);
            auto [r, log] = run_logged([&](std::ostream& os) { return cmd_train(cfg, os); });
            py::dict d;
            d["checkpoint"] = r.checkpoint.string();
            d["metrics"] = r.metrics.string();
            d["episodes"] = r.episodes;
            d["first_window_delta"] = r.first_window_delta;
            d["last_window_delta"] = r.last_window_delta;
            d["log"] = log;
            return d;
        },
        py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "evaluate",
        [](const std::string& text, const std::vector<std::string>& overrides) {
            const auto cfg = config_from_text(text, overrides);
            auto [r, log] = run_logged([&](std::ostream& os) { return cmd_evaluate(cfg, os); });
            py::list results;
            for (const auto& e : r.results) results.append(eval_result_dict(e));
            py::dict d;
            d["results"] = results;
            d["log"] = log;
            return d;
        },
        py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "sweep",
        [](const std::string& text, const std::vector<std::string>& overrides) {
            const auto cfg = config_from_text(text, overrides);
            auto [r, log] = run_logged([&](std::ostream& os) { return cmd_sweep(cfg, os); });
            py::list rows;
            for (const auto& row : r.rows) {
                py::dict d;
                d["value"] = row.value;
                d["result"] = eval_result_dict(row.result);
                rows.append(d);
            }
            py::dict d;
            d["rows"] = rows;
            d["log"] = log;
            return d;
        },
        py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});
}
