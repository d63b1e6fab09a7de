// Operator entry points: search, deploy, bench, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "relsearch/agent.hpp"
#include "relsearch/error.hpp"
#include "relsearch/policy.hpp"
#include "relsearch/prompts.hpp"
#include "relsearch/select.hpp"
#include "relsearch/synthbench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relsearch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOperatorError = 1;
constexpr int kExitNoChampion = 2;

struct PolicySelector {
    std::string kind;  // scripted | llm
    std::string arg;   // script path or profile path
};

PolicySelector parse_policy(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        raise(ErrorKind::ConfigError, "policy must be scripted:<script.json> or llm:<profile.json>");
    PolicySelector sel{text.substr(0, colon), text.substr(colon + 1)};
    if (sel.kind != "scripted" && sel.kind != "llm")
        raise(ErrorKind::ConfigError, "unknown policy kind '" + sel.kind + "'");
    return sel;
}

std::unique_ptr<Policy> make_policy(const PolicySelector& sel, const RolloutConfig& cfg) {
    if (sel.kind == "scripted")
        return std::make_unique<ScriptedPolicy>(ScriptedPolicy::from_file(sel.arg));
    LlmProfile profile = LlmProfile::load(sel.arg);
    return std::make_unique<LlmPolicy>(profile,
                                       available_tools(cfg.no_feedback, cfg.no_workspace),
                                       cfg.per_turn_timeout_s);
}

void prepare_dir(const std::string& dir, bool overwrite) {
    fs::path p(dir);
    if (fs::exists(p) && !fs::is_empty(p)) {
        if (!overwrite)
            raise(ErrorKind::ConfigError,
                  "output directory '" + dir + "' is not empty (use --overwrite)");
        fs::remove_all(p);
    }
    fs::create_directories(p);
}

int cmd_search(const std::string& manifest_path, const std::string& out_dir,
               const std::string& policy_text, int rollouts, RolloutConfig base_cfg,
               bool overwrite) {
    TaskManifest manifest = TaskManifest::load(manifest_path);
    PolicySelector sel = parse_policy(policy_text);
    prepare_dir(out_dir, overwrite);

    std::vector<RolloutResult> results(rollouts);
    std::vector<std::string> failures(rollouts);
    std::vector<std::thread> workers;
    for (int k = 0; k < rollouts; ++k) {
        workers.emplace_back([&, k]() {
            RolloutConfig cfg = base_cfg;
            cfg.seed = base_cfg.seed + static_cast<uint64_t>(k);
            try {
                auto policy = make_policy(sel, cfg);
                results[k] = run_rollout(manifest, *policy, cfg,
                                         (fs::path(out_dir) / ("rollout_" + std::to_string(k)))
                                             .string(),
                                         k);
            } catch (const std::exception& e) {
                failures[k] = e.what();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (int k = 0; k < rollouts; ++k)
        if (!failures[k].empty())
            std::cerr << "rollout " << k << " failed: " << failures[k] << "\n";

    json summary;
    summary["manifest"] = manifest_path;
    summary["rollouts"] = json::array();
    for (const auto& r : results) {
        summary["rollouts"].push_back(
            {{"rollout_index", r.rollout_index},
             {"best_trial_id", r.best_trial_id ? json(*r.best_trial_id) : json(nullptr)},
             {"best_score", r.best_score ? json(*r.best_score) : json(nullptr)},
             {"trials", r.trials.size()},
             {"turns", r.turns.size()}});
    }

    int exit_code = kExitOk;
    try {
        Champion champion = cross_rollout_select(results);
        champion.save((fs::path(out_dir) / "champion.json").string());
        summary["champion"] = json::parse(champion.to_json());
        std::cout << "champion: rollout " << champion.rollout_index << " trial "
                  << champion.trial_id << " score " << champion.validation_score << "\n";
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoSuccessfulTrial) throw;
        summary["champion"] = nullptr;
        std::cerr << "no successful trial in any rollout\n";
        exit_code = kExitNoChampion;
    }
    std::ofstream(fs::path(out_dir) / "run_summary.json") << summary.dump(2) << "\n";
    return exit_code;
}

int cmd_deploy(const std::string& manifest_path, const std::string& champion_path,
               std::string out_dir, int learner_threads, bool overwrite) {
    TaskManifest manifest = TaskManifest::load(manifest_path);
    Champion champion = Champion::load(champion_path);
    if (out_dir.empty()) out_dir = fs::path(champion_path).parent_path().string();
    if (out_dir.empty()) out_dir = ".";
    fs::create_directories(out_dir);
    fs::path report_path = fs::path(out_dir) / "test_report.json";
    if (fs::exists(report_path) && !overwrite)
        raise(ErrorKind::ConfigError,
              "'" + report_path.string() + "' exists (use --overwrite)");

    ContextHandle ctx = ContextHandle::open(manifest);
    FittedModel model;
    TestReport report = deploy_champion(ctx, champion, learner_threads, &model);
    std::ofstream(report_path) << report.to_json() << "\n";
    std::ofstream(fs::path(out_dir) / "model.json") << model.to_json() << "\n";
    std::cout << report.to_text();
    return kExitOk;
}

int cmd_bench_triangle(const TriangleSpec& spec, const std::string& out_dir, bool overwrite) {
    prepare_dir(out_dir, overwrite);
    TaskManifest m = gen_triangle_task(spec, out_dir);
    std::cout << "triangle task written to " << out_dir << " (" << m.dataset_name << ")\n";
    return kExitOk;
}

int cmd_bench_cooccurrence(const CooccurrenceSpec& spec, const std::string& out_dir,
                           bool overwrite) {
    prepare_dir(out_dir, overwrite);
    TaskManifest m = gen_cooccurrence_task(spec, out_dir);
    std::cout << "co-occurrence task written to " << out_dir << " (" << m.dataset_name << ")\n";
    return kExitOk;
}

int cmd_report(const std::string& run_dir, bool as_json) {
    json j;
    j["run_dir"] = run_dir;
    j["rollouts"] = json::array();
    for (int k = 0;; ++k) {
        fs::path p = fs::path(run_dir) / ("rollout_" + std::to_string(k)) / "rollout.json";
        if (!fs::exists(p)) break;
        RolloutResult r = RolloutResult::load(p.string());
        json rj{{"rollout_index", r.rollout_index},
                {"best_trial_id", r.best_trial_id ? json(*r.best_trial_id) : json(nullptr)},
                {"best_score", r.best_score ? json(*r.best_score) : json(nullptr)},
                {"trials", r.trials.size()}};
        rj["best_per_turn"] = json::array();
        for (const auto& t : r.turns)
            rj["best_per_turn"].push_back(t.running_best ? json(*t.running_best) : json(nullptr));
        j["rollouts"].push_back(rj);
    }
    fs::path champion_path = fs::path(run_dir) / "champion.json";
    j["champion"] = nullptr;
    if (fs::exists(champion_path)) {
        Champion c = Champion::load(champion_path.string());
        j["champion"] = json::parse(c.to_json());
    }

    if (as_json) {
        std::cout << j.dump(2) << "\n";
        return kExitOk;
    }
    std::cout << "run: " << run_dir << "\n";
    for (const auto& rj : j["rollouts"]) {
        std::cout << "  rollout " << rj["rollout_index"] << ": trials " << rj["trials"]
                  << ", best ";
        if (rj["best_score"].is_null())
            std::cout << "none";
        else
            std::cout << rj["best_trial_id"].get<std::string>() << " ("
                      << rj["best_score"].get<double>() << ")";
        std::cout << "\n";
    }
    if (!j["champion"].is_null())
        std::cout << "champion: rollout " << j["champion"]["rollout_index"] << " trial "
                  << j["champion"]["trial_id"].get<std::string>() << " score "
                  << j["champion"]["validation_score"].get<double>() << "\n";
    else
        std::cout << "champion: none\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agentic SQL feature-program search over relational databases"};
    app.require_subcommand(1);

    // search
    auto* search = app.add_subcommand("search", "Run K policy rollouts and select a champion");
    std::string s_manifest, s_out = "run_out", s_policy;
    int s_rollouts = 5;
    RolloutConfig s_cfg;
    bool s_overwrite = false;
    std::string s_models;
    int s_max_validations = -1;
    search->add_option("manifest", s_manifest, "Task manifest JSON")->required();
    search->add_option("--out", s_out, "Output directory");
    search->add_option("--policy", s_policy, "scripted:<script.json> or llm:<profile.json>")
        ->required();
    search->add_option("--rollouts", s_rollouts, "Number of independent rollouts")
        ->check(CLI::PositiveNumber);
    search->add_option("--max-turns", s_cfg.max_turns, "Agent turn budget per rollout");
    search->add_option("--max-validations", s_max_validations,
                       "Trial budget per rollout (-1: manifest default)");
    search->add_option("--per-turn-timeout", s_cfg.per_turn_timeout_s,
                       "Per-turn timeout in seconds");
    search->add_option("--seed", s_cfg.seed, "Base seed; rollout k uses seed+k");
    search->add_option("--learner-threads", s_cfg.learner_threads, "Threads for training");
    search->add_flag("--no-feedback", s_cfg.no_feedback,
                     "Single-shot mode without validation tools");
    search->add_flag("--no-workspace", s_cfg.no_workspace, "Disable the evaluation workspace tool");
    search->add_flag("--anonymize-schema", s_cfg.anonymize_schema,
                     "Replace schema names with synthetic identifiers");
    search->add_option("--models", s_models, "Comma-separated allowed model menu subset");
    search->add_flag("--overwrite", s_overwrite, "Replace an existing output directory");

    // deploy
    auto* deploy = app.add_subcommand("deploy", "Refit the champion and score the test split");
    std::string d_manifest, d_champion, d_out;
    int d_threads = 1;
    bool d_overwrite = false;
    deploy->add_option("manifest", d_manifest, "Task manifest JSON")->required();
    deploy->add_option("champion", d_champion, "champion.json path")->required();
    deploy->add_option("--out", d_out, "Output directory (default: champion's directory)");
    deploy->add_option("--learner-threads", d_threads, "Threads for training");
    deploy->add_flag("--overwrite", d_overwrite, "Replace an existing test report");

    // bench
    auto* bench = app.add_subcommand("bench", "Generate a synthetic benchmark task");
    auto* tri = bench->add_subcommand("triangle", "Directed triangle detection task");
    TriangleSpec tri_spec;
    std::string tri_out = "triangle_task";
    bool tri_overwrite = false;
    tri->add_option("--nodes", tri_spec.nodes_per_graph, "Nodes per graph");
    tri->add_option("--edge-prob", tri_spec.edge_prob, "Edge probability")
        ->check(CLI::Range(0.0, 1.0));
    tri->add_option("--p-sl", tri_spec.self_loop_prob, "Self-loop probability")
        ->check(CLI::Range(0.0, 1.0));
    tri->add_option("--train-graphs", tri_spec.n_train_graphs, "Training graphs");
    tri->add_option("--val-graphs", tri_spec.n_val_graphs, "Validation graphs");
    tri->add_option("--test-graphs", tri_spec.n_test_graphs, "Test graphs");
    tri->add_option("--seed", tri_spec.seed, "Generator seed");
    tri->add_option("--out", tri_out, "Output directory");
    tri->add_flag("--overwrite", tri_overwrite, "Replace an existing output directory");

    auto* cooc = bench->add_subcommand("cooccurrence", "Cross-row co-occurrence task");
    CooccurrenceSpec cooc_spec;
    std::string cooc_out = "cooccurrence_task";
    bool cooc_overwrite = false;
    cooc->add_option("--train-entities", cooc_spec.n_train_entities, "Training entities");
    cooc->add_option("--val-entities", cooc_spec.n_val_entities, "Validation entities");
    cooc->add_option("--test-entities", cooc_spec.n_test_entities, "Test entities");
    cooc->add_option("--seed", cooc_spec.seed, "Generator seed");
    cooc->add_option("--out", cooc_out, "Output directory");
    cooc->add_flag("--overwrite", cooc_overwrite, "Replace an existing output directory");
    bench->require_subcommand(1);

    // report
    auto* report = app.add_subcommand("report", "Render a run summary");
    std::string r_dir;
    bool r_json = false;
    report->add_option("run_dir", r_dir, "Search output directory")->required();
    report->add_flag("--json", r_json, "Emit JSON instead of text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitOperatorError;
    }

    try {
        if (*search) {
            if (s_max_validations >= 0) s_cfg.max_validations = s_max_validations;
            if (!s_models.empty()) {
                std::vector<std::string> models;
                std::stringstream ss(s_models);
                std::string item;
                while (std::getline(ss, item, ','))
                    if (!item.empty()) models.push_back(item);
                s_cfg.allowed_models = models;
            }
            return cmd_search(s_manifest, s_out, s_policy, s_rollouts, s_cfg, s_overwrite);
        }
        if (*deploy) return cmd_deploy(d_manifest, d_champion, d_out, d_threads, d_overwrite);
        if (*tri) return cmd_bench_triangle(tri_spec, tri_out, tri_overwrite);
        if (*cooc) return cmd_bench_cooccurrence(cooc_spec, cooc_out, cooc_overwrite);
        if (*report) return cmd_report(r_dir, r_json);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOperatorError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOperatorError;
    }
    return kExitOperatorError;
}
