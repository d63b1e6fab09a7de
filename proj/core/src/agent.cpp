#include "relsearch/agent.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "relsearch/error.hpp"
#include "relsearch/harness.hpp"
#include "relsearch/prompts.hpp"
#include "relsearch/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace relsearch {

namespace {

std::string role_tag(const Message& m) {
    std::string tag = m.role;
    std::transform(tag.begin(), tag.end(), tag.begin(), ::toupper);
    if (m.role == "tool") tag += " " + m.tool_name;
    return tag;
}

void log_message(std::ofstream& transcript, const Message& m) {
    transcript << "[" << role_tag(m) << "]\n";
    if (!m.content.empty()) transcript << m.content << "\n";
    for (const auto& call : m.tool_calls)
        transcript << "-> " << call.name << " " << call.arguments_json << "\n";
    transcript << "\n";
    transcript.flush();
}

/// Shuffle names deterministically before numbering them.
std::vector<std::string> shuffled(std::vector<std::string> names, std::mt19937_64& rng) {
    for (size_t i = 0; i + 1 < names.size(); ++i) {
        size_t j = i + rng() % (names.size() - i);
        std::swap(names[i], names[j]);
    }
    return names;
}

json parse_args(const std::string& text) {
    return json::parse(text.empty() ? "{}" : text);
}

}  // namespace

RenamingMap make_schema_renaming(const ContextHandle& ctx, uint64_t seed) {
    const TaskManifest& manifest = ctx.manifest();
    std::mt19937_64 rng(seed ^ 0xA5A5A5A5DEADBEEFULL);

    RenamingMap map;
    map.dataset_name = "dataset_1";

    std::vector<std::string> tables = manifest.context_tables;
    std::sort(tables.begin(), tables.end());
    tables = shuffled(tables, rng);
    int table_counter = 0;
    int col_counter = 0;
    for (const auto& table : tables) {
        map.tables[table] = "table_" + std::to_string(++table_counter);
        SchemaReport report = ctx.get_table_info(table);
        std::vector<std::string> cols;
        for (const auto& c : report.tables.at(0).columns) cols.push_back(c.name);
        std::sort(cols.begin(), cols.end());
        cols = shuffled(cols, rng);
        for (const auto& c : cols) map.columns[table][c] = "col_" + std::to_string(++col_counter);
    }
    map.entity_col = "col_" + std::to_string(++col_counter);
    map.timestamp_col = "col_" + std::to_string(++col_counter);
    map.target_col = "col_" + std::to_string(++col_counter);
    return map;
}

std::string RolloutResult::to_json() const {
    json j;
    j["rollout_index"] = rollout_index;
    j["workspace_path"] = workspace_path;
    j["best_trial_id"] = best_trial_id ? json(*best_trial_id) : json(nullptr);
    j["best_score"] = best_score ? json(*best_score) : json(nullptr);
    if (!abort_reason.empty()) j["abort_reason"] = abort_reason;
    j["trials"] = json::array();
    for (const auto& t : trials) {
        json tj{{"trial_id", t.trial_id},
                {"trial_name", t.trial_name},
                {"model_choice", t.model_choice},
                {"score", t.score ? json(*t.score) : json(nullptr)},
                {"failure", t.failure},
                {"feature_queries_json", t.feature_queries_json},
                {"resolved_config_json", t.resolved_config_json},
                {"program_hash", t.program_hash}};
        j["trials"].push_back(tj);
    }
    j["turns"] = json::array();
    for (const auto& t : turns) {
        json tj{{"turn", t.turn},
                {"actions", t.actions},
                {"tool_calls", t.tool_calls},
                {"running_best", t.running_best ? json(*t.running_best) : json(nullptr)}};
        j["turns"].push_back(tj);
    }
    return j.dump(2);
}

RolloutResult RolloutResult::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::IoError, std::string("rollout.json: ") + e.what());
    }
    RolloutResult r;
    r.rollout_index = j.value("rollout_index", 0);
    r.workspace_path = j.value("workspace_path", "");
    if (j.contains("best_trial_id") && !j["best_trial_id"].is_null())
        r.best_trial_id = j["best_trial_id"].get<std::string>();
    if (j.contains("best_score") && !j["best_score"].is_null())
        r.best_score = j["best_score"].get<double>();
    r.abort_reason = j.value("abort_reason", "");
    for (const auto& tj : j.value("trials", json::array())) {
        TrialSummary t;
        t.trial_id = tj.value("trial_id", "");
        t.trial_name = tj.value("trial_name", "");
        t.model_choice = tj.value("model_choice", "");
        if (tj.contains("score") && !tj["score"].is_null()) t.score = tj["score"].get<double>();
        t.failure = tj.value("failure", "");
        t.feature_queries_json = tj.value("feature_queries_json", "");
        t.resolved_config_json = tj.value("resolved_config_json", "");
        t.program_hash = tj.value("program_hash", "");
        r.trials.push_back(std::move(t));
    }
    for (const auto& tj : j.value("turns", json::array())) {
        TurnLog t;
        t.turn = tj.value("turn", 0);
        for (const auto& a : tj.value("actions", json::array()))
            t.actions.push_back(a.get<std::string>());
        t.tool_calls = tj.value("tool_calls", 0);
        if (tj.contains("running_best") && !tj["running_best"].is_null())
            t.running_best = tj["running_best"].get<double>();
        r.turns.push_back(std::move(t));
    }
    return r;
}

RolloutResult RolloutResult::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::IoError, "cannot read '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

RolloutResult run_rollout(const TaskManifest& manifest, Policy& policy, const RolloutConfig& cfg,
                          const std::string& out_dir, int rollout_index) {
    fs::create_directories(out_dir);

    RolloutResult result;
    result.rollout_index = rollout_index;
    result.workspace_path = (fs::path(out_dir) / "workspace.db").string();

    ContextHandle ctx = ContextHandle::open(manifest);
    if (cfg.anonymize_schema) ctx.apply_renaming(make_schema_renaming(ctx, cfg.seed));

    Workspace ws = Workspace::open(result.workspace_path, manifest);
    Harness harness(ctx, ws);
    harness.set_learner_threads(cfg.learner_threads);

    std::ofstream transcript(fs::path(out_dir) / "transcript.txt");
    std::ofstream eval_log(fs::path(out_dir) / "eval_queries.log");

    PromptInputs pin;
    pin.task_type = manifest.task_type;
    pin.task_description = cfg.anonymize_schema ? "task_1" : manifest.task_description;
    pin.dataset_name = cfg.anonymize_schema ? "dataset_1" : manifest.dataset_name;
    pin.entity_col = ctx.visible_entity_col();
    pin.timestamp_col = ctx.visible_timestamp_col();
    pin.target_col = ctx.visible_target_col();
    pin.n_val = ctx.split_size(Split::val);
    pin.no_feedback = cfg.no_feedback;
    pin.no_workspace = cfg.no_workspace;
    pin.allowed_models = cfg.allowed_models;
    PromptSet prompts = assemble_prompts(pin);

    std::vector<Message> history;
    history.push_back({"system", prompts.system, "", {}});
    history.push_back({"user", prompts.execute, "", {}});
    log_message(transcript, history[0]);
    log_message(transcript, history[1]);

    std::optional<int> budget = cfg.max_validations ? cfg.max_validations
                                                    : manifest.max_validations;
    const int max_turns = cfg.no_feedback ? 1 : cfg.max_turns;
    int validations = 0;
    std::optional<double> running_best;

    auto model_allowed = [&](const std::string& name) {
        if (!cfg.allowed_models) return true;
        for (const auto& m : *cfg.allowed_models)
            if (m == name) return true;
        return false;
    };

    auto record_trial = [&](const ValidationRequest& req, const ValidationReport& rep) {
        TrialSummary t;
        t.trial_id = rep.trial_id;
        t.trial_name = req.trial_name;
        t.model_choice = req.model_choice;
        if (rep.ok) {
            t.score = rep.primary_score;
            if (!running_best || rep.primary_score > *running_best)
                running_best = rep.primary_score;
        } else {
            t.failure = to_string(rep.failure);
        }
        t.feature_queries_json = req.feature_queries_json;
        t.resolved_config_json = rep.resolved_config_json;
        try {
            t.program_hash = program_hash(parse_program(req.feature_queries_json));
        } catch (const Error&) {
        }
        result.trials.push_back(std::move(t));
        ++validations;
    };

    for (int turn = 1; turn <= max_turns; ++turn) {
        PolicyTurn pturn;
        auto turn_start = std::chrono::steady_clock::now();
        try {
            pturn = policy.next_turn(history);
        } catch (const Error& e) {
            result.abort_reason = e.what();
            break;
        }
        auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::steady_clock::now() - turn_start)
                           .count();
        if (elapsed > cfg.per_turn_timeout_s) {
            result.abort_reason = "policy exceeded the per-turn timeout";
            break;
        }
        if (pturn.exhausted && pturn.tool_calls.empty() && pturn.text.empty()) break;

        Message assistant{"assistant", pturn.text, "", pturn.tool_calls};
        history.push_back(assistant);
        log_message(transcript, assistant);

        TurnLog tl;
        tl.turn = turn;
        tl.tool_calls = static_cast<int>(pturn.tool_calls.size());

        if (cfg.no_feedback) {
            // Single-shot mode: the final text is the program + model config.
            std::string text = pturn.text;
            auto open = text.find('{');
            auto close = text.rfind('}');
            ValidationRequest req;
            req.trial_name = "final";
            bool parsed = false;
            if (open != std::string::npos && close != std::string::npos && close > open) {
                try {
                    json blob = json::parse(text.substr(open, close - open + 1));
                    req.feature_queries_json = blob.value("feature_queries", json::array()).dump();
                    req.model_choice = blob.value("model_choice", "gbdt");
                    req.model_config_json = blob.value("model_config", json::object()).dump();
                    parsed = true;
                } catch (const json::exception&) {
                }
            }
            if (parsed) {
                ValidationReport rep = harness.validate_program(req);
                record_trial(req, rep);
                tl.actions.push_back("validate_program");
                Message obs{"tool", rep.formatted, "validate_program", {}};
                history.push_back(obs);
                log_message(transcript, obs);
            } else {
                result.abort_reason = "final output was not a parseable program JSON";
            }
            tl.running_best = running_best;
            result.turns.push_back(tl);
            break;
        }

        for (const auto& call : pturn.tool_calls) {
            tl.actions.push_back(call.name);
            Message obs{"tool", "", call.name, {}};
            json args;
            try {
                args = parse_args(call.arguments_json);
                if (!args.is_object()) throw Error(ErrorKind::JsonError, "arguments must be an object");
            } catch (const std::exception& e) {
                obs.content = std::string("Error: invalid JSON in tool arguments: ") + e.what();
                history.push_back(obs);
                log_message(transcript, obs);
                continue;
            }

            try {
                if (call.name == "execute_query") {
                    if (!args.contains("query") || !args["query"].is_string())
                        raise(ErrorKind::ConfigError, "execute_query requires a string 'query'");
                    RowSet rs = ctx.execute_exploration(args["query"].get<std::string>());
                    obs.content = rs.to_text();
                } else if (call.name == "get_table_info") {
                    std::optional<std::string> table;
                    if (args.contains("table_name") && args["table_name"].is_string())
                        table = args["table_name"].get<std::string>();
                    obs.content = ctx.get_table_info(table).to_text();
                } else if (call.name == "validate_program") {
                    if (budget && validations >= *budget) {
                        obs.content = "Error: validation budget (" + std::to_string(*budget) +
                                      " trials) exhausted";
                    } else if (!args.contains("feature_queries_json") ||
                               !args["feature_queries_json"].is_string()) {
                        obs.content =
                            "Error: validate_program requires a string 'feature_queries_json'";
                    } else {
                        ValidationRequest req;
                        req.feature_queries_json = args["feature_queries_json"].get<std::string>();
                        req.model_choice = args.value("model_choice", "gbdt");
                        req.model_config_json =
                            args.contains("model_config_json") && args["model_config_json"].is_string()
                                ? args["model_config_json"].get<std::string>()
                                : "{}";
                        req.trial_name = args.value("trial_name", "");
                        if (!model_allowed(req.model_choice)) {
                            obs.content = "Error: model '" + req.model_choice +
                                          "' is not available in this run";
                        } else {
                            ValidationReport rep = harness.validate_program(req);
                            record_trial(req, rep);
                            obs.content = rep.formatted;
                        }
                    }
                } else if (call.name == "get_trial_history") {
                    obs.content = ws.trial_history();
                } else if (call.name == "query_eval_workspace") {
                    if (cfg.no_workspace) {
                        obs.content = "Error: query_eval_workspace is not available in this run";
                    } else if (!args.contains("sql") || !args["sql"].is_string()) {
                        obs.content = "Error: query_eval_workspace requires a string 'sql'";
                    } else {
                        std::string sql = args["sql"].get<std::string>();
                        eval_log << json{{"turn", turn}, {"sql", sql}}.dump() << "\n";
                        eval_log.flush();
                        RowSet rs = ws.query_workspace(sql);
                        obs.content = rs.to_text();
                    }
                } else {
                    obs.content = "Error: unknown tool '" + call.name + "'";
                }
            } catch (const Error& e) {
                obs.content = std::string("Error: ") + e.what();
            }
            if (obs.content.empty()) obs.content = "(empty result)";
            history.push_back(obs);
            log_message(transcript, obs);
        }

        tl.running_best = running_best;
        result.turns.push_back(tl);

        if (budget && validations >= *budget) break;
        if (turn < max_turns) {
            Message user{"user", turn + 1 == max_turns ? prompts.wrapup : prompts.followup, "", {}};
            history.push_back(user);
            log_message(transcript, user);
        }
    }

    // Best trial: maximal oriented score, earliest on ties.
    for (const auto& t : result.trials) {
        if (!t.score) continue;
        if (!result.best_score || *t.score > *result.best_score) {
            result.best_score = t.score;
            result.best_trial_id = t.trial_id;
        }
    }

    std::ofstream out(fs::path(out_dir) / "rollout.json");
    out << result.to_json() << "\n";
    return result;
}

}  // namespace relsearch
