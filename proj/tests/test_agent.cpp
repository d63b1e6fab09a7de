#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "relsearch/agent.hpp"
#include "relsearch/prompts.hpp"
#include "relsearch/workspace.hpp"

using namespace relsearch;
using testutil::TempDir;
using testutil::make_events_task;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string validate_step(const std::string& program, const std::string& model = "gbdt",
                          const std::string& config = "{}") {
    json step{{"tool", "validate_program"},
              {"args",
               {{"feature_queries_json", program},
                {"model_choice", model},
                {"model_config_json", config}}}};
    return step.dump();
}

std::string program_with_constant(double c) {
    json prog = json::array();
    prog.push_back({{"name", "q"},
                    {"sql", "SELECT row_id, " + std::to_string(c) +
                                " * (SELECT COUNT(*) FROM events ev WHERE ev.user_id = "
                                "e.user_id AND ev.event_time < e.ts) AS f FROM eval_table e"}});
    return prog.dump();
}

}  // namespace

TEST_SUITE("agent") {

TEST_CASE("scripted rollout selects the best trial by oriented score") {
    TempDir dir("agent_best");
    TaskManifest m = make_events_task(dir);

    // Three validations with different configs; scores differ via seeds of
    // the feature scale, but what matters is argmax bookkeeping below.
    json script = json::array();
    script.push_back(json::parse(validate_step(testutil::past_event_program(), "gbdt",
                                               R"({"n_estimators": 50})")));
    script.push_back(json::parse(validate_step(
        R"([{"name":"bad","sql":"SELECT row_id, nope FROM eval_table"}])")));
    script.push_back(json::parse(validate_step(testutil::past_event_program(), "gbdt",
                                               R"({"n_estimators": 60})")));

    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 10;
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);

    REQUIRE(r.trials.size() == 3);
    CHECK(r.trials[1].failure == "sql_error");
    REQUIRE(r.best_trial_id);
    // Successful scores tie here; the earliest wins.
    CHECK(*r.best_trial_id == "val_0001");

    // Artifacts exist.
    CHECK(fs::exists(dir.path / "roll" / "workspace.db"));
    CHECK(fs::exists(dir.path / "roll" / "rollout.json"));
    CHECK(fs::exists(dir.path / "roll" / "transcript.txt"));
    CHECK(fs::exists(dir.path / "roll" / "eval_queries.log"));

    // rollout.json round-trips.
    RolloutResult loaded = RolloutResult::load((dir.path / "roll" / "rollout.json").string());
    CHECK(loaded.trials.size() == 3);
    CHECK(loaded.best_trial_id == r.best_trial_id);
}

TEST_CASE("running best is non-decreasing across turns") {
    TempDir dir("agent_monotone");
    TaskManifest m = make_events_task(dir);
    json script = json::array();
    // Interleave exploration with validations of varying quality.
    script.push_back(json{{"tool", "execute_query"}, {"args", {{"query", "SHOW TABLES"}}}});
    script.push_back(json::parse(validate_step(testutil::past_event_program())));
    script.push_back(json::parse(
        validate_step(R"([{"name":"weak","sql":"SELECT row_id, 1 AS one FROM eval_table"}])")));
    script.push_back(json::parse(validate_step(testutil::past_event_program(), "gbdt",
                                               R"({"n_estimators": 80})")));
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 10;
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);

    std::optional<double> prev;
    for (const auto& turn : r.turns) {
        if (prev && turn.running_best) CHECK(*turn.running_best >= *prev);
        if (turn.running_best) prev = turn.running_best;
    }
}

TEST_CASE("a policy that never validates yields a null best") {
    TempDir dir("agent_null");
    TaskManifest m = make_events_task(dir);
    json script = json::array();
    script.push_back(json{{"tool", "execute_query"}, {"args", {{"query", "SELECT 1"}}}});
    script.push_back(json{{"tool", "get_table_info"}, {"args", json::object()}});
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 5;
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);
    CHECK_FALSE(r.best_trial_id);
    CHECK_FALSE(r.best_score);
    CHECK(r.trials.empty());
}

TEST_CASE("max_validations stops the search") {
    TempDir dir("agent_budget");
    TaskManifest m = make_events_task(dir);
    json script = json::array();
    for (int i = 0; i < 5; ++i)
        script.push_back(json::parse(validate_step(testutil::past_event_program())));
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 10;
    cfg.max_validations = 2;
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);
    CHECK(r.trials.size() == 2);

    Workspace ws = Workspace::open((dir.path / "roll" / "workspace.db").string(), m);
    CHECK(ws.trial_count() == 2);
}

TEST_CASE("disallowed models produce an error observation, not a trial") {
    TempDir dir("agent_models");
    TaskManifest m = make_events_task(dir);
    json script = json::array();
    script.push_back(json::parse(validate_step(testutil::past_event_program(), "catboost")));
    script.push_back(json::parse(validate_step(testutil::past_event_program(), "gbdt")));
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 5;
    cfg.allowed_models = std::vector<std::string>{"gbdt"};
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);
    CHECK(r.trials.size() == 1);  // only the gbdt call became a trial
    CHECK(r.trials[0].model_choice == "gbdt");

    std::ifstream t(dir.path / "roll" / "transcript.txt");
    std::string transcript((std::istreambuf_iterator<char>(t)), {});
    CHECK(transcript.find("not available in this run") != std::string::npos);
}

TEST_CASE("malformed tool arguments become error observations") {
    TempDir dir("agent_malformed");
    TaskManifest m = make_events_task(dir);
    json script = json::array();
    script.push_back(json{{"tool", "execute_query"}, {"args", {{"nope", 1}}}});
    script.push_back(json{{"tool", "mystery_tool"}, {"args", json::object()}});
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 3;
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);
    std::ifstream t(dir.path / "roll" / "transcript.txt");
    std::string transcript((std::istreambuf_iterator<char>(t)), {});
    CHECK(transcript.find("Error:") != std::string::npos);
    CHECK(transcript.find("unknown tool 'mystery_tool'") != std::string::npos);
    CHECK(r.trials.empty());
}

TEST_CASE("multiple tool calls in one turn dispatch in order") {
    TempDir dir("agent_multi");
    TaskManifest m = make_events_task(dir);
    json turn = json::array();
    turn.push_back(json{{"tool", "execute_query"}, {"args", {{"query", "SELECT 1 AS a"}}}});
    turn.push_back(json{{"tool", "get_trial_history"}, {"args", json::object()}});
    json script = json::array({turn});
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 2;
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);
    REQUIRE(r.turns.size() >= 1);
    CHECK(r.turns[0].tool_calls == 2);
    REQUIRE(r.turns[0].actions.size() == 2);
    CHECK(r.turns[0].actions[0] == "execute_query");
    CHECK(r.turns[0].actions[1] == "get_trial_history");
}

TEST_CASE("no_feedback runs exactly one turn and one validation") {
    TempDir dir("agent_nofb");
    TaskManifest m = make_events_task(dir);
    json final_output{{"feature_queries", json::parse(testutil::past_event_program())},
                      {"model_choice", "gbdt"},
                      {"model_config", json::object()}};
    json script = json::array();
    script.push_back(json{{"text", "Here is my final pipeline:\n" + final_output.dump()}});
    script.push_back(json::parse(validate_step(testutil::past_event_program())));  // unreachable
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 60;
    cfg.no_feedback = true;
    RolloutResult r = run_rollout(m, policy, cfg, dir.file("roll"), 0);
    CHECK(r.trials.size() == 1);
    CHECK(r.turns.size() == 1);

    Workspace ws = Workspace::open((dir.path / "roll" / "workspace.db").string(), m);
    CHECK(ws.trial_count() == 1);
}

TEST_CASE("no_workspace rejects the workspace tool") {
    TempDir dir("agent_nows");
    TaskManifest m = make_events_task(dir);
    json script = json::array();
    script.push_back(json{{"tool", "query_eval_workspace"},
                          {"args", {{"sql", "SELECT COUNT(*) FROM trials"}}}});
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 2;
    cfg.no_workspace = true;
    run_rollout(m, policy, cfg, dir.file("roll"), 0);
    std::ifstream t(dir.path / "roll" / "transcript.txt");
    std::string transcript((std::istreambuf_iterator<char>(t)), {});
    CHECK(transcript.find("not available") != std::string::npos);
}

TEST_CASE("evaluation queries are journaled") {
    TempDir dir("agent_journal");
    TaskManifest m = make_events_task(dir);
    json script = json::array();
    script.push_back(json::parse(validate_step(testutil::past_event_program())));
    script.push_back(json{{"tool", "query_eval_workspace"},
                          {"args", {{"sql", "SELECT trial_id FROM trials"}}}});
    ScriptedPolicy policy = ScriptedPolicy::from_json(script.dump());
    RolloutConfig cfg;
    cfg.max_turns = 4;
    run_rollout(m, policy, cfg, dir.file("roll"), 0);
    std::ifstream log(dir.path / "roll" / "eval_queries.log");
    std::string content((std::istreambuf_iterator<char>(log)), {});
    CHECK(content.find("SELECT trial_id FROM trials") != std::string::npos);
}

TEST_CASE("schema renaming is a deterministic bijection") {
    TempDir dir("agent_anon");
    TaskManifest m = make_events_task(dir);
    ContextHandle ctx = ContextHandle::open(m);

    RenamingMap a = make_schema_renaming(ctx, 5);
    RenamingMap b = make_schema_renaming(ctx, 5);
    CHECK(a.tables == b.tables);
    CHECK(a.columns == b.columns);
    CHECK(a.entity_col == b.entity_col);

    RenamingMap c = make_schema_renaming(ctx, 6);
    // Distinct synthetic names within one map.
    std::set<std::string> names;
    for (const auto& [orig, synth] : a.tables) names.insert(synth);
    CHECK(names.size() == a.tables.size());
    (void)c;

    // Applied renaming: agent-visible SQL uses synthetic names, harness still
    // binds splits and materializes through role bindings.
    ctx.apply_renaming(a);
    ctx.bind_split(Split::val);
    RowSet tables = ctx.execute_exploration("SHOW TABLES");
    bool synthetic_only = true;
    for (const auto& row : tables.rows) {
        std::string name = cell_to_text(row[0]);
        if (name == "events") synthetic_only = false;
    }
    CHECK(synthetic_only);

    std::string renamed_events = a.tables.at("events");
    RowSet rs = ctx.execute_exploration("SELECT COUNT(*) FROM " + renamed_events);
    CHECK(cell_as_double(rs.rows[0][0]) == doctest::Approx(12));

    // eval_table carries the synthetic role column names.
    RowSet eval_cols = ctx.execute_exploration("SELECT * FROM eval_table LIMIT 1");
    REQUIRE(eval_cols.columns.size() == 3);
    CHECK(eval_cols.columns[1] == a.entity_col);
    CHECK(eval_cols.columns[2] == a.timestamp_col);
}

TEST_CASE("prompt assembly") {
    PromptInputs in;
    in.task_type = TaskType::binary_classification;
    in.task_description = "Predict churn.";
    in.dataset_name = "events";
    in.entity_col = "user_id";
    in.timestamp_col = "ts";
    in.target_col = "label";
    in.n_val = 5;

    SUBCASE("classification prompt lists the full menu") {
        PromptSet p = assemble_prompts(in);
        for (const char* name : {"gbdt", "rf", "dart", "goss", "xgboost", "xgb_dart", "catboost"})
            CHECK(p.system.find(std::string("\"") + name + "\"") != std::string::npos);
        CHECK(p.system.find("ENTITY CLASSIFICATION") != std::string::npos);
        CHECK(p.execute.find("Validation set size: 5") != std::string::npos);
        CHECK(p.followup.find("Continue improving") != std::string::npos);
        CHECK(p.wrapup.find("last turn") != std::string::npos);
    }
    SUBCASE("regression prompt swaps objectives and log transform") {
        in.task_type = TaskType::regression;
        PromptSet p = assemble_prompts(in);
        CHECK(p.system.find("regression_l1") != std::string::npos);
        CHECK(p.system.find("log_transform_target") != std::string::npos);
        CHECK(p.system.find("ENTITY REGRESSION") != std::string::npos);
    }
    SUBCASE("no_feedback drops validation tooling and demands final output") {
        in.no_feedback = true;
        PromptSet p = assemble_prompts(in);
        CHECK(p.system.find("validate_program(feature_queries_json") == std::string::npos);
        CHECK(p.system.find("FINAL OUTPUT FORMAT") != std::string::npos);
        CHECK(p.system.find("EVALUATION WORKSPACE") == std::string::npos);
    }
    SUBCASE("no_workspace drops the workspace block only") {
        in.no_workspace = true;
        PromptSet p = assemble_prompts(in);
        CHECK(p.system.find("query_eval_workspace") == std::string::npos);
        CHECK(p.system.find("validate_program") != std::string::npos);
    }
    SUBCASE("allowed_models restricts the menu") {
        in.allowed_models = std::vector<std::string>{"catboost"};
        PromptSet p = assemble_prompts(in);
        CHECK(p.system.find("\"catboost\"") != std::string::npos);
        CHECK(p.system.find("\"goss\"") == std::string::npos);
    }
}

}  // TEST_SUITE
