#include "relsearch/prompts.hpp"

#include <sstream>

#include "json.hpp"
#include "relsearch/error.hpp"

using nlohmann::json;

namespace relsearch {

namespace {

struct MenuEntry {
    const char* name;
    const char* line;        // headline
    const char* cls_config;  // config block, classification
    const char* reg_config;  // config block, regression
};

const MenuEntry kMenu[] = {
    {"gbdt", "Standard Gradient Boosted Trees. Fast, strong default.",
     "Config: n_estimators (50-500), learning_rate (0.01-0.3),\n"
     "        max_depth (2-10), min_child_samples (1-100),\n"
     "        subsample (0.5-1.0), colsample_bytree (0.5-1.0)\n"
     "Regularization: lambda_l1 (0.0-10.0), lambda_l2 (0.0-10.0)",
     "Config: n_estimators (50-500), learning_rate (0.01-0.3),\n"
     "        max_depth (2-10), min_child_samples (1-100),\n"
     "        subsample (0.5-1.0), colsample_bytree (0.5-1.0)\n"
     "Regularization: lambda_l1 (0.0-10.0), lambda_l2 (0.0-10.0)\n"
     "objective: \"regression_l1\" (MAE), \"regression_l2\" (MSE), \"huber\"\n"
     "Default: \"regression_l1\" -- directly minimises eval metric."},
    {"rf", "Random Forest (bagging; less sensitive to learning rate).",
     "Config: same keys as gbdt", "Config: same keys as gbdt (including objective)"},
    {"dart", "DART Boosting (dropout regularization).", "Config: same keys as gbdt",
     "Config: same keys as gbdt (including objective)"},
    {"goss", "GOSS (gradient-based subsampling; fast on large datasets).",
     "Config: same keys as gbdt", "Config: same keys as gbdt (including objective)"},
    {"xgboost", "XGBoost (second-order gradients; different regularization).",
     "Config: n_estimators (50-500), learning_rate (0.01-0.3),\n"
     "        max_depth (2-10), min_child_weight (1-100),\n"
     "        subsample (0.5-1.0), colsample_bytree (0.5-1.0)\n"
     "Regularization: reg_alpha (0.0-10.0), reg_lambda (0.0-10.0)",
     "Config: n_estimators (50-500), learning_rate (0.01-0.3),\n"
     "        max_depth (2-10), min_child_weight (1-100),\n"
     "        subsample (0.5-1.0), colsample_bytree (0.5-1.0)\n"
     "objective: \"reg:absoluteerror\" (MAE), \"reg:squarederror\" (MSE),\n"
     "           \"reg:pseudohubererror\" (Huber)"},
    {"xgb_dart", "XGBoost + DART dropout.", "Config: same keys as xgboost",
     "Config: same keys as xgboost (including objective)"},
    {"catboost", "CatBoost (ordered boosting; robust on heterogeneous features).",
     "Config: n_estimators (50-500), learning_rate (0.01-0.3),\n"
     "        max_depth (2-10), l2_leaf_reg (0.1-10.0)",
     "Config: n_estimators (50-500), learning_rate (0.01-0.3),\n"
     "        max_depth (2-10), l2_leaf_reg (0.1-10.0)"},
};

const char* kWorkspaceSchemaBlock =
    "  trials\n"
    "    trial_id TEXT, trial_name TEXT, parent_trial_id TEXT,\n"
    "    created_at TEXT, split TEXT, model_choice TEXT,\n"
    "    resolved_model_config TEXT, feature_query_hash TEXT,\n"
    "    feature_block_names TEXT, primary_metric TEXT,\n"
    "    primary_score DOUBLE, metrics_json TEXT, notes TEXT\n"
    "\n"
    "  eval_predictions\n"
    "    trial_id TEXT, row_id INTEGER, entity_id TEXT, label TEXT,\n"
    "    score DOUBLE, predicted_class TEXT, split TEXT,\n"
    "    eval_cutoff TEXT\n";

std::string model_menu(const PromptInputs& in) {
    std::ostringstream out;
    int idx = 0;
    for (const auto& entry : kMenu) {
        if (in.allowed_models) {
            bool allowed = false;
            for (const auto& a : *in.allowed_models)
                if (a == entry.name) allowed = true;
            if (!allowed) continue;
        }
        ++idx;
        out << "  " << idx << ". \"" << entry.name << "\" -- " << entry.line << "\n";
        std::istringstream cfg(in.task_type == TaskType::binary_classification
                                   ? entry.cls_config
                                   : entry.reg_config);
        std::string line;
        while (std::getline(cfg, line)) out << "       " << line << "\n";
    }
    return out.str();
}

}  // namespace

PromptSet assemble_prompts(const PromptInputs& in) {
    const bool classification = in.task_type == TaskType::binary_classification;
    PromptSet prompts;

    std::ostringstream sys;
    sys << "You are a data scientist building a predictive pipeline for a "
        << (classification ? "ENTITY CLASSIFICATION" : "ENTITY REGRESSION") << " task.\n\n";
    if (classification) {
        sys << "GOAL: Find a set of SQL feature queries + a model choice that\n"
               "accurately predict the class label (" << in.target_col
            << ") for ALL entities\nin the validation set.\n\n";
    } else {
        sys << "GOAL: Find a set of SQL feature queries + a model choice that\n"
               "accurately predict the numerical value (" << in.target_col
            << ") for ALL\nentities in the validation set.\n\n";
    }

    sys << "You have the following tools:\n"
           "1. SQL tools (execute_query, get_table_info, etc.)\n"
           "   -- explore and query the database\n";
    if (!in.no_feedback) {
        sys << "2. validate_program(feature_queries_json, model_choice, model_config_json)\n"
               "   -- train and evaluate your feature pipeline on the validation split\n"
               "3. get_trial_history()\n"
               "   -- see what you've already tried and their scores\n";
        if (!in.no_workspace)
            sys << "4. query_eval_workspace(sql)\n"
                   "   -- analyze the evaluation workspace (trials, eval_predictions)\n";
    }
    sys << "\nRules:\n"
           "- Use SQL tools to explore the database. Do NOT guess table/column names.\n"
           "- Start by running SHOW TABLES and PRAGMA table_info('table') to\n"
           "  understand the schema.\n"
           "- train_table contains labeled training examples. Use it to learn patterns.\n"
           "- eval_table contains the current rows being scored (val/test input keys).\n"
           "- Always anchor feature SQL on eval_table (not train_table) -- eval_table\n"
           "  is swapped with the correct split at each call.\n"
           "- Write SQL queries that extract features PER TARGET ROW.\n"
           "- eval_table contains one row per target example, including row_id,\n  "
        << in.entity_col << ", and " << in.timestamp_col << ".\n"
        << "- Each feature query must be anchored on eval_table and return row_id.\n"
           "- For timestamped source tables, include temporal filters of the form\n"
           "  source_time < eval_table." << in.timestamp_col << ".\n"
        << "- Do not group only by " << in.entity_col
        << ": the same entity may appear at\n"
           "  multiple prediction timestamps. Group by row_id, and merge features\n"
           "  back by row_id.\n";
    if (!in.no_feedback) {
        sys << "- Call validate_program() with your SQL feature blocks, model_choice,\n"
               "  and optional model_config_json to run on the validation set.\n"
               "- Iterate based on the metrics, diagnostics, and error examples returned.\n";
    }
    sys << "\n";
    if (classification) {
        sys << "- For BINARY classification, the model outputs probability scores (0-1).\n"
               "- Think about features like: entity frequency, recency, aggregates from\n"
               "  related tables.\n";
        if (!in.no_feedback)
            sys << "- The validation tool returns metrics (AUROC, F1, etc.)\n  + diagnostics.\n";
    } else {
        sys << "- The model outputs a numeric value for each entity.\n";
        if (!in.no_feedback) sys << "- The validation tool returns metrics (MAE)\n  + diagnostics.\n";
        sys << "- Think about: historical averages, trends, aggregates from related\n  tables.\n"
               "- Primary objective for this run is MAE: minimize absolute error.\n";
    }

    sys << "\n=== WRAPPED MODEL MODE ===\n\n";
    if (in.no_feedback) {
        sys << "You cannot validate candidate programs against the data. Choose the\n"
               "final model from the menu below based on your exploration alone.\n\n";
    } else {
        sys << "Your validate_program() tool accepts:\n"
               "  - feature_queries_json: SQL feature queries (same as before)\n"
               "  - model_choice: one of the learners below\n"
               "  - model_config_json: optional JSON dict of hyperparameters\n\n";
    }
    sys << "Available models:\n" << model_menu(in);
    if (!classification)
        sys << "\n  For skewed targets: add \"log_transform_target\": true to\n"
               "  model_config_json. The harness fits on log1p(y) and reports MAE\n"
               "  back in the original scale.\n";
    sys << "\nCategorical features (all learners):\n"
           "  Add \"categorical_features\" inside model_config_json as a list of\n"
           "  \"<query_name>__<col>\" names to treat columns natively as categorical.\n"
           "  High-cardinality columns (>~4000 levels) should be bucketed in SQL first.\n"
           "\nConstraints:\n"
           "  - Do NOT write free-form training code, custom objectives, or ensembles.\n"
           "  - Do NOT perform hyperparameter search loops -- one config per call.\n"
           "  - Out-of-bounds config values are clamped automatically.\n"
           "  - Omitted config fields use strong defaults.\n"
           "  - The environment handles train/val splitting, fitting, and evaluation.\n";
    if (!in.no_feedback) {
        sys << "\nThe tool returns: metrics, resolved model config, row counts after merges,\n"
               "missingness rates, warnings, and best/worst prediction examples.\n"
               "Use this feedback to iterate on your SQL features.\n";
    } else {
        sys << "\n=== FINAL OUTPUT FORMAT ===\n"
               "When you have finished exploring, output the final program and\n"
               "predictive model configuration directly, as a single JSON object in\n"
               "your message text (no tool call):\n"
               "{\"feature_queries\": [{\"name\": \"...\", \"sql\": \"...\"}],\n"
               " \"model_choice\": \"gbdt\",\n"
               " \"model_config\": {}}\n"
               "Output only this JSON object.\n";
    }

    if (!in.no_feedback && !in.no_workspace) {
        sys << "\n=== EVALUATION WORKSPACE ===\n"
               "After each validate_program() call, the full evaluation output is\n"
               "persisted to a queryable workspace.\n"
               "Use query_eval_workspace(sql) to analyse results.\n\n"
               "Workspace tables:\n\n"
            << kWorkspaceSchemaBlock
            << "\nrow_id is positionally stable across trials for the same split, so\n"
               "you can join two trials on row_id to compare predictions on the same\n"
               "examples.\n\n"
               "IMPORTANT: These tables are analysis artifacts only. Do NOT use\n"
               "them as feature sources in your SQL feature queries.\n";
    }
    sys << "\nIMPORTANT: Always run PRAGMA table_info('tablename') to verify exact\n"
           "column names. Column names differ across datasets -- never assume a\n"
           "column like 'id', 'type', 'date', or 'count' exists without checking.\n";
    prompts.system = sys.str();

    std::ostringstream exec;
    exec << "Task: " << to_string(in.task_type) << "\n"
         << "Task Description: " << in.task_description << "\n"
         << "Dataset: " << in.dataset_name << "\n\n"
         << "Entity column: " << in.entity_col << "\n"
         << "Timestamp column: " << in.timestamp_col << "\n"
         << "Target column: " << in.target_col << "\n"
         << "Validation set size: " << in.n_val << " target rows\n\n";
    if (in.no_feedback) {
        exec << "WRAPPED MODEL MODE: You propose SQL features + a model choice as a\n"
                "single final JSON output; the environment trains and evaluates it once.\n\n"
                "Steps:\n"
                "1. Run SHOW TABLES to see available tables\n"
                "2. Run PRAGMA table_info('train_table') and inspect other tables\n"
                "3. Explore data distributions (SELECT COUNT(*), sample rows, etc.)\n"
                "4. Design SQL feature queries that extract per-target-row signals\n"
                "   anchored on eval_table and keyed by row_id\n"
                "5. Output the final JSON object described in the system prompt\n";
    } else {
        exec << "WRAPPED MODEL MODE: You propose SQL features + a model choice.\n"
                "The environment trains and evaluates.\n\n"
                "Steps:\n"
                "1. Run SHOW TABLES to see available tables\n"
                "2. Run PRAGMA table_info('train_table') and inspect other tables\n"
                "3. Explore data distributions (SELECT COUNT(*), sample rows, etc.)\n"
                "4. Design SQL feature queries that extract per-target-row signals\n"
                "   anchored on eval_table and keyed by row_id\n"
                "5. Call validate_program() with your features, model_choice, and\n"
                "   optional config\n\n"
                "Example call:\n"
                "  validate_program(\n"
                "    feature_queries_json='[{\"name\": \"basic_stats\",\n"
                "                            \"sql\": \"SELECT ...\"}]',\n"
                "    model_choice=\"gbdt\",\n"
                "    model_config_json='{}'\n"
                "  )\n\n"
                "Start with gbdt and simple features. Iterate by improving SQL\n"
                "features based on diagnostics.\n";
        if (!in.no_workspace)
            exec << "\nYou have query_eval_workspace(sql): after each validate_program(),\n"
                    "analyze trials and eval_predictions as described in the system prompt.\n";
    }
    prompts.execute = exec.str();

    if (in.no_feedback) {
        prompts.followup =
            "Finish now: output the final JSON object with your feature queries,\n"
            "model choice, and model configuration.";
        prompts.wrapup = prompts.followup;
    } else {
        std::ostringstream follow;
        follow << "Continue improving your pipeline.\n"
                  "- If you haven't validated yet, call validate_program() now.\n";
        if (!in.no_workspace)
            follow << "- Full evaluation results are available in the workspace after each "
                      "trial.\n"
                      "  Use query_eval_workspace() for error analysis.\n";
        follow << "- Call get_trial_history() to see all past attempts.\n";
        if (!in.no_workspace)
            follow << "- Use what you find in the workspace to guide your next SQL feature\n"
                      "  improvements.\n";
        prompts.followup = follow.str();
        prompts.wrapup =
            "This is your last turn. If you haven't submitted a validation yet, do so now.\n"
            "Call validate_program() with your best SQL queries, model choice, and model "
            "configuration.\n"
            "If you already have results, call get_trial_history() to confirm your best score.";
    }
    return prompts;
}

std::vector<std::string> available_tools(bool no_feedback, bool no_workspace) {
    std::vector<std::string> tools = {"execute_query", "get_table_info"};
    if (!no_feedback) {
        tools.push_back("validate_program");
        tools.push_back("get_trial_history");
        if (!no_workspace) tools.push_back("query_eval_workspace");
    }
    return tools;
}

std::string tool_schema_json(const std::string& tool_name) {
    json schema;
    if (tool_name == "execute_query") {
        schema = {
            {"name", "execute_query"},
            {"description",
             "Execute a SQL query and return results.\n\n"
             "Args:\n    query (str): The SQL query to execute.\n\n"
             "Returns:\n    For SELECT queries: tabular results (column -> value per row).\n"
             "    For errors: error message string starting with \"Error:\".\n\n"
             "Note: SELECT queries without a LIMIT clause are automatically\ncapped at 200 "
             "rows."},
            {"parameters",
             {{"type", "object"},
              {"properties", {{"query", {{"type", "string"}}}}},
              {"required", json::array({"query"})}}}};
    } else if (tool_name == "get_table_info") {
        schema = {
            {"name", "get_table_info"},
            {"description",
             "Get comprehensive information about table(s) in the database.\n\n"
             "Returns schema, primary keys, foreign keys, and row counts.\n"
             "If table_name is provided, returns info for that table;\n"
             "otherwise returns info for all tables.\n\n"
             "Args:\n    table_name (str, optional): Name of a specific table.\n"
             "        If None, returns info for all tables."},
            {"parameters",
             {{"type", "object"},
              {"properties", {{"table_name", {{"type", "string"}}}}},
              {"required", json::array()}}}};
    } else if (tool_name == "validate_program") {
        schema = {
            {"name", "validate_program"},
            {"description",
             "Test a predictive program using a wrapped model on a data split.\n\n"
             "Args:\n"
             "    feature_queries_json: JSON string of feature queries.\n"
             "        Format: [{\"name\": \"query_name\", \"sql\": \"SELECT ...\"}]\n"
             "        Each query must be anchored on eval_table, return row_id,\n"
             "        and produce feature columns for each target row. eval_table\n"
             "        contains the split rows currently being scored, including\n"
             "        row_id, the entity column, and the timestamp column. For\n"
             "        timestamped source tables, feature queries must filter source\n"
             "        records to occur before the eval_table timestamp.\n"
             "        train_table is available and contains labeled training rows.\n"
             "    model_choice: One of 7 learners: \"gbdt\", \"rf\", \"dart\", \"goss\",\n"
             "        \"xgboost\", \"xgb_dart\", \"catboost\".\n"
             "        - gbdt:     standard gradient boosting\n"
             "        - rf:       random forest (bagging)\n"
             "        - dart:     gradient boosting with DART dropout\n"
             "        - goss:     gradient-based one-side sampling\n"
             "        - xgboost:  second-order gradient boosting\n"
             "        - xgb_dart: second-order boosting with DART dropout\n"
             "        - catboost: boosting tuned for categorical features\n"
             "    model_config_json: JSON dict of hyperparameters (optional).\n"
             "        Common keys: n_estimators, learning_rate, max_depth,\n"
             "                     subsample, colsample_bytree.\n"
             "        LightGBM-style variants also accept: min_child_samples,\n"
             "                     lambda_l1, lambda_l2.\n"
             "        XGBoost-style variants also accept: min_child_weight,\n"
             "                     reg_alpha, reg_lambda.\n"
             "        CatBoost also accepts: l2_leaf_reg.\n"
             "        Out-of-bounds values are clamped. Unknown keys are ignored.\n\n"
             "Returns:\n    Formatted string with metrics, diagnostics, and trial history."},
            {"parameters",
             {{"type", "object"},
              {"properties",
               {{"feature_queries_json", {{"type", "string"}}},
                {"model_choice", {{"type", "string"}}},
                {"model_config_json", {{"type", "string"}}}}},
              {"required", json::array({"feature_queries_json", "model_choice"})}}}};
    } else if (tool_name == "get_trial_history") {
        schema = {{"name", "get_trial_history"},
                  {"description",
                   "Get a summary of all previous validation trials.\n\n"
                   "Returns:\n    Formatted string showing trial history with scores and\n"
                   "    approach summaries."},
                  {"parameters",
                   {{"type", "object"}, {"properties", json::object()},
                    {"required", json::array()}}}};
    } else if (tool_name == "query_eval_workspace") {
        schema = {
            {"name", "query_eval_workspace"},
            {"description",
             std::string(
                 "Query the evaluation workspace to analyse trial results.\n\n"
                 "The workspace is a SQL database with the following tables:\n\n") +
                 kWorkspaceSchemaBlock +
                 "\nrow_id is stable across trials for the same split, so you can\n"
                 "join two trials on row_id to compare predictions on the same examples.\n\n"
                 "IMPORTANT: These tables are analysis artifacts only. Do NOT use\n"
                 "them as feature sources in your SQL feature queries.\n\n"
                 "Args:\n    sql: A SELECT query to run against the workspace.\n\n"
                 "Returns:\n    Query results (up to 500 rows) or an error message."},
            {"parameters",
             {{"type", "object"},
              {"properties", {{"sql", {{"type", "string"}}}}},
              {"required", json::array({"sql"})}}}};
    } else {
        raise(ErrorKind::ConfigError, "unknown tool '" + tool_name + "'");
    }
    return schema.dump();
}

}  // namespace relsearch
