#pragma once

// Prompt assembly for the search loop: system prompt, first user message,
// follow-up and wrap-up messages, and the tool schemas handed to an LLM
// endpoint.

#include <optional>
#include <string>
#include <vector>

#include "relsearch/task.hpp"

namespace relsearch {

struct PromptInputs {
    TaskType task_type = TaskType::binary_classification;
    std::string task_description;
    std::string dataset_name;
    std::string entity_col;
    std::string timestamp_col;
    std::string target_col;
    size_t n_val = 0;

    bool no_feedback = false;
    bool no_workspace = false;
    std::optional<std::vector<std::string>> allowed_models;
};

struct PromptSet {
    std::string system;
    std::string execute;
    std::string followup;
    std::string wrapup;
};

PromptSet assemble_prompts(const PromptInputs& in);

/// Tool names available under the given ablation flags, in menu order.
std::vector<std::string> available_tools(bool no_feedback, bool no_workspace);

/// Function-calling schema (OpenAI-style JSON) for one tool.
std::string tool_schema_json(const std::string& tool_name);

}  // namespace relsearch
