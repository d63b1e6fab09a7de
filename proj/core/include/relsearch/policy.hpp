#pragma once

// Policies produce the next turn's tool calls. ScriptedPolicy replays a JSON
// action script; LlmPolicy speaks a chat-completions HTTP protocol with
// function-calling schemas.

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace relsearch {

struct ToolCall {
    std::string name;
    std::string arguments_json;
};

struct Message {
    std::string role;  // system | user | assistant | tool
    std::string content;
    std::string tool_name;            // role == tool
    std::vector<ToolCall> tool_calls;  // role == assistant
};

struct PolicyTurn {
    std::vector<ToolCall> tool_calls;
    std::string text;
    bool exhausted = false;  // scripted policy ran out of steps
};

class Policy {
  public:
    virtual ~Policy() = default;
    virtual PolicyTurn next_turn(const std::vector<Message>& history) = 0;
};

/// Deterministic policy replaying a JSON array; each element is one turn:
/// either a single {"tool","args"} object, an array of such objects, or a
/// {"text": ...} final message.
class ScriptedPolicy : public Policy {
  public:
    static ScriptedPolicy from_file(const std::string& path);
    static ScriptedPolicy from_json(const std::string& script_json);

    PolicyTurn next_turn(const std::vector<Message>& history) override;

  private:
    std::vector<PolicyTurn> turns_;
    size_t cursor_ = 0;
};

struct LlmProfile {
    std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string api_key_env;  // name of the env var carrying the key
    double temperature = 1.0;
    int max_output_tokens = 8000;

    static LlmProfile load(const std::string& profile_path);
};

class LlmPolicy : public Policy {
  public:
    LlmPolicy(LlmProfile profile, std::vector<std::string> tool_names,
              int per_turn_timeout_s = 900);
    ~LlmPolicy() override;

    PolicyTurn next_turn(const std::vector<Message>& history) override;

    void set_retry_backoff_ms(int ms);  // transport retry base delay

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace relsearch
