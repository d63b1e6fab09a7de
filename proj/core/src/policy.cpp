#include "relsearch/policy.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "relsearch/error.hpp"
#include "relsearch/prompts.hpp"

using nlohmann::json;

namespace relsearch {

namespace {

PolicyTurn turn_from_json(const json& step) {
    PolicyTurn turn;
    auto add_call = [&](const json& obj) {
        if (!obj.is_object() || !obj.contains("tool"))
            raise(ErrorKind::ConfigError, "script step must carry a 'tool' field");
        ToolCall call;
        call.name = obj["tool"].get<std::string>();
        call.arguments_json = obj.value("args", json::object()).dump();
        turn.tool_calls.push_back(std::move(call));
    };
    if (step.is_array()) {
        for (const auto& obj : step) add_call(obj);
    } else if (step.is_object() && step.contains("text")) {
        turn.text = step["text"].is_string() ? step["text"].get<std::string>()
                                             : step["text"].dump();
    } else {
        add_call(step);
    }
    return turn;
}

}  // namespace

ScriptedPolicy ScriptedPolicy::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::IoError, "cannot read policy script '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

ScriptedPolicy ScriptedPolicy::from_json(const std::string& script_json) {
    json j;
    try {
        j = json::parse(script_json);
    } catch (const json::exception& e) {
        raise(ErrorKind::ConfigError, std::string("policy script is not valid JSON: ") + e.what());
    }
    if (!j.is_array()) raise(ErrorKind::ConfigError, "policy script must be a JSON array");
    ScriptedPolicy p;
    for (const auto& step : j) p.turns_.push_back(turn_from_json(step));
    return p;
}

PolicyTurn ScriptedPolicy::next_turn(const std::vector<Message>&) {
    if (cursor_ >= turns_.size()) {
        PolicyTurn done;
        done.exhausted = true;
        return done;
    }
    return turns_[cursor_++];
}

LlmProfile LlmProfile::load(const std::string& profile_path) {
    std::ifstream in(profile_path);
    if (!in) raise(ErrorKind::IoError, "cannot read llm profile '" + profile_path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(ErrorKind::ConfigError, std::string("llm profile is not valid JSON: ") + e.what());
    }
    LlmProfile p;
    p.endpoint = j.value("endpoint", "");
    p.model = j.value("model", "");
    p.api_key_env = j.value("api_key_env", "");
    p.temperature = j.value("temperature", 1.0);
    p.max_output_tokens = j.value("max_output_tokens", 8000);
    if (p.endpoint.empty() || p.model.empty())
        raise(ErrorKind::ConfigError, "llm profile needs 'endpoint' and 'model'");
    return p;
}

struct LlmPolicy::Impl {
    LlmProfile profile;
    std::vector<std::string> tools;
    int timeout_s = 900;
    int backoff_ms = 1000;

    std::string host;
    std::string path;

    void split_endpoint() {
        std::string url = profile.endpoint;
        auto scheme_end = url.find("://");
        std::string rest = scheme_end == std::string::npos ? url : url.substr(scheme_end + 3);
        std::string scheme = scheme_end == std::string::npos ? "http" : url.substr(0, scheme_end);
        auto slash = rest.find('/');
        host = scheme + "://" + (slash == std::string::npos ? rest : rest.substr(0, slash));
        path = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);
    }
};

LlmPolicy::LlmPolicy(LlmProfile profile, std::vector<std::string> tool_names,
                     int per_turn_timeout_s)
    : impl_(std::make_unique<Impl>()) {
    impl_->profile = std::move(profile);
    impl_->tools = std::move(tool_names);
    impl_->timeout_s = per_turn_timeout_s;
    impl_->split_endpoint();
}

LlmPolicy::~LlmPolicy() = default;

void LlmPolicy::set_retry_backoff_ms(int ms) { impl_->backoff_ms = ms; }

PolicyTurn LlmPolicy::next_turn(const std::vector<Message>& history) {
    Impl& im = *impl_;

    json messages = json::array();
    int call_counter = 0;
    std::vector<std::string> pending_ids;
    for (const auto& msg : history) {
        if (msg.role == "assistant" && !msg.tool_calls.empty()) {
            json calls = json::array();
            pending_ids.clear();
            for (const auto& call : msg.tool_calls) {
                std::string id = "call_" + std::to_string(++call_counter);
                pending_ids.push_back(id);
                calls.push_back({{"id", id},
                                 {"type", "function"},
                                 {"function",
                                  {{"name", call.name}, {"arguments", call.arguments_json}}}});
            }
            json m{{"role", "assistant"}, {"tool_calls", calls}};
            if (!msg.content.empty()) m["content"] = msg.content;
            messages.push_back(m);
        } else if (msg.role == "tool") {
            std::string id = pending_ids.empty() ? "call_0" : pending_ids.front();
            if (!pending_ids.empty()) pending_ids.erase(pending_ids.begin());
            messages.push_back({{"role", "tool"},
                                {"tool_call_id", id},
                                {"name", msg.tool_name},
                                {"content", msg.content}});
        } else {
            messages.push_back({{"role", msg.role}, {"content", msg.content}});
        }
    }

    json payload{{"model", im.profile.model},
                 {"temperature", im.profile.temperature},
                 {"max_tokens", im.profile.max_output_tokens},
                 {"messages", messages}};
    if (!im.tools.empty()) {
        json tools = json::array();
        for (const auto& name : im.tools)
            tools.push_back({{"type", "function"}, {"function", json::parse(tool_schema_json(name))}});
        payload["tools"] = tools;
    }

    httplib::Client client(im.host);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(im.timeout_s, 0);
    httplib::Headers headers;
    if (!im.profile.api_key_env.empty()) {
        const char* key = std::getenv(im.profile.api_key_env.c_str());
        if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const auto started = std::chrono::steady_clock::now();
    std::string body = payload.dump();
    std::string error_text;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(im.backoff_ms * (1 << (attempt - 1))));
        auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
        if (elapsed >= im.timeout_s)
            raise(ErrorKind::PolicyTimeout, "per-turn budget exhausted before a response");

        auto res = client.Post(im.path, headers, body, "application/json");
        if (!res) {
            error_text = "no response from endpoint " + im.host;
            continue;
        }
        if (res->status >= 500) {
            error_text = "endpoint returned status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            raise(ErrorKind::TransportError,
                  "endpoint returned status " + std::to_string(res->status) + ": " + res->body);

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception& e) {
            raise(ErrorKind::TransportError, std::string("malformed endpoint reply: ") + e.what());
        }
        PolicyTurn turn;
        if (!reply.contains("choices") || reply["choices"].empty())
            raise(ErrorKind::TransportError, "endpoint reply has no choices");
        const json& message = reply["choices"][0].value("message", json::object());
        if (message.contains("content") && message["content"].is_string())
            turn.text = message["content"].get<std::string>();
        for (const auto& call : message.value("tool_calls", json::array())) {
            ToolCall tc;
            tc.name = call.value("function", json::object()).value("name", "");
            tc.arguments_json = call.value("function", json::object()).value("arguments", "{}");
            turn.tool_calls.push_back(std::move(tc));
        }
        return turn;
    }
    raise(ErrorKind::TransportError, error_text.empty() ? "transport failed" : error_text);
}

}  // namespace relsearch
