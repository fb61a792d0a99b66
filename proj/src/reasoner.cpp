#include "pdef/reasoner.hpp"

#include "pdef/assets.hpp"
#include "pdef/io.hpp"
#include "pdef/json_schema.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <regex>

namespace pdef {

std::string_view asset(const std::string& name) {
    const auto& all = embedded_assets();
    const auto it = all.find(name);
    if (it == all.end()) throw ConfigError("missing asset '" + name + "'");
    return it->second;
}

void ReasonerConfig::validate() const {
    if (backend == BackendKind::oracle) return;
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must lie in [0,2]");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0,1]");
    if (retries < 0) throw ConfigError("retries must be >= 0");
    if (!(timeout_s > 0.0)) throw ConfigError("timeout must be positive");
    if (price_input < 0 || price_output < 0) throw ConfigError("token prices must be >= 0");
    if (endpoint.empty()) throw ConfigError("remote backend needs an endpoint URL");
}

ReasonerConfig model_preset(const std::string& name) {
    ReasonerConfig c;
    c.backend = BackendKind::remote;
    if (name == "gpt-4o-mini") {
        c.model_name = "gpt-4o-mini";
        c.temperature = 1.0;
        c.top_p = 1.0;
    } else if (name == "deepseek-r1-distill-qwen-32b") {
        c.model_name = "deepseek-r1-distill-qwen-32b";
        c.temperature = 0.6;
        c.top_p = 0.95;
    } else if (name == "qwen3-32b") {
        c.model_name = "qwen3-32b";
        c.temperature = 0.7;
        c.top_p = 0.8;
    } else {
        throw ConfigError("unknown model preset '" + name + "'");
    }
    return c;
}

Usage& Usage::operator+=(const Usage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    cost += o.cost;
    latency_s += o.latency_s;
    calls += o.calls;
    return *this;
}

Usage usage_since(const Usage& before, const Usage& now) {
    Usage d;
    d.input_tokens = now.input_tokens - before.input_tokens;
    d.output_tokens = now.output_tokens - before.output_tokens;
    d.cost = now.cost - before.cost;
    d.latency_s = now.latency_s - before.latency_s;
    d.calls = now.calls - before.calls;
    return d;
}

Usage Reasoner::total_usage() const {
    std::lock_guard lock(usage_mu_);
    return total_;
}

void Reasoner::bill(const Usage& u) {
    std::lock_guard lock(usage_mu_);
    total_ += u;
}

double token_cost(std::int64_t input_tokens, std::int64_t output_tokens, double price_in, double price_out) {
    return static_cast<double>(input_tokens) * price_in + static_cast<double>(output_tokens) * price_out;
}

const Json& stage_schema(Stage stage) {
    static const auto schemas = [] {
        std::array<Json, kStageCount> out;
        for (int i = 0; i < kStageCount; ++i) {
            const auto s = static_cast<Stage>(i);
            out[static_cast<std::size_t>(i)] =
                Json::parse(asset("schemas/" + std::string(to_string(s)) + ".json"));
        }
        return out;
    }();
    return schemas[static_cast<std::size_t>(stage)];
}

std::string system_prompt() { return std::string(asset("prompts/system.txt")); }

std::string render_prompt(Stage stage, const Json& payload) {
    std::string text(asset("prompts/" + std::string(to_string(stage)) + ".txt"));
    auto replace = [&](const std::string& key, const std::string& value) {
        for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
            text.replace(pos, key.size(), value);
        }
    };
    const auto round = payload.find("round");
    replace("{{round}}", round != payload.end() ? round->dump() : "?");
    replace("{{schema}}", stage_schema(stage).dump());
    replace("{{payload}}", payload.dump(2));
    return text;
}

Json parse_reply_json(const std::string& raw) {
    std::string text = raw;
    auto strip = [](std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        const auto e = s.find_last_not_of(" \t\r\n");
        s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    strip(text);
    if (text.rfind("```", 0) == 0) {
        const auto nl = text.find('\n');
        text = nl == std::string::npos ? text.substr(3) : text.substr(nl + 1);
        if (const auto end = text.rfind("```"); end != std::string::npos) text = text.substr(0, end);
        strip(text);
    }
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw ReasonerError(std::string("reply is not JSON: ") + ex.what());
    }
    if (!j.is_object()) throw ReasonerError("reply is not a JSON object");
    return j;
}

std::unique_ptr<Reasoner> make_reasoner(const ReasonerConfig& config) {
    config.validate();
    if (config.backend == BackendKind::oracle) return std::make_unique<OracleReasoner>();
    return std::make_unique<RemoteReasoner>(config);
}

RemoteReasoner::RemoteReasoner(ReasonerConfig config) : config_(std::move(config)) { config_.validate(); }

namespace {

struct Url {
    std::string scheme_host_port;
    std::string path;
};

Url split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("malformed endpoint URL '" + url + "'");
    return Url{m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

RemoteReasoner::Exchange RemoteReasoner::post(const Json& request) {
    const auto url = split_url(config_.endpoint);
    httplib::Client client(url.scheme_host_port);
    if (!client.is_valid()) throw TransportError("cannot use endpoint " + config_.endpoint);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(url.path, headers, request.dump(), "application/json");
    const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!res) throw TransportError("transport failure: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("endpoint answered HTTP " + std::to_string(res->status));

    Exchange ex;
    ex.usage.latency_s = latency;
    ex.usage.calls = 1;
    try {
        const auto body = Json::parse(res->body);
        ex.content = body.at("choices").at(0).at("message").at("content").get<std::string>();
        if (const auto u = body.find("usage"); u != body.end() && u->is_object()) {
            ex.usage.input_tokens = u->value("prompt_tokens", std::int64_t{0});
            ex.usage.output_tokens = u->value("completion_tokens", std::int64_t{0});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ReasonerError(std::string("malformed chat-completion body: ") + e.what());
    }
    ex.usage.cost = token_cost(ex.usage.input_tokens, ex.usage.output_tokens, config_.price_input, config_.price_output);
    return ex;
}

void RemoteReasoner::log_transcript(const Json& entry) {
    if (config_.transcript_path.empty()) return;
    std::lock_guard lock(transcript_mu_);
    append_line(config_.transcript_path, entry.dump());
}

ReasonerReply RemoteReasoner::complete(Stage stage, const Json& payload) {
    Json messages = Json::array({{{"role", "system"}, {"content", system_prompt()}},
                                 {{"role", "user"}, {"content", render_prompt(stage, payload)}}});
    ReasonerReply reply;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        Json request = {{"model", config_.model_name},
                        {"messages", messages},
                        {"temperature", config_.temperature},
                        {"top_p", config_.top_p}};
        const auto ex = post(request);
        reply.usage += ex.usage;
        bill(ex.usage);
        log_transcript({{"stage", to_string(stage)},
                        {"attempt", attempt},
                        {"request", request},
                        {"reply", ex.content},
                        {"input_tokens", ex.usage.input_tokens},
                        {"output_tokens", ex.usage.output_tokens}});
        try {
            Json parsed = parse_reply_json(ex.content);
            const auto problems = validate_schema(stage_schema(stage), parsed);
            if (problems.empty()) {
                reply.response = std::move(parsed);
                return reply;
            }
            last_error = problems.front();
        } catch (const ReasonerError& e) {
            last_error = e.what();
        }
        messages.push_back({{"role", "assistant"}, {"content", ex.content}});
        messages.push_back({{"role", "user"},
                            {"content", "The reply was rejected (" + last_error +
                                            "). Answer again with one JSON object matching the schema."}});
    }
    throw ReasonerError("no schema-valid " + std::string(to_string(stage)) + " reply after " +
                        std::to_string(config_.retries + 1) + " attempts: " + last_error);
}

}  // namespace pdef
