#pragma once

#include "pdef/common.hpp"
#include "pdef/telemetry.hpp"

#include <memory>
#include <mutex>
#include <string>

namespace pdef {

enum class BackendKind { oracle, remote };

struct ReasonerConfig {
    BackendKind backend = BackendKind::oracle;
    std::string model_name = "oracle";
    double temperature = 1.0;
    double top_p = 1.0;
    std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
    std::string api_key_env = "PDEF_API_KEY";
    double price_input = 0.0;   // currency per input token
    double price_output = 0.0;  // currency per output token
    double timeout_s = 60.0;
    int retries = 2;            // extra attempts after a schema-invalid reply
    std::string transcript_path;  // JSON lines of every exchange; empty disables

    // Throws ConfigError for sampling values outside provider ranges.
    void validate() const;
};

// Named sampling presets for the three evaluated models. Prices default to 0
// and are meant to be set from the provider's price list.
ReasonerConfig model_preset(const std::string& name);

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double cost = 0.0;
    double latency_s = 0.0;
    int calls = 0;

    Usage& operator+=(const Usage& o);
};
// Difference of two cumulative readings.
Usage usage_since(const Usage& before, const Usage& now);

struct ReasonerReply {
    Json response;
    Usage usage;
};

// Response schema and rendered prompt for a stage.
const Json& stage_schema(Stage stage);
std::string render_prompt(Stage stage, const Json& payload);
std::string system_prompt();

class Reasoner {
public:
    virtual ~Reasoner() = default;
    // The returned response always satisfies stage_schema(stage); otherwise
    // ReasonerError is thrown.
    virtual ReasonerReply complete(Stage stage, const Json& payload) = 0;
    virtual std::string name() const = 0;

    // Everything billed so far, including attempts that ended in an error.
    Usage total_usage() const;

protected:
    void bill(const Usage& u);

private:
    mutable std::mutex usage_mu_;
    Usage total_;
};

// Rule tables; a pure function of the payload with zero cost.
class OracleReasoner : public Reasoner {
public:
    ReasonerReply complete(Stage stage, const Json& payload) override;
    std::string name() const override { return "oracle"; }
};

// Chat-completions JSON over HTTP(S).
class RemoteReasoner : public Reasoner {
public:
    explicit RemoteReasoner(ReasonerConfig config);
    ReasonerReply complete(Stage stage, const Json& payload) override;
    std::string name() const override { return config_.model_name; }
    const ReasonerConfig& config() const { return config_; }

private:
    struct Exchange {
        std::string content;
        Usage usage;
    };
    Exchange post(const Json& request);
    void log_transcript(const Json& entry);

    ReasonerConfig config_;
    std::mutex transcript_mu_;
};

std::unique_ptr<Reasoner> make_reasoner(const ReasonerConfig& config);

// Strips a surrounding ``` or ```json fence and parses the remainder.
// Throws ReasonerError when the text is not a JSON object.
Json parse_reply_json(const std::string& text);

// Linear token pricing.
double token_cost(std::int64_t input_tokens, std::int64_t output_tokens, double price_in, double price_out);

}  // namespace pdef
