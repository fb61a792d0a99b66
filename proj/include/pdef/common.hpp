#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pdef {

// Error hierarchy. Validation paths return reports instead of throwing; these
// are for broken contracts, bad configuration and unrecoverable stage failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class PlanningError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class ReasonerError : public Error {
public:
    using Error::Error;
};

// The endpoint could not be reached or answered with a non-200 status.
class TransportError : public ReasonerError {
public:
    using ReasonerError::ReasonerError;
};

class ContractViolation : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class ReportError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class AttackKind { none, syn_flood, slow_http, memory_dos };

// Scenario names use "none" for a disabled attack; hypotheses use "unknown".
std::string_view to_string(AttackKind kind);
AttackKind attack_kind_from_string(std::string_view name);
std::string_view hypothesis_name(AttackKind kind);
AttackKind hypothesis_from_string(std::string_view name);

bool is_flooding(AttackKind kind);

enum class RoundLabel { secure, contested, compromised };
std::string_view to_string(RoundLabel label);
RoundLabel round_label_from_string(std::string_view name);

enum class Termination { running, secure_end, compromised_end };
std::string_view to_string(Termination t);

enum class Verdict { undecided, success, failure };
std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view name);

// Pipeline stages in execution order.
enum class Stage { collector = 0, analyzer = 1, decision = 2, deployer = 3, feedback = 4 };
inline constexpr int kStageCount = 5;
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

enum class RiskBucket { low, medium, high };
std::string_view to_string(RiskBucket b);
RiskBucket risk_bucket(double risk_score);

// ISO-8601 UTC timestamps of the form YYYY-MM-DDThh:mm:ssZ.
std::optional<std::int64_t> parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t epoch_seconds);

// Deterministic uniform value in [0, 1) from a tuple of integers (splitmix64).
double hash_uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

bool is_valid_ipv4(std::string_view text);

}  // namespace pdef
