#include "pdef/common.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace pdef {

std::string_view to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::none: return "none";
        case AttackKind::syn_flood: return "syn_flood";
        case AttackKind::slow_http: return "slow_http";
        case AttackKind::memory_dos: return "memory_dos";
    }
    return "none";
}

AttackKind attack_kind_from_string(std::string_view name) {
    if (name == "none") return AttackKind::none;
    if (name == "syn_flood") return AttackKind::syn_flood;
    if (name == "slow_http") return AttackKind::slow_http;
    if (name == "memory_dos") return AttackKind::memory_dos;
    throw ConfigError("unknown attack scenario '" + std::string(name) + "'");
}

std::string_view hypothesis_name(AttackKind kind) {
    return kind == AttackKind::none ? "unknown" : to_string(kind);
}

AttackKind hypothesis_from_string(std::string_view name) {
    if (name == "unknown") return AttackKind::none;
    return attack_kind_from_string(name);
}

bool is_flooding(AttackKind kind) {
    return kind == AttackKind::syn_flood || kind == AttackKind::slow_http;
}

std::string_view to_string(RoundLabel label) {
    switch (label) {
        case RoundLabel::secure: return "secure";
        case RoundLabel::contested: return "contested";
        case RoundLabel::compromised: return "compromised";
    }
    return "contested";
}

RoundLabel round_label_from_string(std::string_view name) {
    if (name == "secure") return RoundLabel::secure;
    if (name == "contested") return RoundLabel::contested;
    if (name == "compromised") return RoundLabel::compromised;
    throw DomainError("unknown round label '" + std::string(name) + "'");
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::running: return "continue";
        case Termination::secure_end: return "secure_end";
        case Termination::compromised_end: return "compromised_end";
    }
    return "continue";
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::undecided: return "continue";
        case Verdict::success: return "success";
        case Verdict::failure: return "failure";
    }
    return "continue";
}

Verdict verdict_from_string(std::string_view name) {
    if (name == "continue") return Verdict::undecided;
    if (name == "success") return Verdict::success;
    if (name == "failure") return Verdict::failure;
    throw DomainError("unknown verdict '" + std::string(name) + "'");
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::collector: return "collector";
        case Stage::analyzer: return "analyzer";
        case Stage::decision: return "decision";
        case Stage::deployer: return "deployer";
        case Stage::feedback: return "feedback";
    }
    return "collector";
}

Stage stage_from_string(std::string_view name) {
    for (int i = 0; i < kStageCount; ++i) {
        auto s = static_cast<Stage>(i);
        if (to_string(s) == name) return s;
    }
    throw DomainError("unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(RiskBucket b) {
    switch (b) {
        case RiskBucket::low: return "low";
        case RiskBucket::medium: return "medium";
        case RiskBucket::high: return "high";
    }
    return "low";
}

RiskBucket risk_bucket(double risk_score) {
    if (risk_score >= 7.0) return RiskBucket::high;
    if (risk_score >= 4.0) return RiskBucket::medium;
    return RiskBucket::low;
}

namespace {

// Howard Hinnant's days-from-civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

bool read_digits(std::string_view text, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > text.size()) return false;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + n, out);
    return ec == std::errc{} && ptr == first + n;
}

}  // namespace

std::optional<std::int64_t> parse_iso8601(std::string_view text) {
    if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
        text[16] != ':' || text[19] != 'Z') {
        return std::nullopt;
    }
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!read_digits(text, 0, 4, year) || !read_digits(text, 5, 2, month) || !read_digits(text, 8, 2, day) ||
        !read_digits(text, 11, 2, hour) || !read_digits(text, 14, 2, minute) ||
        !read_digits(text, 17, 2, second)) {
        return std::nullopt;
    }
    static constexpr std::array<int, 12> kDays{31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12 || day < 1 || day > kDays[month - 1] || hour > 23 || minute > 59 || second > 60) {
        return std::nullopt;
    }
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && day == 29 && !leap) return std::nullopt;
    return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
           hour * 3600 + minute * 60 + second;
}

std::string format_iso8601(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    std::int64_t rem = epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t y = 0;
    unsigned m = 0, d = 0;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                  static_cast<long long>(rem / 3600), static_cast<long long>((rem / 60) % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double hash_uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    const std::uint64_t h = mix_seed(mix_seed(a, b), c);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

bool is_valid_ipv4(std::string_view text) {
    int parts = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t dot = text.find('.', pos);
        const std::size_t end = dot == std::string_view::npos ? text.size() : dot;
        const std::size_t len = end - pos;
        if (len == 0 || len > 3) return false;
        if (len > 1 && text[pos] == '0') return false;
        int value = 0;
        if (!read_digits(text, pos, len, value) || value > 255) return false;
        ++parts;
        if (dot == std::string_view::npos) break;
        pos = dot + 1;
    }
    return parts == 4;
}

}  // namespace pdef
