#pragma once

#include "pdef/cloud_env.hpp"
#include "pdef/decision.hpp"

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

namespace pdef::test {

inline ScenarioConfig scenario(AttackKind kind, std::uint64_t seed = 1) {
    ScenarioConfig c;
    c.attack = kind;
    c.seed = seed;
    return c;
}

inline RawEvent event(std::string ts, std::string name, std::optional<std::string> ip = std::nullopt,
                      bool relevant = true, bool hostile = false) {
    RawEvent e;
    e.timestamp = std::move(ts);
    e.event = std::move(name);
    e.source_ip = std::move(ip);
    e.truth = GroundTruth{relevant, hostile};
    return e;
}

inline Inbound legit_only(int count, const std::string& source = "10.0.0.1") {
    Inbound in;
    in.legit.flows.push_back(Flow{source, FlowKind::legit, count});
    return in;
}

// Suffix scan used as the termination oracle.
inline Termination brute_force_termination(const std::vector<RoundLabel>& h, int k) {
    if (static_cast<int>(h.size()) < k) return Termination::running;
    bool all_secure = true, all_compromised = true;
    for (std::size_t i = h.size() - static_cast<std::size_t>(k); i < h.size(); ++i) {
        all_secure = all_secure && h[i] == RoundLabel::secure;
        all_compromised = all_compromised && h[i] == RoundLabel::compromised;
    }
    if (all_secure) return Termination::secure_end;
    if (all_compromised) return Termination::compromised_end;
    return Termination::running;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("pdef_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace pdef::test
