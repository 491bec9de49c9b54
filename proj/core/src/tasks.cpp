#include "taskmoe/tasks.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "taskmoe/common.hpp"
#include "taskmoe/corpus.hpp"

namespace taskmoe {

std::string to_string(TaskMode mode) {
    return mode == TaskMode::LanguagePair ? "lp" : "tl";
}

TaskMode task_mode_from_string(const std::string& s) {
    if (s == "lp") return TaskMode::LanguagePair;
    if (s == "tl") return TaskMode::TargetLanguage;
    throw ConfigError("unknown task mode: " + s + " (expected \"lp\" or \"tl\")");
}

std::string to_string(InferenceStrategy s) {
    switch (s) {
        case InferenceStrategy::LpA: return "lp_a";
        case InferenceStrategy::LpB: return "lp_b";
        case InferenceStrategy::LpC: return "lp_c";
        case InferenceStrategy::TlA: return "tl_a";
        case InferenceStrategy::TlB: return "tl_b";
    }
    throw ConfigError("invalid strategy value");
}

InferenceStrategy strategy_from_string(const std::string& s) {
    if (s == "lp_a") return InferenceStrategy::LpA;
    if (s == "lp_b") return InferenceStrategy::LpB;
    if (s == "lp_c") return InferenceStrategy::LpC;
    if (s == "tl_a") return InferenceStrategy::TlA;
    if (s == "tl_b") return InferenceStrategy::TlB;
    throw ConfigError("unknown inference strategy: " + s);
}

bool strategy_matches_mode(InferenceStrategy s, TaskMode mode) {
    const bool lp = s == InferenceStrategy::LpA || s == InferenceStrategy::LpB ||
                    s == InferenceStrategy::LpC;
    return lp == (mode == TaskMode::LanguagePair);
}

TaskRegistry TaskRegistry::build(TaskMode mode,
                                 const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) throw ConfigError("task registry: empty training pair list");
    std::set<std::string> keys;
    for (const auto& [src, tgt] : pairs) {
        if (src.empty() || tgt.empty())
            throw ConfigError("task registry: empty language code in pair list");
        keys.insert(mode == TaskMode::LanguagePair ? src + "-" + tgt : tgt);
    }
    return from_keys(mode, {keys.begin(), keys.end()});
}

TaskRegistry TaskRegistry::from_keys(TaskMode mode, const std::vector<std::string>& keys) {
    TaskRegistry reg;
    reg.mode_ = mode;
    reg.keys_ = keys;
    std::sort(reg.keys_.begin(), reg.keys_.end());
    for (std::size_t i = 0; i < reg.keys_.size(); ++i) {
        if (!reg.index_.emplace(reg.keys_[i], static_cast<TaskId>(i)).second)
            throw ConfigError("task registry: duplicate key " + reg.keys_[i]);
    }
    return reg;
}

const std::string& TaskRegistry::key_of(TaskId id) const {
    if (id < 0 || id >= size())
        throw ResolveError("task id " + std::to_string(id) + " outside registry of size " +
                           std::to_string(size()));
    return keys_[static_cast<std::size_t>(id)];
}

TaskId TaskRegistry::id_of(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end())
        throw ResolveError("task \"" + key + "\" is not in the " + to_string(mode_) +
                           " registry (" + std::to_string(size()) + " tasks)");
    return it->second;
}

TaskId TaskRegistry::resolve_train(const ParallelExample& ex) const {
    return resolve_train(ex.src_lang, ex.tgt_lang);
}

TaskId TaskRegistry::resolve_train(const std::string& src, const std::string& tgt) const {
    return id_of(mode_ == TaskMode::LanguagePair ? src + "-" + tgt : tgt);
}

TaskId TaskRegistry::resolve_infer(InferenceStrategy strategy, const std::string& src,
                                   const std::string& tgt) const {
    if (!strategy_matches_mode(strategy, mode_))
        throw ResolveError("strategy " + to_string(strategy) + " is incompatible with a " +
                           to_string(mode_) + "-mode registry");
    switch (strategy) {
        case InferenceStrategy::LpA: return id_of(src + "-" + tgt);
        case InferenceStrategy::LpB: return id_of("en-" + tgt);
        case InferenceStrategy::LpC: return id_of(src + "-en");
        case InferenceStrategy::TlA: return id_of(tgt);
        case InferenceStrategy::TlB: return id_of(src);
    }
    throw ResolveError("invalid strategy value");
}

std::string TaskRegistry::dump_text() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < keys_.size(); ++i) os << keys_[i] << '\t' << i << '\n';
    return os.str();
}

}  // namespace taskmoe
