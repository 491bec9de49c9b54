#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace taskmoe {

struct ParallelExample;

using TaskId = int;

/// Whether a routing task is a directional language pair or a target
/// language. Fixed for the lifetime of a model.
enum class TaskMode { LanguagePair, TargetLanguage };

std::string to_string(TaskMode mode);
TaskMode task_mode_from_string(const std::string& s);

/// Inference-time remapping of an (src, tgt) request onto the frozen task
/// universe. lp_* apply to LanguagePair registries, tl_* to TargetLanguage.
enum class InferenceStrategy { LpA, LpB, LpC, TlA, TlB };

std::string to_string(InferenceStrategy s);
InferenceStrategy strategy_from_string(const std::string& s);
bool strategy_matches_mode(InferenceStrategy s, TaskMode mode);

/// The frozen universe of routing tasks, built once from the training pairs.
/// Keys are "xx-yy" directional strings (LanguagePair) or "yy" codes
/// (TargetLanguage); ids are dense indices in sorted-key order.
class TaskRegistry {
  public:
    TaskRegistry() = default;

    static TaskRegistry build(TaskMode mode,
                              const std::vector<std::pair<std::string, std::string>>& pairs);
    static TaskRegistry from_keys(TaskMode mode, const std::vector<std::string>& keys);

    TaskMode mode() const { return mode_; }
    int size() const { return static_cast<int>(keys_.size()); }
    const std::vector<std::string>& keys() const { return keys_; }
    const std::string& key_of(TaskId id) const;
    bool has_key(const std::string& key) const { return index_.count(key) != 0; }
    TaskId id_of(const std::string& key) const;  // throws ResolveError when absent

    TaskId resolve_train(const ParallelExample& ex) const;
    TaskId resolve_train(const std::string& src, const std::string& tgt) const;
    TaskId resolve_infer(InferenceStrategy strategy, const std::string& src,
                         const std::string& tgt) const;

    /// "key<TAB>id" lines.
    std::string dump_text() const;

  private:
    TaskMode mode_ = TaskMode::LanguagePair;
    std::vector<std::string> keys_;
    std::unordered_map<std::string, TaskId> index_;
};

}  // namespace taskmoe
