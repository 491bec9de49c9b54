#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace taskmoe {

/// One (source language, target language, source tokens, target tokens)
/// training or evaluation record.
struct ParallelExample {
    std::string src_lang;
    std::string tgt_lang;
    std::string src;
    std::string tgt;
};

/// A synthetic language: a seeded permutation cipher over the shared base
/// symbol set. "en" always carries the identity permutation, so routing a
/// translation through English is exact at the data level.
class ToyLanguage {
  public:
    ToyLanguage(const std::string& code, int base_vocab);

    const std::string& code() const { return code_; }
    int base_vocab() const { return static_cast<int>(perm_.size()); }

    int apply(int symbol) const { return perm_.at(static_cast<std::size_t>(symbol)); }
    int invert(int symbol) const { return inverse_.at(static_cast<std::size_t>(symbol)); }

    /// Surface form of base-symbol sequence under this language's cipher.
    std::string render(const std::vector<int>& base_symbols) const;
    /// Recover the base-symbol sequence from a surface string.
    std::vector<int> parse(const std::string& text) const;

  private:
    std::string code_;
    std::vector<int> perm_;
    std::vector<int> inverse_;
};

/// Surface name of base symbol i ("s0", "s1", ...).
std::string symbol_name(int index);
int symbol_index(const std::string& token);

struct PairSpec {
    std::string src;
    std::string tgt;
    int count = 0;
};

struct CorpusSpec {
    std::vector<std::string> languages;  // must include "en"
    std::vector<PairSpec> pairs;
    int base_vocab = 24;
    int min_len = 3;
    int max_len = 8;
    int test_count = 0;  // extra held-out sentences per pair
    std::uint64_t seed = 1;

    void validate() const;
};

struct GeneratedPair {
    PairSpec spec;
    std::vector<ParallelExample> train;
    std::vector<ParallelExample> test;
};

struct GeneratedCorpus {
    CorpusSpec spec;
    std::vector<GeneratedPair> pairs;

    std::vector<ParallelExample> all_train() const;
};

/// Deterministic given spec.seed; "en" renders base symbols unchanged.
GeneratedCorpus gen_corpus(const CorpusSpec& spec);

/// Lines of src_lang<TAB>tgt_lang<TAB>src<TAB>tgt. Malformed lines are
/// rejected with their line number.
std::vector<ParallelExample> load_tsv(const std::string& path);
void save_tsv(const std::string& path, const std::vector<ParallelExample>& examples);

}  // namespace taskmoe
