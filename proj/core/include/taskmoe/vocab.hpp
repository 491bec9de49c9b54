#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace taskmoe {

struct ParallelExample;

/// Shared source/target vocabulary. Ids 0..3 are reserved (pad, bos, eos,
/// unk); every known language contributes a <4xx> source tag and a <2yy>
/// target tag; remaining ids are corpus tokens ordered by descending
/// frequency with lexicographic tie-break. Immutable after construction.
class Vocab {
  public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocab() = default;

    static Vocab build(const std::vector<ParallelExample>& corpus,
                       const std::vector<std::string>& languages, int max_size);
    static Vocab from_tokens(const std::vector<std::string>& tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::string>& languages() const { return languages_; }

    int id_of(const std::string& token) const;  // kUnk when absent
    const std::string& token_of(int id) const;  // throws on out of range
    bool has_language(const std::string& code) const;
    int source_lang_id(const std::string& code) const;  // <4xx>
    int target_lang_id(const std::string& code) const;  // <2yy>

    /// [<4src>, <2tgt>, tokens..., eos]; unknown tokens map to unk.
    std::vector<int> encode_source(const std::string& src_lang, const std::string& tgt_lang,
                                   const std::string& text) const;
    /// [bos, tokens..., eos]
    std::vector<int> encode_target(const std::string& text) const;
    /// Strips reserved and language tokens, joins the rest with single spaces.
    std::string decode(const std::vector<int>& ids) const;

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

  private:
    std::vector<std::string> tokens_;
    std::vector<std::string> languages_;
    std::unordered_map<std::string, int> index_;
    void rebuild_index();
};

std::vector<std::string> split_ws(const std::string& text);
std::string join_ws(const std::vector<std::string>& tokens);

}  // namespace taskmoe
