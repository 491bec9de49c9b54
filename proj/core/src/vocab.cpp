#include "taskmoe/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "taskmoe/common.hpp"
#include "taskmoe/corpus.hpp"

namespace taskmoe {

std::vector<std::string> split_ws(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string join_ws(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

namespace {
bool is_reserved_marker(const std::string& tok) {
    return tok == "<pad>" || tok == "<bos>" || tok == "<eos>" || tok == "<unk>";
}
bool is_lang_token(const std::string& tok) {
    return tok.size() >= 4 && tok.front() == '<' && tok.back() == '>' &&
           (tok[1] == '4' || tok[1] == '2');
}
}  // namespace

Vocab Vocab::build(const std::vector<ParallelExample>& corpus,
                   const std::vector<std::string>& languages, int max_size) {
    if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");

    std::vector<std::string> tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
    std::set<std::string> langs(languages.begin(), languages.end());
    for (const auto& ex : corpus) {
        langs.insert(ex.src_lang);
        langs.insert(ex.tgt_lang);
    }
    for (const auto& code : langs) {
        tokens.push_back("<4" + code + ">");
        tokens.push_back("<2" + code + ">");
    }
    const int fixed = static_cast<int>(tokens.size());
    if (max_size < fixed)
        throw ConfigError("build_vocab: max_size " + std::to_string(max_size) +
                          " smaller than the " + std::to_string(fixed) +
                          " reserved and language tokens");

    // std::map keeps enumeration lexicographic, which is the tie-break rule.
    std::map<std::string, long long> counts;
    for (const auto& ex : corpus) {
        for (const auto& t : split_ws(ex.src)) ++counts[t];
        for (const auto& t : split_ws(ex.tgt)) ++counts[t];
    }
    std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [tok, cnt] : ranked) {
        (void)cnt;
        if (static_cast<int>(tokens.size()) >= max_size) break;
        tokens.push_back(tok);
    }

    Vocab v = from_tokens(tokens);
    v.languages_.assign(langs.begin(), langs.end());
    return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 4 || tokens[0] != "<pad>" || tokens[1] != "<bos>" ||
        tokens[2] != "<eos>" || tokens[3] != "<unk>")
        throw ConfigError("vocab must start with <pad> <bos> <eos> <unk>");
    Vocab v;
    v.tokens_ = tokens;
    v.rebuild_index();
    std::set<std::string> langs;
    for (const auto& t : tokens)
        if (is_lang_token(t)) langs.insert(t.substr(2, t.size() - 3));
    v.languages_.assign(langs.begin(), langs.end());
    return v;
}

void Vocab::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
            throw ConfigError("duplicate vocabulary token: " + tokens_[i]);
    }
}

int Vocab::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
    if (id < 0 || id >= size())
        throw ResolveError("token id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(size()));
    return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::has_language(const std::string& code) const {
    return index_.count("<4" + code + ">") && index_.count("<2" + code + ">");
}

int Vocab::source_lang_id(const std::string& code) const {
    auto it = index_.find("<4" + code + ">");
    if (it == index_.end()) throw ResolveError("unknown language code: " + code);
    return it->second;
}

int Vocab::target_lang_id(const std::string& code) const {
    auto it = index_.find("<2" + code + ">");
    if (it == index_.end()) throw ResolveError("unknown language code: " + code);
    return it->second;
}

std::vector<int> Vocab::encode_source(const std::string& src_lang, const std::string& tgt_lang,
                                      const std::string& text) const {
    std::vector<int> ids = {source_lang_id(src_lang), target_lang_id(tgt_lang)};
    for (const auto& tok : split_ws(text)) ids.push_back(id_of(tok));
    ids.push_back(kEos);
    return ids;
}

std::vector<int> Vocab::encode_target(const std::string& text) const {
    std::vector<int> ids = {kBos};
    for (const auto& tok : split_ws(text)) ids.push_back(id_of(tok));
    ids.push_back(kEos);
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::vector<std::string> words;
    for (int id : ids) {
        const std::string& tok = token_of(id);
        if (is_reserved_marker(tok) || is_lang_token(tok)) continue;
        words.push_back(tok);
    }
    return join_ws(words);
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    for (const auto& t : tokens_) out << t << '\n';
    if (!out) throw IoError("failed writing vocabulary file: " + path);
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocabulary file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return from_tokens(tokens);
}

}  // namespace taskmoe
