#include "taskmoe/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "taskmoe/common.hpp"
#include "taskmoe/vocab.hpp"

namespace taskmoe {

namespace {

// FNV-1a; the permutation depends on the language code only, so the same
// code names the same cipher in every run and corpus.
std::uint64_t code_hash(const std::string& code) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : code) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

ToyLanguage::ToyLanguage(const std::string& code, int base_vocab) : code_(code) {
    if (code.empty()) throw ConfigError("language code must be nonempty");
    if (base_vocab <= 0) throw ConfigError("base vocabulary size must be positive");
    perm_.resize(static_cast<std::size_t>(base_vocab));
    std::iota(perm_.begin(), perm_.end(), 0);
    if (code != "en") {
        Rng rng(code_hash(code));
        for (int i = base_vocab - 1; i > 0; --i) {
            const std::uint64_t j = rng.uniform_int(static_cast<std::uint64_t>(i) + 1);
            std::swap(perm_[static_cast<std::size_t>(i)], perm_[j]);
        }
    }
    inverse_.resize(perm_.size());
    for (std::size_t i = 0; i < perm_.size(); ++i)
        inverse_[static_cast<std::size_t>(perm_[i])] = static_cast<int>(i);
}

std::string ToyLanguage::render(const std::vector<int>& base_symbols) const {
    std::vector<std::string> words;
    words.reserve(base_symbols.size());
    for (int s : base_symbols) {
        if (s < 0 || s >= base_vocab())
            throw ConfigError("base symbol " + std::to_string(s) + " outside alphabet of size " +
                              std::to_string(base_vocab()));
        words.push_back(symbol_name(apply(s)));
    }
    return join_ws(words);
}

std::vector<int> ToyLanguage::parse(const std::string& text) const {
    std::vector<int> out;
    for (const auto& tok : split_ws(text)) out.push_back(invert(symbol_index(tok)));
    return out;
}

std::string symbol_name(int index) { return "s" + std::to_string(index); }

int symbol_index(const std::string& token) {
    if (token.size() < 2 || token[0] != 's')
        throw ConfigError("not a base symbol token: " + token);
    return std::stoi(token.substr(1));
}

void CorpusSpec::validate() const {
    if (languages.empty()) throw ConfigError("corpus spec: language list is empty");
    if (std::find(languages.begin(), languages.end(), "en") == languages.end())
        throw ConfigError("corpus spec: language list must include \"en\"");
    std::set<std::string> known(languages.begin(), languages.end());
    if (known.size() != languages.size())
        throw ConfigError("corpus spec: duplicate language codes");
    if (pairs.empty()) throw ConfigError("corpus spec: no pairs");
    for (const auto& p : pairs) {
        if (!known.count(p.src) || !known.count(p.tgt))
            throw ConfigError("corpus spec: pair " + p.src + "-" + p.tgt +
                              " references a language outside the language list");
        if (p.count <= 0)
            throw ConfigError("corpus spec: pair " + p.src + "-" + p.tgt +
                              " has non-positive sentence count");
    }
    if (base_vocab <= 1) throw ConfigError("corpus spec: base vocabulary must have >= 2 symbols");
    if (min_len <= 0 || max_len < min_len)
        throw ConfigError("corpus spec: invalid sentence length range");
    if (test_count < 0) throw ConfigError("corpus spec: negative test count");
}

std::vector<ParallelExample> GeneratedCorpus::all_train() const {
    std::vector<ParallelExample> out;
    for (const auto& p : pairs) out.insert(out.end(), p.train.begin(), p.train.end());
    return out;
}

GeneratedCorpus gen_corpus(const CorpusSpec& spec) {
    spec.validate();
    std::vector<ToyLanguage> langs;
    langs.reserve(spec.languages.size());
    for (const auto& code : spec.languages) langs.emplace_back(code, spec.base_vocab);
    auto lang_of = [&](const std::string& code) -> const ToyLanguage& {
        for (const auto& l : langs)
            if (l.code() == code) return l;
        throw ConfigError("unknown language in pair: " + code);
    };

    GeneratedCorpus out;
    out.spec = spec;
    Rng rng(spec.seed);
    for (const auto& pair : spec.pairs) {
        const ToyLanguage& src = lang_of(pair.src);
        const ToyLanguage& tgt = lang_of(pair.tgt);
        GeneratedPair gp;
        gp.spec = pair;
        auto draw = [&]() {
            const int len =
                spec.min_len +
                static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(spec.max_len - spec.min_len) + 1));
            std::vector<int> base(static_cast<std::size_t>(len));
            for (int& s : base)
                s = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.base_vocab)));
            return ParallelExample{pair.src, pair.tgt, src.render(base), tgt.render(base)};
        };
        for (int i = 0; i < pair.count; ++i) gp.train.push_back(draw());
        for (int i = 0; i < spec.test_count; ++i) gp.test.push_back(draw());
        out.pairs.push_back(std::move(gp));
    }
    return out;
}

std::vector<ParallelExample> load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read corpus file: " + path);
    std::vector<ParallelExample> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(start));
                break;
            }
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (cols.size() != 4)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 4 tab-separated " +
                          "columns, got " + std::to_string(cols.size()));
        if (cols[0].empty() || cols[1].empty())
            throw IoError(path + ":" + std::to_string(line_no) + ": empty language field");
        out.push_back(ParallelExample{cols[0], cols[1], cols[2], cols[3]});
    }
    return out;
}

void save_tsv(const std::string& path, const std::vector<ParallelExample>& examples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus file: " + path);
    for (const auto& ex : examples)
        out << ex.src_lang << '\t' << ex.tgt_lang << '\t' << ex.src << '\t' << ex.tgt << '\n';
    if (!out) throw IoError("failed writing corpus file: " + path);
}

}  // namespace taskmoe
