#pragma once
// Deterministic rule-based entity extractor. Five rules, applied in order:
//   (i)   app aliases -> canonical app node
//   (ii)  tokens with a registered extension -> file + file_ext + file_topic
//   (iii) http(s) substrings -> url + url_domain
//   (iv)  searched-for / typed captures -> query + query_lang
//   (v)   quoted strings after document-class nouns -> artifact
// Results are deduplicated on (type, label) per event, first occurrence wins.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wakegraph/entity_tables.hpp"
#include "wakegraph/node_types.hpp"

namespace wakegraph {

struct ExtractedEntity {
    NodeType type;
    std::string label;  // canonical surface label

    bool operator==(const ExtractedEntity&) const = default;
};

namespace detail {

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool iequals_at(std::string_view text, std::size_t pos, std::string_view needle) {
    if (pos + needle.size() > text.size()) return false;
    for (std::size_t i = 0; i < needle.size(); ++i) {
        char a = text[pos + i], b = needle[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (b >= 'A' && b <= 'Z') b = static_cast<char>(b - 'A' + 'a');
        if (a != b) return false;
    }
    return true;
}

// Case-insensitive find with word boundaries on both sides.
inline std::size_t ifind_word(std::string_view text, std::string_view needle, std::size_t from) {
    if (needle.empty()) return std::string_view::npos;
    for (std::size_t pos = from; pos + needle.size() <= text.size(); ++pos) {
        if (!iequals_at(text, pos, needle)) continue;
        if (pos > 0 && is_word_char(text[pos - 1]) && is_word_char(needle.front())) continue;
        std::size_t end = pos + needle.size();
        if (end < text.size() && is_word_char(text[end]) && is_word_char(needle.back())) continue;
        return pos;
    }
    return std::string_view::npos;
}

struct Span {
    std::size_t begin, end;
};

inline bool overlaps(const Span& a, std::size_t begin, std::size_t end) {
    return begin < a.end && a.begin < end;
}

// UTF-8 codepoint decode; invalid sequences yield U+FFFD and advance 1 byte.
inline std::uint32_t utf8_next(std::string_view s, std::size_t& i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        ++i;
        return c;
    }
    int extra = (c >= 0xF0) ? 3 : (c >= 0xE0) ? 2 : (c >= 0xC0) ? 1 : -1;
    if (extra < 0 || i + extra >= s.size()) {
        ++i;
        return 0xFFFD;
    }
    std::uint32_t cp = c & (0x3F >> extra);
    for (int k = 1; k <= extra; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[i + k]);
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += extra + 1;
    return cp;
}

inline bool is_han(std::uint32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF);
}

}  // namespace detail

// Dominant-script classifier for query text. Fractions are taken over the
// Han + ASCII-letter codepoints only; punctuation and digits do not vote.
inline std::string classify_query_lang(std::string_view query) {
    std::size_t han = 0, ascii = 0;
    std::size_t i = 0;
    while (i < query.size()) {
        std::uint32_t cp = detail::utf8_next(query, i);
        if (detail::is_han(cp))
            ++han;
        else if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z'))
            ++ascii;
    }
    const double total = static_cast<double>(han + ascii);
    if (total == 0) return "other";
    const double han_frac = han / total, ascii_frac = ascii / total;
    if (han_frac > 0.8) return "cn";
    if (ascii_frac > 0.8) return "en";
    if (han_frac >= 0.1 && ascii_frac >= 0.1) return "mixed";
    return "other";
}

// Coarse registered-domain heuristic: strip a leading "www.", keep the last
// two dot-separated labels.
inline std::string url_domain(std::string_view url) {
    std::size_t host_begin = 0;
    if (auto p = url.find("://"); p != std::string_view::npos) host_begin = p + 3;
    std::size_t host_end = url.size();
    for (std::size_t i = host_begin; i < url.size(); ++i) {
        char c = url[i];
        if (c == '/' || c == '?' || c == '#' || c == ':') {
            host_end = i;
            break;
        }
    }
    std::string host = lowercased(url.substr(host_begin, host_end - host_begin));
    if (host.rfind("www.", 0) == 0) host = host.substr(4);
    std::size_t last = host.rfind('.');
    if (last == std::string::npos) return host;
    std::size_t prev = host.rfind('.', last - 1);
    return prev == std::string::npos ? host : host.substr(prev + 1);
}

class EntityExtractor {
public:
    explicit EntityExtractor(const EntityTables& tables = EntityTables::builtin())
        : tables_(&tables) {}

    std::vector<ExtractedEntity> extract(std::string_view text) const {
        std::vector<ExtractedEntity> out;
        auto emit = [&](NodeType type, std::string label) {
            ExtractedEntity e{type, std::move(label)};
            if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(std::move(e));
        };

        // URL spans first so rule (ii) does not read filenames out of URLs;
        // emission still follows rule order.
        std::vector<detail::Span> url_spans;
        std::vector<std::pair<std::string, std::string>> urls;  // (url, domain)
        scan_urls(text, url_spans, urls);

        rule_apps(text, emit);
        std::vector<std::string> file_labels = rule_files(text, url_spans, emit);
        for (auto& [u, d] : urls) {
            emit(NodeType::Url, u);
            emit(NodeType::UrlDomain, d);
        }
        rule_queries(text, emit);
        rule_artifacts(text, file_labels, emit);
        return out;
    }

private:
    template <typename Emit>
    void rule_apps(std::string_view text, Emit&& emit) const {
        struct Match {
            std::size_t pos, len;
            const std::string* canonical;
        };
        std::vector<Match> matches;
        for (const auto& [canonical, aliases] : tables_->app_aliases) {
            for (const auto& alias : aliases) {
                std::size_t from = 0;
                while (true) {
                    std::size_t pos = detail::ifind_word(text, alias, from);
                    if (pos == std::string_view::npos) break;
                    matches.push_back({pos, alias.size(), &canonical});
                    from = pos + 1;
                }
            }
        }
        // Earliest match wins; on equal start the longer alias wins
        // ("IntelliJ IDEA" over "IntelliJ").
        std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
            if (a.pos != b.pos) return a.pos < b.pos;
            return a.len > b.len;
        });
        std::size_t covered_end = 0;
        for (const auto& m : matches) {
            if (m.pos < covered_end) continue;
            covered_end = m.pos + m.len;
            emit(NodeType::App, *m.canonical);
        }
    }

    static bool file_token_char(char c) {
        return detail::is_word_char(c) || c == '.' || c == '-' || c == '/' || c == '\\' || c == '~';
    }

    template <typename Emit>
    std::vector<std::string> rule_files(std::string_view text, const std::vector<detail::Span>& url_spans,
                                        Emit&& emit) const {
        std::vector<std::string> labels;
        std::size_t i = 0;
        while (i < text.size()) {
            if (!file_token_char(text[i])) {
                ++i;
                continue;
            }
            std::size_t begin = i;
            while (i < text.size() && file_token_char(text[i])) ++i;
            std::size_t end = i;
            bool in_url = false;
            for (const auto& s : url_spans)
                if (detail::overlaps(s, begin, end)) in_url = true;
            if (in_url) continue;
            // trim sentence punctuation
            while (end > begin && (text[end - 1] == '.' || text[end - 1] == '-')) --end;
            while (begin < end && (text[begin] == '.' || text[begin] == '/' || text[begin] == '\\'))
                ++begin;
            if (begin >= end) continue;
            std::string_view token = text.substr(begin, end - begin);
            std::size_t dot = token.rfind('.');
            if (dot == std::string_view::npos || dot == 0 || dot + 1 >= token.size()) continue;
            std::string ext = lowercased(token.substr(dot + 1));
            if (!std::all_of(ext.begin(), ext.end(),
                             [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }))
                continue;
            auto it = tables_->extension_topics.find(ext);
            if (it == tables_->extension_topics.end()) continue;
            std::size_t stem_begin = token.find_last_of("/\\", dot);
            stem_begin = (stem_begin == std::string_view::npos) ? 0 : stem_begin + 1;
            if (stem_begin >= dot) continue;  // no stem, e.g. ".py"
            std::string label(token);
            emit(NodeType::File, label);
            emit(NodeType::FileExt, ext);
            emit(NodeType::FileTopic, it->second);
            labels.push_back(std::move(label));
        }
        return labels;
    }

    static void scan_urls(std::string_view text, std::vector<detail::Span>& spans,
                          std::vector<std::pair<std::string, std::string>>& urls) {
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t h = text.find("http", pos);
            if (h == std::string_view::npos) break;
            std::size_t scheme_end = h + 4;
            if (scheme_end < text.size() && (text[scheme_end] == 's' || text[scheme_end] == 'S'))
                ++scheme_end;
            if (text.substr(scheme_end, 3) != "://") {
                pos = h + 4;
                continue;
            }
            std::size_t end = scheme_end + 3;
            while (end < text.size()) {
                char c = text[end];
                if (c == ' ' || c == '\t' || c == '\n' || c == '\'' || c == '"' || c == '<' ||
                    c == '>')
                    break;
                ++end;
            }
            while (end > scheme_end + 3) {
                char c = text[end - 1];
                if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' ||
                    c == ')' || c == ']')
                    --end;
                else
                    break;
            }
            if (end > scheme_end + 3) {
                std::string url(text.substr(h, end - h));
                urls.emplace_back(url, url_domain(url));
                spans.push_back({h, end});
            }
            pos = end > h ? end : h + 4;
        }
    }

    template <typename Emit>
    void rule_queries(std::string_view text, Emit&& emit) const {
        for (std::string_view trigger : {std::string_view("searched for"), std::string_view("typed")}) {
            std::size_t from = 0;
            while (true) {
                std::size_t pos = detail::ifind_word(text, trigger, from);
                if (pos == std::string_view::npos) break;
                from = pos + trigger.size();
                std::size_t q = from;
                while (q < text.size() && text[q] == ' ') ++q;
                if (q >= text.size() || (text[q] != '\'' && text[q] != '"')) continue;
                char quote = text[q];
                std::size_t close = text.find(quote, q + 1);
                if (close == std::string_view::npos) continue;
                std::string query(text.substr(q + 1, close - q - 1));
                if (query.empty()) continue;
                emit(NodeType::Query, query);
                emit(NodeType::QueryLang, classify_query_lang(query));
                from = close + 1;
            }
        }
    }

    template <typename Emit>
    void rule_artifacts(std::string_view text, const std::vector<std::string>& file_labels,
                        Emit&& emit) const {
        static const char* kNouns[] = {"file",    "document", "report", "spreadsheet", "article",
                                       "tab",     "summary",  "email",  "draft"};
        for (const char* noun : kNouns) {
            std::size_t from = 0;
            while (true) {
                std::size_t pos = detail::ifind_word(text, noun, from);
                if (pos == std::string_view::npos) break;
                from = pos + std::string_view(noun).size();
                std::size_t q = from;
                while (q < text.size() && text[q] == ' ') ++q;
                if (q >= text.size() || (text[q] != '\'' && text[q] != '"')) continue;
                char quote = text[q];
                std::size_t close = text.find(quote, q + 1);
                if (close == std::string_view::npos) continue;
                std::string label(text.substr(q + 1, close - q - 1));
                if (label.empty()) continue;
                // dedup against rule (ii) emissions for this event
                if (std::find(file_labels.begin(), file_labels.end(), label) != file_labels.end())
                    continue;
                emit(NodeType::Artifact, label);
                from = close + 1;
            }
        }
    }

    const EntityTables* tables_;
};

// Per-event anchor: the first app-typed entity if any, otherwise the first
// extracted entity.
inline std::optional<ExtractedEntity> select_anchor(const std::vector<ExtractedEntity>& entities) {
    for (const auto& e : entities)
        if (e.type == NodeType::App) return e;
    if (!entities.empty()) return entities.front();
    return std::nullopt;
}

}  // namespace wakegraph
