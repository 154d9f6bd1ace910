#pragma once
// Closed-world vocabularies behind the rule extractor: the canonical app
// alias table and the extension-to-topic table. Both ship as a versioned
// data file (data/entity_tables.json); the built-in copy below is the same
// table compiled in so the library works without a data path.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace wakegraph {

struct EntityTables {
    int version = 1;
    // canonical app id -> surface aliases (matched case-insensitively on
    // word boundaries)
    std::map<std::string, std::vector<std::string>> app_aliases;
    // file extension (lowercase, no dot) -> topic bucket
    // buckets: code, writing, data, slides, other
    std::map<std::string, std::string> extension_topics;

    static const EntityTables& builtin();
    static EntityTables load(const std::string& path);
    nlohmann::ordered_json to_json() const;
};

inline const EntityTables& EntityTables::builtin() {
    static const EntityTables t = [] {
        EntityTables t;
        t.version = 1;
        t.app_aliases = {
            {"vscode", {"Visual Studio Code", "VSCode", "Code.exe"}},
            {"intellij", {"IntelliJ IDEA", "IntelliJ"}},
            {"outlook", {"Outlook"}},
            {"jupyter", {"Jupyter Notebook", "Jupyter"}},
            {"terminal", {"Terminal"}},
            {"browser", {"Browser", "Chrome", "Bing", "Google"}},
            {"email_client", {"Email Client"}},
            {"ide", {"IDE"}},
        };
        auto add = [&](const char* bucket, std::initializer_list<const char*> exts) {
            for (const char* e : exts) t.extension_topics[e] = bucket;
        };
        add("code", {"py", "js", "ts", "go", "java", "cpp", "cc", "c", "h", "hpp", "rs", "rb",
                     "ipynb", "sh", "sql", "html", "css"});
        add("writing", {"md", "docx", "doc", "txt", "rtf", "tex"});
        add("data", {"csv", "json", "xlsx", "xls", "yaml", "yml", "xml", "parquet"});
        add("slides", {"pptx", "ppt", "key"});
        add("other", {"pdf", "zip", "tar", "gz", "png", "jpg", "jpeg", "gif", "log", "exe"});
        return t;
    }();
    return t;
}

inline EntityTables EntityTables::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("entity tables: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("entity tables: malformed JSON in " + path + ": " + e.what());
    }
    EntityTables t;
    t.version = j.at("version").get<int>();
    for (auto& [app, aliases] : j.at("app_aliases").items())
        t.app_aliases[app] = aliases.get<std::vector<std::string>>();
    for (auto& [ext, bucket] : j.at("extension_topics").items())
        t.extension_topics[ext] = bucket.get<std::string>();
    return t;
}

inline nlohmann::ordered_json EntityTables::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    nlohmann::ordered_json apps;
    for (const auto& [app, aliases] : app_aliases) apps[app] = aliases;
    j["app_aliases"] = apps;
    nlohmann::ordered_json exts;
    for (const auto& [ext, bucket] : extension_topics) exts[ext] = bucket;
    j["extension_topics"] = exts;
    return j;
}

}  // namespace wakegraph
