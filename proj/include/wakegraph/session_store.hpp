#pragma once
// Session ingestion, supervision-label derivation, synthetic session
// generation, and train/test isolation checks.
//
// Sessions JSONL, one record per line:
//   {"sample_id": str, "events": [{"event_id": str, "ts": int, "text": str,
//     "proposed_task": str|null, "accepted": bool,
//     "gold": "must_fire"|"can_skip"|"must_skip"|null}]}

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "wakegraph/graph.hpp"
#include "wakegraph/hash.hpp"
#include "wakegraph/records.hpp"

namespace wakegraph {

// Metadata-only events are filtered before extraction.
inline bool is_metadata_event(std::string_view text) {
    return text.rfind("# Assistant Available Operations", 0) == 0 ||
           text.find("Operation(name=") != std::string_view::npos;
}

inline GoldClass gold_from_string(const std::string& s) {
    if (s == "must_fire") return GoldClass::MustFire;
    if (s == "can_skip") return GoldClass::CanSkip;
    if (s == "must_skip") return GoldClass::MustSkip;
    if (s == "none") return GoldClass::None;
    throw std::runtime_error("unknown gold class: " + s);
}

inline nlohmann::ordered_json session_to_json(const SessionRecord& s) {
    nlohmann::ordered_json j;
    j["sample_id"] = s.sample_id;
    auto& events = j["events"] = nlohmann::ordered_json::array();
    for (const auto& ev : s.events) {
        nlohmann::ordered_json e;
        e["event_id"] = ev.event_id;
        e["ts"] = ev.ts;
        e["text"] = ev.text;
        if (ev.proposed_task)
            e["proposed_task"] = *ev.proposed_task;
        else
            e["proposed_task"] = nullptr;
        e["accepted"] = ev.accepted;
        if (ev.gold == GoldClass::None)
            e["gold"] = nullptr;
        else
            e["gold"] = to_string(ev.gold);
        events.push_back(std::move(e));
    }
    return j;
}

inline SessionRecord session_from_json(const nlohmann::json& j) {
    SessionRecord s;
    s.sample_id = j.at("sample_id").get<std::string>();
    for (const auto& e : j.at("events")) {
        EventRecord ev;
        ev.event_id = e.at("event_id").get<std::string>();
        ev.ts = e.at("ts").get<std::int64_t>();
        ev.text = e.at("text").get<std::string>();
        if (e.contains("proposed_task") && !e.at("proposed_task").is_null())
            ev.proposed_task = e.at("proposed_task").get<std::string>();
        if (e.contains("accepted")) ev.accepted = e.at("accepted").get<bool>();
        if (e.contains("gold") && !e.at("gold").is_null())
            ev.gold = gold_from_string(e.at("gold").get<std::string>());
        s.events.push_back(std::move(ev));
    }
    return s;
}

// Parses a sessions JSONL file. Metadata-only events are dropped; sessions
// left empty by the filter are dropped entirely. Malformed lines and
// non-monotone timestamps are hard errors.
inline std::vector<SessionRecord> load_sessions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_sessions: cannot open " + path);
    std::vector<SessionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        SessionRecord s;
        try {
            s = session_from_json(nlohmann::json::parse(line));
        } catch (const std::exception& e) {
            throw std::runtime_error("load_sessions: malformed line " + std::to_string(line_no) +
                                     " in " + path + ": " + e.what());
        }
        std::int64_t prev_ts = 0;
        bool first = true;
        for (const auto& ev : s.events) {
            if (!first && ev.ts < prev_ts)
                throw std::runtime_error("load_sessions: non-monotone timestamps in session " +
                                         s.sample_id);
            prev_ts = ev.ts;
            first = false;
        }
        std::vector<EventRecord> kept;
        for (auto& ev : s.events)
            if (!is_metadata_event(ev.text)) kept.push_back(std::move(ev));
        if (kept.empty()) continue;
        s.events = std::move(kept);
        out.push_back(std::move(s));
    }
    return out;
}

inline void save_sessions(const std::vector<SessionRecord>& sessions, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_sessions: cannot write " + path);
    for (const auto& s : sessions) out << session_to_json(s).dump() << '\n';
}

// Trigger label: 1 iff the assistant proposed a non-null, non-empty task;
// the in-line acceptance marker forces label 1 either way.
inline Label derive_trigger_label(const EventRecord& ev) {
    if (ev.text.find("Is Accepted: True") != std::string::npos) return Label::Positive;
    if (ev.proposed_task && !ev.proposed_task->empty()) return Label::Positive;
    return Label::Negative;
}

// Routing labels: run the extractor over each fire event's proposed-task
// text and match the extracted surface forms back into the session graph by
// node id. Entities matched anywhere get 1; the rest get 0 when the session
// has at least one matched fire event, otherwise everything stays
// unlabelled.
inline std::map<std::string, Label> derive_routing_labels(
    const SessionRecord& session, const SessionGraph& graph,
    const EntityTables& tables = EntityTables::builtin()) {
    EntityExtractor extractor(tables);
    std::unordered_map<std::string, int> index_of;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i)
        index_of.emplace(graph.nodes[i].node_id, static_cast<int>(i));

    std::set<std::string> positives;
    bool any_match = false;
    for (const auto& ev : session.events) {
        if (!ev.proposed_task || ev.proposed_task->empty()) continue;
        for (const auto& e : extractor.extract(*ev.proposed_task)) {
            std::string id = entity_node_id(e.type, e.label);
            if (index_of.count(id)) {
                positives.insert(id);
                any_match = true;
            }
        }
    }
    std::map<std::string, Label> labels;
    for (const auto& n : graph.nodes) {
        if (n.is_event()) continue;
        if (!any_match)
            labels[n.node_id] = Label::Unlabeled;
        else
            labels[n.node_id] = positives.count(n.node_id) ? Label::Positive : Label::Negative;
    }
    return labels;
}

// Attach derived trigger and routing labels to a built graph.
inline void label_graph(SessionGraph& graph, const SessionRecord& session,
                        const EntityTables& tables = EntityTables::builtin()) {
    std::unordered_map<std::string, const EventRecord*> by_node_id;
    for (const auto& ev : session.events)
        by_node_id.emplace(event_node_id(session.sample_id, ev.event_id), &ev);
    for (auto& n : graph.nodes)
        if (n.is_event()) {
            auto it = by_node_id.find(n.node_id);
            if (it != by_node_id.end()) n.trigger_label = derive_trigger_label(*it->second);
        }
    auto routing = derive_routing_labels(session, graph, tables);
    for (auto& n : graph.nodes)
        if (!n.is_event()) n.routing_label = routing.at(n.node_id);
}

// ---------------------------------------------------------------------------
// Synthetic sessions: the desk-scale ground-truth oracle. Event texts come
// from the activity-logger template grammar; the planted rule is "fire on
// the k-th and later touches of the event's file, route that file".

struct SyntheticProfile {
    // template mix
    double coding = 1.0, writing = 0.0, research = 0.0;
    int min_events = 16, max_events = 40;
    int file_pool_min = 3, file_pool_max = 5;
    int fire_touch_k = 2;      // fire when the file's cumulative touch count reaches k
    double gold_none_rate = 0.1;  // fraction of can-skip file events left ungolded

    static SyntheticProfile preset(const std::string& name) {
        SyntheticProfile p;
        if (name == "coding") {
            p.coding = 1.0; p.writing = 0.0; p.research = 0.0;
        } else if (name == "writing") {
            p.coding = 0.0; p.writing = 1.0; p.research = 0.0;
        } else if (name == "research") {
            p.coding = 0.0; p.writing = 0.0; p.research = 1.0;
        } else if (name == "mixed") {
            p.coding = 0.4; p.writing = 0.3; p.research = 0.3;
        } else {
            throw std::runtime_error("unknown synthetic profile: " + name);
        }
        return p;
    }
};

namespace detail {

struct TemplatePools {
    std::vector<std::string> file_stems{"email_filter", "aw_tools", "report_gen", "parse_utils",
                                        "brandResearch", "meeting_notes", "data_clean",
                                        "quarterly", "pipeline", "scratch", "todo_list",
                                        "analysis", "draft_v2", "client_sync", "metrics"};
    std::vector<std::string> code_exts{"py", "js", "go"};
    std::vector<std::string> writing_exts{"md", "docx", "txt"};
    std::vector<std::string> coding_apps{"Visual Studio Code", "VSCode", "IntelliJ IDEA",
                                         "Terminal", "Jupyter Notebook"};
    std::vector<std::string> writing_apps{"Outlook", "Email Client", "Browser"};
    std::vector<std::string> verbs{"opened", "edited", "saved", "reviewed"};
    std::vector<std::string> queries{"js fade-in",  "python csv parse", "go modules tutorial",
                                     "regex lookahead", "sort stability", "yaml anchors",
                                     "git rebase",  "flexbox centering", "sql window functions",
                                     "docker volumes"};
    std::vector<std::string> sites{"Bing", "Google"};
    std::vector<std::string> urls{"https://go.dev/doc", "https://docs.python.org/3/library",
                                  "https://developer.mozilla.org/en-US/docs",
                                  "https://www.postgresql.org/docs", "https://en.cppreference.com/w"};
    std::vector<std::string> artifact_titles{"Q3 Planning", "Team Offsite Agenda", "Budget Review",
                                             "Launch Checklist", "Weekly Sync Notes"};
    std::vector<std::string> task_templates{
        "Help the user refactor '%F' to improve error handling.",
        "Suggest adding unit tests for '%F'.",
        "Offer to clean up and document '%F'.",
        "Propose organizing the recent edits to '%F'."};
};

inline const TemplatePools& template_pools() {
    static const TemplatePools pools;
    return pools;
}

}  // namespace detail

// Deterministic for a fixed (seed, n_sessions, profile); the planted labels
// are recomputable by an independent brute-force pass over the emitted
// stream.
inline std::vector<SessionRecord> generate_synthetic(std::uint64_t seed, int n_sessions,
                                                     const SyntheticProfile& profile) {
    const auto& pools = detail::template_pools();
    std::vector<SessionRecord> out;
    out.reserve(static_cast<std::size_t>(std::max(0, n_sessions)));
    for (int si = 0; si < n_sessions; ++si) {
        Rng rng(derive_key(seed, "session", static_cast<std::uint64_t>(si)));
        SessionRecord s;
        s.sample_id = "syn-" + std::to_string(seed) + "-" + std::to_string(si);

        // session archetype by mix weight
        double mix_total = profile.coding + profile.writing + profile.research;
        if (mix_total <= 0) throw std::runtime_error("generate_synthetic: empty template mix");
        double roll = rng.next_uniform() * mix_total;
        int archetype = roll < profile.coding ? 0 : (roll < profile.coding + profile.writing ? 1 : 2);

        const auto& exts = archetype == 1 ? pools.writing_exts : pools.code_exts;
        const auto& apps = archetype == 1 ? pools.writing_apps : pools.coding_apps;

        // Session-specific surface forms carry a per-(seed, session) token so
        // disjoint splits have zero exact event-text overlap; only the
        // category-level vocabulary (apps, sites, extensions) recurs.
        const std::string salt = std::to_string(seed) + "x" + std::to_string(si);

        int pool_span = profile.file_pool_max - profile.file_pool_min + 1;
        int n_files = profile.file_pool_min + static_cast<int>(rng.next_below(pool_span));
        std::vector<std::string> files;
        for (int f = 0; f < n_files; ++f) {
            const std::string& stem = pools.file_stems[rng.next_below(pools.file_stems.size())];
            const std::string& ext = exts[rng.next_below(exts.size())];
            files.push_back(stem + "_s" + salt + "f" + std::to_string(f) + "." + ext);
        }

        int span = profile.max_events - profile.min_events + 1;
        int n_events = profile.min_events + static_cast<int>(rng.next_below(span));
        // research sessions carry more searches/urls; others mostly touch files
        double p_file = archetype == 2 ? 0.45 : 0.7;

        std::int64_t ts = 1700000000 + static_cast<std::int64_t>(si) * 100000;
        std::map<std::string, int> touches;
        for (int t = 0; t < n_events; ++t) {
            ts += 5 + static_cast<std::int64_t>(rng.next_below(296));
            EventRecord ev;
            ev.event_id = "e" + std::to_string(t);
            ev.ts = ts;
            bool is_file_event = rng.next_uniform() < p_file;
            std::string touched_file;
            if (is_file_event) {
                touched_file = files[rng.next_below(files.size())];
                const std::string& verb = pools.verbs[rng.next_below(pools.verbs.size())];
                const std::string& app = apps[rng.next_below(apps.size())];
                ev.text = "The user " + verb + " '" + touched_file + "' in " + app + ".";
            } else {
                double kind = rng.next_uniform();
                if (archetype == 1 && kind < 0.35) {
                    const std::string& title =
                        pools.artifact_titles[rng.next_below(pools.artifact_titles.size())];
                    ev.text = "The user opened the draft '" + title + " " + salt + "' in " +
                              apps[rng.next_below(apps.size())] + ".";
                } else if (kind < 0.65) {
                    const std::string& q = pools.queries[rng.next_below(pools.queries.size())];
                    const std::string& site = pools.sites[rng.next_below(pools.sites.size())];
                    ev.text = "The user searched for '" + q + " v" + salt + "' on " + site + ".";
                } else {
                    const std::string& url = pools.urls[rng.next_below(pools.urls.size())];
                    ev.text = "The user opened " + url + "/s" + salt + " in Browser.";
                }
            }

            bool fire = false;
            if (is_file_event) {
                int count = ++touches[touched_file];
                fire = count >= profile.fire_touch_k;
            }
            if (fire) {
                const std::string& tmpl =
                    pools.task_templates[rng.next_below(pools.task_templates.size())];
                std::string task = tmpl;
                task.replace(task.find("%F"), 2, touched_file);
                ev.proposed_task = task;
                ev.gold = GoldClass::MustFire;
            } else if (!is_file_event) {
                ev.gold = GoldClass::MustSkip;
            } else {
                ev.gold = rng.next_uniform() < profile.gold_none_rate ? GoldClass::None
                                                                      : GoldClass::CanSkip;
            }
            s.events.push_back(std::move(ev));
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Train/test isolation: exact event-text collisions across the split.

struct IsolationReport {
    std::size_t collisions = 0;      // test events whose text occurs in train
    std::size_t test_events = 0;
    std::vector<std::string> samples;  // up to 5 colliding texts
};

inline IsolationReport verify_split_isolation(const std::vector<SessionRecord>& train,
                                              const std::vector<SessionRecord>& test) {
    std::unordered_set<std::string> train_texts;
    for (const auto& s : train)
        for (const auto& ev : s.events) train_texts.insert(ev.text);
    IsolationReport r;
    for (const auto& s : test)
        for (const auto& ev : s.events) {
            ++r.test_events;
            if (train_texts.count(ev.text)) {
                ++r.collisions;
                if (r.samples.size() < 5) r.samples.push_back(ev.text);
            }
        }
    return r;
}

}  // namespace wakegraph
