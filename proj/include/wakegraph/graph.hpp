#pragma once
// Per-session heterogeneous temporal graph: construction from an event
// stream, the causal prefix view used at inference, provenance dumps, and a
// versioned JSON serialization of the runtime graph.

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "wakegraph/extract.hpp"
#include "wakegraph/records.hpp"

namespace wakegraph {

inline constexpr int kEventCap = 64;
inline constexpr int kGraphSchemaVersion = 1;

struct GraphNode {
    std::string node_id;
    NodeType type = NodeType::Event;
    std::string surface_text;
    double dt_seconds = 0.0;      // 0 for entity nodes and the first event
    int event_index = -1;         // ordinal for event nodes, -1 otherwise
    int first_event_index = 0;    // event index at which the node entered the graph
    Label trigger_label = Label::Unlabeled;  // event nodes
    Label routing_label = Label::Unlabeled;  // entity nodes

    bool is_event() const { return type == NodeType::Event; }
};

struct GraphEdge {
    int src = 0, dst = 0;
    EdgeChannel channel = EdgeChannel::SelfLoop;
};

struct SessionGraph {
    std::string sample_id;
    int n_events = 0;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    std::vector<int> anchors;      // per event index: node index or -1
    std::vector<std::string> event_ids;  // per event index

    int node_index(const std::string& node_id) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].node_id == node_id) return static_cast<int>(i);
        return -1;
    }
};

// Truncation policy for sessions longer than the event cap. Training keeps
// the first `cap` events (stable labels); streaming keeps a rolling window
// of the most recent ones.
enum class CapPolicy { KeepFirst, KeepLast };

namespace detail {

// feature text for node inputs: full event string for events, surface label
// for entities, "<type>:<label>" for the shared type nodes.
inline bool is_type_node(NodeType t) {
    return t == NodeType::FileExt || t == NodeType::FileTopic || t == NodeType::UrlDomain ||
           t == NodeType::QueryLang;
}

}  // namespace detail

inline std::string node_feature_text(const GraphNode& n) {
    if (detail::is_type_node(n.type)) return std::string(to_string(n.type)) + ":" + n.surface_text;
    return n.surface_text;
}

inline SessionGraph build_session_graph(const SessionRecord& session,
                                        const EntityTables& tables = EntityTables::builtin(),
                                        CapPolicy policy = CapPolicy::KeepFirst,
                                        int cap = kEventCap) {
    if (session.events.empty())
        throw std::runtime_error("build_session_graph: empty session " + session.sample_id);

    std::size_t begin = 0, count = session.events.size();
    if (static_cast<int>(count) > cap) {
        if (policy == CapPolicy::KeepFirst)
            count = static_cast<std::size_t>(cap);
        else {
            begin = count - static_cast<std::size_t>(cap);
            count = static_cast<std::size_t>(cap);
        }
    }

    EntityExtractor extractor(tables);
    SessionGraph g;
    g.sample_id = session.sample_id;
    g.n_events = static_cast<int>(count);
    std::unordered_map<std::string, int> index_of;

    int prev_event_node = -1;
    for (std::size_t k = 0; k < count; ++k) {
        const EventRecord& ev = session.events[begin + k];
        const int t = static_cast<int>(k);

        GraphNode en;
        en.node_id = event_node_id(session.sample_id, ev.event_id);
        en.type = NodeType::Event;
        en.surface_text = ev.text;
        en.event_index = t;
        en.first_event_index = t;
        if (t > 0) {
            std::int64_t gap = ev.ts - session.events[begin + k - 1].ts;
            if (gap < 0)
                throw std::runtime_error("build_session_graph: non-monotone timestamps in session " +
                                         session.sample_id);
            en.dt_seconds = static_cast<double>(gap);
        }
        int event_node = static_cast<int>(g.nodes.size());
        g.nodes.push_back(std::move(en));
        g.event_ids.push_back(ev.event_id);
        index_of.emplace(g.nodes.back().node_id, event_node);

        g.edges.push_back({event_node, event_node, EdgeChannel::SelfLoop});
        if (prev_event_node >= 0) {
            g.edges.push_back({prev_event_node, event_node, EdgeChannel::TemporalFwd});
            g.edges.push_back({event_node, prev_event_node, EdgeChannel::TemporalBwd});
        }

        auto entities = extractor.extract(ev.text);
        for (const auto& e : entities) {
            std::string id = entity_node_id(e.type, e.label);
            auto [it, inserted] = index_of.emplace(id, static_cast<int>(g.nodes.size()));
            if (inserted) {
                GraphNode n;
                n.node_id = id;
                n.type = e.type;
                n.surface_text = e.label;
                n.first_event_index = t;
                g.nodes.push_back(std::move(n));
                g.edges.push_back({it->second, it->second, EdgeChannel::SelfLoop});
            }
            g.edges.push_back({event_node, it->second, EdgeChannel::HasEntity});
            g.edges.push_back({it->second, event_node, EdgeChannel::BelongsTo});
        }
        int anchor_node = -1;
        if (auto a = select_anchor(entities))
            anchor_node = index_of.at(entity_node_id(a->type, a->label));
        g.anchors.push_back(anchor_node);

        prev_event_node = event_node;
    }
    return g;
}

// Subgraph view for strictly causal inference at event index t: event nodes
// <= t, entities first introduced <= t, their has_entity/belongs_to/self
// edges, and forward temporal edges only.
inline SessionGraph causal_prefix(const SessionGraph& g, int t) {
    if (t < 0 || t >= g.n_events)
        throw std::out_of_range("causal_prefix: event index " + std::to_string(t) +
                                " out of range for " + std::to_string(g.n_events) + " events");
    SessionGraph out;
    out.sample_id = g.sample_id;
    out.n_events = t + 1;
    std::vector<int> remap(g.nodes.size(), -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const GraphNode& n = g.nodes[i];
        if (n.first_event_index > t) continue;
        remap[i] = static_cast<int>(out.nodes.size());
        out.nodes.push_back(n);
    }
    for (const GraphEdge& e : g.edges) {
        if (e.channel == EdgeChannel::TemporalBwd) continue;
        int s = remap[e.src], d = remap[e.dst];
        if (s < 0 || d < 0) continue;
        out.edges.push_back({s, d, e.channel});
    }
    for (int k = 0; k <= t; ++k) {
        out.anchors.push_back(g.anchors[k] >= 0 ? remap[g.anchors[k]] : -1);
        out.event_ids.push_back(g.event_ids[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Provenance dump: the per-event semantic writes (event/self/next_event/
// has_entity/primary_entity/next_interaction) kept for human-readable
// debugging; never consumed by the network.

struct ProvenanceTables {
    // node_id,node_type,surface_text
    std::vector<std::array<std::string, 3>> nodes;
    // src_id,dst_id,relation
    std::vector<std::array<std::string, 3>> edges;
};

inline ProvenanceTables build_provenance(const SessionRecord& session,
                                         const EntityTables& tables = EntityTables::builtin(),
                                         int cap = kEventCap) {
    EntityExtractor extractor(tables);
    ProvenanceTables out;
    std::map<std::string, bool> seen;
    auto add_node = [&](const std::string& id, NodeType type, const std::string& text) {
        if (seen.emplace(id, true).second) out.nodes.push_back({id, to_string(type), text});
    };
    std::string prev_event_id, prev_anchor_id;
    std::size_t count = std::min<std::size_t>(session.events.size(), static_cast<std::size_t>(cap));
    for (std::size_t t = 0; t < count; ++t) {
        const EventRecord& ev = session.events[t];
        std::string eid = event_node_id(session.sample_id, ev.event_id);
        add_node(eid, NodeType::Event, ev.text);
        out.edges.push_back({eid, eid, "self"});
        if (!prev_event_id.empty()) out.edges.push_back({prev_event_id, eid, "next_event"});
        auto entities = extractor.extract(ev.text);
        for (const auto& e : entities) {
            std::string id = entity_node_id(e.type, e.label);
            add_node(id, e.type, e.label);
            out.edges.push_back({eid, id, "has_entity"});
        }
        std::string anchor_id;
        if (auto a = select_anchor(entities)) {
            anchor_id = entity_node_id(a->type, a->label);
            out.edges.push_back({eid, anchor_id, "primary_entity"});
            if (!prev_anchor_id.empty() && prev_anchor_id != anchor_id)
                out.edges.push_back({prev_anchor_id, anchor_id, "next_interaction"});
        }
        prev_event_id = eid;
        prev_anchor_id = anchor_id;
    }
    return out;
}

inline void write_provenance_csv(const ProvenanceTables& p, const std::string& nodes_path,
                                 const std::string& edges_path) {
    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += "\"\"";
            else q += c;
        }
        return q + "\"";
    };
    std::ofstream nf(nodes_path, std::ios::binary);
    if (!nf) throw std::runtime_error("cannot write " + nodes_path);
    nf << "node_id,node_type,surface_text\n";
    for (const auto& r : p.nodes) nf << r[0] << ',' << r[1] << ',' << quote(r[2]) << '\n';
    std::ofstream ef(edges_path, std::ios::binary);
    if (!ef) throw std::runtime_error("cannot write " + edges_path);
    ef << "src_id,dst_id,relation\n";
    for (const auto& r : p.edges) ef << r[0] << ',' << r[1] << ',' << r[2] << '\n';
}

// ---------------------------------------------------------------------------
// Runtime-graph JSON (schema_version 1)

inline nlohmann::ordered_json graph_to_json(const SessionGraph& g) {
    nlohmann::ordered_json j;
    j["schema_version"] = kGraphSchemaVersion;
    j["sample_id"] = g.sample_id;
    j["n_events"] = g.n_events;
    auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes) {
        nlohmann::ordered_json nj;
        nj["id"] = n.node_id;
        nj["type"] = to_string(n.type);
        nj["text"] = n.surface_text;
        nj["dt"] = n.dt_seconds;
        nj["event_index"] = n.event_index;
        nj["first_event_index"] = n.first_event_index;
        nj["trigger_label"] = static_cast<int>(n.trigger_label);
        nj["routing_label"] = static_cast<int>(n.routing_label);
        nodes.push_back(std::move(nj));
    }
    auto& edges = j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) {
        nlohmann::ordered_json ej;
        ej["src"] = g.nodes[e.src].node_id;
        ej["dst"] = g.nodes[e.dst].node_id;
        ej["channel"] = to_string(e.channel);
        edges.push_back(std::move(ej));
    }
    auto& anchors = j["anchors"] = nlohmann::ordered_json::array();
    for (int a : g.anchors) anchors.push_back(a >= 0 ? nlohmann::ordered_json(g.nodes[a].node_id)
                                                     : nlohmann::ordered_json(nullptr));
    j["event_ids"] = g.event_ids;
    return j;
}

inline SessionGraph graph_from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kGraphSchemaVersion)
        throw std::runtime_error("graph schema version mismatch");
    SessionGraph g;
    g.sample_id = j.at("sample_id").get<std::string>();
    g.n_events = j.at("n_events").get<int>();
    std::unordered_map<std::string, int> index_of;
    for (const auto& nj : j.at("nodes")) {
        GraphNode n;
        n.node_id = nj.at("id").get<std::string>();
        n.type = node_type_from_string(nj.at("type").get<std::string>());
        n.surface_text = nj.at("text").get<std::string>();
        n.dt_seconds = nj.at("dt").get<double>();
        n.event_index = nj.at("event_index").get<int>();
        n.first_event_index = nj.at("first_event_index").get<int>();
        n.trigger_label = static_cast<Label>(nj.at("trigger_label").get<int>());
        n.routing_label = static_cast<Label>(nj.at("routing_label").get<int>());
        index_of.emplace(n.node_id, static_cast<int>(g.nodes.size()));
        g.nodes.push_back(std::move(n));
    }
    for (const auto& ej : j.at("edges")) {
        GraphEdge e;
        e.src = index_of.at(ej.at("src").get<std::string>());
        e.dst = index_of.at(ej.at("dst").get<std::string>());
        std::string ch = ej.at("channel").get<std::string>();
        bool found = false;
        for (int c = 0; c < kNumEdgeChannels; ++c)
            if (ch == to_string(static_cast<EdgeChannel>(c))) {
                e.channel = static_cast<EdgeChannel>(c);
                found = true;
            }
        if (!found) throw std::runtime_error("unknown edge channel: " + ch);
        g.edges.push_back(e);
    }
    for (const auto& aj : j.at("anchors"))
        g.anchors.push_back(aj.is_null() ? -1 : index_of.at(aj.get<std::string>()));
    g.event_ids = j.at("event_ids").get<std::vector<std::string>>();
    return g;
}

}  // namespace wakegraph
