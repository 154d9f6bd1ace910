#pragma once
// Node/edge taxonomy and the node-id scheme shared by the extractor, the
// graph builder, and the label deriver.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "wakegraph/hash.hpp"

namespace wakegraph {

// Ordinal is the type-embedding row index; order is frozen.
enum class NodeType : std::int8_t {
    Event = 0,
    File,
    FileExt,
    FileTopic,
    App,
    Query,
    QueryLang,
    Url,
    UrlDomain,
    Artifact,
};
inline constexpr int kNumNodeTypes = 10;

inline const char* to_string(NodeType t) {
    switch (t) {
        case NodeType::Event: return "event";
        case NodeType::File: return "file";
        case NodeType::FileExt: return "file_ext";
        case NodeType::FileTopic: return "file_topic";
        case NodeType::App: return "app";
        case NodeType::Query: return "query";
        case NodeType::QueryLang: return "query_lang";
        case NodeType::Url: return "url";
        case NodeType::UrlDomain: return "url_domain";
        case NodeType::Artifact: return "artifact";
    }
    return "?";
}

inline NodeType node_type_from_string(std::string_view s) {
    for (int i = 0; i < kNumNodeTypes; ++i) {
        auto t = static_cast<NodeType>(i);
        if (s == to_string(t)) return t;
    }
    throw std::runtime_error("unknown node type: " + std::string(s));
}

// The five runtime edge channels; the only relations the network consumes.
enum class EdgeChannel : std::int8_t {
    HasEntity = 0,
    BelongsTo,
    TemporalFwd,
    TemporalBwd,
    SelfLoop,
};
inline constexpr int kNumEdgeChannels = 5;

inline const char* to_string(EdgeChannel c) {
    switch (c) {
        case EdgeChannel::HasEntity: return "has_entity";
        case EdgeChannel::BelongsTo: return "belongs_to";
        case EdgeChannel::TemporalFwd: return "temporal_fwd";
        case EdgeChannel::TemporalBwd: return "temporal_bwd";
        case EdgeChannel::SelfLoop: return "self_loop";
    }
    return "?";
}

inline std::string lowercased(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

// Entity node id: <type>:<first 16 hex chars of sha1(lowercased label)>.
// The hash collapses the same surface label across sessions to one node.
inline std::string entity_node_id(NodeType type, std::string_view label) {
    return std::string(to_string(type)) + ":" + sha1_hex(lowercased(label)).substr(0, 16);
}

// Event node id: event:<full sha1 hex of "sample_id::event_id">.
inline std::string event_node_id(std::string_view sample_id, std::string_view event_id) {
    std::string key;
    key.reserve(sample_id.size() + 2 + event_id.size());
    key.append(sample_id);
    key.append("::");
    key.append(event_id);
    return std::string("event:") + sha1_hex(key);
}

}  // namespace wakegraph
