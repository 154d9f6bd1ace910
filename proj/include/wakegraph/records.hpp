#pragma once
// Raw activity-stream records and supervision label types.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wakegraph {

// Binary label with an explicit unlabelled state. Unlabelled nodes are
// excluded from every loss and metric.
enum class Label : std::int8_t { Negative = 0, Positive = 1, Unlabeled = -1 };

inline bool is_labeled(Label l) { return l != Label::Unlabeled; }

// Gold event classes behind the three AUC positive-class readings.
// MustSkip events are a subset of the can-skip population.
enum class GoldClass : std::int8_t { None = 0, MustFire, CanSkip, MustSkip };

inline const char* to_string(GoldClass g) {
    switch (g) {
        case GoldClass::MustFire: return "must_fire";
        case GoldClass::CanSkip: return "can_skip";
        case GoldClass::MustSkip: return "must_skip";
        default: return "none";
    }
}

struct EventRecord {
    std::string event_id;
    std::int64_t ts = 0;  // seconds since epoch
    std::string text;     // rendered event string
    std::optional<std::string> proposed_task;
    bool accepted = false;
    GoldClass gold = GoldClass::None;
};

struct SessionRecord {
    std::string sample_id;
    std::vector<EventRecord> events;  // ordered by timestamp, non-decreasing
};

}  // namespace wakegraph
