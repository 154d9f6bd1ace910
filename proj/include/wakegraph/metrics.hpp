#pragma once
// Trigger-quality metric suite: rank-based AUC under three positive-class
// definitions, Brier score, expected calibration error, oracle-threshold
// spread, and the score histogram.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "wakegraph/records.hpp"

namespace wakegraph {

struct ScoredEvent {
    std::string event_id;
    double score = 0.0;            // probability in [0, 1]
    Label trigger_label = Label::Unlabeled;
    GoldClass gold = GoldClass::None;
};

enum class PositiveDef { MFire, CSkip, MSkip };

inline const char* to_string(PositiveDef d) {
    switch (d) {
        case PositiveDef::MFire: return "m_fire";
        case PositiveDef::CSkip: return "c_skip";
        case PositiveDef::MSkip: return "m_skip";
    }
    return "?";
}

// Positive-class membership. With gold classes present: m-fire positives are
// the must-fire class; c-skip positives are every event outside the can-skip
// population (which includes its must-skip subset); m-skip positives are
// every event outside the must-skip subset. Without any gold tags the
// definitions fall back to trigger labels as the positive class.
inline bool is_positive(const ScoredEvent& e, PositiveDef def, bool any_gold) {
    if (!any_gold) return e.trigger_label == Label::Positive;
    switch (def) {
        case PositiveDef::MFire: return e.gold == GoldClass::MustFire;
        case PositiveDef::CSkip:
            return e.gold != GoldClass::CanSkip && e.gold != GoldClass::MustSkip;
        case PositiveDef::MSkip: return e.gold != GoldClass::MustSkip;
    }
    return false;
}

inline bool has_any_gold(const std::vector<ScoredEvent>& scored) {
    for (const auto& e : scored)
        if (e.gold != GoldClass::None) return true;
    return false;
}

// Rank-based (Mann-Whitney) AUC; ties contribute 0.5 via midranks.
inline double auc(const std::vector<ScoredEvent>& scored, PositiveDef def) {
    const bool any_gold = has_any_gold(scored);
    std::vector<std::size_t> order(scored.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scored[a].score < scored[b].score; });

    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& e : scored) (is_positive(e, def, any_gold) ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw std::runtime_error(std::string("auc: degenerate class under definition ") +
                                 to_string(def));

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scored[order[j]].score == scored[order[i]].score) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (is_positive(scored[order[k]], def, any_gold)) pos_rank_sum += midrank;
        i = j;
    }
    const double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Mean squared distance between score and binary label.
inline double brier(const std::vector<ScoredEvent>& scored, PositiveDef def = PositiveDef::MFire) {
    if (scored.empty()) throw std::runtime_error("brier: no events");
    const bool any_gold = has_any_gold(scored);
    double sum = 0.0;
    for (const auto& e : scored) {
        const double y = is_positive(e, def, any_gold) ? 1.0 : 0.0;
        sum += (e.score - y) * (e.score - y);
    }
    return sum / static_cast<double>(scored.size());
}

// Equal-width-bin expected calibration error. Bin edges are inclusive-left;
// the last bin is inclusive-right. Empty bins are skipped.
inline double ece(const std::vector<ScoredEvent>& scored, int bins = 20,
                  PositiveDef def = PositiveDef::MFire) {
    if (scored.empty()) throw std::runtime_error("ece: no events");
    const bool any_gold = has_any_gold(scored);
    std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> acc_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
    for (const auto& e : scored) {
        int b = static_cast<int>(e.score * bins);
        if (b >= bins) b = bins - 1;  // score 1.0 lands in the last bin
        if (b < 0) b = 0;
        conf_sum[static_cast<std::size_t>(b)] += e.score;
        acc_sum[static_cast<std::size_t>(b)] += is_positive(e, def, any_gold) ? 1.0 : 0.0;
        ++count[static_cast<std::size_t>(b)];
    }
    double out = 0.0;
    const double n = static_cast<double>(scored.size());
    for (int b = 0; b < bins; ++b) {
        if (count[static_cast<std::size_t>(b)] == 0) continue;
        const double c = static_cast<double>(count[static_cast<std::size_t>(b)]);
        out += (c / n) * std::abs(acc_sum[static_cast<std::size_t>(b)] / c -
                                  conf_sum[static_cast<std::size_t>(b)] / c);
    }
    return out;
}

// Fraction of events per 0.05-wide score bin; extremes = first + last bin.
struct ScoreHistogram {
    std::vector<double> fractions;  // 20 bins
    double extremes = 0.0;
};

inline ScoreHistogram score_histogram(const std::vector<ScoredEvent>& scored,
                                      double bin_width = 0.05) {
    const int bins = static_cast<int>(std::lround(1.0 / bin_width));
    ScoreHistogram h;
    h.fractions.assign(static_cast<std::size_t>(bins), 0.0);
    if (scored.empty()) return h;
    for (const auto& e : scored) {
        int b = static_cast<int>(e.score / bin_width);
        if (b >= bins) b = bins - 1;
        if (b < 0) b = 0;
        h.fractions[static_cast<std::size_t>(b)] += 1.0;
    }
    for (double& f : h.fractions) f /= static_cast<double>(scored.size());
    h.extremes = h.fractions.front() + h.fractions.back();
    return h;
}

// ---------------------------------------------------------------------------
// Oracle-threshold spread. For each consumer score set, sweep the sorted
// unique scores as candidate thresholds, maximize the utility (default:
// F1 of fire-vs-positive), and report the population std of the per-set
// oracle thresholds. Ties pick the lowest maximizing threshold; a constant
// utility defines the threshold as 0.5 with a degeneracy flag.

struct ThresholdSet {
    std::vector<double> scores;
    std::vector<bool> positive;  // per-event utility labels
};

struct TriggerStdResult {
    std::vector<double> thresholds;
    std::vector<bool> degenerate;
    double std_dev = 0.0;
};

inline double f1_at_threshold(const ThresholdSet& set, double threshold) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const bool fire = set.scores[i] >= threshold;
        if (fire && set.positive[i]) ++tp;
        else if (fire) ++fp;
        else if (set.positive[i]) ++fn;
    }
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) +
                         static_cast<double>(fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

inline TriggerStdResult trigger_std(const std::vector<ThresholdSet>& sets) {
    if (sets.size() < 2) throw std::runtime_error("trigger_std: needs at least 2 score sets");
    TriggerStdResult out;
    for (const auto& set : sets) {
        std::vector<double> candidates = set.scores;
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        double best_threshold = 0.5, best_utility = 0.0;
        bool first = true, constant = true;
        for (double cand : candidates) {
            const double u = f1_at_threshold(set, cand);
            if (first) {
                best_utility = u;
                best_threshold = cand;
                first = false;
            } else if (u != best_utility) {
                constant = false;
                if (u > best_utility) {
                    best_utility = u;
                    best_threshold = cand;
                }
            }
        }
        if (candidates.empty() || constant) {
            out.thresholds.push_back(0.5);
            out.degenerate.push_back(true);
        } else {
            out.thresholds.push_back(best_threshold);
            out.degenerate.push_back(false);
        }
    }
    double mean = 0.0;
    for (double t : out.thresholds) mean += t;
    mean /= static_cast<double>(out.thresholds.size());
    double var = 0.0;
    for (double t : out.thresholds) var += (t - mean) * (t - mean);
    out.std_dev = std::sqrt(var / static_cast<double>(out.thresholds.size()));
    return out;
}

}  // namespace wakegraph
