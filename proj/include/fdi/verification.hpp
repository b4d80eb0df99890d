#pragma once

// Verification primitives: embeddings -> labeled pair scores -> confusion
// counts -> error rates. Decision rule is fixed: a pair is accepted as
// same-identity iff score >= tau (ties accept).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fdi/core.hpp"
#include "fdi/rng.hpp"

namespace fdi {

struct Embedding {
    std::string identity;
    std::vector<double> vec;
};

// One verification pair: similarity in [-1, 1] plus the genuine/impostor label.
struct LabeledScore {
    std::string identity_a;
    std::string identity_b;
    double score = 0.0;
    bool is_genuine = false;
};

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t genuine_total() const { return tp + fn; }
    std::uint64_t impostor_total() const { return fp + tn; }
    std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct Rates {
    double fpr = 0.0;
    double fnr = 0.0;
    double acc = 0.0;
};

class ThresholdGrid {
  public:
    explicit ThresholdGrid(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw Error("threshold grid: empty");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) throw Error("threshold grid: non-finite value");
            if (i > 0 && values_[i] <= values_[i - 1])
                throw Error("threshold grid: values must be strictly increasing");
        }
    }

    // "start:end:step", endpoints included within half-step tolerance.
    static ThresholdGrid parse(const std::string& text) {
        auto p1 = text.find(':');
        auto p2 = text.find(':', p1 == std::string::npos ? p1 : p1 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos)
            throw Error("grid '" + text + "': expected start:end:step");
        double start, end, step;
        try {
            start = std::stod(text.substr(0, p1));
            end = std::stod(text.substr(p1 + 1, p2 - p1 - 1));
            step = std::stod(text.substr(p2 + 1));
        } catch (const std::exception&) {
            throw Error("grid '" + text + "': non-numeric field");
        }
        if (!std::isfinite(start) || !std::isfinite(end) || !std::isfinite(step))
            throw Error("grid '" + text + "': non-finite field");
        if (step <= 0.0) throw Error("grid '" + text + "': step must be > 0");
        if (end < start) throw Error("grid '" + text + "': end < start");
        std::vector<double> vals;
        for (double v = start; v <= end + step * 0.5; v += step) vals.push_back(v);
        return ThresholdGrid(std::move(vals));
    }

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    friend bool operator==(const ThresholdGrid& a, const ThresholdGrid& b) {
        return a.values_ == b.values_;
    }

  private:
    std::vector<double> values_;
};

inline void validate_embedding(const Embedding& e) {
    if (e.vec.empty()) throw Error("embedding '" + e.identity + "': empty vector");
    for (double v : e.vec)
        if (!std::isfinite(v))
            throw Error("embedding '" + e.identity + "': non-finite component");
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.vec.size() != b.vec.size())
        throw Error("cosine_similarity: dimension mismatch (" +
                    format_count(a.vec.size()) + " vs " + format_count(b.vec.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.vec.size(); ++i) {
        dot += a.vec[i] * b.vec[i];
        na += a.vec[i] * a.vec[i];
        nb += b.vec[i] * b.vec[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error("cosine_similarity: zero-norm vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

struct PairProtocol {
    enum class Mode { exhaustive, sampled };

    Mode mode = Mode::exhaustive;
    // Sampled mode: impostor pairs anchored at each identity are capped at
    // this count; anchors only pair with identities comparing greater, so
    // each unordered identity pair is sampled from one side only.
    std::uint64_t impostor_cap = 10;
    std::uint64_t seed = 0;
    bool require_genuine = true;

    static PairProtocol parse(const std::string& text) {
        PairProtocol p;
        if (text == "exhaustive") return p;
        if (text.rfind("sampled", 0) == 0) {
            p.mode = Mode::sampled;
            if (text.size() > 7) {
                if (text[7] != ':') throw Error("pairs protocol '" + text + "': expected sampled[:cap]");
                try {
                    p.impostor_cap = std::stoull(text.substr(8));
                } catch (const std::exception&) {
                    throw Error("pairs protocol '" + text + "': bad cap");
                }
            }
            return p;
        }
        throw Error("pairs protocol '" + text + "': expected exhaustive or sampled[:cap]");
    }
};

namespace detail {

inline void reject_duplicate_records(std::span<const Embedding> embeddings) {
    std::vector<std::size_t> order(embeddings.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (embeddings[x].identity != embeddings[y].identity)
            return embeddings[x].identity < embeddings[y].identity;
        return embeddings[x].vec < embeddings[y].vec;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        const auto& p = embeddings[order[i - 1]];
        const auto& q = embeddings[order[i]];
        if (p.identity == q.identity && p.vec == q.vec)
            throw Error("build_pairs: duplicate record for identity '" + p.identity + "'");
    }
}

}  // namespace detail

// Enumerates genuine and impostor pairs with deterministic output order.
// Exhaustive mode emits all C(m,2) pairs in input order (i < j). Sampled mode
// keeps genuine pairs exhaustive and samples impostor partners per anchor
// from a stream derived from (seed, anchor index).
inline std::vector<LabeledScore> build_pairs(std::span<const Embedding> embeddings,
                                             const PairProtocol& protocol = {}) {
    if (embeddings.size() < 2) throw Error("build_pairs: need at least 2 embeddings");
    for (const auto& e : embeddings) validate_embedding(e);
    for (std::size_t i = 1; i < embeddings.size(); ++i)
        if (embeddings[i].vec.size() != embeddings[0].vec.size())
            throw Error("build_pairs: embeddings of unequal dimension");
    detail::reject_duplicate_records(embeddings);

    std::vector<LabeledScore> out;
    auto emit = [&](std::size_t i, std::size_t j) {
        out.push_back({embeddings[i].identity, embeddings[j].identity,
                       cosine_similarity(embeddings[i], embeddings[j]),
                       embeddings[i].identity == embeddings[j].identity});
    };

    if (protocol.mode == PairProtocol::Mode::exhaustive) {
        for (std::size_t i = 0; i < embeddings.size(); ++i)
            for (std::size_t j = i + 1; j < embeddings.size(); ++j) emit(i, j);
    } else {
        // Genuine pairs stay exhaustive.
        for (std::size_t i = 0; i < embeddings.size(); ++i)
            for (std::size_t j = i + 1; j < embeddings.size(); ++j)
                if (embeddings[i].identity == embeddings[j].identity) emit(i, j);
        // Impostor pairs: anchor i draws partners whose identity compares
        // greater, without replacement, until the anchor identity's cap.
        std::unordered_map<std::string, std::uint64_t> anchored;
        for (std::size_t i = 0; i < embeddings.size(); ++i) {
            const std::string& ident = embeddings[i].identity;
            std::vector<std::size_t> candidates;
            for (std::size_t j = 0; j < embeddings.size(); ++j)
                if (embeddings[j].identity > ident) candidates.push_back(j);
            Rng rng(derive_stream(protocol.seed, i));
            std::uint64_t& count = anchored[ident];
            while (count < protocol.impostor_cap && !candidates.empty()) {
                std::size_t pick = static_cast<std::size_t>(rng.below(candidates.size()));
                emit(i, candidates[pick]);
                candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
                ++count;
            }
        }
    }

    if (protocol.require_genuine) {
        bool any_genuine = std::any_of(out.begin(), out.end(),
                                       [](const LabeledScore& s) { return s.is_genuine; });
        if (!any_genuine)
            throw Error("build_pairs: no genuine pairs constructible "
                        "(no identity has 2+ embeddings)");
    }
    return out;
}

inline ConfusionCounts confusion_at(std::span<const LabeledScore> scores, double tau) {
    if (scores.empty()) throw Error("confusion_at: empty score list");
    ConfusionCounts c;
    for (const auto& s : scores) {
        bool accept = s.score >= tau;
        if (s.is_genuine)
            accept ? ++c.tp : ++c.fn;
        else
            accept ? ++c.fp : ++c.tn;
    }
    return c;
}

// fpr = fp/(fp+tn), fnr = fn/(tp+fn), acc = (tp+tn)/total. Throws when a
// class is absent; the grouping validity policy screens that out upstream.
inline Rates rates(const ConfusionCounts& c) {
    if (c.genuine_total() == 0)
        throw Error("rates: no genuine pairs counted (fnr undefined)");
    if (c.impostor_total() == 0)
        throw Error("rates: no impostor pairs counted (fpr undefined)");
    Rates r;
    r.fpr = static_cast<double>(c.fp) / static_cast<double>(c.impostor_total());
    r.fnr = static_cast<double>(c.fn) / static_cast<double>(c.genuine_total());
    r.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return r;
}

}  // namespace fdi
