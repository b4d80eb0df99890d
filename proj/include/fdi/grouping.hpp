#pragma once

// Group partitions over identities and the assignment of verification pairs
// to groups. A pair belongs to a group iff both of its identities do; what
// happens to impostor pairs spanning two groups is a policy choice.

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fdi/core.hpp"
#include "fdi/verification.hpp"

namespace fdi {

// Disjoint identity groups in fixed lexicographic label order, so ranks and
// reports are reproducible.
class GroupPartition {
  public:
    struct Group {
        std::string label;
        std::set<std::string> identities;
    };

    GroupPartition(std::string name, std::vector<Group> groups)
        : name_(std::move(name)), groups_(std::move(groups)) {
        std::sort(groups_.begin(), groups_.end(),
                  [](const Group& a, const Group& b) { return a.label < b.label; });
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            if (g > 0 && groups_[g].label == groups_[g - 1].label)
                throw Error("partition '" + name_ + "': duplicate group label '" +
                            groups_[g].label + "'");
            if (groups_[g].identities.empty())
                throw Error("partition '" + name_ + "': empty group '" + groups_[g].label + "'");
            for (const auto& id : groups_[g].identities) {
                auto [it, inserted] = index_.emplace(id, g);
                if (!inserted)
                    throw Error("partition '" + name_ + "': identity '" + id +
                                "' assigned to both '" + groups_[it->second].label +
                                "' and '" + groups_[g].label + "'");
            }
        }
    }

    const std::string& name() const { return name_; }
    const std::vector<Group>& groups() const { return groups_; }
    std::size_t size() const { return groups_.size(); }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(groups_.size());
        for (const auto& g : groups_) out.push_back(g.label);
        return out;
    }

    // Group index for an identity, or npos when unassigned.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t group_of(const std::string& identity) const {
        auto it = index_.find(identity);
        return it == index_.end() ? npos : it->second;
    }

    std::set<std::string> universe() const {
        std::set<std::string> out;
        for (const auto& g : groups_) out.insert(g.identities.begin(), g.identities.end());
        return out;
    }

  private:
    std::string name_;
    std::vector<Group> groups_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Identities whose first character is not A-Z (after upcasing).
enum class NonAlphaPolicy { reject, drop, other_group };

inline NonAlphaPolicy parse_non_alpha_policy(const std::string& s) {
    if (s == "reject") return NonAlphaPolicy::reject;
    if (s == "drop") return NonAlphaPolicy::drop;
    if (s == "other") return NonAlphaPolicy::other_group;
    throw Error("non-alpha policy '" + s + "': expected reject, drop, or other");
}

struct ProxyPartitionResult {
    GroupPartition partition;
    std::vector<std::string> dropped;  // sorted; only under the drop policy
};

// First-letter rule: A-F -> "A", G-L -> "B", M-R -> "C", S-Z -> "D".
// Only non-empty groups appear in the partition.
inline ProxyPartitionResult proxy_partition(const std::set<std::string>& identities,
                                            NonAlphaPolicy policy = NonAlphaPolicy::drop) {
    if (identities.empty()) throw Error("proxy_partition: no identities");
    std::map<std::string, std::set<std::string>> buckets;
    std::vector<std::string> dropped;
    for (const auto& id : identities) {
        char first = id.empty() ? '\0' : id[0];
        char up = static_cast<char>(std::toupper(static_cast<unsigned char>(first)));
        std::string label;
        if (up >= 'A' && up <= 'F') label = "A";
        else if (up >= 'G' && up <= 'L') label = "B";
        else if (up >= 'M' && up <= 'R') label = "C";
        else if (up >= 'S' && up <= 'Z') label = "D";
        else {
            switch (policy) {
                case NonAlphaPolicy::reject:
                    throw Error("proxy_partition: identity '" + id +
                                "' does not start with a letter A-Z");
                case NonAlphaPolicy::drop:
                    dropped.push_back(id);
                    continue;
                case NonAlphaPolicy::other_group:
                    label = "OTHER";
                    break;
            }
        }
        buckets[label].insert(id);
    }
    std::vector<GroupPartition::Group> groups;
    for (auto& [label, ids] : buckets) groups.push_back({label, std::move(ids)});
    if (groups.empty()) throw Error("proxy_partition: every identity was dropped");
    return {GroupPartition("proxy", std::move(groups)), std::move(dropped)};
}

// All non-empty pairwise intersections, labeled "p_label×q_label".
// Identities present in only one input fall in no cell.
inline GroupPartition intersect_partitions(const GroupPartition& p, const GroupPartition& q) {
    std::map<std::string, std::set<std::string>> cells;
    for (const auto& gp : p.groups()) {
        for (const auto& id : gp.identities) {
            std::size_t qi = q.group_of(id);
            if (qi == GroupPartition::npos) continue;
            cells[gp.label + "×" + q.groups()[qi].label].insert(id);
        }
    }
    if (cells.size() < 2)
        throw Error("intersect_partitions: result has fewer than 2 groups");
    std::vector<GroupPartition::Group> groups;
    for (auto& [label, ids] : cells) groups.push_back({label, std::move(ids)});
    return GroupPartition(p.name() + "×" + q.name(), std::move(groups));
}

enum class CrossGroupPolicy { exclude, duplicate };

inline CrossGroupPolicy parse_cross_group_policy(const std::string& s) {
    if (s == "exclude") return CrossGroupPolicy::exclude;
    if (s == "duplicate") return CrossGroupPolicy::duplicate;
    throw Error("cross-group policy '" + s + "': expected exclude or duplicate");
}

// Pair indices per group, in the partition's group order. Pairs that land in
// no group are counted, never silently discarded.
struct PairGroupAssignment {
    std::vector<std::string> group_labels;
    std::vector<std::vector<std::size_t>> members;
    std::size_t cross_group_excluded = 0;  // impostor pairs spanning two groups
    std::size_t unknown_identity = 0;      // pairs with an identity outside the partition
    CrossGroupPolicy policy = CrossGroupPolicy::exclude;

    std::size_t assigned_total() const {
        std::size_t n = 0;
        for (const auto& m : members) n += m.size();
        return n;
    }
};

inline PairGroupAssignment assign_pairs(std::span<const LabeledScore> scores,
                                        const GroupPartition& partition,
                                        CrossGroupPolicy policy = CrossGroupPolicy::exclude) {
    PairGroupAssignment out;
    out.group_labels = partition.labels();
    out.members.resize(partition.size());
    out.policy = policy;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::size_t ga = partition.group_of(scores[i].identity_a);
        std::size_t gb = partition.group_of(scores[i].identity_b);
        if (ga == GroupPartition::npos || gb == GroupPartition::npos) {
            ++out.unknown_identity;
            continue;
        }
        if (ga == gb) {
            out.members[ga].push_back(i);
        } else if (policy == CrossGroupPolicy::duplicate) {
            out.members[ga].push_back(i);
            out.members[gb].push_back(i);
        } else {
            ++out.cross_group_excluded;
        }
    }
    return out;
}

}  // namespace fdi
