#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "twinarm/kinematics.hpp"

namespace twinarm {

enum class CaseId : int { Case1 = 1, Case2 = 2, Case3 = 3 };

CaseId case_from_int(int n);

enum class Trigger {
    GoalTouched,
    UprightShaping,
    TableTouched,
    BelowTable,
    BehindBase,
    StepBudget,
};

enum class Level { High, Low };

struct RewardTerm {
    std::string name;
    Trigger trigger;
    int step_budget_k = 0;  // used by StepBudget only, >= 1
    double value = 0;       // for UprightShaping: scale of the [0, value] range
    bool terminal = false;
    Level level = Level::Low;

    bool operator==(const RewardTerm&) const = default;
};

// Declarative hierarchical reward table for one training case.
struct RewardSpec {
    CaseId case_id = CaseId::Case1;
    std::vector<RewardTerm> terms;
    int max_episode_steps = 0;

    // Exactly one High-level term, StepBudget k >= 1, positive step cap.
    void validate() const;

    bool operator==(const RewardSpec&) const = default;
};

// Per-step facts the reward table is evaluated against.
struct StepEvents {
    PredicateSet predicates;
    double upright_alignment = 0;  // in [0, 1]
    int step_index = 0;            // within the episode
};

struct RewardResult {
    double reward = 0;
    bool terminal = false;
    std::vector<std::pair<std::string, double>> breakdown;  // term name -> contribution
};

// Sum of the fired terms' contributions. UprightShaping contributes
// value * alignment on every step; StepBudget(k) fires when
// (step_index + 1) % k == 0; the episode also terminates when the step cap
// is reached. Pure.
RewardResult evaluate(const RewardSpec& spec, const StepEvents& events);

// Built-in tables for the three cases. Case 3 uses Case 2's table.
RewardSpec builtin_spec(CaseId case_id);

void to_json(nlohmann::json& j, const RewardTerm& t);
void from_json(const nlohmann::json& j, RewardTerm& t);
void to_json(nlohmann::json& j, const RewardSpec& s);
void from_json(const nlohmann::json& j, RewardSpec& s);

}  // namespace twinarm
