#include "twinarm/reward.hpp"

#include <map>

#include "twinarm/errors.hpp"

namespace twinarm {

CaseId case_from_int(int n) {
    if (n < 1 || n > 3) throw ConfigError("unknown case id " + std::to_string(n));
    return static_cast<CaseId>(n);
}

void RewardSpec::validate() const {
    if (max_episode_steps < 1) throw ConfigError("reward: max_episode_steps must be >= 1");
    int high = 0;
    for (const auto& t : terms) {
        if (t.level == Level::High) ++high;
        if (t.trigger == Trigger::StepBudget && t.step_budget_k < 1)
            throw ConfigError("reward: StepBudget k must be >= 1 (term '" + t.name + "')");
    }
    if (high != 1)
        throw ConfigError("reward: spec must contain exactly one High-level term, found " +
                          std::to_string(high));
}

RewardResult evaluate(const RewardSpec& spec, const StepEvents& ev) {
    RewardResult out;
    out.breakdown.reserve(spec.terms.size());
    for (const auto& t : spec.terms) {
        double c = 0;
        bool fired = false;
        switch (t.trigger) {
            case Trigger::GoalTouched:
                fired = ev.predicates.touched_goal;
                if (fired) c = t.value;
                break;
            case Trigger::UprightShaping:
                fired = true;  // dense, every step
                c = t.value * ev.upright_alignment;
                break;
            case Trigger::TableTouched:
                fired = ev.predicates.touched_table;
                if (fired) c = t.value;
                break;
            case Trigger::BelowTable:
                fired = ev.predicates.below_table;
                if (fired) c = t.value;
                break;
            case Trigger::BehindBase:
                fired = ev.predicates.behind_base;
                if (fired) c = t.value;
                break;
            case Trigger::StepBudget:
                fired = (ev.step_index + 1) % t.step_budget_k == 0;
                if (fired) c = t.value;
                break;
        }
        out.reward += c;
        if (fired && t.terminal) out.terminal = true;
        out.breakdown.emplace_back(t.name, c);
    }
    if (ev.step_index + 1 >= spec.max_episode_steps) out.terminal = true;
    return out;
}

RewardSpec builtin_spec(CaseId case_id) {
    RewardSpec s;
    s.case_id = case_id;
    if (case_id == CaseId::Case1) {
        s.max_episode_steps = 3000;
        s.terms = {
            {"goal_touched", Trigger::GoalTouched, 0, +1.0, true, Level::High},
            {"upright", Trigger::UprightShaping, 0, 3.0, false, Level::Low},
            {"table_touched", Trigger::TableTouched, 0, -1.0, false, Level::Low},
            {"below_table", Trigger::BelowTable, 0, -1.0, true, Level::Low},
            {"behind_base", Trigger::BehindBase, 0, -1.0, true, Level::Low},
            {"step_budget", Trigger::StepBudget, 300, -1.0, false, Level::Low},
        };
    } else {
        // Cases 2 and 3 share one table; they differ only in transfer learning.
        s.max_episode_steps = 5000;
        s.terms = {
            {"goal_touched", Trigger::GoalTouched, 0, +10.0, false, Level::High},
            {"upright", Trigger::UprightShaping, 0, 3.0, false, Level::Low},
            {"table_touched", Trigger::TableTouched, 0, -1.0, false, Level::Low},
            {"below_table", Trigger::BelowTable, 0, -10.0, true, Level::Low},
            {"behind_base", Trigger::BehindBase, 0, -10.0, true, Level::Low},
        };
    }
    s.validate();
    return s;
}

namespace {

const std::map<std::string, Trigger> kTriggerNames = {
    {"goal_touched", Trigger::GoalTouched}, {"upright_shaping", Trigger::UprightShaping},
    {"table_touched", Trigger::TableTouched}, {"below_table", Trigger::BelowTable},
    {"behind_base", Trigger::BehindBase},   {"step_budget", Trigger::StepBudget},
};

std::string trigger_name(Trigger t) {
    for (const auto& [k, v] : kTriggerNames)
        if (v == t) return k;
    return "?";
}

}  // namespace

void to_json(nlohmann::json& j, const RewardTerm& t) {
    j = nlohmann::json{{"name", t.name},
                       {"trigger", trigger_name(t.trigger)},
                       {"value", t.value},
                       {"terminal", t.terminal},
                       {"level", t.level == Level::High ? "high" : "low"}};
    if (t.trigger == Trigger::StepBudget) j["k"] = t.step_budget_k;
}

void from_json(const nlohmann::json& j, RewardTerm& t) {
    for (const auto& [key, _] : j.items()) {
        if (key != "name" && key != "trigger" && key != "value" && key != "terminal" &&
            key != "level" && key != "k")
            throw ConfigError("reward term: unknown key '" + key + "'");
    }
    t.name = j.at("name").get<std::string>();
    const auto trig = j.at("trigger").get<std::string>();
    auto it = kTriggerNames.find(trig);
    if (it == kTriggerNames.end()) throw ConfigError("reward term: unknown trigger '" + trig + "'");
    t.trigger = it->second;
    t.value = j.at("value").get<double>();
    t.terminal = j.at("terminal").get<bool>();
    const auto level = j.at("level").get<std::string>();
    if (level != "high" && level != "low")
        throw ConfigError("reward term: level must be 'high' or 'low'");
    t.level = level == "high" ? Level::High : Level::Low;
    t.step_budget_k = j.value("k", 0);
}

void to_json(nlohmann::json& j, const RewardSpec& s) {
    j = nlohmann::json{{"case", static_cast<int>(s.case_id)},
                       {"max_episode_steps", s.max_episode_steps},
                       {"terms", s.terms}};
}

void from_json(const nlohmann::json& j, RewardSpec& s) {
    for (const auto& [key, _] : j.items()) {
        if (key != "case" && key != "max_episode_steps" && key != "terms")
            throw ConfigError("reward spec: unknown key '" + key + "'");
    }
    s.case_id = case_from_int(j.at("case").get<int>());
    s.max_episode_steps = j.at("max_episode_steps").get<int>();
    s.terms = j.at("terms").get<std::vector<RewardTerm>>();
    s.validate();
}

}  // namespace twinarm
