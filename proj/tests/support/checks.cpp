#include "checks.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "kvflow/policies.hpp"

namespace kvflow::checks {

std::string_view to_string(Status s) {
    switch (s) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        case Status::Skipped: return "skipped";
    }
    return "?";
}

namespace {

std::vector<stability::ClassLoad> loads_of(const WorkloadSpec& w) {
    std::vector<stability::ClassLoad> out;
    for (const auto& c : w.classes) out.push_back({c.cls.prompt_len, c.cls.decode_len, c.rate});
    return out;
}

}  // namespace

CheckResult check_class_budgets_no_overflow(const WorkloadSpec& workload, const std::map<int, std::int64_t>& budgets,
                                       Tokens capacity, std::span<const std::uint64_t> seeds) {
    CheckResult r;
    if (workload.classes.empty()) {
        r.status = Status::Pass;
        r.detail = "empty workload";
        return r;
    }
    std::vector<std::int64_t> b;
    for (const auto& c : workload.classes) {
        auto it = budgets.find(c.cls.class_id);
        b.push_back(it == budgets.end() ? 0 : it->second);
    }
    auto loads = loads_of(workload);
    auto suff = stability::check_sufficient_known(loads, b, capacity);
    r.threshold = static_cast<double>(suff.budgeted_load);
    if (!suff.memory_condition) {
        r.detail = "budgeted load " + std::to_string(suff.budgeted_load) + " >= M";
        return r;
    }
    r.status = Status::Pass;
    std::ostringstream detail;
    for (std::uint64_t seed : seeds) {
        FlowControlKnown policy(budgets);
        RunResult res = run(workload, policy, capacity, seed);
        Tokens peak = res.usage.empty() ? 0 : *std::max_element(res.usage.begin(), res.usage.end());
        r.measured = std::max(r.measured, static_cast<double>(peak));
        if (res.overflow_events != 0 || res.evictions != 0 || peak > suff.budgeted_load) {
            r.status = Status::Fail;
            r.failing_seeds.push_back(seed);
            detail << "seed " << seed << ": overflows " << res.overflow_events << " evictions " << res.evictions
                   << " peak " << peak << "; ";
        }
    }
    detail << "max U_t " << r.measured << " <= " << suff.budgeted_load << " over " << seeds.size() << " seeds";
    r.detail = detail.str();
    return r;
}

double explosion_threshold(const WorkloadSpec& workload, Tokens capacity) {
    auto loads = loads_of(workload);
    auto nec = stability::check_necessary_known(loads, capacity);
    Tokens w_max = 0;
    for (const auto& c : workload.classes) {
        w_max = std::max(w_max, workload_tokens(c.cls.prompt_len, c.cls.decode_len));
    }
    double delta = (nec.offered_load - Rational(capacity)).to_double();
    return 0.8 * delta / static_cast<double>(w_max);
}

CheckResult check_overload_explosion(const ExperimentConfig& config, std::span<const PolicySpec> policies,
                                  std::span<const std::uint64_t> seeds, unsigned jobs) {
    CheckResult r;
    auto loads = loads_of(config.workload);
    auto nec = stability::check_necessary_known(loads, config.kv_capacity);
    if (!nec.necessary_violated) {
        r.detail = "offered load " + nec.offered_load.to_string() + " fits in M";
        return r;
    }
    r.threshold = explosion_threshold(config.workload, config.kv_capacity);
    r.measured = std::numeric_limits<double>::infinity();
    r.status = Status::Pass;
    std::ostringstream detail;
    for (const auto& spec : policies) {
        if (!applicable(spec, config.workload)) continue;
        auto runs = run_seeds(config, spec, seeds, run_options(config, false), jobs);
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& run : runs) {
            double slope = run.metrics.queue_growth_slope;
            worst = std::min(worst, slope);
            if (slope < r.threshold) {
                r.status = Status::Fail;
                r.failing_seeds.push_back(run.seed);
            }
        }
        r.measured = std::min(r.measured, worst);
        detail << spec.label << " min slope " << worst << "; ";
    }
    detail << "threshold " << r.threshold;
    r.detail = detail.str();
    return r;
}

CheckResult check_scalar_budget_overflow_rarity(const WorkloadSpec& workload, const PolicySpec& flow_unknown,
                                           Tokens capacity, std::span<const std::uint64_t> seeds) {
    CheckResult r;
    auto dist = workload.kind == WorkloadKind::SyntheticClasses
                    ? stability::LengthDistribution::from_classes(workload.classes)
                    : stability::LengthDistribution::empirical(workload.trace);
    Rational eps = stability::budget_slack(flow_unknown.mean_budget, dist, capacity);
    if (!(eps > Rational(0))) {
        r.detail = "slack " + eps.to_string() + " is not positive";
        return r;
    }
    r.status = Status::Pass;
    std::int64_t total_overflows = 0;
    std::ostringstream detail;
    for (std::uint64_t seed : seeds) {
        FlowControlUnknown policy(flow_unknown.mean_budget, flow_unknown.cap, seed);
        RunResult res = run(workload, policy, capacity, seed);
        std::int64_t max_budget = res.budget.empty() ? 0 : *std::max_element(res.budget.begin(), res.budget.end());
        total_overflows += res.overflow_events;
        if (res.overflow_events != 0 || max_budget > policy.cap()) {
            r.status = Status::Fail;
            r.failing_seeds.push_back(seed);
            detail << "seed " << seed << ": overflows " << res.overflow_events << " max B_t " << max_budget << "; ";
        }
    }
    r.measured = static_cast<double>(total_overflows);
    detail << "epsilon " << eps.to_double() << ", " << total_overflows << " overflows over " << seeds.size()
           << " seeds";
    r.detail = detail.str();
    return r;
}

std::vector<Tokens> usage_from_activation_log(const RunResult& result) {
    std::map<RequestId, const Request*> req;
    for (const auto& r : result.requests) req[r.request.id] = &r.request;
    std::vector<Tokens> u(static_cast<std::size_t>(result.horizon), 0);
    std::map<RequestId, Slot> started;
    auto add = [&](const Request& r, Slot s, Slot last) {
        for (Slot t = s; t <= last && t <= result.horizon; ++t) {
            Tokens q = t - s + 1;
            if (r.decode_len >= q) u[static_cast<std::size_t>(t - 1)] += r.prompt_len + q;
        }
    };
    for (const auto& e : result.events) {
        if (e.kind == EventKind::Activate) {
            started[e.request_id] = e.slot;
        } else if (e.kind == EventKind::Evict) {
            add(*req.at(e.request_id), started.at(e.request_id), e.slot - 1);
            started.erase(e.request_id);
        } else if (e.kind == EventKind::Complete) {
            add(*req.at(e.request_id), started.at(e.request_id), e.slot);
            started.erase(e.request_id);
        }
    }
    // still resident at the horizon
    for (const auto& [id, s] : started) add(*req.at(id), s, result.horizon);
    return u;
}

std::map<int, std::vector<std::int64_t>> replay_queue_recursion(const ArrivalStream& arrivals,
                                                                const std::map<int, std::int64_t>& budgets) {
    std::map<int, std::vector<std::int64_t>> out;
    std::map<int, std::int64_t> q;
    for (const auto& [k, b] : budgets) q[k] = 0;
    for (const auto& slot : arrivals.slots) {
        std::map<int, std::int64_t> n;
        for (const auto& r : slot) ++n[r.class_id.value_or(0)];
        for (auto& [k, v] : q) {
            v = std::max<std::int64_t>(0, v + n[k] - budgets.at(k));
            out[k].push_back(v);
        }
    }
    return out;
}

}  // namespace kvflow::checks
