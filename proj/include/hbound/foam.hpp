#pragma once

#include "hbound/bm.hpp"
#include "hbound/model.hpp"
#include "hbound/oracle.hpp"

#include <memory>
#include <string>
#include <vector>

namespace hbound {

enum class Termination { Optimal, Indistinguishable, Budget };

inline const char* termination_name(Termination t)
{
    switch (t) {
    case Termination::Optimal: return "optimal";
    case Termination::Indistinguishable: return "indistinguishable";
    case Termination::Budget: return "budget";
    }
    return "";
}

struct TraceRow {
    long long cycle = 0;
    int hypothesis = 0;
    double lower = 0, upper = 0, slack = 0;
};

struct HypothesisOutcome {
    double lower = 0, upper = 0;
    long long cycles = 0, pixels_evaluated = 0, voxels_evaluated = 0;
    bool degenerate = false, active = true, fully_refined = false;
    long long pruned_at = -1;  // cycle at which the hypothesis was pruned
};

struct SolveReport {
    Termination reason = Termination::Budget;
    int winner = -1;                 // set when reason is optimal
    std::vector<int> solutions;      // surviving hypotheses, index order
    std::vector<HypothesisOutcome> hypotheses;
    std::vector<TraceRow> trace;
    std::vector<Rasters> rasters;    // one per solution
    long long cycles = 0;
    long long voxels_evaluated = 0, pixels_evaluated = 0;
    double best_lower = 0;
    double lambda = 0;
};

// Focus-of-attention scheduler over a set of refinement states.
class Foam {
public:
    Foam(const Problem& pb, std::vector<Hypothesis> hyps) : pb_(&pb), hyps_(std::move(hyps))
    {
        require(!hyps_.empty(), "solve: empty hypothesis list");
        pb.check(hyps_);
        states_.resize(hyps_.size());
        parallel_for(static_cast<int>(hyps_.size()),
                     [&](int i) { states_[i] = std::make_unique<RefinementState>(pb, hyps_[i]); });
        active_.assign(hyps_.size(), 1);
        pruned_at_.assign(hyps_.size(), -1);
        bool any = false;
        for (const auto& s : states_) any = any || !s->degenerate();
        if (!any) throw DegenerateError("solve: every hypothesis projects outside the retina");
        for (size_t i = 0; i < states_.size(); ++i) record(static_cast<int>(i));
        prune();
    }

    const RefinementState& state(int i) const { return *states_[i]; }
    bool active(int i) const { return active_[i] != 0; }
    long long cycle() const { return cycle_; }
    const std::vector<TraceRow>& trace() const { return trace_; }

    double best_lower() const
    {
        double b = -kInf;
        for (const auto& s : states_) b = std::max(b, s->lower());
        return b;
    }

    // Removes every active hypothesis whose upper bound is strictly below the best lower bound of another
    // hypothesis.
    int prune()
    {
        double first = -kInf, second = -kInf;
        size_t holder = states_.size();
        for (size_t i = 0; i < states_.size(); ++i) {
            const double l = states_[i]->lower();
            if (l > first) {
                second = first;
                first = l;
                holder = i;
            }
            else if (l > second) {
                second = l;
            }
        }
        int removed = 0;
        for (size_t i = 0; i < states_.size(); ++i)
            if (active_[i] && states_[i]->upper() < (i == holder ? second : first)) {
                active_[i] = 0;
                pruned_at_[i] = cycle_;
                ++removed;
            }
        return removed;
    }

    // Next hypothesis to refine under the configured policy; -1 when none is refinable.
    int select_next()
    {
        int best = -1;
        const int n = static_cast<int>(states_.size());
        if (pb_->config.policy == SelectionPolicy::RoundRobin) {
            for (int k = 1; k <= n; ++k) {
                const int i = (last_ + k) % n;
                if (refinable(i)) return last_ = i;
            }
            return -1;
        }
        for (int i = 0; i < n; ++i) {
            if (!refinable(i)) continue;
            if (best < 0 || better(i, best)) best = i;
        }
        if (best >= 0) last_ = best;
        return best;
    }

    void refine(int i)
    {
        states_[i]->refine_once();
        ++cycle_;
        record(i);
        prune();
    }

    SolveReport run()
    {
        const long long budget = pb_->config.budget;
        const long long n = static_cast<long long>(states_.size());
        require(budget >= n, "solve: budget must cover the initialization of every hypothesis");
        SolveReport rep;
        while (true) {
            const std::vector<int> act = active_list();
            if (act.size() == 1) {
                const RefinementState& s = *states_[act[0]];
                const double tol = pb_->config.margin_tol * std::max(1.0, std::abs(best_lower()));
                if (s.margin() <= tol || s.fully_refined()) {
                    rep.reason = Termination::Optimal;
                    rep.winner = act[0];
                    break;
                }
            }
            bool all_final = true;
            for (int i : act) all_final = all_final && states_[i]->fully_refined();
            if (all_final) {
                rep.reason = Termination::Indistinguishable;
                break;
            }
            if (n + cycle_ >= budget) {
                rep.reason = Termination::Budget;
                break;
            }
            refine(select_next());
        }
        rep.solutions = active_list();
        rep.trace = trace_;
        rep.cycles = cycle_;
        rep.best_lower = best_lower();
        rep.lambda = pb_->lambda;
        for (size_t i = 0; i < states_.size(); ++i) {
            const RefinementState& s = *states_[i];
            HypothesisOutcome o;
            o.lower = s.lower();
            o.upper = s.upper();
            o.cycles = s.cycles();
            o.pixels_evaluated = s.pixels_evaluated();
            o.voxels_evaluated = s.voxels_evaluated();
            o.degenerate = s.degenerate();
            o.active = active_[i] != 0;
            o.fully_refined = s.fully_refined();
            o.pruned_at = pruned_at_[i];
            rep.voxels_evaluated += o.voxels_evaluated;
            rep.pixels_evaluated += o.pixels_evaluated;
            rep.hypotheses.push_back(o);
        }
        for (int i : rep.solutions) rep.rasters.push_back(states_[i]->rasters());
        return rep;
    }

private:
    bool refinable(int i) const { return active_[i] && !states_[i]->fully_refined(); }

    bool better(int a, int b) const
    {
        const RefinementState &x = *states_[a], &y = *states_[b];
        if (pb_->config.policy == SelectionPolicy::GreatestMargin) {
            if (x.margin() != y.margin()) return x.margin() > y.margin();
            return x.upper() > y.upper();
        }
        if (x.upper() != y.upper()) return x.upper() > y.upper();
        return x.margin() > y.margin();
    }

    std::vector<int> active_list() const
    {
        std::vector<int> a;
        for (size_t i = 0; i < active_.size(); ++i)
            if (active_[i]) a.push_back(static_cast<int>(i));
        return a;
    }

    void record(int i)
    {
        const RefinementState& s = *states_[i];
        trace_.push_back({cycle_, i, s.lower(), s.upper(), s.slack()});
    }

    const Problem* pb_;
    std::vector<Hypothesis> hyps_;
    std::vector<std::unique_ptr<RefinementState>> states_;
    std::vector<char> active_;
    std::vector<long long> pruned_at_;
    std::vector<TraceRow> trace_;
    long long cycle_ = 0;
    int last_ = -1;
};

inline SolveReport solve(const Problem& pb, const std::vector<Hypothesis>& hyps)
{
    Foam f(pb, hyps);
    return f.run();
}

}  // namespace hbound
