#pragma once

#include "hbound/bounds.hpp"
#include "hbound/model.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hbound {

struct ExactEvidence {
    double value = 0;
    PixelBox theta0;
    std::vector<int> n_star, q_star;  // per pixel of theta0, u fastest
    long long voxels = 0;
    bool degenerate = false;
};

// Evidence at the native partition, where both fields are constant per voxel.
inline ExactEvidence evidence_exact(const Problem& pb, const Hypothesis& h)
{
    const HypothesisModel model(pb, h);
    ExactEvidence e;
    e.value = model.constant();
    e.theta0 = model.theta0();
    if (model.degenerate()) {
        e.degenerate = true;
        return e;
    }
    const int n_r = pb.config.n_r;
    const double area = pb.retina.cell_area();
    const double c = model.prior_weight();
    const double log_beta = std::log(pb.config.beta);
    std::vector<double> vol(n_r), means(n_r);
    for (int k = 0; k < n_r; ++k) vol[k] = model.volume({0, 1, 0, 1}, k, k + 1);
    const PixelBox& t = e.theta0;
    double sum = 0;
    for (int j = t.iv0; j < t.iv1; ++j)
        for (int i = t.iu0; i < t.iu1; ++i) {
            for (int k = 0; k < n_r; ++k) means[k] = vol[k] * model.sample(i, j, k);
            const double yf = pb.image->fpi.at(i, j) * area;
            const PixelLowerResult r = pixel_lower(area, yf, means, c, log_beta, pb.config.alpha);
            sum += r.value;
            e.n_star.push_back(r.n_star);
            e.q_star.push_back(r.q_star);
        }
    e.value += sum;
    e.voxels = t.cells() * n_r;
    return e;
}

// Independent scalar evaluation: no summaries, no shared top-k code, a full sort per pixel.
inline double evidence_exact_scalar(const Problem& pb, const Hypothesis& h)
{
    const HypothesisModel model(pb, h);
    const LogitField3D& prior = pb.priors[h.cls]->field;
    double total = pb.lambda * prior.z_const;
    if (model.degenerate()) return total;
    const Retina& ret = pb.retina;
    const int n_r = pb.config.n_r;
    const double a = ret.cell_area();
    const double c = pb.lambda / h.pose.jacobian();
    const double alpha = pb.config.alpha;
    const double lb = std::log(pb.config.beta);
    const PixelBox& t = model.theta0();
    for (int j = t.iv0; j < t.iv1; ++j)
        for (int i = t.iu0; i < t.iu1; ++i) {
            std::vector<double> vals;
            for (int k = 0; k < n_r; ++k) {
                const double r0 = pb.config.r_min * std::pow(pb.config.beta, k);
                const double r1 = r0 * pb.config.beta;
                const Vec3 x = h.pose.inverse(ret.point(ret.u_center(i), ret.v_center(j), std::sqrt(r0 * r1)));
                vals.push_back(prior.value_at(x) * a * (r1 * r1 * r1 - r0 * r0 * r0) / 3.0);
            }
            std::sort(vals.begin(), vals.end(), std::greater<>());
            const double yf = pb.image->fpi.at(i, j) * a;
            double best = -kInf, acc = 0;
            for (int n = 0; n <= n_r; ++n) {
                if (n > 0) acc += vals[n - 1];
                const double ell = n * lb;
                const double bg = a * alpha * ell + c * acc;
                const double fg = n > 0 ? yf + a * std::log(1.0 - std::exp(alpha * ell)) + c * acc : -kInf;
                best = std::max({best, bg, fg});
            }
            total += best;
        }
    return total;
}

inline int thread_count()
{
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HBOUND_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    }
    return static_cast<int>(n);
}

// Runs f(i) for i in [0, n) on up to thread_count() workers.
template <class F>
void parallel_for(int n, F&& f)
{
    const int t = std::min(thread_count(), n);
    if (t <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < t; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) f(i);
        });
    for (std::thread& th : pool) th.join();
}

struct OracleResult {
    int best = -1;
    std::vector<ExactEvidence> table;
    long long total_voxels = 0;
};

inline OracleResult argmax_exhaustive(const Problem& pb, const std::vector<Hypothesis>& hyps)
{
    require(!hyps.empty(), "oracle: empty hypothesis list");
    pb.check(hyps);
    OracleResult r;
    r.table.resize(hyps.size());
    parallel_for(static_cast<int>(hyps.size()), [&](int i) { r.table[i] = evidence_exact(pb, hyps[i]); });
    for (size_t i = 0; i < hyps.size(); ++i) {
        r.total_voxels += r.table[i].voxels;
        if (r.best < 0 || r.table[i].value > r.table[r.best].value) r.best = static_cast<int>(i);
    }
    return r;
}

}  // namespace hbound
