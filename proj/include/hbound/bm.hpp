#pragma once

#include "hbound/bounds.hpp"
#include "hbound/model.hpp"

#include <cstdint>
#include <queue>
#include <vector>

namespace hbound {

// Pixel box with radial voxels of equal log-length. Bounds are local contributions (without
// the prior constant). `lower`/`upper` combine the node's own bounds with its children's.
struct PixelNode {
    PixelBox box;
    int n_voxels = 1;
    int parent = -1;
    int depth = 0;
    std::vector<int> children;
    std::vector<VoxelRange> voxels;
    double own_lower = 0, own_upper = 0;
    double lower = 0, upper = 0;
    double slack = 0;
    bool final = false;
    // Lower-bound reconstruction.
    int q_star = 0;
    std::vector<int> chosen;
    // Upper-bound reconstruction: foreground fraction and fill fraction of each voxel.
    double q_fraction = 0;
    std::vector<double> fill;

    double margin() const { return upper - lower; }
    bool leaf() const { return children.empty(); }
};

struct CycleReport {
    bool refined = false;
    int node = -1;
    int children = 0;
    long long voxels_evaluated = 0;
    double lower = 0, upper = 0;
};

// Reconstructions over the native partition: q rasters are nu x nv, v rasters nu x nv x N_r.
struct Rasters {
    std::vector<float> q_hat, q_tilde, v_hat, v_tilde;
};

class RefinementState {
public:
    RefinementState(const Problem& pb, const Hypothesis& h, PixelUpperOptions opt = {})
        : model_(pb, h), opt_(opt)
    {
        const SolveConfig& cfg = pb.config;
        opt_.grid_points = cfg.grid_points;
        opt_.max_evaluations = cfg.max_gamma_evaluations;
        opt_.rel_tol = cfg.gamma_rel_tol;
        n_r_ = cfg.n_r;
        if (model_.degenerate()) return;
        PixelNode root;
        root.box = model_.theta0();
        root.n_voxels = 1;
        root.voxels = {model_.range(root.box, 0, n_r_)};
        voxels_evaluated_ += 1;
        evaluate(root);
        ++pixels_evaluated_;
        nodes_.push_back(std::move(root));
        slack_ = nodes_[0].slack;
        push(0);
    }

    const HypothesisModel& model() const { return model_; }
    bool degenerate() const { return model_.degenerate(); }
    double constant() const { return model_.constant(); }
    double lower() const { return constant() + (nodes_.empty() ? 0.0 : nodes_[0].lower); }
    double upper() const { return constant() + (nodes_.empty() ? 0.0 : nodes_[0].upper); }
    double margin() const { return upper() - lower(); }
    double slack() const { return slack_; }
    bool fully_refined() const { return queue_.empty(); }
    long long pixels_evaluated() const { return pixels_evaluated_; }
    long long voxels_evaluated() const { return voxels_evaluated_; }
    long long cycles() const { return cycles_; }
    const std::vector<PixelNode>& nodes() const { return nodes_; }

    CycleReport refine_once()
    {
        CycleReport rep;
        if (queue_.empty()) {
            rep.lower = lower();
            rep.upper = upper();
            return rep;
        }
        const int id = queue_.top().node;
        queue_.pop();
        const long long v0 = voxels_evaluated_;
        std::vector<PixelNode> kids = split(nodes_[id]);
        double slack_delta = -nodes_[id].slack;
        for (PixelNode& k : kids) {
            k.parent = id;
            k.depth = nodes_[id].depth + 1;
            evaluate(k);
            ++pixels_evaluated_;
            slack_delta += k.slack;
            const int kid = static_cast<int>(nodes_.size());
            nodes_[id].children.push_back(kid);
            nodes_.push_back(std::move(k));
            if (!nodes_[kid].final) push(kid);
        }
        slack_ += slack_delta;
        for (int n = id; n >= 0; n = nodes_[n].parent) combine(nodes_[n]);
        ++cycles_;
        rep.refined = true;
        rep.node = id;
        rep.children = static_cast<int>(nodes_[id].children.size());
        rep.voxels_evaluated = voxels_evaluated_ - v0;
        rep.lower = lower();
        rep.upper = upper();
        return rep;
    }

    // Recomputes every node from scratch (fresh range queries) and recombines the tree.
    // Returns {lower, upper}; used to audit the incremental bookkeeping.
    std::pair<double, double> recompute_batch() const
    {
        if (nodes_.empty()) return {constant(), constant()};
        std::vector<PixelNode> fresh = nodes_;
        for (PixelNode& n : fresh) {
            const int w = n_r_ / n.n_voxels;
            for (int k = 0; k < n.n_voxels; ++k) n.voxels[k] = model_.range(n.box, k * w, (k + 1) * w);
            evaluate(n);
        }
        for (size_t i = fresh.size(); i-- > 0;) combine_in(fresh, fresh[i]);
        return {constant() + fresh[0].lower, constant() + fresh[0].upper};
    }

    // Native-resolution reconstructions assembled from the current leaves.
    Rasters rasters() const
    {
        const Retina& r = model_.problem().retina;
        const size_t n2 = static_cast<size_t>(r.nu) * r.nv;
        Rasters out;
        out.q_hat.assign(n2, 0.f);
        out.q_tilde.assign(n2, 0.f);
        out.v_hat.assign(n2 * n_r_, 0.f);
        out.v_tilde.assign(n2 * n_r_, 0.f);
        for (const PixelNode& n : nodes_) {
            if (!n.leaf()) continue;
            const int w = n_r_ / n.n_voxels;
            std::vector<char> sel(n.n_voxels, 0);
            for (int k : n.chosen) sel[k] = 1;
            for (int j = n.box.iv0; j < n.box.iv1; ++j)
                for (int i = n.box.iu0; i < n.box.iu1; ++i) {
                    const size_t p = static_cast<size_t>(j) * r.nu + i;
                    out.q_hat[p] = static_cast<float>(n.q_star);
                    out.q_tilde[p] = static_cast<float>(n.q_fraction);
                    for (int s = 0; s < n_r_; ++s) {
                        out.v_hat[static_cast<size_t>(s) * n2 + p] = sel[s / w] ? 1.f : 0.f;
                        out.v_tilde[static_cast<size_t>(s) * n2 + p] = static_cast<float>(n.fill[s / w]);
                    }
                }
        }
        return out;
    }

private:
    struct QueueItem {
        double margin;
        std::uint64_t seq;
        int node;
        bool operator<(const QueueItem& o) const
        {
            if (margin != o.margin) return margin < o.margin;
            return seq > o.seq;
        }
    };

    void push(int id) { queue_.push({nodes_[id].margin(), seq_++, id}); }

    static void combine_in(std::vector<PixelNode>& all, PixelNode& n)
    {
        if (n.children.empty()) {
            n.lower = n.own_lower;
            n.upper = n.own_upper;
            return;
        }
        double lo = 0, up = 0;
        for (int c : n.children) {
            lo += all[c].lower;
            up += all[c].upper;
        }
        n.lower = std::max(n.own_lower, lo);
        n.upper = std::min(n.own_upper, up);
    }
    void combine(PixelNode& n) { combine_in(nodes_, n); }

    std::vector<PixelNode> split(const PixelNode& p)
    {
        std::vector<PixelBox> boxes;
        const PixelBox& b = p.box;
        const int nu = b.nu(), nv = b.nv();
        const int mu = b.iu0 + (nu + 1) / 2, mv = b.iv0 + (nv + 1) / 2;
        if (nu == 1 && nv == 1) {
            boxes.push_back(b);
        }
        else if (nu >= 2 && nv >= 2 && 2 * nu >= nv && 2 * nv >= nu) {
            boxes.push_back({b.iu0, mu, b.iv0, mv});
            boxes.push_back({mu, b.iu1, b.iv0, mv});
            boxes.push_back({b.iu0, mu, mv, b.iv1});
            boxes.push_back({mu, b.iu1, mv, b.iv1});
        }
        else if (nu >= nv) {
            boxes.push_back({b.iu0, mu, b.iv0, b.iv1});
            boxes.push_back({mu, b.iu1, b.iv0, b.iv1});
        }
        else {
            boxes.push_back({b.iu0, b.iu1, b.iv0, mv});
            boxes.push_back({b.iu0, b.iu1, mv, b.iv1});
        }
        const int nvox = std::min(2 * p.n_voxels, n_r_);
        const int w = n_r_ / nvox;
        std::vector<PixelNode> kids;
        for (const PixelBox& cb : boxes) {
            PixelNode k;
            k.box = cb;
            k.n_voxels = nvox;
            k.voxels.resize(nvox);
            for (int i = 0; i < nvox; ++i) {
                const VoxelRange& pr = p.voxels[i * p.n_voxels / nvox];
                if (pr.uniform()) {
                    k.voxels[i] = pr;
                }
                else {
                    k.voxels[i] = model_.range(cb, i * w, (i + 1) * w);
                    ++voxels_evaluated_;
                }
            }
            kids.push_back(std::move(k));
        }
        return kids;
    }

    // Computes the node's own bounds and reconstructions.
    void evaluate(PixelNode& n) const
    {
        const Problem& pb = model_.problem();
        const double alpha = pb.config.alpha;
        const double c = model_.prior_weight();
        const int w = n_r_ / n.n_voxels;
        const double area = n.box.cells() * pb.retina.cell_area();
        std::vector<double> means(n.n_voxels), vol(n.n_voxels);
        for (int k = 0; k < n.n_voxels; ++k) {
            vol[k] = model_.volume(n.box, k * w, (k + 1) * w);
            means[k] = vol[k] * n.voxels[k].lo;
        }
        const double log_beta = w * std::log(pb.config.beta);
        const PixelLowerResult lo = pixel_lower(area, model_.image_mean(n.box), means, c, log_beta, alpha);
        n.own_lower = lo.value;
        n.q_star = lo.q_star;
        n.chosen = lo.psi_indices;
        n.final = n.box.cells() == 1 && n.n_voxels == n_r_;
        n.fill.assign(n.n_voxels, 0.0);
        if (n.final) {
            // At native resolution the sampled fields are constant per voxel and the lower
            // bound is the exact evidence contribution of the pixel.
            n.own_upper = n.own_lower;
            n.q_fraction = n.q_star;
            for (int k : n.chosen) n.fill[k] = 1.0;
            n.slack = 0;
        }
        else {
            // Adjacent uniform voxels with equal logits merge into one run.
            std::vector<VoxelBound> runs;
            std::vector<int> run_start, run_end;
            const auto& kn = pb.knots;
            for (int k = 0; k < n.n_voxels; ++k) {
                const VoxelRange& v = n.voxels[k];
                const bool merge = k > 0 && v.uniform() && n.voxels[k - 1].uniform() &&
                                   n.voxels[k - 1].lo == v.lo;
                if (merge) {
                    runs.back().r_out = kn[(k + 1) * w];
                    run_end.back() = k + 1;
                }
                else {
                    runs.push_back({kn[k * w], kn[(k + 1) * w], {}});
                    run_start.push_back(k);
                    run_end.push_back(k + 1);
                }
            }
            for (size_t r = 0; r < runs.size(); ++r)
                runs[r].f = model_.prior_bound(n.box, run_start[r] * w, run_end[r] * w, n.voxels[run_start[r]]);
            const PixelUpperResult up = pixel_upper(area, model_.image_bound(n.box), runs, c, alpha, opt_);
            n.own_upper = up.value;
            n.slack = up.slack;
            n.q_fraction = area > 0 ? up.q_bar / area : 0.0;
            for (size_t r = 0; r < runs.size(); ++r) {
                const double f = (up.gamma.v1[r] + up.gamma.v0[r]) / runs[r].f.total();
                for (int k = run_start[r]; k < run_end[r]; ++k) n.fill[k] = std::clamp(f, 0.0, 1.0);
            }
        }
        n.lower = n.own_lower;
        n.upper = n.own_upper;
    }

    HypothesisModel model_;
    PixelUpperOptions opt_;
    int n_r_ = 1;
    std::vector<PixelNode> nodes_;
    std::priority_queue<QueueItem> queue_;
    std::uint64_t seq_ = 0;
    double slack_ = 0;
    long long pixels_evaluated_ = 0, voxels_evaluated_ = 0, cycles_ = 0;
};

}  // namespace hbound
