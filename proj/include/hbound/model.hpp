#pragma once

#include "hbound/bernoulli.hpp"
#include "hbound/bounds.hpp"
#include "hbound/core.hpp"
#include "hbound/geometry.hpp"
#include "hbound/summaries.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace hbound {

enum class SelectionPolicy { GreatestUpper, GreatestMargin, RoundRobin };

struct SolveConfig {
    double epsilon = 0.01;
    double alpha = -1.0;
    double lambda = -1.0;  // negative means automatic
    double r_min = 8.0;
    double beta = 1.0127;
    int n_r = 32;          // number of unit shells, a power of two
    int m = 6;
    int grid_points = 17;
    int max_gamma_evaluations = 256;
    double gamma_rel_tol = 1e-7;
    double margin_tol = 1e-6;  // relative to max(1, |best lower|)
    long long budget = 1000000;
    SelectionPolicy policy = SelectionPolicy::GreatestUpper;
    std::uint64_t seed = 1;

    void validate() const
    {
        require(epsilon > 0 && epsilon < 0.5, "config: epsilon must lie in (0, 0.5)");
        require(alpha < 0, "config: alpha must be negative");
        require(r_min > 0, "config: r_min must be positive");
        require(beta > 1, "config: beta must exceed 1");
        require(n_r >= 1 && (n_r & (n_r - 1)) == 0, "config: n_r must be a power of two");
        require(m >= 1, "config: m must be >= 1");
        require(grid_points >= 2, "config: grid_points must be >= 2");
        require(max_gamma_evaluations >= grid_points, "config: gamma evaluation cap below grid");
        require(margin_tol >= 0, "config: margin_tol must be >= 0");
        require(budget >= 0, "config: budget must be >= 0");
    }

    double r_max() const { return r_min * std::pow(beta, n_r); }
};

inline const char* policy_name(SelectionPolicy p)
{
    switch (p) {
    case SelectionPolicy::GreatestUpper: return "greatest_upper";
    case SelectionPolicy::GreatestMargin: return "greatest_margin";
    case SelectionPolicy::RoundRobin: return "round_robin";
    }
    return "";
}

inline SelectionPolicy policy_from_name(const std::string& s)
{
    if (s == "greatest_upper") return SelectionPolicy::GreatestUpper;
    if (s == "greatest_margin") return SelectionPolicy::GreatestMargin;
    if (s == "round_robin") return SelectionPolicy::RoundRobin;
    throw ParameterError("config: unknown selection policy '" + s + "'");
}

struct Hypothesis {
    int cls = 0;
    Pose pose;

    friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// Image field with its summary structures.
struct ImageData {
    LogitField2D fpi;
    MeanSummaryIndex mean;
    MSummaryIndex msum;
    RowRangeMinMax range;

    ImageData(LogitField2D f, int m)
        : fpi(std::move(f)), mean(fpi), msum(fpi, m), range(fpi.nu, fpi.nv, 1, fpi.logit)
    {
    }

    double max_in(const PixelBox& b) const
    {
        double hi = -kInf;
        for (int j = b.iv0; j < b.iv1; ++j) {
            double l, h;
            range.row(j, 0, b.iu0, b.iu1, l, h);
            hi = std::max(hi, h);
        }
        return hi;
    }
};

struct ClassPrior {
    LogitField3D field;
    RowRangeMinMax range;
    GridGeometry geo;

    explicit ClassPrior(LogitField3D f)
        : field(std::move(f)), range(field.nx, field.ny, field.nz, field.logit),
          geo(GridGeometry::of(field))
    {
    }
};

// Shared inputs of a recognition problem.
struct Problem {
    Retina retina;
    std::shared_ptr<const ImageData> image;
    std::vector<std::shared_ptr<const ClassPrior>> priors;
    SolveConfig config;
    double lambda = 1.0;
    std::vector<double> knots;

    Problem(Retina ret, LogitField2D fpi, std::vector<LogitField3D> classes, SolveConfig cfg)
        : retina(ret), config(cfg)
    {
        retina.validate();
        config.validate();
        require(fpi.nu == retina.nu && fpi.nv == retina.nv, "problem: image grid does not match retina");
        require(!classes.empty(), "problem: no class priors");
        require(std::abs(fpi.cell_area - retina.cell_area()) <= 1e-9 * retina.cell_area(),
                "problem: image cell area does not match retina");
        image = std::make_shared<const ImageData>(std::move(fpi), config.m);
        for (auto& c : classes) {
            require(c.nx > 0 && c.ny > 0 && c.nz > 0, "problem: empty prior grid");
            c.refresh();
            priors.push_back(std::make_shared<const ClassPrior>(std::move(c)));
        }
        knots = radial_knots(config.beta, config.r_min, config.n_r);
        lambda = config.lambda >= 0 ? config.lambda : auto_lambda();
    }

    // Ratio of total image evidence magnitude to the mean total prior magnitude.
    double auto_lambda() const
    {
        double img = 0;
        for (float d : image->fpi.logit) img += std::abs(d);
        img *= image->fpi.cell_area;
        double pri = 0;
        for (const auto& p : priors) {
            double s = 0;
            for (float d : p->field.logit) s += std::abs(d);
            pri += s * p->field.cell_volume();
        }
        pri /= static_cast<double>(priors.size());
        return pri > 0 ? img / pri : 1.0;
    }

    // Validates a hypothesis against this problem; throws ParameterError.
    void check(const Hypothesis& h) const
    {
        require(h.cls >= 0 && h.cls < static_cast<int>(priors.size()), "hypothesis: class index out of range");
        h.pose.validate();
    }

    void check(const std::vector<Hypothesis>& hyps) const
    {
        for (const Hypothesis& h : hyps) check(h);
    }

    // Radius at which shell k (between knots k and k+1) is sampled.
    double sample_radius(int k) const { return std::sqrt(knots[k] * knots[k + 1]); }
};

// Range of sampled prior logits over a block of native voxels.
struct VoxelRange {
    double lo = 0, hi = 0;
    bool uniform() const { return lo == hi; }
};

// Per-hypothesis evaluation context: pose, posed prior sampling, and the shape domain.
class HypothesisModel {
public:
    HypothesisModel(const Problem& pb, const Hypothesis& h) : pb_(&pb), h_(h)
    {
        pb.check(h);
        prior_ = pb.priors[h.cls].get();
        jac_ = h.pose.jacobian();
        c_ = pb.lambda / jac_;
        constant_ = pb.lambda * prior_->field.z_const;
        theta0_ = compute_theta0();
        build_positive_tables();
    }

    const Problem& problem() const { return *pb_; }
    const Hypothesis& hypothesis() const { return h_; }
    const LogitField3D& prior() const { return prior_->field; }
    double prior_weight() const { return c_; }
    double constant() const { return constant_; }
    const PixelBox& theta0() const { return theta0_; }
    bool degenerate() const { return theta0_.empty(); }

    // Exact sampled prior logit of native voxel (iu, iv, shell k).
    double sample(int iu, int iv, int k) const
    {
        const Retina& r = pb_->retina;
        const Vec3 w = r.point(r.u_center(iu), r.v_center(iv), pb_->sample_radius(k));
        return prior_->field.value_at(h_.pose.inverse(w));
    }

    // World volume of the voxel block over pixel box b and shells [k0, k1).
    double volume(const PixelBox& b, int k0, int k1) const
    {
        const auto& kn = pb_->knots;
        return b.cells() * pb_->retina.cell_area() *
               (kn[k1] * kn[k1] * kn[k1] - kn[k0] * kn[k0] * kn[k0]) / 3.0;
    }

    // Rigorous bounds on the sampled logits of every native voxel in the block.
    VoxelRange range(const PixelBox& b, int k0, int k1) const
    {
        if (b.cells() == 1 && k1 - k0 == 1) {
            const double v = sample(b.iu0, b.iv0, k0);
            return {v, v};
        }
        const Retina& r = pb_->retina;
        const LogitField3D& f = prior_->field;
        const Box3 world = frustum_aabb(r, r.u_center(b.iu0), r.u_center(b.iu1 - 1), r.v_center(b.iv0),
                                        r.v_center(b.iv1 - 1), pb_->sample_radius(k0),
                                        pb_->sample_radius(k1 - 1));
        // Quick reject against the padded support: everything outside reads -delta_max.
        const Polytope region = box_to_ics(world, h_.pose);
        const Box3 rb = region.bounds();
        const Box3& s = f.support;
        if (!f.has_support() || rb.hi.x < s.lo.x || rb.hi.y < s.lo.y || rb.hi.z < s.lo.z ||
            rb.lo.x > s.hi.x || rb.lo.y > s.hi.y || rb.lo.z > s.hi.z)
            return {-f.delta_max, -f.delta_max};
        const ConvexRegionDecomposition d = decompose_convex(region, prior_->geo, false);
        double lo = kInf, hi = -kInf;
        for (const CellBox& cb : d.boxes) {
            double l, h;
            prior_->range.row(cb.j0, cb.k0, cb.i0, cb.i1, l, h);
            lo = std::min(lo, l);
            hi = std::max(hi, h);
        }
        for (const PartialCell& pc : d.partial) {
            const double v = f.at(pc.i, pc.j, pc.k);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (d.leaves_domain || (d.boxes.empty() && d.partial.empty())) {
            lo = std::min(lo, -f.delta_max);
            hi = std::max(hi, -f.delta_max);
        }
        return {lo, hi};
    }

    // World volume of the native voxels in the block whose samples can carry a positive logit:
    // those whose pixel-centre ray meets the posed box of positive prior cells.
    double positive_volume(const PixelBox& b, int k0, int k1) const
    {
        if (pos_count_.empty()) return 0.0;
        const auto& kn = pb_->knots;
        const int w = theta0_.nu() + 1;
        const int i0 = b.iu0 - theta0_.iu0, i1 = b.iu1 - theta0_.iu0;
        const int j0 = b.iv0 - theta0_.iv0, j1 = b.iv1 - theta0_.iv0;
        double v = 0;
        for (int k = k0; k < k1; ++k) {
            const std::vector<int>& t = pos_count_[k];
            const int n = t[j1 * w + i1] - t[j0 * w + i1] - t[j1 * w + i0] + t[j0 * w + i0];
            if (n > 0) v += n * (kn[k + 1] * kn[k + 1] * kn[k + 1] - kn[k] * kn[k] * kn[k]) / 3.0;
        }
        return v * pb_->retina.cell_area();
    }

    // Prior bound for a voxel block: slope hi up to the positive volume, then at most 0.
    ConcavePwl prior_bound(const PixelBox& b, int k0, int k1, const VoxelRange& r) const
    {
        const double vol = volume(b, k0, k1);
        if (r.hi <= 0) return ConcavePwl::single(vol, r.hi);
        const double pv = std::min(vol, positive_volume(b, k0, k1));
        ConcavePwl f;
        f.len = {pv, vol - pv};
        f.slope = {r.hi, 0.0};
        return f;
    }

    // Image summaries over a pixel box.
    double image_mean(const PixelBox& b) const
    {
        return pb_->image->mean.query({b.iu0, b.iu1, b.iv0, b.iv1, 0, 1});
    }
    ConcavePwl image_bound(const PixelBox& b) const
    {
        const ImageData& im = *pb_->image;
        const MSummary y = im.msum.query({b.iu0, b.iu1, b.iv0, b.iv1, 0, 1});
        return ConcavePwl::from_msummary(y, im.msum.m(), im.msum.delta_max(),
                                         b.cells() * pb_->retina.cell_area(), im.max_in(b));
    }

private:
    PixelBox compute_theta0() const
    {
        const LogitField3D& f = prior_->field;
        if (!f.has_support()) return {};
        const Retina& r = pb_->retina;
        RetinaRect uv;
        if (!support_uv_bounds(r, h_.pose, f.support, uv)) {
            // The support surrounds the camera axis: the whole retina is in view.
            return {0, r.nu, 0, r.nv};
        }
        auto snap_lo = [](double x, double x0, double dx, int n) {
            return std::clamp(static_cast<int>(std::floor((x - x0) / dx)), 0, n);
        };
        auto snap_hi = [](double x, double x0, double dx, int n) {
            return std::clamp(static_cast<int>(std::ceil((x - x0) / dx)), 0, n);
        };
        PixelBox b{snap_lo(uv.u0, r.u0, r.du(), r.nu), snap_hi(uv.u1, r.u0, r.du(), r.nu),
                   snap_lo(uv.v0, r.v0, r.dv(), r.nv), snap_hi(uv.v1, r.v0, r.dv(), r.nv)};
        if (b.empty()) return {};
        return b;
    }

    // Per shell, 2D prefix counts over theta0 of pixels whose shell sample may be positive.
    void build_positive_tables()
    {
        const LogitField3D& f = prior_->field;
        if (theta0_.empty() || !f.has_positive) return;
        const Retina& r = pb_->retina;
        const int n_r = pb_->config.n_r;
        const int nu = theta0_.nu(), nv = theta0_.nv(), w = nu + 1;
        pos_count_.assign(n_r, std::vector<int>(static_cast<size_t>(w) * (nv + 1), 0));
        const Vec3 o = h_.pose.inverse(r.center);
        for (int j = 0; j < nv; ++j)
            for (int i = 0; i < nu; ++i) {
                const Vec3 d = Retina::direction(r.u_center(theta0_.iu0 + i), r.v_center(theta0_.iv0 + j));
                const Vec3 e = h_.pose.inverse(r.center + d) - o;
                double t0 = 0, t1 = kInf;
                for (int a = 0; a < 3 && t0 <= t1; ++a) {
                    if (e[a] == 0) {
                        if (o[a] < f.positive.lo[a] || o[a] > f.positive.hi[a]) t1 = -1;
                        continue;
                    }
                    double ta = (f.positive.lo[a] - o[a]) / e[a], tb = (f.positive.hi[a] - o[a]) / e[a];
                    if (ta > tb) std::swap(ta, tb);
                    t0 = std::max(t0, ta);
                    t1 = std::min(t1, tb);
                }
                if (t0 > t1) continue;
                const double pad = 1e-9 * (1.0 + t1);
                for (int k = 0; k < n_r; ++k) {
                    const double s = pb_->sample_radius(k);
                    if (s >= t0 - pad && s <= t1 + pad) pos_count_[k][(j + 1) * w + (i + 1)] = 1;
                }
            }
        for (auto& t : pos_count_)
            for (int j = 1; j <= nv; ++j)
                for (int i = 1; i <= nu; ++i)
                    t[j * w + i] += t[(j - 1) * w + i] + t[j * w + i - 1] - t[(j - 1) * w + i - 1];
    }

    const Problem* pb_;
    Hypothesis h_;
    const ClassPrior* prior_ = nullptr;
    double jac_ = 1, c_ = 1, constant_ = 0;
    PixelBox theta0_;
    std::vector<std::vector<int>> pos_count_;
};

}  // namespace hbound
