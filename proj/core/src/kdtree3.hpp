#pragma once

#include <algorithm>
#include <corrhyp/geom.hpp>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace corrhyp::detail {

// Static 3-d tree over a point cloud; nearest-neighbor queries prune by
// splitting-plane distance. Build is O(n log n); queries stay logarithmic
// for the curve- and surface-like clouds that arise here.
class KdTree3 {
  public:
    explicit KdTree3(std::vector<Vec3> pts) : pts_(std::move(pts)) {
        idx_.resize(pts_.size());
        for (std::size_t i = 0; i < idx_.size(); ++i) idx_[i] = i;
        if (!idx_.empty()) build(0, idx_.size(), 0);
    }

    bool empty() const { return idx_.empty(); }
    std::size_t size() const { return idx_.size(); }

    double nearest_dist(const Vec3& q) const {
        double best = std::numeric_limits<double>::infinity();
        if (!idx_.empty()) search(0, idx_.size(), 0, q, best);
        return best;
    }

  private:
    static double axis_of(const Vec3& p, int axis) {
        return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
    }

    void build(std::size_t lo, std::size_t hi, int axis) {
        if (hi - lo <= 1) return;
        const std::size_t mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + static_cast<std::ptrdiff_t>(lo),
                         idx_.begin() + static_cast<std::ptrdiff_t>(mid),
                         idx_.begin() + static_cast<std::ptrdiff_t>(hi),
                         [&](std::size_t a, std::size_t b) {
                             return axis_of(pts_[a], axis) < axis_of(pts_[b], axis);
                         });
        build(lo, mid, (axis + 1) % 3);
        build(mid + 1, hi, (axis + 1) % 3);
    }

    void search(std::size_t lo, std::size_t hi, int axis, const Vec3& q, double& best) const {
        if (lo >= hi) return;
        const std::size_t mid = (lo + hi) / 2;
        const Vec3& p = pts_[idx_[mid]];
        best = std::min(best, norm(p - q));
        const double delta = axis_of(q, axis) - axis_of(p, axis);
        const int next = (axis + 1) % 3;
        if (delta < 0.0) {
            search(lo, mid, next, q, best);
            if (-delta < best) search(mid + 1, hi, next, q, best);
        } else {
            search(mid + 1, hi, next, q, best);
            if (delta < best) search(lo, mid, next, q, best);
        }
    }

    std::vector<Vec3> pts_;
    std::vector<std::size_t> idx_;
};

}  // namespace corrhyp::detail
