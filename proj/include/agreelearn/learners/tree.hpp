#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace agreelearn::tree {

enum class Criterion { gini, gain_ratio };

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  int leaf_class = 0;
};

struct Options {
  Criterion criterion = Criterion::gini;
  int max_depth = 10;  // 0: unbounded
  int min_leaf = 2;
};

namespace detail {

inline double gini(double n0, double n1) {
  const double n = n0 + n1;
  if (n == 0) return 0.0;
  const double p0 = n0 / n, p1 = n1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

inline double entropy(double n0, double n1) {
  const double n = n0 + n1;
  double h = 0.0;
  for (double c : {n0, n1})
    if (c > 0) h -= c / n * std::log2(c / n);
  return h;
}

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  double gini = 0.0;   // weighted child impurity (gini criterion)
  double gain = 0.0;   // information gain (gain-ratio criterion)
  double ratio = 0.0;
};

class Builder {
 public:
  Builder(const Eigen::MatrixXd& x, std::span<const int> y, const Options& opt) : x_(x), y_(y), opt_(opt) {}

  std::vector<Node> build() {
    std::vector<std::size_t> all(y_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
    return std::move(nodes_);
  }

 private:
  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    double n1 = 0;
    for (auto r : rows) n1 += y_[r];
    const double n0 = static_cast<double>(rows.size()) - n1;
    nodes_[static_cast<std::size_t>(id)].leaf_class = n1 > n0 ? 1 : 0;

    const bool pure = n0 == 0 || n1 == 0;
    const bool depth_limit = opt_.max_depth > 0 && depth >= opt_.max_depth;
    if (pure || depth_limit || rows.size() < 2 * static_cast<std::size_t>(std::max(1, opt_.min_leaf))) return id;

    const auto best = choose_split(rows, n0, n1);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
    const int l = grow(left, depth + 1);
    const int rt = grow(right, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rt;
    return id;
  }

  // Best threshold per feature. Features are scanned in index order and only
  // strict improvements replace the incumbent, so ties go to the lower index
  // and the lower threshold.
  Candidate choose_split(const std::vector<std::size_t>& rows, double n0, double n1) const {
    const double n = n0 + n1;
    const double parent_entropy = entropy(n0, n1);
    const auto min_leaf = static_cast<std::size_t>(std::max(1, opt_.min_leaf));
    constexpr double eps = 1e-12;

    std::vector<Candidate> per_feature;
    std::vector<std::size_t> order(rows);
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = x_(static_cast<Eigen::Index>(a), f), vb = x_(static_cast<Eigen::Index>(b), f);
        return va < vb || (va == vb && a < b);
      });
      Candidate best;
      double l0 = 0, l1 = 0;
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        (y_[order[p]] ? l1 : l0) += 1;
        const double v = x_(static_cast<Eigen::Index>(order[p]), f);
        const double next = x_(static_cast<Eigen::Index>(order[p + 1]), f);
        if (v == next) continue;
        const std::size_t nl = p + 1, nr = order.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double r0 = n0 - l0, r1 = n1 - l1;
        Candidate c;
        c.feature = static_cast<int>(f);
        c.threshold = v + 0.5 * (next - v);
        if (!(c.threshold < next)) c.threshold = v;  // adjacent doubles
        if (opt_.criterion == Criterion::gini) {
          c.gini = (static_cast<double>(nl) * gini(l0, l1) + static_cast<double>(nr) * gini(r0, r1)) / n;
          if (best.feature < 0 || c.gini < best.gini - eps) best = c;
        } else {
          const double cond = (static_cast<double>(nl) * entropy(l0, l1) +
                               static_cast<double>(nr) * entropy(r0, r1)) / n;
          c.gain = std::max(0.0, parent_entropy - cond);
          c.ratio = c.gain / entropy(static_cast<double>(nl), static_cast<double>(nr));
          if (best.feature < 0 || c.gain > best.gain + eps) best = c;
        }
      }
      if (best.feature >= 0) per_feature.push_back(best);
    }
    if (per_feature.empty()) return {};

    if (opt_.criterion == Criterion::gini) {
      Candidate best = per_feature.front();
      for (const auto& c : per_feature)
        if (c.gini < best.gini - eps) best = c;
      return best;
    }
    // Gain ratio among candidates whose gain is at least the average gain.
    double avg = 0.0;
    for (const auto& c : per_feature) avg += c.gain;
    avg /= static_cast<double>(per_feature.size());
    Candidate best;
    for (const auto& c : per_feature) {
      if (c.gain < avg - eps) continue;
      if (best.feature < 0 || c.ratio > best.ratio + eps) best = c;
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  Options opt_;
  std::vector<Node> nodes_;
};

}  // namespace detail

/// y in {0,1}. Node 0 is the root.
inline std::vector<Node> build(const Eigen::MatrixXd& x, std::span<const int> y, const Options& opt) {
  return detail::Builder(x, y, opt).build();
}

template <class Row>
int predict(const std::vector<Node>& nodes, const Row& row) {
  std::size_t at = 0;
  while (nodes[at].feature >= 0)
    at = static_cast<std::size_t>(row[static_cast<std::size_t>(nodes[at].feature)] <= nodes[at].threshold
                                      ? nodes[at].left
                                      : nodes[at].right);
  return nodes[at].leaf_class;
}

inline int depth(const std::vector<Node>& nodes, std::size_t at = 0) {
  if (nodes[at].feature < 0) return 0;
  return 1 + std::max(depth(nodes, static_cast<std::size_t>(nodes[at].left)),
                      depth(nodes, static_cast<std::size_t>(nodes[at].right)));
}

}  // namespace agreelearn::tree
