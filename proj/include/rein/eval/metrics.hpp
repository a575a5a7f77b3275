#pragma once

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "rein/model/edges.hpp"
#include "rein/sim/system.hpp"

namespace rein::eval {

struct MetricReport {
  std::string name;
  double value = 0;
  double dispersion = 0;  // population std over the units named by n
  int64_t n = 1;
  std::string tag;
};

inline MetricReport summarize(const std::string& name, const std::vector<double>& values,
                              const std::string& tag = "") {
  check<InvalidArgument>(!values.empty(), "summarize: no values for '", name, "'");
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {name, mean, std::sqrt(var), static_cast<int64_t>(values.size()), tag};
}

// MSE at selected 1-based rollout steps, averaged over objects, coordinates,
// and episodes; dispersion is the spread across episodes.
template <class T>
std::vector<MetricReport> mse_at_steps(const std::vector<Tensor<T>>& preds,
                                       const std::vector<Tensor<T>>& truth,
                                       const std::vector<int64_t>& steps, int64_t n_objects) {
  check<InvalidArgument>(!steps.empty(), "mse_at_steps: no steps requested");
  check<InvalidArgument>(preds.size() == truth.size(), "mse_at_steps: ", preds.size(),
                         " predictions vs ", truth.size(), " truth frames");
  const int64_t horizon = static_cast<int64_t>(preds.size());
  for (int64_t s : steps)
    check<InvalidArgument>(s >= 1 && s <= horizon, "mse_at_steps: step ", s,
                           " outside prediction horizon ", horizon);
  std::vector<MetricReport> out;
  for (int64_t s : steps) {
    const Tensor<T>& p = preds[static_cast<size_t>(s - 1)];
    const Tensor<T>& g = truth[static_cast<size_t>(s - 1)];
    check<ShapeError>(p.rows == g.rows && p.cols == g.cols && p.rows % n_objects == 0,
                      "mse_at_steps: shape mismatch at step ", s);
    const int64_t B = p.rows / n_objects;
    std::vector<double> per_ep;
    per_ep.reserve(static_cast<size_t>(B));
    for (int64_t e = 0; e < B; ++e) {
      double acc = 0;
      for (int64_t i = e * n_objects; i < (e + 1) * n_objects; ++i)
        for (int64_t j = 0; j < p.cols; ++j) {
          const double d = static_cast<double>(p.at(i, j)) - static_cast<double>(g.at(i, j));
          acc += d * d;
        }
      per_ep.push_back(acc / static_cast<double>(n_objects * p.cols));
    }
    MetricReport r = summarize("mse", per_ep);
    r.tag = "step=" + std::to_string(s);
    out.push_back(r);
  }
  return out;
}

namespace detail {

inline void permutations_fixing_none(int32_t types, std::vector<std::vector<int32_t>>& out) {
  std::vector<int32_t> perm(static_cast<size_t>(types));
  for (int32_t k = 0; k < types; ++k) perm[static_cast<size_t>(k)] = k;
  do {
    out.push_back(perm);
  } while (std::next_permutation(perm.begin() + 1, perm.end()));
}

}  // namespace detail

// Fraction of pairs whose argmax relation type matches ground truth. Type
// labels other than "none" (type 0) carry no inherent meaning, so the best
// bijective relabeling of non-none predicted types is scored; exhaustive
// search is trivial for the small type counts here. Unordered pairs average
// the two directed beliefs unless `directed` is set.
template <class T>
MetricReport edge_accuracy(const model::EdgeBelief<T>& belief,
                           const std::vector<const sim::RelationGraph*>& graphs,
                           bool directed = false) {
  check<InvalidArgument>(!graphs.empty(), "edge_accuracy: no graphs");
  check<InvalidArgument>(belief.batch == static_cast<int64_t>(graphs.size()),
                         "edge_accuracy: belief batch ", belief.batch, " vs ", graphs.size(),
                         " graphs");
  const int32_t n = belief.n;
  const int32_t K = belief.types;
  const int64_t per_ep = static_cast<int64_t>(n) * (n - 1);
  check<InvalidArgument>(belief.logits.rows == belief.batch * per_ep && belief.logits.cols == K,
                         "edge_accuracy: logits shape ", belief.logits.shape_str());

  // argmax type per scored pair, plus the matching ground-truth type
  std::vector<int32_t> pred, gt;
  std::vector<int64_t> episode_of;
  for (size_t e = 0; e < graphs.size(); ++e) {
    const auto& g = *graphs[e];
    check<InvalidArgument>(g.n == n, "edge_accuracy: graph has ", g.n, " objects, belief has ", n);
    for (int32_t i = 0; i < n; ++i)
      for (int32_t j = directed ? 0 : i + 1; j < n; ++j) {
        if (i == j) continue;
        const int64_t r_ij = static_cast<int64_t>(e) * per_ep + model::pair_slot(n, i, j);
        const int64_t r_ji = static_cast<int64_t>(e) * per_ep + model::pair_slot(n, j, i);
        int32_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int32_t k = 0; k < K; ++k) {
          double s = static_cast<double>(belief.logits.at(r_ij, k));
          if (!directed) s = 0.5 * (s + static_cast<double>(belief.logits.at(r_ji, k)));
          if (s > best_score) {
            best_score = s;
            best = k;
          }
        }
        pred.push_back(best);
        gt.push_back(g.type_at(i, j));
        episode_of.push_back(static_cast<int64_t>(e));
      }
  }

  std::vector<std::vector<int32_t>> perms;
  detail::permutations_fixing_none(K, perms);
  double best_acc = -1;
  std::vector<double> best_per_ep;
  for (const auto& perm : perms) {
    std::vector<int64_t> hit(graphs.size(), 0), tot(graphs.size(), 0);
    for (size_t p = 0; p < pred.size(); ++p) {
      const auto e = static_cast<size_t>(episode_of[p]);
      tot[e] += 1;
      if (perm[static_cast<size_t>(pred[p])] == gt[p]) hit[e] += 1;
    }
    std::vector<double> per_ep;
    double acc = 0;
    for (size_t e = 0; e < graphs.size(); ++e) {
      per_ep.push_back(static_cast<double>(hit[e]) / static_cast<double>(tot[e]));
      acc += per_ep.back();
    }
    acc /= static_cast<double>(graphs.size());
    if (acc > best_acc) {
      best_acc = acc;
      best_per_ep = std::move(per_ep);
    }
  }
  MetricReport r = summarize("edge_accuracy", best_per_ep);
  r.tag = directed ? "directed" : "undirected";
  return r;
}

// mean Euclidean distance between paired feature vectors (rows)
template <class T>
double diversity(const Tensor<T>& a, const Tensor<T>& b) {
  check<InvalidArgument>(a.rows == b.rows && a.cols == b.cols, "diversity: shapes ", a.shape_str(),
                         " vs ", b.shape_str());
  check<InvalidArgument>(a.rows >= 1, "diversity: empty feature sets");
  double total = 0;
  for (int64_t i = 0; i < a.rows; ++i) {
    double s = 0;
    for (int64_t j = 0; j < a.cols; ++j) {
      const double d = static_cast<double>(a.at(i, j)) - static_cast<double>(b.at(i, j));
      s += d * d;
    }
    total += std::sqrt(s);
  }
  return total / static_cast<double>(a.rows);
}

// ---- correlation-threshold edge baseline ----

// |Pearson correlation| of the two velocity series, averaged over the two
// coordinates; constant series correlate with nothing
inline double velocity_correlation(const Tensor<float>& traj, int64_t n, int64_t i, int64_t j) {
  const int64_t T = traj.rows;
  double score = 0;
  for (int64_t c = 2; c < 4; ++c) {
    double mi = 0, mj = 0;
    for (int64_t t = 0; t < T; ++t) {
      mi += traj.at(t, i * 4 + c);
      mj += traj.at(t, j * 4 + c);
    }
    mi /= static_cast<double>(T);
    mj /= static_cast<double>(T);
    double sxy = 0, sxx = 0, syy = 0;
    for (int64_t t = 0; t < T; ++t) {
      const double x = traj.at(t, i * 4 + c) - mi;
      const double y = traj.at(t, j * 4 + c) - mj;
      sxy += x * y;
      sxx += x * x;
      syy += y * y;
    }
    if (sxx > 0 && syy > 0) score += std::abs(sxy / std::sqrt(sxx * syy));
  }
  return score / 2.0;
}

// 1-D 2-means boundary: midpoint of the two converged centers
inline double two_means_boundary(std::vector<double> xs) {
  check<InvalidArgument>(xs.size() >= 2, "two_means_boundary: need at least 2 scores");
  auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  double c0 = *lo_it, c1 = *hi_it;
  if (c0 == c1) return c0;
  for (int iter = 0; iter < 100; ++iter) {
    double s0 = 0, s1 = 0;
    int64_t n0 = 0, n1 = 0;
    for (double x : xs) {
      if (std::abs(x - c0) <= std::abs(x - c1)) {
        s0 += x;
        ++n0;
      } else {
        s1 += x;
        ++n1;
      }
    }
    const double nc0 = n0 ? s0 / static_cast<double>(n0) : c0;
    const double nc1 = n1 ? s1 / static_cast<double>(n1) : c1;
    if (nc0 == c0 && nc1 == c1) break;
    c0 = nc0;
    c1 = nc1;
  }
  return 0.5 * (c0 + c1);
}

// binary edge belief from velocity correlations thresholded across the whole
// evaluation set
template <class T>
model::EdgeBelief<T> correlation_edge_belief(const std::vector<const sim::Episode*>& episodes,
                                             int32_t n) {
  check<InvalidArgument>(!episodes.empty(), "correlation_edge_belief: no episodes");
  std::vector<std::vector<double>> scores(episodes.size());
  std::vector<double> all;
  for (size_t e = 0; e < episodes.size(); ++e) {
    for (int32_t i = 0; i < n; ++i)
      for (int32_t j = i + 1; j < n; ++j) {
        const double s = velocity_correlation(episodes[e]->traj, n, i, j);
        scores[e].push_back(s);
        all.push_back(s);
      }
  }
  const double boundary = two_means_boundary(all);

  model::EdgeBelief<T> belief;
  belief.n = n;
  belief.types = 2;
  belief.batch = static_cast<int64_t>(episodes.size());
  const int64_t per_ep = static_cast<int64_t>(n) * (n - 1);
  belief.logits = Tensor<T>(belief.batch * per_ep, 2);
  for (size_t e = 0; e < episodes.size(); ++e) {
    size_t s = 0;
    for (int32_t i = 0; i < n; ++i)
      for (int32_t j = i + 1; j < n; ++j, ++s) {
        const int32_t k = scores[e][s] > boundary ? 1 : 0;
        belief.logits.at(static_cast<int64_t>(e) * per_ep + model::pair_slot(n, i, j), k) = T(1);
        belief.logits.at(static_cast<int64_t>(e) * per_ep + model::pair_slot(n, j, i), k) = T(1);
      }
  }
  belief.sample = belief.logits;
  return belief;
}

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricReport>& reports) {
  os << "metric,tag,value,dispersion,n\n";
  for (const auto& r : reports)
    os << r.name << "," << r.tag << "," << std::setprecision(17) << r.value << "," << r.dispersion
       << "," << r.n << "\n";
}

inline void print_metrics(std::ostream& os, const std::vector<MetricReport>& reports) {
  for (const auto& r : reports) {
    os << std::left << std::setw(18) << r.name << std::setw(16) << r.tag << std::setprecision(6)
       << r.value << " +- " << r.dispersion << "  (n=" << r.n << ")\n";
  }
}

}  // namespace rein::eval
