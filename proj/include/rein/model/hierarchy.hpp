#pragma once

#include <map>
#include <vector>

#include "rein/core/tape.hpp"

namespace rein::model {

// Part-whole decomposition: level 0 holds one neuron per object, the top
// level exactly one neuron for the whole system. parent[m] maps each level-m
// neuron to its level-(m+1) parent.
struct HierarchySpec {
  std::vector<int32_t> level_sizes;
  std::vector<std::vector<int32_t>> parent;

  int32_t n_levels() const { return static_cast<int32_t>(level_sizes.size()); }
  int32_t size(int32_t m) const { return level_sizes[static_cast<size_t>(m)]; }

  void validate() const {
    check<InvalidArgument>(n_levels() >= 2, "hierarchy needs at least 2 levels");
    check<InvalidArgument>(level_sizes.back() == 1, "top level must have exactly one neuron");
    check<InvalidArgument>(static_cast<int32_t>(parent.size()) == n_levels() - 1,
                           "hierarchy: expected ", n_levels() - 1, " partition maps, got ",
                           parent.size());
    for (int32_t m = 0; m + 1 < n_levels(); ++m) {
      const auto& pm = parent[static_cast<size_t>(m)];
      check<InvalidArgument>(static_cast<int32_t>(pm.size()) == size(m), "hierarchy: level ", m,
                             " has ", size(m), " neurons but ", pm.size(), " partition entries");
      std::vector<int32_t> child_count(static_cast<size_t>(size(m + 1)), 0);
      for (int32_t p : pm) {
        check<InvalidArgument>(p >= 0 && p < size(m + 1), "hierarchy: parent index ", p,
                               " out of range at level ", m);
        ++child_count[static_cast<size_t>(p)];
      }
      for (int32_t q = 0; q < size(m + 1); ++q)
        check<InvalidArgument>(child_count[static_cast<size_t>(q)] >= 1, "hierarchy: neuron ", q,
                               " at level ", m + 1, " has no children");
    }
  }

  // objects -> whole
  static HierarchySpec flat(int32_t n_objects) {
    HierarchySpec s;
    s.level_sizes = {n_objects, 1};
    s.parent = {std::vector<int32_t>(static_cast<size_t>(n_objects), 0)};
    s.validate();
    return s;
  }

  // objects -> groups -> whole, children assigned round-robin
  static HierarchySpec grouped(int32_t n_objects, int32_t n_groups) {
    HierarchySpec s;
    s.level_sizes = {n_objects, n_groups, 1};
    std::vector<int32_t> g(static_cast<size_t>(n_objects));
    for (int32_t i = 0; i < n_objects; ++i) g[static_cast<size_t>(i)] = i % n_groups;
    s.parent = {g, std::vector<int32_t>(static_cast<size_t>(n_groups), 0)};
    s.validate();
    return s;
  }
};

// Row bookkeeping for a batch of B episodes stacked along the row axis:
// level m occupies B*size(m) rows, episode-major. All index vectors below
// are in that global row space.
struct BatchLayout {
  HierarchySpec spec;
  int64_t batch = 0;

  // child row -> parent row, one per non-top level
  std::vector<RowIndex> up;
  // 1 / (number of children) per parent row, for segment means
  std::vector<std::vector<double>> child_count_inv;

  struct Pairs {
    RowIndex send, recv;  // ordered pairs (i != j) within each episode
    int64_t count = 0;
  };
  std::vector<Pairs> peer;  // per level; count 0 when the level has < 2 neurons

  struct Attn {
    RowIndex query, key;  // all (query, key) pairs within each episode
    int64_t count = 0;
  };
  std::vector<Attn> down;  // per non-top level, keys at the level above

  int64_t rows(int32_t m) const { return batch * spec.size(m); }

  BatchLayout() = default;
  BatchLayout(const HierarchySpec& s, int64_t B) : spec(s), batch(B) {
    check<InvalidArgument>(B >= 1, "batch layout needs B >= 1");
    const int32_t L = spec.n_levels();

    for (int32_t m = 0; m + 1 < L; ++m) {
      std::vector<int32_t> idx;
      idx.reserve(static_cast<size_t>(rows(m)));
      for (int64_t e = 0; e < B; ++e)
        for (int32_t i = 0; i < spec.size(m); ++i)
          idx.push_back(static_cast<int32_t>(e * spec.size(m + 1) +
                                             spec.parent[static_cast<size_t>(m)][static_cast<size_t>(i)]));
      up.push_back(make_row_index(std::move(idx)));

      std::vector<int32_t> counts(static_cast<size_t>(spec.size(m + 1)), 0);
      for (int32_t p : spec.parent[static_cast<size_t>(m)]) ++counts[static_cast<size_t>(p)];
      std::vector<double> inv;
      inv.reserve(static_cast<size_t>(rows(m + 1)));
      for (int64_t e = 0; e < B; ++e)
        for (int32_t q = 0; q < spec.size(m + 1); ++q)
          inv.push_back(1.0 / counts[static_cast<size_t>(q)]);
      child_count_inv.push_back(std::move(inv));
    }

    peer.resize(static_cast<size_t>(L));
    for (int32_t m = 0; m < L; ++m) {
      const int32_t n = spec.size(m);
      if (n < 2) continue;
      std::vector<int32_t> send, recv;
      send.reserve(static_cast<size_t>(B * n * (n - 1)));
      recv.reserve(send.capacity());
      for (int64_t e = 0; e < B; ++e)
        for (int32_t i = 0; i < n; ++i)
          for (int32_t j = 0; j < n; ++j) {
            if (i == j) continue;
            send.push_back(static_cast<int32_t>(e * n + i));
            recv.push_back(static_cast<int32_t>(e * n + j));
          }
      peer[static_cast<size_t>(m)].count = static_cast<int64_t>(send.size());
      peer[static_cast<size_t>(m)].send = make_row_index(std::move(send));
      peer[static_cast<size_t>(m)].recv = make_row_index(std::move(recv));
    }

    down.resize(static_cast<size_t>(L - 1));
    for (int32_t m = 0; m + 1 < L; ++m) {
      const int32_t nq = spec.size(m), nk = spec.size(m + 1);
      std::vector<int32_t> q, k;
      q.reserve(static_cast<size_t>(B * nq * nk));
      k.reserve(q.capacity());
      for (int64_t e = 0; e < B; ++e)
        for (int32_t i = 0; i < nq; ++i)
          for (int32_t j = 0; j < nk; ++j) {
            q.push_back(static_cast<int32_t>(e * nq + i));
            k.push_back(static_cast<int32_t>(e * nk + j));
          }
      down[static_cast<size_t>(m)].count = static_cast<int64_t>(q.size());
      down[static_cast<size_t>(m)].query = make_row_index(std::move(q));
      down[static_cast<size_t>(m)].key = make_row_index(std::move(k));
    }
  }
};

// Ordered-pair position of (i, j) in the peer enumeration for one episode.
inline int64_t pair_slot(int32_t n, int32_t i, int32_t j) {
  return static_cast<int64_t>(i) * (n - 1) + (j < i ? j : j - 1);
}

}  // namespace rein::model
