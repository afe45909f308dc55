#pragma once

// Hand-rolled random generators for the property and acceptance tests.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "simarena/corpus.hpp"
#include "simarena/index.hpp"

namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }
  // Uniform in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(eng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return unit() < p; }
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double normal() {
    const double u1 = std::max(unit(), 1e-300);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * unit());
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(v.size()) - 1))]; }

 private:
  std::mt19937_64 eng_;
};

// Gaps cluster on the merge / pair boundaries so both sides get exercised.
inline std::int64_t boundary_gap(Rng& r) {
  static const std::vector<std::int64_t> edges = {0, 1, 119, 120, 121, 299, 300, 301, 302, 3600};
  if (r.chance(0.4)) return r.pick(edges);
  return r.range(0, 420);
}

inline std::vector<simarena::MessageEvent> event_stream(Rng& r, std::size_t max_events) {
  static const std::vector<std::string> words = {"hi", "ok", "吃了吗", "晚点说", "好的", "see you", "嗯", "why", "周末"};
  const std::size_t n = static_cast<std::size_t>(r.range(0, static_cast<std::int64_t>(max_events)));
  std::vector<simarena::MessageEvent> out;
  std::int64_t ts = r.range(0, 100000);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) ts += boundary_gap(r);
    simarena::MessageEvent e;
    char id[16];
    std::snprintf(id, sizeof(id), "e%06zu", i);
    e.event_id = id;
    e.timestamp = ts;
    e.speaker = r.chance(0.5) ? simarena::Speaker::kTarget : simarena::Speaker::kInterlocutor;
    e.text = r.pick(words);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<std::string> token_list(Rng& r, std::size_t max_len, std::size_t vocab) {
  const std::size_t n = static_cast<std::size_t>(r.range(0, static_cast<std::int64_t>(max_len)));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(r.range(0, static_cast<std::int64_t>(vocab) - 1)));
  return out;
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
  return s;
}

// Unit vectors around a few centroids, plus exact and near duplicates, so the
// floor and the dedup threshold both bite.
inline std::vector<simarena::IndexedItem> index_items(Rng& r, std::size_t max_items, std::size_t dim,
                                                      std::vector<std::vector<float>>& centroids) {
  centroids.clear();
  for (int c = 0; c < 4; ++c) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(r.normal());
    centroids.push_back(v);
  }
  const std::size_t n = static_cast<std::size_t>(r.range(1, static_cast<std::int64_t>(max_items)));
  std::vector<simarena::IndexedItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    if (!out.empty() && r.chance(0.1)) {
      v = out[static_cast<std::size_t>(r.range(0, static_cast<std::int64_t>(out.size()) - 1))].vector.values;
      if (r.chance(0.5)) {
        for (auto& x : v) x += static_cast<float>(0.01 * r.normal());
      }
    } else {
      const auto& c = r.pick(centroids);
      const double spread = r.unit() * 1.5;
      for (std::size_t d = 0; d < dim; ++d) v[d] = c[d] + static_cast<float>(spread * r.normal());
    }
    simarena::IndexedItem it;
    char id[16];
    std::snprintf(id, sizeof(id), "item-%04zu", i);
    it.item_id = id;
    it.text = id;
    it.vector = {v, "test-model"};
    it.timestamp = r.range(0, 5 * simarena::kSecondsPerYear);
    out.push_back(std::move(it));
  }
  return out;
}

}  // namespace gen
