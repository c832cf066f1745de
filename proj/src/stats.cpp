#include "irda/stats.hpp"

#include "irda/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace irda::stats {

double fleiss_kappa(const LabelMatrix& m) {
  if (m.empty()) {
    throw ValidationError("fleiss_kappa needs at least one item");
  }
  const std::size_t raters = m.front().size();
  if (raters < 2) {
    throw ValidationError("fleiss_kappa needs at least two raters");
  }
  const double n = static_cast<double>(raters);
  double p_bar = 0.0;
  double ones = 0.0;
  for (const auto& row : m) {
    if (row.size() != raters) {
      throw ValidationError("fleiss_kappa needs a complete label matrix");
    }
    double c1 = 0.0;
    for (int v : row) {
      if (v != 0 && v != 1) {
        throw ValidationError("fleiss_kappa expects binary labels");
      }
      c1 += v;
    }
    const double c0 = n - c1;
    p_bar += (c1 * (c1 - 1) + c0 * (c0 - 1)) / (n * (n - 1));
    ones += c1;
  }
  const double items = static_cast<double>(m.size());
  p_bar /= items;
  const double p1 = ones / (items * n);
  const double p_e = p1 * p1 + (1 - p1) * (1 - p1);
  if (p_e >= 1.0) {
    return 1.0;
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

double mean_pairwise_kappa(const LabelMatrix& m) {
  if (m.empty() || m.front().size() < 2) {
    throw ValidationError("mean_pairwise_kappa needs at least two raters and one item");
  }
  const std::size_t raters = m.front().size();
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < raters; ++a) {
    for (std::size_t b = a + 1; b < raters; ++b) {
      LabelMatrix sub;
      sub.reserve(m.size());
      for (const auto& row : m) {
        sub.push_back({row.at(a), row.at(b)});
      }
      sum += fleiss_kappa(sub);
      ++pairs;
    }
  }
  return sum / pairs;
}

double jaccard(const std::set<int>& a, const std::set<int>& b) {
  std::vector<int> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  return uni == 0 ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

std::vector<double> pairwise_jaccard(const std::vector<std::set<int>>& sets) {
  std::vector<double> out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      out.push_back(jaccard(sets[i], sets[j]));
    }
  }
  return out;
}

double mean_pairwise_jaccard(const std::vector<std::set<int>>& sets) {
  if (sets.size() < 2) {
    throw ValidationError("mean_pairwise_jaccard needs at least two sets");
  }
  return mean(pairwise_jaccard(sets));
}

double mean(const std::vector<double>& values) {
  if (values.empty()) {
    throw ValidationError("mean of an empty list");
  }
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double normal_sf(double z) {
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

} // namespace

Interval bootstrap_ci(const std::vector<double>& values, int resamples, double level, std::uint64_t seed) {
  if (values.empty()) {
    throw ValidationError("bootstrap_ci needs at least one value");
  }
  if (resamples < 1) {
    throw ValidationError("bootstrap_ci needs at least one resample");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw ValidationError("bootstrap_ci level must lie in (0, 1)");
  }
  Interval out;
  out.mean = mean(values);
  std::mt19937_64 rng(mix_seed(seed, 0xb007));
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum += values[pick(rng)];
    }
    m = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  out.low = quantile_sorted(means, alpha / 2);
  out.high = quantile_sorted(means, 1.0 - alpha / 2);
  return out;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs, WilcoxonMethod method) {
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& [x, y] : pairs) {
    d.push_back(x - y);
  }
  return wilcoxon_signed_rank(d, method);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences, WilcoxonMethod method) {
  std::vector<double> d;
  for (double v : differences) {
    if (v != 0.0) {
      d.push_back(v);
    }
  }
  if (d.empty()) {
    throw ValidationError("no signal");
  }
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

  // Doubled midranks stay integral: a tie group over positions i..j gets i+j+2.
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) {
      ++j;
    }
    for (std::size_t k = i; k <= j; ++k) {
      rank2[order[k]] = static_cast<long>(i + j + 2);
    }
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  WilcoxonResult r;
  r.n = static_cast<int>(n);
  long w_plus2 = 0;
  long total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0) {
      w_plus2 += rank2[i];
    }
  }
  r.w_plus = w_plus2 / 2.0;
  r.w_minus = (total2 - w_plus2) / 2.0;
  r.statistic = std::min(r.w_plus, r.w_minus);

  const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && r.n <= kExactWilcoxonMax);
  if (exact) {
    if (r.n > 40) {
      throw ValidationError("exact Wilcoxon is limited to 40 nonzero differences");
    }
    // Null distribution of 2*W+: each rank enters with probability 1/2.
    std::vector<double> dist(static_cast<std::size_t>(total2) + 1, 0.0);
    dist[0] = 1.0;
    for (long rk : rank2) {
      for (long s = total2; s >= rk; --s) {
        dist[static_cast<std::size_t>(s)] += dist[static_cast<std::size_t>(s - rk)];
      }
    }
    const double all = std::ldexp(1.0, r.n);
    double lower = 0.0;
    double upper = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w_plus2) {
        lower += dist[static_cast<std::size_t>(s)];
      }
      if (s >= w_plus2) {
        upper += dist[static_cast<std::size_t>(s)];
      }
    }
    r.p_two_sided = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    r.exact = true;
    return r;
  }

  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1) / 4.0;
  const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  const double z = std::max(0.0, std::abs(r.w_plus - mu) - 0.5) / std::sqrt(var);
  r.p_two_sided = std::min(1.0, 2.0 * normal_sf(z));
  return r;
}

PairedSummary paired_summary(const std::vector<double>& a, const std::vector<double>& b, int resamples,
                             std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) {
    throw ValidationError("paired_summary needs two equally long, non-empty lists");
  }
  PairedSummary s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s.deltas.push_back(a[i] - b[i]);
  }
  s.delta_ci = bootstrap_ci(s.deltas, resamples, 0.95, seed);
  try {
    s.wilcoxon = wilcoxon_signed_rank(s.deltas);
  } catch (const ValidationError&) {
    s.has_signal = false;
    s.wilcoxon = WilcoxonResult{};
  }
  return s;
}

nlohmann::json to_json(const Interval& i) {
  return nlohmann::json{{"low", i.low}, {"high", i.high}, {"mean", i.mean}};
}

nlohmann::json to_json(const WilcoxonResult& w) {
  return nlohmann::json{{"statistic", w.statistic}, {"w_plus", w.w_plus}, {"w_minus", w.w_minus},
                        {"p_two_sided", w.p_two_sided}, {"n", w.n}, {"exact", w.exact}};
}

nlohmann::json to_json(const PairedSummary& s) {
  nlohmann::json j{{"deltas", s.deltas}, {"mean_delta", s.delta_ci.mean}, {"delta_ci", to_json(s.delta_ci)}};
  j["wilcoxon"] = s.has_signal ? to_json(s.wilcoxon) : nlohmann::json();
  j["wilcoxon_p"] = s.has_signal ? nlohmann::json(s.wilcoxon.p_two_sided) : nlohmann::json();
  return j;
}

} // namespace irda::stats
