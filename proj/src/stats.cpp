#include "emophon/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace emophon {

std::vector<double> ranks_with_ties(const std::vector<double>& values) {
  if (values.empty()) throw std::runtime_error("ranks_with_ties: empty input");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / 1.4142135623730950488016887242097);
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;

  // Lentz's continued fraction for the incomplete beta function.
  auto contfrac = [](double a, double b, double x) -> double {
    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const double m2 = 2.0 * m;
      double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double delta = d * c;
      h *= delta;
      if (std::fabs(delta - 1.0) < 1e-15) break;
    }
    return h;
  };

  const double ln_front = a * std::log(x) + b * std::log1p(-x) -
                          std::log(a) + std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b);
  // use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) for faster convergence
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(ln_front) * contfrac(a, b, x);
  const double ln_front2 = b * std::log1p(-x) + a * std::log(x) - std::log(b) +
                           std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  return 1.0 - std::exp(ln_front2) * contfrac(b, a, 1.0 - x);
}

double student_t_cdf(double t, double df) {
  if (df <= 0.0) throw std::runtime_error("student_t_cdf: df must be positive");
  if (t < 0.0) return 1.0 - student_t_cdf(-t, df);
  const double x = df / (df + t * t);
  return 1.0 - 0.5 * incomplete_beta(0.5 * df, 0.5, x);
}

TestResult wilcoxon_signed_rank(const std::vector<double>& x,
                                const std::vector<double>& y, double alpha,
                                int exact_threshold) {
  if (x.size() != y.size() || x.empty())
    throw std::runtime_error("wilcoxon: samples must be paired and non-empty");

  std::vector<double> d;
  d.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double di = x[i] - y[i];
    if (di != 0.0) d.push_back(di);
  }
  if (d.empty())
    throw std::runtime_error("wilcoxon: degenerate: no nonzero differences");

  const std::size_t n = d.size();
  std::vector<double> abs_d(n);
  for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::fabs(d[i]);
  const auto ranks = ranks_with_ties(abs_d);

  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    (d[i] > 0.0 ? w_plus : w_minus) += ranks[i];
  const double w = std::min(w_plus, w_minus);
  const double rank_total = 0.5 * n * (n + 1);

  TestResult r;
  r.statistic = w;
  r.n = static_cast<int>(n);
  r.alpha = alpha;

  if (static_cast<int>(n) <= exact_threshold) {
    // enumerate all sign assignments; count both tails
    r.method = "wilcoxon-exact";
    const std::uint64_t total = 1ull << n;
    std::uint64_t le = 0, ge = 0;
    const double eps = 1e-9;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1ull << i)) s += ranks[i];
      if (s <= w + eps) ++le;
      if (s >= rank_total - w - eps) ++ge;
    }
    r.p_value = std::min(1.0, static_cast<double>(le + ge) / static_cast<double>(total));
  } else {
    r.method = "wilcoxon-normal";
    // tie correction: sum of (t^3 - t) over groups of tied |d|
    std::map<double, int> groups;
    for (double v : abs_d) ++groups[v];
    double tie_term = 0.0;
    for (const auto& [v, t] : groups)
      tie_term += static_cast<double>(t) * t * t - t;
    const double mean = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (w - mean + 0.5) / std::sqrt(var);
    r.p_value = std::clamp(2.0 * normal_cdf(z), 0.0, 1.0);
  }
  r.finish();
  return r;
}

namespace {

void mean_var(const std::vector<double>& v, double& mean, double& var) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size() - 1);
}

}  // namespace

TestResult welch_t_test(const std::vector<double>& a,
                        const std::vector<double>& b, double alpha) {
  if (a.size() < 2 || b.size() < 2)
    throw std::runtime_error("welch_t_test: need at least 2 values per sample");
  double ma, va, mb, vb;
  mean_var(a, ma, va);
  mean_var(b, mb, vb);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  TestResult r;
  r.method = "t-welch";
  r.n = static_cast<int>(a.size() + b.size());
  r.alpha = alpha;

  const double se2 = va / na + vb / nb;
  if (se2 == 0.0) {
    r.degenerate = true;
    if (ma == mb) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = ma > mb ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    r.df = na + nb - 2.0;
    r.finish();
    return r;
  }

  r.statistic = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
  r.p_value = 2.0 * (1.0 - student_t_cdf(std::fabs(r.statistic), r.df));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.finish();
  return r;
}

TestResult paired_t_test(const std::vector<double>& x,
                         const std::vector<double>& y, double alpha) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::runtime_error("paired_t_test: need paired samples of size >= 2");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  double mean, var;
  mean_var(d, mean, var);
  if (var == 0.0)
    throw std::runtime_error("paired_t_test: zero-variance differences");

  TestResult r;
  r.method = "t-paired";
  r.n = static_cast<int>(x.size());
  r.df = static_cast<double>(x.size() - 1);
  r.alpha = alpha;
  r.statistic = mean / std::sqrt(var / static_cast<double>(x.size()));
  r.p_value =
      std::clamp(2.0 * (1.0 - student_t_cdf(std::fabs(r.statistic), r.df)), 0.0, 1.0);
  r.finish();
  return r;
}

BoxStats box_stats(const std::vector<double>& values) {
  if (values.empty()) throw std::runtime_error("box_stats: empty input");
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();

  auto quantile = [&](double q) -> double {
    const double h = (static_cast<double>(n) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
  };

  BoxStats b;
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  b.iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * b.iqr;
  const double hi_fence = b.q3 + 1.5 * b.iqr;
  b.whisker_low = v.back();
  b.whisker_high = v.front();
  for (double x : v) {
    if (x >= lo_fence && x <= hi_fence) {
      b.whisker_low = std::min(b.whisker_low, x);
      b.whisker_high = std::max(b.whisker_high, x);
    } else {
      b.outliers.push_back(x);
    }
  }
  return b;
}

}  // namespace emophon
