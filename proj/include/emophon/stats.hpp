#ifndef EMOPHON_STATS_HPP
#define EMOPHON_STATS_HPP

#include <string>
#include <vector>

namespace emophon {

struct TestResult {
  std::string method;    // wilcoxon-exact | wilcoxon-normal | t-welch | t-paired
  double statistic = 0.0;
  double p_value = 1.0;
  int n = 0;             // effective sample size
  double df = 0.0;       // t-tests only
  double alpha = 0.05;
  bool reject = false;   // p_value < alpha
  bool degenerate = false;

  void finish() { reject = p_value < alpha; }
};

struct BoxStats {
  double median = 0.0, q1 = 0.0, q3 = 0.0, iqr = 0.0;
  double whisker_low = 0.0, whisker_high = 0.0;
  std::vector<double> outliers;
};

// Average-rank convention: ranks 1..n, ties receive the mean of their span.
std::vector<double> ranks_with_ties(const std::vector<double>& values);

// Paired signed-rank test. Zero differences are dropped. Exact p by
// enumeration of all 2^n sign assignments for n <= exact_threshold,
// otherwise normal approximation with tie correction and 0.5 continuity
// correction. Throws if all differences are zero.
TestResult wilcoxon_signed_rank(const std::vector<double>& x,
                                const std::vector<double>& y,
                                double alpha = 0.05, int exact_threshold = 20);

// Two-sample unequal-variance t-test with Welch-Satterthwaite df.
TestResult welch_t_test(const std::vector<double>& a,
                        const std::vector<double>& b, double alpha = 0.05);

// One-sample t on d = x - y against mean 0, df = n - 1.
// Throws if the differences have zero variance and nonzero mean is not
// involved -- zero-variance differences are always an error here.
TestResult paired_t_test(const std::vector<double>& x,
                         const std::vector<double>& y, double alpha = 0.05);

// Student t CDF via the regularized incomplete beta function.
double student_t_cdf(double t, double df);

// Phi(z) via erfc.
double normal_cdf(double z);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Quantiles by linear interpolation of order statistics, h = (n-1)q;
// whiskers at the most extreme points within 1.5*IQR of the quartiles.
BoxStats box_stats(const std::vector<double>& values);

}  // namespace emophon

#endif
