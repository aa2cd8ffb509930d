#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cir::eval {

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Any negative label means UNKNOWN, for both ground truth and predictions.
inline bool is_unknown(int label) { return label < 0; }

struct ClassCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct EvalReport {
  std::size_t n_known = 0;    // known class count M
  std::size_t n_unknown = 0;  // unknown class count
  std::size_t test_size = 0;
  std::size_t known_samples = 0;
  std::size_t unknown_samples = 0;

  std::vector<ClassCounts> per_class;  // one-vs-rest over known-labelled samples
  std::size_t tu = 0, fu = 0, tk = 0, fk = 0;

  double aks = 0.0, aus = 0.0, tpr = 0.0, fpr = 0.0;
  double lambda = 0.0, na = 0.0;
  double precision = 0.0, recall = 0.0, f = 0.0;
  double openness = 0.0;

  /// (M+1) x (M+1), row = truth, column = prediction; index M is UNKNOWN.
  std::vector<std::vector<std::size_t>> confusion;
};

/// Ratios with an empty denominator are reported as 0.
EvalReport compute_report(const std::vector<int>& predicted, const std::vector<int>& truth, std::size_t n_known,
                          std::size_t n_unknown);

/// 1 - sqrt(N / (N + N_u)).
double openness(std::size_t n_known, std::size_t n_unknown);

struct RocPoint {
  double tau = 0.0;
  double fpr = 0.0;  // share of known samples rejected
  double tpr = 0.0;  // share of unknown samples rejected
};

struct RocCurve {
  std::vector<RocPoint> points;  // from tau = +inf (0, 0) to tau = -inf (1, 1)
  double auc = 0.0;
};

/// Rejection at R_min >= tau. Thresholds are the distinct observed values,
/// thinned to at most `grid` evenly spaced ranks when grid > 0.
RocCurve roc_sweep(const std::vector<double>& known_rmin, const std::vector<double>& unknown_rmin,
                   std::size_t grid = 0);

/// Trapezoid area over consecutive points.
double trapezoid_auc(const std::vector<RocPoint>& points);

std::string report_json(const EvalReport& r, const std::vector<std::string>& class_names);
std::string roc_csv(const RocCurve& c);
std::string confusion_csv(const EvalReport& r, const std::vector<std::string>& class_names);

}  // namespace cir::eval
