#include "cir/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

namespace cir::eval {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

double openness(std::size_t n_known, std::size_t n_unknown) {
  if (n_known == 0) throw EvalError("openness: need at least one known class");
  return 1.0 - std::sqrt(static_cast<double>(n_known) / static_cast<double>(n_known + n_unknown));
}

EvalReport compute_report(const std::vector<int>& predicted, const std::vector<int>& truth, std::size_t n_known,
                          std::size_t n_unknown) {
  if (predicted.size() != truth.size()) {
    throw EvalError("compute_report: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw EvalError("compute_report: empty test set");
  if (n_known == 0) throw EvalError("compute_report: need at least one known class");
  const auto M = static_cast<int>(n_known);
  auto check = [&](int v, const char* what) {
    if (v >= M) throw EvalError(std::string("compute_report: ") + what + " label " + std::to_string(v) + " >= M");
  };

  EvalReport r;
  r.n_known = n_known;
  r.n_unknown = n_unknown;
  r.test_size = truth.size();
  r.per_class.assign(n_known, {});
  r.confusion.assign(n_known + 1, std::vector<std::size_t>(n_known + 1, 0));

  for (std::size_t s = 0; s < truth.size(); ++s) {
    const int t = truth[s], p = predicted[s];
    check(t, "true");
    check(p, "predicted");
    const std::size_t row = is_unknown(t) ? n_known : static_cast<std::size_t>(t);
    const std::size_t col = is_unknown(p) ? n_known : static_cast<std::size_t>(p);
    ++r.confusion[row][col];
    if (is_unknown(t)) {
      ++r.unknown_samples;
      if (is_unknown(p)) ++r.tu;
      else ++r.fu;
      continue;
    }
    ++r.known_samples;
    if (is_unknown(p)) ++r.fk;
    else ++r.tk;
    for (int i = 0; i < M; ++i) {
      ClassCounts& c = r.per_class[static_cast<std::size_t>(i)];
      if (t == i) {
        if (p == i) ++c.tp;
        else ++c.fn;
      } else {
        if (p == i) ++c.fp;
        else ++c.tn;
      }
    }
  }

  double hit = 0.0, all = 0.0, p_sum = 0.0, r_sum = 0.0;
  const double fu = static_cast<double>(r.fu);
  for (const ClassCounts& c : r.per_class) {
    hit += static_cast<double>(c.tp + c.tn);
    all += static_cast<double>(c.tp + c.tn + c.fp + c.fn);
    p_sum += ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp) + fu);
    r_sum += ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn) + fu);
  }
  r.aks = ratio(hit, all);
  r.aus = ratio(static_cast<double>(r.tu), static_cast<double>(r.tu + r.fu));
  r.tpr = ratio(static_cast<double>(r.tu), static_cast<double>(r.tu + r.fk));
  r.fpr = ratio(static_cast<double>(r.fu), static_cast<double>(r.fu + r.tk));
  r.lambda = static_cast<double>(r.known_samples) / static_cast<double>(r.test_size);
  r.na = r.lambda * r.aks + (1.0 - r.lambda) * r.aus;
  r.precision = p_sum / static_cast<double>(n_known);
  r.recall = r_sum / static_cast<double>(n_known);
  r.f = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  r.openness = openness(n_known, n_unknown);
  return r;
}

double trapezoid_auc(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

RocCurve roc_sweep(const std::vector<double>& known_rmin, const std::vector<double>& unknown_rmin, std::size_t grid) {
  if (known_rmin.empty() || unknown_rmin.empty()) {
    throw EvalError("roc_sweep: need both known and unknown samples");
  }
  std::vector<double> k = known_rmin, u = unknown_rmin;
  std::sort(k.begin(), k.end());
  std::sort(u.begin(), u.end());
  std::vector<double> taus(k);
  taus.insert(taus.end(), u.begin(), u.end());
  std::sort(taus.begin(), taus.end(), std::greater<>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  if (grid > 0 && taus.size() > grid) {
    std::vector<double> thin;
    for (std::size_t g = 0; g < grid; ++g) {
      const std::size_t idx = grid == 1 ? 0 : g * (taus.size() - 1) / (grid - 1);
      if (thin.empty() || thin.back() != taus[idx]) thin.push_back(taus[idx]);
    }
    taus = std::move(thin);
  }

  // Share of sorted values >= tau.
  auto rejected = [](const std::vector<double>& sorted, double tau) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), tau);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
  };
  RocCurve c;
  const double inf = std::numeric_limits<double>::infinity();
  c.points.push_back({inf, 0.0, 0.0});
  for (double tau : taus) c.points.push_back({tau, rejected(k, tau), rejected(u, tau)});
  c.points.push_back({-inf, 1.0, 1.0});
  c.auc = trapezoid_auc(c.points);
  return c;
}

std::string report_json(const EvalReport& r, const std::vector<std::string>& class_names) {
  using nlohmann::json;
  if (!class_names.empty() && class_names.size() != r.n_known) {
    throw EvalError("report_json: class name count differs from M");
  }
  json per = json::array();
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    const ClassCounts& c = r.per_class[i];
    json e = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    e["class"] = class_names.empty() ? std::to_string(i) : class_names[i];
    per.push_back(e);
  }
  json j = {{"aks", r.aks},
            {"aus", r.aus},
            {"tpr", r.tpr},
            {"fpr", r.fpr},
            {"na", r.na},
            {"lambda", r.lambda},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f", r.f},
            {"openness", r.openness},
            {"tu", r.tu},
            {"fu", r.fu},
            {"tk", r.tk},
            {"fk", r.fk},
            {"n_known_classes", r.n_known},
            {"n_unknown_classes", r.n_unknown},
            {"test_size", r.test_size},
            {"known_samples", r.known_samples},
            {"unknown_samples", r.unknown_samples},
            {"per_class", per},
            {"confusion", r.confusion}};
  return j.dump(2) + "\n";
}

std::string roc_csv(const RocCurve& c) {
  std::ostringstream os;
  os << "tau,fpr,tpr\n";
  for (const RocPoint& p : c.points) os << fmt(p.tau) << ',' << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
  return os.str();
}

std::string confusion_csv(const EvalReport& r, const std::vector<std::string>& class_names) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < r.n_known; ++i) labels.push_back(class_names.empty() ? std::to_string(i) : class_names.at(i));
  labels.push_back("UNKNOWN");
  std::ostringstream os;
  os << "true\\pred";
  for (const auto& l : labels) os << ',' << csv_field(l);
  os << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    os << csv_field(labels[i]);
    for (std::size_t v : r.confusion[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace cir::eval
