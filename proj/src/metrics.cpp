#include "nasaswin/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace nasaswin {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Metrics compute_metrics(const std::vector<Prediction>& predictions, const std::vector<std::string>& excluded) {
  if (predictions.empty()) throw std::invalid_argument("no predictions to score");
  Metrics m;
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    auto& s = m.per_source[p.source];
    const int y = p.predicted();
    ++s.n;
    if (p.label == 1 && y == 1) ++s.tp;
    if (p.label == 0 && y == 0) ++s.tn;
    if (p.label == 0 && y == 1) ++s.fp;
    if (p.label == 1 && y == 0) ++s.fn;
    if (y == p.label) ++correct;
  }
  m.n = predictions.size();
  m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  double total = 0.0;
  for (auto& [name, s] : m.per_source) {
    s.accuracy = static_cast<double>(s.tp + s.tn) / static_cast<double>(s.n);
    if (std::find(excluded.begin(), excluded.end(), name) != excluded.end()) continue;
    m.avg_sources.push_back(name);
    total += s.accuracy;
  }
  m.avg_acc = m.avg_sources.empty() ? 0.0 : total / static_cast<double>(m.avg_sources.size());
  return m;
}

std::string metrics_csv(const Metrics& m) {
  std::ostringstream os;
  os << "source,n,tp,tn,fp,fn,accuracy\n";
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (const auto& [name, s] : m.per_source) {
    os << name << ',' << s.n << ',' << s.tp << ',' << s.tn << ',' << s.fp << ',' << s.fn << ',' << fixed(s.accuracy, 6)
       << '\n';
    tp += s.tp;
    tn += s.tn;
    fp += s.fp;
    fn += s.fn;
  }
  os << "overall," << m.n << ',' << tp << ',' << tn << ',' << fp << ',' << fn << ',' << fixed(m.overall_accuracy, 6) << '\n';
  os << "avg_acc," << m.avg_sources.size() << ",,,,," << fixed(m.avg_acc, 6) << '\n';
  return os.str();
}

std::string results_table(const Metrics& m, const std::string& method) {
  std::ostringstream os;
  os << "| Method |";
  for (const auto& [name, s] : m.per_source) os << ' ' << name << " |";
  os << " Avg-Acc |\n|---|";
  for (std::size_t i = 0; i < m.per_source.size(); ++i) os << "---|";
  os << "---|\n| " << method << " |";
  for (const auto& [name, s] : m.per_source) os << ' ' << fixed(100.0 * s.accuracy, 1) << " |";
  os << ' ' << fixed(100.0 * m.avg_acc, 1) << " |\n";
  return os.str();
}

}  // namespace nasaswin
