#include "scstory/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "scstory/error.hpp"

namespace scstory::metrics {
namespace {

void require_same_length(std::span<const Label> pred, std::span<const Label> truth, std::size_t min_len) {
  if (pred.size() != truth.size())
    throw Error(Errc::LengthMismatch,
                std::to_string(pred.size()) + " predicted vs " + std::to_string(truth.size()) + " true labels");
  if (pred.size() < min_len) throw Error(Errc::TooFew, "need at least " + std::to_string(min_len) + " items");
}

struct Contingency {
  std::vector<double> row_sums;  // per predicted cluster
  std::vector<double> col_sums;  // per true class
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  double n = 0.0;
};

Contingency contingency(std::span<const Label> pred, std::span<const Label> truth) {
  std::map<Label, std::size_t> prow, tcol;
  for (Label p : pred) prow.emplace(p, prow.size());
  for (Label t : truth) tcol.emplace(t, tcol.size());
  Contingency c;
  c.row_sums.assign(prow.size(), 0.0);
  c.col_sums.assign(tcol.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t r = prow[pred[i]];
    const std::size_t k = tcol[truth[i]];
    c.row_sums[r] += 1.0;
    c.col_sums[k] += 1.0;
    c.cells[{r, k}] += 1.0;
  }
  c.n = static_cast<double>(pred.size());
  return c;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

bool same_partition(std::span<const Label> a, std::span<const Label> b) {
  std::map<Label, Label> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

double entropy_of(const std::vector<double>& sums, double n) {
  double h = 0.0;
  for (double s : sums)
    if (s > 0) h -= (s / n) * std::log(s / n);
  return h;
}

Matrix normalized_rows(const Matrix& reprs) {
  const Eigen::VectorXd norms = reprs.rowwise().norm();
  if ((norms.array() == 0.0).any()) throw Error(Errc::ZeroVector, "representation with zero norm");
  return norms.cwiseInverse().asDiagonal() * reprs;
}

}  // namespace

Label LabelEncoder::operator()(const std::string& name) {
  return ids_.emplace(name, static_cast<Label>(ids_.size())).first->second;
}

BCubed b_cubed(std::span<const Label> pred, std::span<const Label> truth) {
  require_same_length(pred, truth, 1);
  const Contingency c = contingency(pred, truth);
  // Each item of cell (r, k) has precision n_rk / |r| and recall n_rk / |k|.
  double p = 0.0, r = 0.0;
  for (const auto& [rk, count] : c.cells) {
    p += count * count / c.row_sums[rk.first];
    r += count * count / c.col_sums[rk.second];
  }
  BCubed out;
  out.precision = p / c.n;
  out.recall = r / c.n;
  out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

double ari(std::span<const Label> pred, std::span<const Label> truth) {
  require_same_length(pred, truth, 2);
  const Contingency c = contingency(pred, truth);
  double index = 0.0, a = 0.0, b = 0.0;
  for (const auto& [rk, count] : c.cells) index += comb2(count);
  for (double s : c.row_sums) a += comb2(s);
  for (double s : c.col_sums) b += comb2(s);
  const double expected = a * b / comb2(c.n);
  const double max_index = 0.5 * (a + b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double mutual_information(std::span<const Label> pred, std::span<const Label> truth) {
  require_same_length(pred, truth, 1);
  const Contingency c = contingency(pred, truth);
  double mi = 0.0;
  for (const auto& [rk, count] : c.cells)
    mi += (count / c.n) * std::log(c.n * count / (c.row_sums[rk.first] * c.col_sums[rk.second]));
  return mi;
}

double entropy(std::span<const Label> labels) {
  std::map<Label, double> counts;
  for (Label l : labels) counts[l] += 1.0;
  std::vector<double> sums;
  for (const auto& [l, n] : counts) sums.push_back(n);
  return entropy_of(sums, static_cast<double>(labels.size()));
}

double expected_mutual_information(std::span<const Label> pred, std::span<const Label> truth) {
  require_same_length(pred, truth, 1);
  const Contingency c = contingency(pred, truth);
  const double N = c.n;
  const double lg_n = std::lgamma(N + 1.0);
  double emi = 0.0;
  for (double ai : c.row_sums) {
    for (double bj : c.col_sums) {
      const double base = std::lgamma(ai + 1.0) + std::lgamma(bj + 1.0) + std::lgamma(N - ai + 1.0) +
                          std::lgamma(N - bj + 1.0) - lg_n;
      const double lo = std::max(1.0, ai + bj - N);
      const double hi = std::min(ai, bj);
      for (double nij = lo; nij <= hi; nij += 1.0) {
        const double log_p = base - std::lgamma(nij + 1.0) - std::lgamma(ai - nij + 1.0) -
                             std::lgamma(bj - nij + 1.0) - std::lgamma(N - ai - bj + nij + 1.0);
        emi += (nij / N) * std::log(N * nij / (ai * bj)) * std::exp(log_p);
      }
    }
  }
  return emi;
}

double ami(std::span<const Label> pred, std::span<const Label> truth) {
  require_same_length(pred, truth, 2);
  // Identical partitions (including the degenerate one-cluster and
  // all-singleton cases, where the adjusted form is 0/0) score 1.
  if (same_partition(pred, truth)) return 1.0;
  const double mi = mutual_information(pred, truth);
  const double emi = expected_mutual_information(pred, truth);
  const double normalizer = 0.5 * (entropy(pred) + entropy(truth));
  double denominator = normalizer - emi;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  denominator = denominator < 0 ? std::min(denominator, -eps) : std::max(denominator, eps);
  return (mi - emi) / denominator;
}

double alignment(const Matrix& reprs, std::span<const Label> labels) {
  if (static_cast<std::size_t>(reprs.rows()) != labels.size())
    throw Error(Errc::LengthMismatch, "one label per representation required");
  const Matrix f = normalized_rows(reprs);
  std::map<Label, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < f.rows(); ++i) groups[labels[i]].push_back(i);
  double total = 0.0;
  std::size_t pairs = 0;
  for (const auto& [label, rows] : groups) {
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        total += (f.row(rows[a]) - f.row(rows[b])).squaredNorm();
        ++pairs;
      }
  }
  if (pairs == 0) throw Error(Errc::NoPositivePairs, "no story has two articles");
  return total / static_cast<double>(pairs);
}

double uniformity(const Matrix& reprs) {
  if (reprs.rows() < 2) throw Error(Errc::TooFew, "uniformity needs at least two articles");
  const Matrix f = normalized_rows(reprs);
  const Matrix gram = f * f.transpose();
  double total = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = i + 1; j < f.rows(); ++j) {
      // ||x - y||^2 = 2 - 2 x.y for unit rows
      total += std::exp(-2.0 * std::max(0.0, 2.0 - 2.0 * gram(i, j)));
      ++pairs;
    }
  return std::log(total / static_cast<double>(pairs));
}

WindowScore score_window(std::size_t window_index, std::span<const Label> pred, std::span<const Label> truth,
                         const Matrix& reprs) {
  WindowScore s;
  s.window_index = window_index;
  s.n_articles = pred.size();
  s.n_pred_stories = std::set<Label>(pred.begin(), pred.end()).size();
  s.n_true_stories = std::set<Label>(truth.begin(), truth.end()).size();
  const BCubed b3 = b_cubed(pred, truth);
  s.b3_precision = b3.precision;
  s.b3_recall = b3.recall;
  s.b3_f1 = b3.f1;
  if (pred.size() >= 2) {
    s.ari = ari(pred, truth);
    s.ami = ami(pred, truth);
  } else {
    s.ari = 1.0;
    s.ami = 1.0;
  }
  if (reprs.rows() > 0) {
    if (reprs.rows() >= 2) s.uniformity = uniformity(reprs);
    try {
      s.alignment = alignment(reprs, truth);
    } catch (const Error& e) {
      if (e.code() != Errc::NoPositivePairs) throw;
    }
  }
  return s;
}

Summary prequential_average(std::span<const WindowScore> windows) {
  Summary s;
  s.n_windows = windows.size();
  if (windows.empty()) return s;
  double align = 0.0, uniform = 0.0;
  std::size_t n_align = 0, n_uniform = 0;
  for (const WindowScore& w : windows) {
    s.b3_precision += w.b3_precision;
    s.b3_recall += w.b3_recall;
    s.b3_f1 += w.b3_f1;
    s.ari += w.ari;
    s.ami += w.ami;
    if (w.alignment) align += *w.alignment, ++n_align;
    if (w.uniformity) uniform += *w.uniformity, ++n_uniform;
  }
  const double n = static_cast<double>(windows.size());
  s.b3_precision /= n;
  s.b3_recall /= n;
  s.b3_f1 /= n;
  s.ari /= n;
  s.ami /= n;
  if (n_align) s.alignment = align / static_cast<double>(n_align);
  if (n_uniform) s.uniformity = uniform / static_cast<double>(n_uniform);
  return s;
}

}  // namespace scstory::metrics
