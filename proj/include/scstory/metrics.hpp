#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scstory/linalg.hpp"

namespace scstory::metrics {

using Label = std::int64_t;

/// Maps arbitrary string labels to dense integer ids.
class LabelEncoder {
 public:
  Label operator()(const std::string& name);

 private:
  std::unordered_map<std::string, Label> ids_;
};

struct BCubed {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

BCubed b_cubed(std::span<const Label> pred, std::span<const Label> truth);

/// Adjusted Rand index (pair-counting form). Two trivially identical
/// partitions (one cluster each, or all singletons) score 1.
double ari(std::span<const Label> pred, std::span<const Label> truth);

/// Adjusted mutual information, arithmetic-mean normalisation, expected MI
/// under the permutation (hypergeometric) model; natural logarithms.
double ami(std::span<const Label> pred, std::span<const Label> truth);

double mutual_information(std::span<const Label> pred, std::span<const Label> truth);
double entropy(std::span<const Label> labels);
double expected_mutual_information(std::span<const Label> pred, std::span<const Label> truth);

/// Mean squared distance between L2-normalised representations over all
/// unordered same-label pairs. `reprs` holds one representation per row.
double alignment(const Matrix& reprs, std::span<const Label> labels);

/// log of the mean of exp(-2 ||f(x) - f(y)||^2) over all unordered distinct
/// pairs of L2-normalised rows.
double uniformity(const Matrix& reprs);

struct WindowScore {
  std::size_t window_index = 0;
  double b3_precision = 0.0;
  double b3_recall = 0.0;
  double b3_f1 = 0.0;
  double ari = 0.0;
  double ami = 0.0;
  std::optional<double> alignment;   // absent without a same-story pair
  std::optional<double> uniformity;  // absent with fewer than two articles
  std::size_t n_articles = 0;
  std::size_t n_pred_stories = 0;
  std::size_t n_true_stories = 0;
};

/// Clustering metrics for one window; `reprs` may be empty to skip the
/// embedding diagnostics.
WindowScore score_window(std::size_t window_index, std::span<const Label> pred, std::span<const Label> truth,
                         const Matrix& reprs);

struct Summary {
  std::size_t n_windows = 0;
  double b3_precision = 0.0;
  double b3_recall = 0.0;
  double b3_f1 = 0.0;
  double ari = 0.0;
  double ami = 0.0;
  std::optional<double> alignment;
  std::optional<double> uniformity;
};

/// Unweighted mean of each metric over windows (optional metrics average
/// over the windows that have them).
Summary prequential_average(std::span<const WindowScore> windows);

}  // namespace scstory::metrics
