#pragma once

#include <span>
#include <vector>

namespace cover {

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation (Pearson correlation of average ranks). Returns
/// 0 when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace cover
