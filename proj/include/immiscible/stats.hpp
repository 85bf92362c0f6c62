#pragma once

#include <span>
#include <vector>

namespace immiscible {

// Median of the values (mean of the middle pair for even counts).
double median(std::vector<double> values);

// Average ranks, ties sharing the mean of their positions (1-based).
std::vector<double> ranks(std::span<const double> values);

// Spearman rank correlation: Pearson correlation of the tie-averaged ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace immiscible
