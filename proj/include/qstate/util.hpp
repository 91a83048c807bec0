#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qstate {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Deterministic sub-seed for component `salt` of a run seeded by `master`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view salt);

/// Strict full-string numeric parse; false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

double mean(std::span<const double> values);
double median(std::vector<double> values);
/// Population standard deviation.
double stddev(std::span<const double> values);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace qstate
