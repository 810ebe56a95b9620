#pragma once

// Text format for SampleBatch:
//   #simplex-sphere v1 sampler=<id> n=<n> b=<b> seed=<seed> eps=<eps|->
//   x_1 x_2 ... x_n          (one point per line, 17 significant digits)

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ssphere/samplers.hpp"

namespace ssphere {

/// Shortest-safe decimal form: 17 significant digits, round-trips exactly.
std::string format_double(double v);

void write_batch(std::ostream& os, const SampleBatch& batch);
void write_batch(const std::filesystem::path& path, const SampleBatch& batch);

/// Parses a batch and, when `verify` is set, re-checks every point's
/// membership (on_K, or in_shell for shell batches). Proposal and accept
/// counts are not part of the format; both are set to the point count.
SampleBatch read_batch(std::istream& is, bool verify = true);
SampleBatch read_batch(const std::filesystem::path& path, bool verify = true);

}  // namespace ssphere
