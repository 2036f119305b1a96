#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ren/rng.hpp"
#include "ren/tensor.hpp"

namespace ren {

/// Row-major matrix of doubles; the common currency between data generators,
/// the trainer, and metrics.
struct DataMatrix {
  long n = 0, d = 0;
  std::vector<double> v;

  double at(long i, long j) const {
    return v[static_cast<std::size_t>(i * d + j)];
  }
};

Tensor to_tensor(const DataMatrix& m);
/// Gathers the given rows into a {rows.size(), d} tensor constant.
Tensor rows_to_tensor(const DataMatrix& m, const std::vector<long>& rows,
                      long first, long count);

struct ToySpec {
  std::string family = "one_moon";  // one_moon | circle
  long n = 0;
  double noise_frac = 0.0;
  double radius = 1.0;
  std::uint64_t seed = 0;
};

/// Points (r cos t, r sin t) with t uniform on [0, 2pi) for the circle and
/// [0, pi) for the one-moon, plus isotropic N(0, (noise_frac*r)^2) noise.
DataMatrix gen_toy(const ToySpec& spec);

struct ImageSet {
  DataMatrix images;  // values in [0, 1]
  long height = 0, width = 0;
  std::string split;
  std::vector<long> labels;  // empty when no label file was loaded
};

/// Reads big-endian IDX files (magic 0x00000803 images / 0x00000801 labels);
/// pixel bytes are scaled by 1/255. labels_path may be empty.
ImageSet load_idx(const std::string& images_path,
                  const std::string& labels_path = "");

void write_idx(const std::string& images_path,
               const std::vector<std::uint8_t>& pixels, long n, long h,
               long w);
void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels);

/// Seeded subsample without replacement, stratified by label when labels are
/// present (per-class counts differ by at most one from n / #classes). Row
/// order of the original set is preserved.
ImageSet subsample(const ImageSet& s, long n, std::uint64_t seed);

}  // namespace ren
