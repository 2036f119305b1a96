#include "ren/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace ren {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

[[noreturn]] void fail_idx(const std::string& path, const std::string& what) {
  throw std::runtime_error("idx: " + path + ": " + what);
}

std::uint32_t read_be32(std::ifstream& in, const std::string& path,
                        long offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4)
    fail_idx(path, "truncated at byte " + std::to_string(offset) +
                       " (needed 4 more)");
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) |
         static_cast<std::uint32_t>(b[3]);
}

std::string hex32(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4)
    s += digits[(v >> shift) & 0xf];
  return s;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// Partial Fisher-Yates: after the call the first k entries are a uniform
// draw without replacement.
void draw_first_k(std::vector<long>& idx, long k, RngStream& rng) {
  const long n = static_cast<long>(idx.size());
  for (long i = 0; i < k; ++i) {
    const long j =
        i + static_cast<long>(rng.uniform() * static_cast<double>(n - i));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
}

}  // namespace

Tensor to_tensor(const DataMatrix& m) {
  return Tensor::constant({m.n, m.d}, m.v);
}

Tensor rows_to_tensor(const DataMatrix& m, const std::vector<long>& rows,
                      long first, long count) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(count * m.d));
  for (long i = first; i < first + count; ++i) {
    const long r = rows[static_cast<std::size_t>(i)];
    flat.insert(flat.end(), m.v.begin() + r * m.d,
                m.v.begin() + (r + 1) * m.d);
  }
  return Tensor::constant({count, m.d}, std::move(flat));
}

DataMatrix gen_toy(const ToySpec& spec) {
  if (spec.family != "one_moon" && spec.family != "circle")
    throw std::invalid_argument("gen_toy: unknown family " + spec.family);
  if (spec.n <= 0)
    throw std::invalid_argument("gen_toy: sample count must be positive");
  if (spec.noise_frac < 0.0)
    throw std::invalid_argument("gen_toy: noise_frac must be >= 0");
  if (spec.radius <= 0.0)
    throw std::invalid_argument("gen_toy: radius must be positive");

  const double span = spec.family == "circle" ? 2.0 * M_PI : M_PI;
  const double sigma = spec.noise_frac * spec.radius;
  RngStream rng(spec.seed);
  DataMatrix out;
  out.n = spec.n;
  out.d = 2;
  out.v.resize(static_cast<std::size_t>(spec.n) * 2);
  for (long i = 0; i < spec.n; ++i) {
    const double t = span * rng.uniform();
    const double ex = rng.normal(), ey = rng.normal();
    out.v[static_cast<std::size_t>(2 * i)] =
        spec.radius * std::cos(t) + sigma * ex;
    out.v[static_cast<std::size_t>(2 * i + 1)] =
        spec.radius * std::sin(t) + sigma * ey;
  }
  return out;
}

ImageSet load_idx(const std::string& images_path,
                  const std::string& labels_path) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) fail_idx(images_path, "cannot open file");
  const std::uint32_t magic = read_be32(in, images_path, 0);
  if (magic != kImagesMagic)
    fail_idx(images_path, "expected magic " + hex32(kImagesMagic) +
                              ", found " + hex32(magic) + " at byte 0");
  const auto n = static_cast<long>(read_be32(in, images_path, 4));
  const auto h = static_cast<long>(read_be32(in, images_path, 8));
  const auto w = static_cast<long>(read_be32(in, images_path, 12));
  const long count = n * h * w;
  std::vector<unsigned char> pixels(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(pixels.data()), count);
  if (in.gcount() != count)
    fail_idx(images_path,
             "truncated at byte " + std::to_string(16 + in.gcount()) +
                 " (needed " + std::to_string(count - in.gcount()) + " more)");

  ImageSet set;
  set.height = h;
  set.width = w;
  set.images.n = n;
  set.images.d = h * w;
  set.images.v.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < pixels.size(); ++i)
    set.images.v[i] = static_cast<double>(pixels[i]) / 255.0;

  if (!labels_path.empty()) {
    std::ifstream lin(labels_path, std::ios::binary);
    if (!lin) fail_idx(labels_path, "cannot open file");
    const std::uint32_t lmagic = read_be32(lin, labels_path, 0);
    if (lmagic != kLabelsMagic)
      fail_idx(labels_path, "expected magic " + hex32(kLabelsMagic) +
                                ", found " + hex32(lmagic) + " at byte 0");
    const auto ln = static_cast<long>(read_be32(lin, labels_path, 4));
    if (ln != n)
      fail_idx(labels_path, "label count " + std::to_string(ln) +
                                " does not match image count " +
                                std::to_string(n));
    std::vector<unsigned char> raw(static_cast<std::size_t>(ln));
    lin.read(reinterpret_cast<char*>(raw.data()), ln);
    if (lin.gcount() != ln)
      fail_idx(labels_path,
               "truncated at byte " + std::to_string(8 + lin.gcount()) +
                   " (needed " + std::to_string(ln - lin.gcount()) + " more)");
    set.labels.assign(raw.begin(), raw.end());
  }
  return set;
}

void write_idx(const std::string& images_path,
               const std::vector<std::uint8_t>& pixels, long n, long h,
               long w) {
  if (static_cast<long>(pixels.size()) != n * h * w)
    throw std::invalid_argument("write_idx: pixel count " +
                                std::to_string(pixels.size()) +
                                " does not match " + std::to_string(n * h * w));
  std::ofstream out(images_path, std::ios::binary | std::ios::trunc);
  if (!out) fail_idx(images_path, "cannot open file for writing");
  write_be32(out, kImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(n));
  write_be32(out, static_cast<std::uint32_t>(h));
  write_be32(out, static_cast<std::uint32_t>(w));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<long>(pixels.size()));
  if (!out) fail_idx(images_path, "write failed");
}

void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_idx(path, "cannot open file for writing");
  write_be32(out, kLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<long>(labels.size()));
  if (!out) fail_idx(path, "write failed");
}

ImageSet subsample(const ImageSet& s, long n, std::uint64_t seed) {
  if (n > s.images.n)
    throw std::invalid_argument("subsample: requested " + std::to_string(n) +
                                " of " + std::to_string(s.images.n) +
                                " rows");
  if (n < 0) throw std::invalid_argument("subsample: negative sample count");

  RngStream root(seed);
  std::vector<long> chosen;
  if (s.labels.empty()) {
    std::vector<long> idx(static_cast<std::size_t>(s.images.n));
    for (long i = 0; i < s.images.n; ++i) idx[static_cast<std::size_t>(i)] = i;
    RngStream rng = root.child("all");
    draw_first_k(idx, n, rng);
    chosen.assign(idx.begin(), idx.begin() + n);
  } else {
    std::map<long, std::vector<long>> by_class;
    for (long i = 0; i < s.images.n; ++i)
      by_class[s.labels[static_cast<std::size_t>(i)]].push_back(i);
    const long c = static_cast<long>(by_class.size());
    // Equal split, capped at class size; any deficit cycles through classes
    // that still have spare rows, so n = N always returns the full set.
    std::vector<std::pair<long, std::vector<long>*>> classes;
    for (auto& [label, members] : by_class) classes.emplace_back(label, &members);
    std::vector<long> want(classes.size());
    const long base = n / c, rem = n % c;
    long deficit = 0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const long size = static_cast<long>(classes[k].second->size());
      want[k] = std::min(size, base + (static_cast<long>(k) < rem ? 1 : 0));
      deficit += base + (static_cast<long>(k) < rem ? 1 : 0) - want[k];
    }
    for (std::size_t k = 0; deficit > 0; k = (k + 1) % classes.size()) {
      if (want[k] < static_cast<long>(classes[k].second->size())) {
        ++want[k];
        --deficit;
      }
    }
    for (std::size_t k = 0; k < classes.size(); ++k) {
      auto& members = *classes[k].second;
      RngStream rng = root.child("class").child(
          static_cast<std::uint64_t>(classes[k].first));
      draw_first_k(members, want[k], rng);
      chosen.insert(chosen.end(), members.begin(), members.begin() + want[k]);
    }
  }
  std::sort(chosen.begin(), chosen.end());

  ImageSet out;
  out.height = s.height;
  out.width = s.width;
  out.split = s.split;
  out.images.n = static_cast<long>(chosen.size());
  out.images.d = s.images.d;
  out.images.v.reserve(chosen.size() * static_cast<std::size_t>(s.images.d));
  for (long r : chosen) {
    out.images.v.insert(out.images.v.end(), s.images.v.begin() + r * s.images.d,
                        s.images.v.begin() + (r + 1) * s.images.d);
    if (!s.labels.empty())
      out.labels.push_back(s.labels[static_cast<std::size_t>(r)]);
  }
  return out;
}

}  // namespace ren
