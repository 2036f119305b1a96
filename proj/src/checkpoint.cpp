#include "ren/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ren {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'N', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ull << 30)) throw std::runtime_error("checkpoint: corrupt length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

void put_adam(std::ostream& os, const Adam& opt) {
  put_u64(os, static_cast<std::uint64_t>(opt.step_count()));
  put_u64(os, opt.m().size());
  for (std::size_t i = 0; i < opt.m().size(); ++i) {
    put_u64(os, opt.m()[i].size());
    for (double v : opt.m()[i]) put_f64(os, v);
    for (double v : opt.v()[i]) put_f64(os, v);
  }
}

void get_adam(std::istream& is, Adam& opt) {
  const long t = static_cast<long>(get_u64(is));
  const std::uint64_t n = get_u64(is);
  std::vector<std::vector<double>> m(n), v(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t len = get_u64(is);
    m[i].resize(len);
    v[i].resize(len);
    for (auto& x : m[i]) x = get_f64(is);
    for (auto& x : v[i]) x = get_f64(is);
  }
  opt.restore(t, std::move(m), std::move(v));
}

}  // namespace

void save_checkpoint(const std::string& path, const RenModel& model,
                     const std::string& config_echo, const Adam& vae_opt,
                     const Adam& ren_opt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, 8);
  put_string(os, config_echo);
  const NamedParams params = model.params_all();
  put_u64(os, params.size());
  for (const auto& [name, t] : params) {
    put_string(os, name);
    put_u64(os, static_cast<std::uint64_t>(t.rank()));
    for (long d : t.shape()) put_u64(os, static_cast<std::uint64_t>(d));
    for (double v : t.data()) put_f64(os, v);
  }
  put_u64(os, model.current_alpha.size());
  for (double v : model.current_alpha) put_f64(os, v);
  put_adam(os, vae_opt);
  put_adam(os, ren_opt);
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::string read_checkpoint_echo(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  return get_string(is);
}

std::string load_checkpoint(const std::string& path, RenModel& model,
                            Adam& vae_opt, Adam& ren_opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::string config_echo = get_string(is);
  const NamedParams params = model.params_all();
  const std::uint64_t n = get_u64(is);
  if (n != params.size())
    throw std::runtime_error(
        "checkpoint: parameter count " + std::to_string(n) +
        " does not match model (" + std::to_string(params.size()) + ")");
  for (const auto& [name, t] : params) {
    const std::string stored = get_string(is);
    if (stored != name)
      throw std::runtime_error("checkpoint: parameter name mismatch: stored " +
                               stored + ", model expects " + name);
    const std::uint64_t rank = get_u64(is);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<long>(get_u64(is));
    Tensor tt = t;
    if (shape != tt.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name +
                               ": stored " + shape_str(shape) + ", model " +
                               shape_str(tt.shape()));
    for (auto& v : tt.data()) v = get_f64(is);
  }
  const std::uint64_t la = get_u64(is);
  if (la != model.current_alpha.size())
    throw std::runtime_error("checkpoint: alpha length mismatch");
  for (auto& v : model.current_alpha) v = get_f64(is);
  get_adam(is, vae_opt);
  get_adam(is, ren_opt);
  return config_echo;
}

}  // namespace ren
