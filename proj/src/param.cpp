#include "bljust/param.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "bljust/errors.hpp"
#include "bljust/io.hpp"
#include "bljust/rng.hpp"

namespace bljust {

namespace {

constexpr char kMagic[8] = {'B', 'L', 'J', 'P', 'A', 'R', 'A', 'M'};

void put_u64(std::vector<unsigned char>& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(x >> (8 * i)));
}

std::uint64_t get_u64(std::span<const unsigned char> in, std::size_t at) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= std::uint64_t{in[at + i]} << (8 * i);
  return x;
}

void check_length(std::size_t got, const Partition& p) {
  if (got != p.total()) {
    throw InvalidArgument("gradient length " + std::to_string(got) +
                          " does not match partition total " +
                          std::to_string(p.total()));
  }
}

}  // namespace

std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::theta: return "theta";
    case Segment::phi: return "phi";
    case Segment::eta: return "eta";
    case Segment::all: return "all";
  }
  return "?";
}

std::size_t Partition::offset(Segment s) const {
  switch (s) {
    case Segment::theta:
    case Segment::all: return 0;
    case Segment::phi: return d_theta;
    case Segment::eta: return d_theta + d_phi;
  }
  return 0;
}

std::size_t Partition::size(Segment s) const {
  switch (s) {
    case Segment::theta: return d_theta;
    case Segment::phi: return d_phi;
    case Segment::eta: return d_eta;
    case Segment::all: return total();
  }
  return 0;
}

void Partition::validate() const {
  if (total() == 0) throw InvalidArgument("partition has zero total size");
}

std::uint64_t ParamVector::next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

ParamVector::ParamVector(Partition partition, std::vector<double> values)
    : partition_(partition), values_(std::move(values)), version_(next_version()) {
  check_length(values_.size(), partition_);
}

ParamVector::ParamVector(Partition partition)
    : ParamVector(partition, std::vector<double>(partition.total(), 0.0)) {}

std::span<const double> ParamVector::segment(Segment s) const {
  return std::span<const double>(values_).subspan(partition_.offset(s),
                                                  partition_.size(s));
}

std::span<double> ParamVector::mutable_values() {
  version_ = next_version();
  return values_;
}

std::span<double> ParamVector::mutable_segment(Segment s) {
  return mutable_values().subspan(partition_.offset(s), partition_.size(s));
}

ParamVector init_params(const Partition& partition, const InitScheme& scheme,
                        std::uint64_t seed) {
  partition.validate();
  ParamVector v(partition);
  reinit_segment(v, Segment::all, scheme, seed);
  return v;
}

void reinit_segment(ParamVector& v, Segment segment, const InitScheme& scheme,
                    std::uint64_t seed) {
  if (scheme.scale < 0.0 || !std::isfinite(scheme.scale)) {
    throw InvalidArgument("init scale must be finite and non-negative");
  }
  Rng rng(seed);
  for (double& x : v.mutable_segment(segment)) {
    switch (scheme.kind) {
      case InitScheme::Kind::uniform: x = rng.uniform(-scheme.scale, scheme.scale); break;
      case InitScheme::Kind::gaussian: x = scheme.scale * rng.gaussian(); break;
      case InitScheme::Kind::zeros: x = 0.0; break;
    }
  }
}

void axpy_segment_inplace(ParamVector& v, Segment segment, double scale,
                          std::span<const double> g) {
  check_length(g.size(), v.partition());
  const std::size_t off = v.partition().offset(segment);
  auto seg = v.mutable_segment(segment);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    double updated = seg[i] - scale * g[off + i];
    if (!std::isfinite(updated)) {
      throw NumericError("non-finite parameter at index " +
                         std::to_string(off + i) + " after update");
    }
    seg[i] = updated;
  }
}

ParamVector axpy_segment(const ParamVector& v, Segment segment, double scale,
                         std::span<const double> g) {
  ParamVector out = v;
  axpy_segment_inplace(out, segment, scale, g);
  return out;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

GradNorms grad_norms(std::span<const double> g, const Partition& partition) {
  check_length(g.size(), partition);
  auto sub = [&](Segment s) {
    return l2_norm(g.subspan(partition.offset(s), partition.size(s)));
  };
  GradNorms n;
  n.theta = sub(Segment::theta);
  n.phi = sub(Segment::phi);
  n.eta = sub(Segment::eta);
  n.all = l2_norm(g);
  return n;
}

std::vector<unsigned char> encode_snapshot(const ParamVector& v) {
  std::vector<unsigned char> out;
  out.reserve(8 + 24 + 8 * v.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  const auto& p = v.partition();
  put_u64(out, p.d_theta);
  put_u64(out, p.d_phi);
  put_u64(out, p.d_eta);
  for (double x : v.values()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

ParamVector decode_snapshot(std::span<const unsigned char> bytes) {
  if (bytes.size() < 32 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw InvalidArgument("not a BLJPARAM snapshot");
  }
  Partition p{get_u64(bytes, 8), get_u64(bytes, 16), get_u64(bytes, 24)};
  if (bytes.size() != 32 + 8 * p.total()) {
    throw InvalidArgument("BLJPARAM snapshot has wrong length");
  }
  std::vector<double> values(p.total());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<double>(get_u64(bytes, 32 + 8 * i));
  }
  return ParamVector(p, std::move(values));
}

void write_snapshot(const std::filesystem::path& path, const ParamVector& v) {
  auto bytes = encode_snapshot(v);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                           bytes.size()));
}

ParamVector read_snapshot(const std::filesystem::path& path) {
  std::string raw = read_file(path);
  return decode_snapshot(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(raw.data()), raw.size()));
}

}  // namespace bljust
