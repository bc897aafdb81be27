#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace bljust {

enum class Segment { theta, phi, eta, all };

std::string_view to_string(Segment s);

/// Layout of a flat parameter vector: [theta | phi | eta].
/// theta is the shared backbone, phi the supervised head, eta the
/// unsupervised head.
struct Partition {
  std::size_t d_theta = 0;
  std::size_t d_phi = 0;
  std::size_t d_eta = 0;

  std::size_t total() const { return d_theta + d_phi + d_eta; }
  std::size_t offset(Segment s) const;
  std::size_t size(Segment s) const;

  // Throws InvalidArgument when total() == 0.
  void validate() const;

  bool operator==(const Partition&) const = default;
};

/// Flat float64 parameters with a partition. Every mutable access stamps a
/// fresh version tag, which forward caches use to detect staleness.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(Partition partition, std::vector<double> values);
  explicit ParamVector(Partition partition);

  const Partition& partition() const { return partition_; }
  std::size_t size() const { return values_.size(); }
  std::uint64_t version() const { return version_; }

  std::span<const double> values() const { return values_; }
  std::span<const double> segment(Segment s) const;
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> mutable_values();
  std::span<double> mutable_segment(Segment s);

  bool operator==(const ParamVector& o) const {
    return partition_ == o.partition_ && values_ == o.values_;
  }

 private:
  static std::uint64_t next_version();

  Partition partition_;
  std::vector<double> values_;
  std::uint64_t version_ = 0;
};

struct InitScheme {
  enum class Kind { uniform, gaussian, zeros };
  Kind kind = Kind::uniform;
  // Half-width for uniform, standard deviation for gaussian.
  double scale = 0.1;

  static InitScheme uniform(double a) { return {Kind::uniform, a}; }
  static InitScheme gaussian(double sigma) { return {Kind::gaussian, sigma}; }
  static InitScheme zeros() { return {Kind::zeros, 0.0}; }
};

ParamVector init_params(const Partition& partition, const InitScheme& scheme,
                        std::uint64_t seed);

/// Re-draws one segment in place with the given scheme.
void reinit_segment(ParamVector& v, Segment segment, const InitScheme& scheme,
                    std::uint64_t seed);

/// v - scale * g on the selected segment; the rest is untouched.
/// Throws InvalidArgument on length mismatch and NumericError when a
/// result entry is not finite.
ParamVector axpy_segment(const ParamVector& v, Segment segment, double scale,
                         std::span<const double> g);

/// In-place form of axpy_segment.
void axpy_segment_inplace(ParamVector& v, Segment segment, double scale,
                          std::span<const double> g);

struct GradNorms {
  double theta = 0.0;
  double phi = 0.0;
  double eta = 0.0;
  double all = 0.0;
};

GradNorms grad_norms(std::span<const double> g, const Partition& partition);

double l2_norm(std::span<const double> v);

// BLJPARAM snapshot: magic, three u64 LE segment counts, f64 LE values.
void write_snapshot(const std::filesystem::path& path, const ParamVector& v);
ParamVector read_snapshot(const std::filesystem::path& path);
std::vector<unsigned char> encode_snapshot(const ParamVector& v);
ParamVector decode_snapshot(std::span<const unsigned char> bytes);

}  // namespace bljust
