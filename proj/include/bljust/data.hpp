#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bljust/matrix.hpp"

namespace bljust {

enum class Generator { gaussian_clusters, teacher_net };
enum class OverlapMode { disjoint, labeled_subset_of_unlabeled };

std::string_view to_string(Generator g);
std::string_view to_string(OverlapMode m);
Generator parse_generator(std::string_view name);
OverlapMode parse_overlap(std::string_view name);

struct SyntheticTask {
  Generator generator = Generator::gaussian_clusters;
  std::size_t input_dim = 8;
  std::size_t num_classes = 2;
  std::size_t n_labeled = 500;
  std::size_t n_unlabeled = 500;
  double label_noise = 0.0;       // probability of flipping a labeled label
  OverlapMode overlap = OverlapMode::disjoint;
  std::uint64_t seed = 0;
  double separation = 4.0;        // centre distance from the origin, in units of noise
  double noise = 1.0;             // isotropic cluster standard deviation
  std::size_t informative_dims = 0;  // 0: centres span the whole input space

  void validate() const;
};

/// Labeled/unlabeled sizes for the named L/U presets: "100-100" -> 500/500,
/// "100-860" -> 500/4300, "300-2000" -> 750/5000.
void apply_preset(SyntheticTask& task, std::string_view name);

struct Dataset {
  Matrix labeled_x;
  std::vector<std::size_t> labeled_y;
  Matrix unlabeled_x;
  std::vector<std::size_t> unlabeled_truth;  // hidden labels, audit only
};

Dataset generate(const SyntheticTask& task);

// CSV: header x_0..x_{D-1} plus an optional y column, one row per sample.
std::string to_csv(const Matrix& x, const std::vector<std::size_t>* y);
std::string labels_to_csv(const std::vector<std::size_t>& y);

struct CsvTable {
  Matrix x;
  std::vector<std::size_t> y;  // empty when the file has no y column
  bool has_labels = false;
};

CsvTable parse_csv(std::string_view text, std::string_view source);
std::vector<std::size_t> parse_labels_csv(std::string_view text, std::string_view source);

/// Reads labeled.csv, unlabeled.csv and (if present) truth.csv from dir.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const Dataset& data);

}  // namespace bljust
