#include "bljust/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "bljust/errors.hpp"
#include "bljust/io.hpp"
#include "bljust/rng.hpp"

namespace bljust {

namespace {

std::vector<double> unit_vector(Rng& rng, std::size_t dim, std::size_t active) {
  std::vector<double> v(dim, 0.0);
  double norm = 0.0;
  while (norm == 0.0) {
    for (std::size_t i = 0; i < active; ++i) v[i] = rng.gaussian();
    norm = 0.0;
    for (double x : v) norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

struct Sampler {
  const SyntheticTask& task;
  Rng rng;
  std::vector<std::vector<double>> centres;
  // teacher net: input -> hidden (tanh) -> classes
  std::vector<double> w1, w2;
  std::size_t teacher_hidden = 8;

  explicit Sampler(const SyntheticTask& t) : task(t), rng(derive_seed(t.seed, "data")) {
    const std::size_t d = task.input_dim;
    if (task.generator == Generator::gaussian_clusters) {
      const std::size_t active =
          task.informative_dims == 0 ? d : std::min(task.informative_dims, d);
      if (task.num_classes == 2) {
        auto u = unit_vector(rng, d, active);
        std::vector<double> c0(d), c1(d);
        for (std::size_t i = 0; i < d; ++i) {
          c0[i] = task.separation * task.noise * u[i];
          c1[i] = -c0[i];
        }
        centres = {c0, c1};
      } else {
        const double r = task.separation * task.noise;
        for (std::size_t k = 0; k < task.num_classes; ++k) {
          auto u = unit_vector(rng, d, active);
          for (double& x : u) x *= r;
          centres.push_back(std::move(u));
        }
      }
    } else {
      w1.resize(teacher_hidden * (d + 1));
      w2.resize(task.num_classes * (teacher_hidden + 1));
      for (double& w : w1) w = rng.gaussian() / std::sqrt(static_cast<double>(d));
      for (double& w : w2) {
        w = 2.0 * rng.gaussian() / std::sqrt(static_cast<double>(teacher_hidden));
      }
    }
  }

  std::size_t teacher_label(std::span<const double> x) const {
    const std::size_t d = task.input_dim;
    std::vector<double> h(teacher_hidden);
    for (std::size_t j = 0; j < teacher_hidden; ++j) {
      double acc = w1[j * (d + 1) + d];
      for (std::size_t k = 0; k < d; ++k) acc += w1[j * (d + 1) + k] * x[k];
      h[j] = std::tanh(acc);
    }
    std::size_t best = 0;
    double best_v = -INFINITY;
    for (std::size_t c = 0; c < task.num_classes; ++c) {
      double acc = w2[c * (teacher_hidden + 1) + teacher_hidden];
      for (std::size_t j = 0; j < teacher_hidden; ++j) {
        acc += w2[c * (teacher_hidden + 1) + j] * h[j];
      }
      if (acc > best_v) {
        best_v = acc;
        best = c;
      }
    }
    return best;
  }

  void draw(std::size_t n, Matrix& x, std::vector<std::size_t>& y) {
    x = Matrix(n, task.input_dim);
    y.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = x.row(i);
      if (task.generator == Generator::gaussian_clusters) {
        y[i] = rng.below(task.num_classes);
        for (std::size_t k = 0; k < row.size(); ++k) {
          row[k] = centres[y[i]][k] + task.noise * rng.gaussian();
        }
      } else {
        for (double& v : row) v = rng.gaussian();
        y[i] = teacher_label(row);
      }
    }
  }

  std::vector<std::size_t> corrupt(std::vector<std::size_t> y) {
    for (auto& label : y) {
      if (task.label_noise > 0.0 && rng.bernoulli(task.label_noise)) {
        auto shift = 1 + rng.below(task.num_classes - 1);
        label = (label + shift) % task.num_classes;
      }
    }
    return y;
  }
};

std::string header(std::size_t d, bool with_y) {
  std::string h;
  for (std::size_t k = 0; k < d; ++k) {
    if (k) h += ',';
    h += "x_" + std::to_string(k);
  }
  if (with_y) h += d ? ",y" : "y";
  return h + '\n';
}

}  // namespace

std::string_view to_string(Generator g) {
  return g == Generator::gaussian_clusters ? "gaussian_clusters" : "teacher_net";
}

std::string_view to_string(OverlapMode m) {
  return m == OverlapMode::disjoint ? "disjoint" : "labeled_subset_of_unlabeled";
}

Generator parse_generator(std::string_view name) {
  if (name == "gaussian_clusters") return Generator::gaussian_clusters;
  if (name == "teacher_net") return Generator::teacher_net;
  throw InvalidArgument("unknown generator '" + std::string(name) + "'");
}

OverlapMode parse_overlap(std::string_view name) {
  if (name == "disjoint") return OverlapMode::disjoint;
  if (name == "labeled_subset_of_unlabeled") return OverlapMode::labeled_subset_of_unlabeled;
  throw InvalidArgument("unknown overlap mode '" + std::string(name) + "'");
}

void SyntheticTask::validate() const {
  if (input_dim < 1) throw InvalidArgument("input_dim must be >= 1");
  if (num_classes < 2) throw InvalidArgument("num_classes must be >= 2");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) {
    throw InvalidArgument("label_noise must lie in [0, 1]");
  }
  if (!(noise > 0.0)) throw InvalidArgument("noise must be > 0");
  if (overlap == OverlapMode::labeled_subset_of_unlabeled && n_labeled > n_unlabeled) {
    throw InvalidArgument("labeled_subset_of_unlabeled needs n_labeled <= n_unlabeled");
  }
}

void apply_preset(SyntheticTask& task, std::string_view name) {
  if (name == "100-100") {
    task.n_labeled = 500;
    task.n_unlabeled = 500;
  } else if (name == "100-860") {
    task.n_labeled = 500;
    task.n_unlabeled = 4300;
  } else if (name == "300-2000") {
    task.n_labeled = 750;
    task.n_unlabeled = 5000;
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) + "'");
  }
}

Dataset generate(const SyntheticTask& task) {
  task.validate();
  Sampler s(task);
  Dataset out;
  if (task.overlap == OverlapMode::disjoint) {
    std::vector<std::size_t> clean;
    s.draw(task.n_labeled, out.labeled_x, clean);
    s.draw(task.n_unlabeled, out.unlabeled_x, out.unlabeled_truth);
    out.labeled_y = s.corrupt(std::move(clean));
  } else {
    s.draw(task.n_unlabeled, out.unlabeled_x, out.unlabeled_truth);
    std::vector<std::size_t> idx(task.n_labeled);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    out.labeled_x = gather_rows(out.unlabeled_x, idx);
    out.labeled_y = s.corrupt(std::vector<std::size_t>(
        out.unlabeled_truth.begin(), out.unlabeled_truth.begin() + task.n_labeled));
  }
  return out;
}

std::string to_csv(const Matrix& x, const std::vector<std::size_t>* y) {
  std::string out = header(x.cols, y != nullptr);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = x.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += format_double(row[k]);
    }
    if (y) {
      if (x.cols) out += ',';
      out += std::to_string((*y)[i]);
    }
    out += '\n';
  }
  return out;
}

std::string labels_to_csv(const std::vector<std::size_t>& y) {
  std::string out = "y\n";
  for (auto v : y) out += std::to_string(v) + '\n';
  return out;
}

static std::size_t parse_label(std::string_view field, std::string_view source, std::size_t row) {
  std::size_t out = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw InvalidArgument(std::string(source) + ": row " + std::to_string(row) +
                          " has a bad label '" + std::string(field) + "'");
  }
  return out;
}

CsvTable parse_csv(std::string_view text, std::string_view source) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw InvalidArgument(std::string(source) + ": missing header");
  auto cols = split(trim(lines[0]), ',');
  CsvTable t;
  t.has_labels = !cols.empty() && cols.back() == "y";
  const std::size_t d = cols.size() - (t.has_labels ? 1 : 0);
  for (std::size_t k = 0; k < d; ++k) {
    if (cols[k] != "x_" + std::to_string(k)) {
      throw InvalidArgument(std::string(source) + ": unexpected column '" + cols[k] + "'");
    }
  }
  std::vector<double> values;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split(trim(lines[i]), ',');
    if (fields.size() != cols.size()) {
      throw InvalidArgument(std::string(source) + ": row " + std::to_string(i) +
                            " has " + std::to_string(fields.size()) + " fields");
    }
    for (std::size_t k = 0; k < d; ++k) values.push_back(parse_double(fields[k]));
    if (t.has_labels) t.y.push_back(parse_label(fields.back(), source, i));
  }
  t.x = Matrix(lines.size() - 1, d, std::move(values));
  return t;
}

std::vector<std::size_t> parse_labels_csv(std::string_view text, std::string_view source) {
  auto t = parse_csv(text, source);
  if (!t.has_labels) throw InvalidArgument(std::string(source) + ": no y column");
  return t.y;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  auto lab = parse_csv(read_file(dir / "labeled.csv"), "labeled.csv");
  if (!lab.has_labels && lab.x.rows > 0) {
    throw InvalidArgument("labeled.csv: no y column");
  }
  d.labeled_x = std::move(lab.x);
  d.labeled_y = std::move(lab.y);
  auto unl = parse_csv(read_file(dir / "unlabeled.csv"), "unlabeled.csv");
  d.unlabeled_x = std::move(unl.x);
  if (std::filesystem::exists(dir / "truth.csv")) {
    d.unlabeled_truth = parse_labels_csv(read_file(dir / "truth.csv"), "truth.csv");
  }
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "labeled.csv", to_csv(data.labeled_x, &data.labeled_y));
  write_file_atomic(dir / "unlabeled.csv", to_csv(data.unlabeled_x, nullptr));
  write_file_atomic(dir / "truth.csv", labels_to_csv(data.unlabeled_truth));
}

}  // namespace bljust
