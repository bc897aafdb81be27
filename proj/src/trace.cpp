#include "bljust/trace.hpp"

#include <array>

#include "bljust/errors.hpp"
#include "bljust/io.hpp"

namespace bljust {

namespace {

constexpr std::string_view kHeader =
    "epoch,gamma,f,g,p_hat,gnorm_f,gnorm_g,gnorm_F,phase";

constexpr std::array<std::string_view, 7> kSeries = {
    "f", "g", "gamma", "p_hat", "gnorm_f", "gnorm_g", "gnorm_F"};

}  // namespace

std::string_view to_string(StepSource s) {
  switch (s) {
    case StepSource::unsup: return "unsup";
    case StepSource::sup: return "sup";
    case StepSource::joint: return "joint";
  }
  return "?";
}

std::string trace_to_csv(const RunTrace& trace) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& e : trace.epochs) {
    out += std::to_string(e.epoch);
    for (double v : {e.gamma, e.f, e.g, e.p_hat, e.gnorm_f, e.gnorm_g, e.gnorm_F}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += e.phase;
    out += '\n';
  }
  return out;
}

std::vector<EpochRecord> trace_from_csv(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty() || trim(lines[0]) != kHeader) {
    throw InvalidArgument("trace CSV: missing or unexpected header");
  }
  std::vector<EpochRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split(trim(lines[i]), ',');
    if (f.size() != 9) {
      throw InvalidArgument("trace CSV: row " + std::to_string(i) + " has " +
                            std::to_string(f.size()) + " fields");
    }
    EpochRecord e;
    try {
      e.epoch = std::stoi(f[0]);
    } catch (const std::exception&) {
      throw InvalidArgument("trace CSV: bad epoch on row " + std::to_string(i));
    }
    e.gamma = parse_double(f[1]);
    e.f = parse_double(f[2]);
    e.g = parse_double(f[3]);
    e.p_hat = parse_double(f[4]);
    e.gnorm_f = parse_double(f[5]);
    e.gnorm_g = parse_double(f[6]);
    e.gnorm_F = parse_double(f[7]);
    e.phase = f[8];
    out.push_back(std::move(e));
  }
  return out;
}

std::string trace_to_tidy_csv(const std::vector<EpochRecord>& epochs) {
  std::string out = "step,series,value\n";
  long step = 0;
  for (const auto& e : epochs) {
    ++step;
    const std::array<double, 7> values = {e.f, e.g, e.gamma, e.p_hat,
                                          e.gnorm_f, e.gnorm_g, e.gnorm_F};
    for (std::size_t s = 0; s < kSeries.size(); ++s) {
      out += std::to_string(step);
      out += ',';
      out += kSeries[s];
      out += ',';
      out += format_double(values[s]);
      out += '\n';
    }
  }
  return out;
}

}  // namespace bljust
