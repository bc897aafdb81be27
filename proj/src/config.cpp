#include "bljust/config.hpp"

#include <charconv>
#include <map>
#include <set>

#include "bljust/errors.hpp"
#include "bljust/io.hpp"

namespace bljust {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model", {"family", "hidden", "activation", "init", "init_scale", "a", "b", "c", "d"}},
      {"data",
       {"preset", "generator", "input_dim", "num_classes", "n_labeled", "n_unlabeled",
        "label_noise", "separation", "noise", "informative_dims", "overlap", "seed",
        "mask_prob", "batch_size", "dir", "eval_mask_seed"}},
      {"strategy",
       {"kind", "rho", "alpha", "tau", "epochs", "explore_steps", "joint_steps",
        "finetune_steps", "seed", "lr_decay", "eta_penalty", "trace_stride",
        "record_params", "value_budget", "pretrain_epochs", "finetune_epochs",
        "just_gamma", "just_ramped", "pretrain_init", "ao_sup_steps", "ao_unsup_steps",
        "pl_rounds", "pl_continue"}},
      {"schedule", {"kind", "gamma_max", "constant_value", "ramp_to_max"}},
      {"verify", {"suite"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(std::map<std::string, Section> sections) : s_(std::move(sections)) {}

  const Entry* find(const std::string& sec, const std::string& key) const {
    auto it = s_.find(sec);
    if (it == s_.end()) return nullptr;
    auto kt = it->second.find(key);
    return kt == it->second.end() ? nullptr : &kt->second;
  }

  template <typename Fn>
  void with(const std::string& sec, const std::string& key, Fn fn) const {
    if (const Entry* e = find(sec, key)) {
      try {
        fn(e->value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& ex) {
        throw ConfigError("[" + sec + "] " + key + ": " + ex.what(), e->line);
      }
    }
  }

  void real(const std::string& sec, const std::string& key, double& out) const {
    with(sec, key, [&](const std::string& v) { out = parse_double(v); });
  }

  template <typename Int>
  void integer(const std::string& sec, const std::string& key, Int& out) const {
    with(sec, key, [&](const std::string& v) {
      Int x{};
      auto res = std::from_chars(v.data(), v.data() + v.size(), x);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw InvalidArgument("expected an integer, got '" + v + "'");
      }
      out = x;
    });
  }

  void boolean(const std::string& sec, const std::string& key, bool& out) const {
    with(sec, key, [&](const std::string& v) {
      if (v == "true" || v == "1" || v == "yes") out = true;
      else if (v == "false" || v == "0" || v == "no") out = false;
      else throw InvalidArgument("expected true/false, got '" + v + "'");
    });
  }

  void text(const std::string& sec, const std::string& key, std::string& out) const {
    with(sec, key, [&](const std::string& v) { out = v; });
  }

 private:
  std::map<std::string, Section> s_;
};

std::map<std::string, Section> tokenize(std::string_view text) {
  std::map<std::string, Section> sections;
  std::string current;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      current = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_keys().contains(current)) {
        throw ConfigError("unknown section [" + current + "]", line_no);
      }
      if (sections.contains(current)) {
        throw ConfigError("duplicate section [" + current + "]", line_no);
      }
      sections[current];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (current.empty()) throw ConfigError("key '" + key + "' outside any section", line_no);
    if (!known_keys().at(current).contains(key)) {
      throw ConfigError("unknown key '" + key + "' in [" + current + "]", line_no);
    }
    if (sections[current].contains(key)) {
      throw ConfigError("duplicate key '" + key + "' in [" + current + "]", line_no);
    }
    sections[current][key] = Entry{value, line_no};
  }
  return sections;
}

std::string_view family_name(ModelFamily f) {
  return f == ModelFamily::mlp ? "mlp" : "quadratic";
}

std::string_view init_name(InitScheme::Kind k) {
  switch (k) {
    case InitScheme::Kind::uniform: return "uniform";
    case InitScheme::Kind::gaussian: return "gaussian";
    case InitScheme::Kind::zeros: return "zeros";
  }
  return "?";
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::string source) {
  Reader r(tokenize(text));
  ExperimentConfig c;
  c.source = std::move(source);

  // [model]
  r.with("model", "family", [&](const std::string& v) {
    if (v == "mlp") c.model.family = ModelFamily::mlp;
    else if (v == "quadratic") c.model.family = ModelFamily::quadratic;
    else throw InvalidArgument("unknown family '" + v + "'");
  });
  if (c.model.family == ModelFamily::quadratic) c.model.init = InitScheme::zeros();
  r.with("model", "hidden", [&](const std::string& v) {
    c.model.hidden_dims.clear();
    if (v == "none" || v.empty()) return;
    for (const auto& part : split(v, ',')) {
      auto t = trim(part);
      std::size_t w = 0;
      auto res = std::from_chars(t.data(), t.data() + t.size(), w);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size() || w == 0) {
        throw InvalidArgument("bad layer width '" + std::string(t) + "'");
      }
      c.model.hidden_dims.push_back(w);
    }
  });
  r.with("model", "activation",
         [&](const std::string& v) { c.model.activation = parse_activation(v); });
  r.with("model", "init", [&](const std::string& v) {
    if (v == "uniform") c.model.init.kind = InitScheme::Kind::uniform;
    else if (v == "gaussian") c.model.init.kind = InitScheme::Kind::gaussian;
    else if (v == "zeros") c.model.init.kind = InitScheme::Kind::zeros;
    else throw InvalidArgument("unknown init '" + v + "'");
  });
  r.real("model", "init_scale", c.model.init.scale);
  r.real("model", "a", c.model.quadratic.a);
  r.real("model", "b", c.model.quadratic.b);
  r.real("model", "c", c.model.quadratic.c);
  r.real("model", "d", c.model.quadratic.d);

  // [data]
  auto& task = c.data.task;
  r.text("data", "preset", c.data.preset);
  if (!c.data.preset.empty()) {
    r.with("data", "preset", [&](const std::string& v) { apply_preset(task, v); });
  }
  r.with("data", "generator", [&](const std::string& v) { task.generator = parse_generator(v); });
  r.integer("data", "input_dim", task.input_dim);
  r.integer("data", "num_classes", task.num_classes);
  r.integer("data", "n_labeled", task.n_labeled);
  r.integer("data", "n_unlabeled", task.n_unlabeled);
  r.real("data", "label_noise", task.label_noise);
  r.real("data", "separation", task.separation);
  r.real("data", "noise", task.noise);
  r.integer("data", "informative_dims", task.informative_dims);
  r.with("data", "overlap", [&](const std::string& v) { task.overlap = parse_overlap(v); });
  r.integer("data", "seed", task.seed);
  r.real("data", "mask_prob", c.data.mask_prob);
  r.integer("data", "batch_size", c.data.batch_size);
  r.text("data", "dir", c.data.dir);
  r.integer("data", "eval_mask_seed", c.data.eval_mask_seed);

  // [strategy]
  auto& s = c.strategy;
  auto& b = s.base;
  r.with("strategy", "kind", [&](const std::string& v) { s.kind = parse_strategy(v); });
  r.real("strategy", "rho", b.rho);
  r.real("strategy", "alpha", b.alpha);
  r.real("strategy", "tau", b.tau);
  int epochs = b.schedule.num_epochs;
  r.integer("strategy", "epochs", epochs);
  r.integer("strategy", "explore_steps", b.explore_steps);
  r.integer("strategy", "joint_steps", b.joint_steps);
  r.integer("strategy", "finetune_steps", b.finetune_steps);
  r.integer("strategy", "seed", b.seed);
  r.real("strategy", "lr_decay", b.lr_decay);
  r.with("strategy", "eta_penalty", [&](const std::string& v) {
    if (v == "epoch") b.eta_penalty = EtaPenalty::epoch;
    else if (v == "maximum") b.eta_penalty = EtaPenalty::maximum;
    else throw InvalidArgument("eta_penalty must be epoch or maximum");
  });
  r.integer("strategy", "trace_stride", b.trace_stride);
  r.boolean("strategy", "record_params", b.record_params);
  r.integer("strategy", "value_budget", b.value_budget);
  r.integer("strategy", "pretrain_epochs", s.pretrain_epochs);
  r.integer("strategy", "finetune_epochs", s.finetune_epochs);
  r.real("strategy", "just_gamma", s.just_gamma);
  r.boolean("strategy", "just_ramped", s.just_ramped);
  r.boolean("strategy", "pretrain_init", s.pretrain_init);
  r.integer("strategy", "ao_sup_steps", s.ao_sup_steps);
  r.integer("strategy", "ao_unsup_steps", s.ao_unsup_steps);
  r.integer("strategy", "pl_rounds", s.pl_rounds);
  r.boolean("strategy", "pl_continue", s.pl_continue);

  // [schedule]
  r.with("schedule", "kind", [&](const std::string& v) {
    if (v == "linear_ramp") b.schedule.kind = PenaltySchedule::Kind::linear_ramp;
    else if (v == "constant") b.schedule.kind = PenaltySchedule::Kind::constant;
    else throw InvalidArgument("schedule kind must be linear_ramp or constant");
  });
  r.real("schedule", "gamma_max", b.schedule.gamma_max);
  r.real("schedule", "constant_value", b.schedule.constant_value);
  r.boolean("schedule", "ramp_to_max", b.schedule.ramp_to_max);
  b.schedule.num_epochs = epochs;

  // [verify]
  r.text("verify", "suite", c.verify.suite);

  try {
    if (c.model.family == ModelFamily::mlp) {
      task.validate();
      model_spec(c).validate();
      if (c.data.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
      if (!(c.data.mask_prob >= 0.0 && c.data.mask_prob <= 1.0)) {
        throw InvalidArgument("mask_prob must lie in [0, 1]");
      }
    }
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

ModelSpec model_spec(const ExperimentConfig& c) {
  return ModelSpec{c.data.task.input_dim, c.model.hidden_dims, c.model.activation,
                   c.data.task.num_classes};
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  const auto& t = c.data.task;
  const auto& s = c.strategy;
  const auto& b = s.base;
  nlohmann::json j;
  j["model"] = {{"family", family_name(c.model.family)},
                {"hidden", c.model.hidden_dims},
                {"activation", to_string(c.model.activation)},
                {"init", init_name(c.model.init.kind)},
                {"init_scale", c.model.init.scale}};
  if (c.model.family == ModelFamily::quadratic) {
    j["model"]["a"] = c.model.quadratic.a;
    j["model"]["b"] = c.model.quadratic.b;
    j["model"]["c"] = c.model.quadratic.c;
    j["model"]["d"] = c.model.quadratic.d;
  }
  j["data"] = {{"preset", c.data.preset},
               {"generator", to_string(t.generator)},
               {"input_dim", t.input_dim},
               {"num_classes", t.num_classes},
               {"n_labeled", t.n_labeled},
               {"n_unlabeled", t.n_unlabeled},
               {"label_noise", t.label_noise},
               {"separation", t.separation},
               {"noise", t.noise},
               {"informative_dims", t.informative_dims},
               {"overlap", to_string(t.overlap)},
               {"seed", t.seed},
               {"mask_prob", c.data.mask_prob},
               {"batch_size", c.data.batch_size},
               {"dir", c.data.dir},
               {"eval_mask_seed", c.data.eval_mask_seed}};
  j["strategy"] = {{"kind", to_string(s.kind)},
                   {"rho", b.rho},
                   {"alpha", b.alpha},
                   {"tau", b.tau},
                   {"epochs", b.epochs()},
                   {"explore_steps", b.explore_steps},
                   {"joint_steps", b.joint_steps},
                   {"finetune_steps", b.finetune_steps},
                   {"seed", b.seed},
                   {"lr_decay", b.lr_decay},
                   {"eta_penalty", b.eta_penalty == EtaPenalty::epoch ? "epoch" : "maximum"},
                   {"trace_stride", b.trace_stride},
                   {"record_params", b.record_params},
                   {"value_budget", b.value_budget},
                   {"pretrain_epochs", s.pretrain_epochs},
                   {"finetune_epochs", s.finetune_epochs},
                   {"just_gamma", s.just_gamma},
                   {"just_ramped", s.just_ramped},
                   {"pretrain_init", s.pretrain_init},
                   {"ao_sup_steps", s.ao_sup_steps},
                   {"ao_unsup_steps", s.ao_unsup_steps},
                   {"pl_rounds", s.pl_rounds},
                   {"pl_continue", s.pl_continue}};
  j["schedule"] = {{"kind", to_string(b.schedule.kind)},
                   {"gamma_max", b.schedule.gamma_max},
                   {"constant_value", b.schedule.constant_value},
                   {"ramp_to_max", b.schedule.ramp_to_max}};
  j["verify"] = {{"suite", c.verify.suite}};
  return j;
}

}  // namespace bljust
