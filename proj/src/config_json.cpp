#include "salmask/config_json.hpp"

#include <fstream>
#include <stdexcept>

using nlohmann::json;

namespace salmask {

json to_json(const DatasetSpec& s) {
  return json{{"num_classes", s.num_classes},
              {"examples_per_class", s.examples_per_class},
              {"seed", s.seed},
              {"clutter_level", s.clutter_level}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
  DatasetSpec s;
  s.num_classes = j.value("num_classes", s.num_classes);
  s.examples_per_class = j.value("examples_per_class", s.examples_per_class);
  s.seed = j.value("seed", s.seed);
  s.clutter_level = j.value("clutter_level", s.clutter_level);
  if (s.num_classes < 2) throw std::runtime_error("num_classes must be >= 2");
  if (s.examples_per_class < 1) throw std::runtime_error("examples_per_class must be >= 1");
  if (s.clutter_level < 0.0 || s.clutter_level > 1.0)
    throw std::runtime_error("clutter_level must lie in [0,1]");
  return s;
}

json to_json(const GumbelConfig& g) {
  return json{{"temperature", g.temperature}, {"estimator", g.estimator}};
}

json to_json(const MaskerConfig& c) {
  return json{{"observed_layers", c.observed_layers},
              {"fuse_channels", c.fuse_channels},
              {"output_mode", c.output_mode},
              {"gumbel", to_json(c.gumbel)}};
}

MaskerConfig masker_config_from_json(const json& j) {
  MaskerConfig c;
  c.observed_layers = j.value("observed_layers", c.observed_layers);
  c.fuse_channels = j.value("fuse_channels", c.fuse_channels);
  c.output_mode = j.value("output_mode", c.output_mode);
  if (j.contains("gumbel")) {
    c.gumbel.temperature = j["gumbel"].value("temperature", c.gumbel.temperature);
    c.gumbel.estimator = j["gumbel"].value("estimator", c.gumbel.estimator);
  }
  c.validate();
  return c;
}

json to_json(const RegularizerConfig& r) {
  return json{{"lambda_m_in", r.lambda_m_in},
              {"lambda_m_out", r.lambda_m_out},
              {"lambda_tv", r.lambda_tv}};
}

json to_json(const ObjectiveConfig& c) {
  return json{{"lambda_out", c.lambda_out},
              {"lambda_in", c.lambda_in},
              {"out_kind", c.out_kind},
              {"in_kind", c.in_kind},
              {"reg", to_json(c.reg)}};
}

ObjectiveConfig objective_config_from_json(const json& j) {
  ObjectiveConfig c;
  c.lambda_out = j.value("lambda_out", c.lambda_out);
  c.lambda_in = j.value("lambda_in", c.lambda_in);
  c.out_kind = j.value("out_kind", c.out_kind);
  c.in_kind = j.value("in_kind", c.in_kind);
  if (j.contains("reg")) {
    c.reg.lambda_m_in = j["reg"].value("lambda_m_in", c.reg.lambda_m_in);
    c.reg.lambda_m_out = j["reg"].value("lambda_m_out", c.reg.lambda_m_out);
    c.reg.lambda_tv = j["reg"].value("lambda_tv", c.reg.lambda_tv);
  }
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("objective config: ") + e.what());
  }
  return c;
}

json to_json(const Infiller& inf) {
  return json{{"kind", inf.kind}, {"blur_sigma", inf.blur_sigma}, {"command", inf.command}};
}

Infiller infiller_from_json(const json& j) {
  Infiller inf;
  inf.kind = j.value("kind", inf.kind);
  inf.blur_sigma = j.value("blur_sigma", inf.blur_sigma);
  inf.command = j.value("command", inf.command);
  if (inf.kind != "none" && inf.kind != "mean" && inf.kind != "blur" && inf.kind != "external")
    throw std::runtime_error("infiller kind must be none, mean, blur or external");
  if (inf.kind == "blur" && inf.blur_sigma <= 0.0)
    throw std::runtime_error("infiller blur_sigma must be > 0");
  if (inf.kind == "external" && inf.command.empty())
    throw std::runtime_error("external infiller requires a command");
  return inf;
}

json to_json(const ClassifierTrainConfig& c) {
  return json{{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"seed", c.seed}};
}

ClassifierTrainConfig classifier_train_config_from_json(const json& j) {
  ClassifierTrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  if (c.epochs < 0) throw std::runtime_error("epochs must be >= 0");
  if (c.batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"mode", c.mode},
              {"objective", to_json(c.objective)},
              {"masker", to_json(c.masker)},
              {"infiller", to_json(c.infiller)},
              {"steps", c.steps},
              {"batch_size", c.batch_size},
              {"masker_lr", c.masker_lr},
              {"classifier_lr", c.classifier_lr},
              {"pool_push_every", c.pool_push_every},
              {"seed", c.seed},
              {"log_every", c.log_every},
              {"ca_classifier_input", c.ca_classifier_input}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.mode = j.value("mode", c.mode);
  if (j.contains("objective")) c.objective = objective_config_from_json(j["objective"]);
  if (j.contains("masker")) c.masker = masker_config_from_json(j["masker"]);
  if (j.contains("infiller")) c.infiller = infiller_from_json(j["infiller"]);
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.masker_lr = j.value("masker_lr", c.masker_lr);
  c.classifier_lr = j.value("classifier_lr", c.classifier_lr);
  c.pool_push_every = j.value("pool_push_every", c.pool_push_every);
  c.seed = j.value("seed", c.seed);
  c.log_every = j.value("log_every", c.log_every);
  c.ca_classifier_input = j.value("ca_classifier_input", c.ca_classifier_input);
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &j;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw std::runtime_error("bad override path: " + path);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json load_config_json(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    in >> j;
  }
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

ObjectiveConfig default_objective(const std::string& mode) {
  ObjectiveConfig c;
  c.lambda_out = 0.5;
  c.lambda_in = 0.5;
  c.out_kind = "max_ent";
  c.in_kind = "max_class";
  const double pixel_ratio = (64.0 * 64.0) / (224.0 * 224.0);
  c.reg.lambda_m_out = (mode == "ca" ? 15.0 : 10.0) * pixel_ratio;
  c.reg.lambda_m_in = 1.0 * pixel_ratio;
  c.reg.lambda_tv = 0.001;
  return c;
}

}  // namespace salmask
