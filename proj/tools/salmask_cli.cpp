// Command-line surface for the masking-saliency pipeline. Every command
// serializes its effective config into the run directory before doing any
// work; reruns from a snapshot with the same seed reproduce results exactly.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "salmask/config_json.hpp"
#include "salmask/image_io.hpp"
#include "salmask/kernels.hpp"
#include "salmask/plot.hpp"
#include "salmask/sanity.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace salmask;

namespace {

std::string runs_root() {
  const char* env = std::getenv("SF_RUNS_DIR");
  return env != nullptr ? env : "runs";
}

std::string make_run_dir(const std::string& out, const std::string& name) {
  std::string dir = out.empty() ? (fs::path(runs_root()) / name).string() : out;
  fs::create_directories(dir);
  return dir;
}

void write_snapshot(const std::string& run_dir, const std::string& filename, const json& config) {
  std::ofstream os((fs::path(run_dir) / filename).string());
  os << config.dump(2) << "\n";
}

std::vector<ImageSample> load_split(const std::string& data_root, const std::string& split) {
  DatasetManifest m = load_manifest((fs::path(data_root) / "manifest.json").string());
  if (split == "all") return load_all(m);
  SplitIndices s = train_val_split(m);
  return load_all(select_entries(m, split == "train" ? s.train : s.val));
}

// --objective maxclass+maxent style shorthand
void apply_objective_flag(json& cfg, const std::string& flag) {
  json obj = cfg.value("objective", json::object());
  std::string in_kind = "none", out_kind = "none";
  size_t start = 0;
  while (start <= flag.size()) {
    const size_t plus = flag.find('+', start);
    const std::string tok = flag.substr(start, plus == std::string::npos ? plus : plus - start);
    if (tok == "maxclass")
      in_kind = "max_class";
    else if (tok == "maxent")
      out_kind = "max_ent";
    else if (tok == "minclass")
      out_kind = "min_class";
    else if (!tok.empty())
      throw std::runtime_error("unknown objective token: " + tok);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  obj["in_kind"] = in_kind;
  obj["out_kind"] = out_kind;
  const bool dual = in_kind != "none" && out_kind != "none";
  obj["lambda_in"] = in_kind == "none" ? 0.0 : (dual ? 0.5 : 1.0);
  obj["lambda_out"] = out_kind == "none" ? 0.0 : (dual ? 0.5 : 1.0);
  cfg["objective"] = obj;
}

TrainConfig resolve_train_config(json& cfg, const std::string& mode_flag,
                                 const std::string& objective_flag, const std::string& layers_flag,
                                 const std::string& infiller_flag, const std::string& gumbel_flag) {
  if (!mode_flag.empty()) cfg["mode"] = mode_flag;
  const std::string mode = cfg.value("mode", "fix");
  if (!cfg.contains("objective")) cfg["objective"] = to_json(default_objective(mode));
  if (!objective_flag.empty()) apply_objective_flag(cfg, objective_flag);
  if (!layers_flag.empty()) {
    std::vector<int> layers;
    size_t start = 0;
    while (start <= layers_flag.size()) {
      const size_t comma = layers_flag.find(',', start);
      layers.push_back(std::stoi(layers_flag.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    json masker = cfg.value("masker", json::object());
    masker["observed_layers"] = layers;
    cfg["masker"] = masker;
  }
  if (!infiller_flag.empty()) {
    json inf = json::object();
    if (infiller_flag.rfind("external:", 0) == 0) {
      inf["kind"] = "external";
      inf["command"] = infiller_flag.substr(9);
    } else {
      inf["kind"] = infiller_flag;
    }
    cfg["infiller"] = inf;
  }
  if (!gumbel_flag.empty()) {
    json masker = cfg.value("masker", json::object());
    masker["output_mode"] = "gumbel";
    const size_t colon = gumbel_flag.find(':');
    json g = json::object();
    g["estimator"] = gumbel_flag.substr(0, colon);
    if (colon != std::string::npos) g["temperature"] = std::stod(gumbel_flag.substr(colon + 1));
    masker["gumbel"] = g;
    cfg["masker"] = masker;
  }
  return train_config_from_json(cfg);
}

int cmd_gen_data(const std::string& config_path, const std::vector<std::string>& overrides,
                 std::string out) {
  json cfg = load_config_json(config_path, overrides);
  DatasetSpec spec = dataset_spec_from_json(cfg.value("spec", json::object()));
  if (out.empty()) out = cfg.value("out", std::string());
  if (out.empty()) throw std::runtime_error("gen-data requires --out");
  fs::create_directories(out);
  write_snapshot(out, "gen_config.json", json{{"spec", to_json(spec)}, {"out", out}});
  DatasetManifest m = build_dataset(spec, out);
  std::cout << "wrote " << m.entries.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_train_classifier(const std::string& config_path, const std::vector<std::string>& overrides,
                         std::string data, std::string out) {
  json cfg = load_config_json(config_path, overrides);
  if (!data.empty()) cfg["data"] = data;
  data = cfg.value("data", std::string());
  if (data.empty()) throw std::runtime_error("train-classifier requires --data");
  ClassifierTrainConfig tc = classifier_train_config_from_json(cfg.value("train", json::object()));
  const std::string run_dir = make_run_dir(out, "classifier_seed" + std::to_string(tc.seed));
  write_snapshot(run_dir, "config.json",
                 json{{"command", "train-classifier"}, {"data", data}, {"train", to_json(tc)}});
  std::vector<ImageSample> train = load_split(data, "train");
  std::vector<ImageSample> val = load_split(data, "val");
  ClassifierTrainResult res = train_classifier(train, tc);
  const std::string ckpt = (fs::path(run_dir) / "classifier.bin").string();
  res.classifier.save(ckpt, static_cast<uint64_t>(res.steps));
  json report{{"epoch_losses", res.epoch_losses},
              {"train_accuracy", classifier_accuracy(res.classifier, train)},
              {"val_accuracy", classifier_accuracy(res.classifier, val)},
              {"steps", res.steps},
              {"checkpoint", ckpt}};
  std::ofstream((fs::path(run_dir) / "train_report.json").string()) << report.dump(2) << "\n";
  std::cout << "classifier: train acc " << report["train_accuracy"] << ", val acc "
            << report["val_accuracy"] << " -> " << ckpt << "\n";
  return 0;
}

int cmd_train_masker(const std::string& config_path, const std::vector<std::string>& overrides,
                     std::string data, std::string classifier_path, std::string out,
                     const std::string& mode, const std::string& objective,
                     const std::string& layers, const std::string& infiller,
                     const std::string& gumbel) {
  json cfg = load_config_json(config_path, overrides);
  if (!data.empty()) cfg["data"] = data;
  if (!classifier_path.empty()) cfg["classifier"] = classifier_path;
  data = cfg.value("data", std::string());
  classifier_path = cfg.value("classifier", std::string());
  if (data.empty() || classifier_path.empty())
    throw std::runtime_error("train-masker requires --data and --classifier");
  json train_cfg = cfg.value("train", json::object());
  TrainConfig tc = resolve_train_config(train_cfg, mode, objective, layers, infiller, gumbel);
  const std::string run_dir = make_run_dir(out, tc.mode + "_seed" + std::to_string(tc.seed));
  write_snapshot(run_dir, "config.json",
                 json{{"command", "train-masker"},
                      {"data", data},
                      {"classifier", classifier_path},
                      {"train", to_json(tc)}});
  Classifier base = Classifier::load(classifier_path);
  std::vector<ImageSample> train = load_split(data, "train");
  TrainResult res = tc.mode == "ca" ? train_ca(base, train, tc, run_dir)
                                    : train_fix(base, train, tc, run_dir);
  std::vector<ImageSample> val = load_split(data, "val");
  EvalReport report = evaluate_checkpoint(res.masker, base, val);
  write_eval_report(report, (fs::path(run_dir) / "eval_val.json").string());
  std::cout << "masker trained (" << tc.mode << "): LE " << report.le << ", PxAP " << report.pxap
            << ", mean mask " << report.mean_mask << " -> " << run_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& masker_path, const std::string& classifier_path,
             const std::string& data, const std::string& split, std::string out) {
  Masker masker = Masker::load(masker_path);
  Classifier classifier = Classifier::load(classifier_path);
  if (out.empty()) out = fs::path(masker_path).parent_path().string();
  fs::create_directories(out);
  write_snapshot(out, "eval_" + split + "_config.json",
                 json{{"command", "eval"},
                      {"masker", masker_path},
                      {"classifier", classifier_path},
                      {"data", data},
                      {"split", split}});
  std::vector<ImageSample> samples = load_split(data, split);
  EvalReport r = evaluate_checkpoint(masker, classifier, samples);
  const std::string path = (fs::path(out) / ("eval_" + split + ".json")).string();
  write_eval_report(r, path);
  std::cout << "OM " << r.om << "  LE " << r.le << "  F1 " << r.f1 << "  SM " << r.sm << "  PxAP "
            << r.pxap << "  mean mask " << r.mean_mask << " -> " << path << "\n";
  return 0;
}

int cmd_export_saliency(const std::string& masker_path, const std::string& classifier_path,
                        const std::string& data, const std::string& split, std::string out) {
  Masker masker = Masker::load(masker_path);
  Classifier classifier = Classifier::load(classifier_path);
  if (out.empty()) throw std::runtime_error("export-saliency requires --out");
  fs::create_directories(out);
  write_snapshot(out, "export_config.json",
                 json{{"command", "export-saliency"},
                      {"masker", masker_path},
                      {"classifier", classifier_path},
                      {"data", data},
                      {"split", split}});
  std::vector<ImageSample> samples = load_split(data, split);
  std::vector<Tensor> maps = saliency_maps(masker, classifier, samples);
  std::vector<int64_t> hist(10, 0);
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Tensor& m = maps[i];
    write_png_gray16((fs::path(out) / (s.id + "_mask.png")).string(), m);
    Tensor composite = apply_mask(s.image, m, Side::In);
    write_png_rgb8((fs::path(out) / (s.id + "_maskedin.png")).string(), composite);
    Tensor overlay = like(s.image);
    for (int y = 0; y < s.image.h; ++y)
      for (int x = 0; x < s.image.w; ++x) {
        const Real v = m.at(0, 0, y, x);
        overlay.at(0, 0, y, x) = 0.5 * s.image.at(0, 0, y, x) + 0.5 * v;
        overlay.at(0, 1, y, x) = 0.5 * s.image.at(0, 1, y, x);
        overlay.at(0, 2, y, x) = 0.5 * s.image.at(0, 2, y, x) + 0.5 * (1.0 - v);
      }
    write_png_rgb8((fs::path(out) / (s.id + "_overlay.png")).string(), overlay);
    for (Real v : m.data) {
      int b = static_cast<int>(v * 10.0);
      if (b > 9) b = 9;
      if (b < 0) b = 0;
      ++hist[b];
    }
  }
  json jh{{"buckets", hist},
          {"bucket_width", 0.1},
          {"total", static_cast<int64_t>(samples.size()) * 64 * 64}};
  std::ofstream((fs::path(out) / "mask_histogram.json").string()) << jh.dump(2) << "\n";
  std::cout << "exported " << samples.size() << " saliency maps to " << out << "\n";
  return 0;
}

int cmd_sanity_roar(const std::string& masker_path, const std::string& classifier_path,
                    const std::string& data, const std::string& t_grid_flag, int epochs,
                    uint64_t seed, std::string out) {
  Masker masker = Masker::load(masker_path);
  Classifier classifier = Classifier::load(classifier_path);
  const std::string run_dir = make_run_dir(out, "roar");
  std::vector<double> t_grid;
  {
    size_t start = 0;
    while (start <= t_grid_flag.size()) {
      const size_t comma = t_grid_flag.find(',', start);
      t_grid.push_back(std::stod(t_grid_flag.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  write_snapshot(run_dir, "config.json",
                 json{{"command", "sanity roar"},
                      {"masker", masker_path},
                      {"classifier", classifier_path},
                      {"data", data},
                      {"t_grid", t_grid},
                      {"epochs", epochs},
                      {"seed", seed}});
  std::vector<ImageSample> train = load_split(data, "train");
  std::vector<ImageSample> val = load_split(data, "val");
  ClassifierTrainConfig retrain;
  retrain.epochs = epochs;
  retrain.seed = seed;
  std::vector<Tensor> train_maps = saliency_maps(masker, classifier, train);
  std::vector<Tensor> val_maps = saliency_maps(masker, classifier, val);
  RoarCurve curve = roar_run(train, val, train_maps, val_maps, t_grid, retrain);

  Rng rng(seed + 17);
  auto random_maps = [&rng](size_t n) {
    std::vector<Tensor> maps;
    for (size_t i = 0; i < n; ++i) {
      Tensor m(1, 1, kImageSize, kImageSize);
      for (Real& v : m.data) v = rng.uniform();
      maps.push_back(std::move(m));
    }
    return maps;
  };
  RoarCurve control = roar_run(train, val, random_maps(train.size()), random_maps(val.size()),
                               t_grid, retrain);

  json j{{"masker_curve", json::array()}, {"random_curve", json::array()}};
  for (auto& [t, acc] : curve.points) j["masker_curve"].push_back({t, acc});
  for (auto& [t, acc] : control.points) j["random_curve"].push_back({t, acc});
  std::ofstream((fs::path(run_dir) / "roar.json").string()) << j.dump(2) << "\n";
  render_line_plot((fs::path(run_dir) / "roar.png").string(), "roar",
                   {PlotSeries{"masker", curve.points}, PlotSeries{"random", control.points}});
  std::cout << "roar curve written to " << run_dir << "\n";
  return 0;
}

int cmd_sanity_mprt(const std::string& masker_path, const std::string& classifier_path,
                    const std::string& data, int subset, uint64_t seed, std::string out) {
  Masker masker = Masker::load(masker_path);
  Classifier classifier = Classifier::load(classifier_path);
  const std::string run_dir = make_run_dir(out, "mprt");
  write_snapshot(run_dir, "config.json",
                 json{{"command", "sanity mprt"},
                      {"masker", masker_path},
                      {"classifier", classifier_path},
                      {"data", data},
                      {"subset", subset},
                      {"seed", seed}});
  std::vector<ImageSample> val = load_split(data, "val");
  if (static_cast<int>(val.size()) > subset) val.resize(subset);
  SimilarityReport report = mprt_run(masker, classifier, val, seed);
  json stages = json::array();
  std::vector<std::pair<double, double>> ssim_curve, rank_curve;
  for (size_t i = 0; i < report.stages.size(); ++i) {
    const auto& s = report.stages[i];
    stages.push_back(json{{"stage", s.stage}, {"rank_abs", s.rank_abs}, {"rank", s.rank},
                          {"ssim", s.ssim}});
    ssim_curve.emplace_back(static_cast<double>(i), s.ssim);
    rank_curve.emplace_back(static_cast<double>(i), s.rank);
  }
  std::ofstream((fs::path(run_dir) / "mprt.json").string())
      << json{{"stages", stages}}.dump(2) << "\n";
  render_line_plot((fs::path(run_dir) / "mprt.png").string(), "mprt",
                   {PlotSeries{"ssim", ssim_curve}, PlotSeries{"rank", rank_curve}});
  std::cout << "mprt report written to " << run_dir << "\n";
  return 0;
}

int cmd_sanity_drt(const std::string& config_path, const std::vector<std::string>& overrides,
                   std::string data, int subset, uint64_t seed, std::string out) {
  json cfg = load_config_json(config_path, overrides);
  if (!data.empty()) cfg["data"] = data;
  data = cfg.value("data", std::string());
  if (data.empty()) throw std::runtime_error("sanity drt requires --data");
  ClassifierTrainConfig cls_cfg =
      classifier_train_config_from_json(cfg.value("classifier_train", json::object()));
  json train_cfg = cfg.value("train", json::object());
  TrainConfig tc = resolve_train_config(train_cfg, "", "", "", "", "");
  const std::string run_dir = make_run_dir(out, "drt");
  write_snapshot(run_dir, "config.json",
                 json{{"command", "sanity drt"},
                      {"data", data},
                      {"classifier_train", to_json(cls_cfg)},
                      {"train", to_json(tc)},
                      {"subset", subset},
                      {"seed", seed}});
  std::vector<ImageSample> train = load_split(data, "train");
  std::vector<ImageSample> val = load_split(data, "val");
  if (static_cast<int>(val.size()) > subset) val.resize(subset);
  DrtResult res = drt_run(train, val, cls_cfg, tc, seed);
  const auto& s = res.report.stages[0];
  json j{{"rank_abs", s.rank_abs},
         {"rank", s.rank},
         {"ssim", s.ssim},
         {"true_val_accuracy", res.true_val_accuracy},
         {"shuffled_val_accuracy", res.shuffled_val_accuracy}};
  std::ofstream((fs::path(run_dir) / "drt.json").string()) << j.dump(2) << "\n";
  std::cout << "drt: rank_abs " << s.rank_abs << ", ssim " << s.ssim << " -> " << run_dir << "\n";
  return 0;
}

int cmd_fewshot_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
                      std::string data, std::string classifier_path, int classes,
                      const std::string& per_class_flag, int seeds, std::string out) {
  json cfg = load_config_json(config_path, overrides);
  if (!data.empty()) cfg["data"] = data;
  if (!classifier_path.empty()) cfg["classifier"] = classifier_path;
  data = cfg.value("data", std::string());
  classifier_path = cfg.value("classifier", std::string());
  if (data.empty() || classifier_path.empty())
    throw std::runtime_error("fewshot-sweep requires --data and --classifier");
  json train_cfg = cfg.value("train", json::object());
  TrainConfig tc = resolve_train_config(train_cfg, "", "", "", "", "");
  std::vector<int> per_class;
  {
    size_t start = 0;
    while (start <= per_class_flag.size()) {
      const size_t comma = per_class_flag.find(',', start);
      per_class.push_back(std::stoi(per_class_flag.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  const std::string run_dir = make_run_dir(out, "fewshot");
  write_snapshot(run_dir, "config.json",
                 json{{"command", "fewshot-sweep"},
                      {"data", data},
                      {"classifier", classifier_path},
                      {"classes", classes},
                      {"per_class", per_class},
                      {"seeds", seeds},
                      {"train", to_json(tc)}});
  Classifier base = Classifier::load(classifier_path);
  DatasetManifest manifest = load_manifest((fs::path(data) / "manifest.json").string());
  SplitIndices split = train_val_split(manifest);
  DatasetManifest train_manifest = select_entries(manifest, split.train);
  std::vector<ImageSample> val = load_all(select_entries(manifest, split.val));
  const int full_size = static_cast<int>(train_manifest.entries.size());

  json cells = json::array();
  std::vector<std::pair<double, double>> le_curve, pxap_curve;
  for (int e : per_class) {
    std::vector<double> les, pxaps;
    for (int s = 0; s < seeds; ++s) {
      DatasetManifest sub = subsample_fewshot(train_manifest, classes, e, tc.seed + s);
      std::vector<ImageSample> sub_samples = load_all(sub);
      TrainConfig run_tc = tc;
      run_tc.seed = tc.seed + s;
      TrainResult res = train_fewshot(base, sub_samples, full_size, run_tc);
      EvalReport r = evaluate_checkpoint(res.masker, base, val);
      les.push_back(r.le);
      pxaps.push_back(r.pxap);
    }
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const size_t n = v.size();
      return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double med_le = median(les), med_pxap = median(pxaps);
    cells.push_back(json{{"classes", classes},
                         {"per_class", e},
                         {"le", les},
                         {"pxap", pxaps},
                         {"median_le", med_le},
                         {"median_pxap", med_pxap}});
    le_curve.emplace_back(e, med_le);
    pxap_curve.emplace_back(e, med_pxap);
    std::cout << "fewshot C=" << classes << " E=" << e << ": median LE " << med_le
              << ", median PxAP " << med_pxap << "\n";
  }
  std::ofstream((fs::path(run_dir) / "fewshot_summary.json").string())
      << json{{"cells", cells}}.dump(2) << "\n";
  render_line_plot((fs::path(run_dir) / "fewshot_le.png").string(), "median LE",
                   {PlotSeries{"le", le_curve}});
  render_line_plot((fs::path(run_dir) / "fewshot_pxap.png").string(), "median PxAP",
                   {PlotSeries{"pxap", pxap_curve}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masking-based saliency maps: training, evaluation and sanity checks"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread count (0 = library default)");

  std::string config_path, data, classifier_path, masker_path, out, split = "val";
  std::vector<std::string> overrides;
  std::string mode, objective, layers, infiller, gumbel;
  std::string t_grid = "0,0.1,0.25,0.5,0.75,0.9";
  std::string per_class = "10";
  int epochs = 10, subset = 64, classes = 10, seeds = 5;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--set", overrides, "config override key.path=value");
    cmd->add_option("--out", out, "output/run directory");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a ShapeScenes dataset");
  add_common(gen);

  CLI::App* tcls = app.add_subcommand("train-classifier", "train the base classifier");
  add_common(tcls);
  tcls->add_option("--data", data, "dataset root");

  CLI::App* tmask = app.add_subcommand("train-masker", "train a masker (fix or ca)");
  add_common(tmask);
  tmask->add_option("--data", data, "dataset root");
  tmask->add_option("--classifier", classifier_path, "classifier checkpoint");
  tmask->add_option("--mode", mode, "fix|ca");
  tmask->add_option("--objective", objective, "e.g. maxclass+maxent, minclass, maxent");
  tmask->add_option("--layers", layers, "observed classifier layers, e.g. 4,5");
  tmask->add_option("--infiller", infiller, "none|mean|blur|external:<command>");
  tmask->add_option("--gumbel", gumbel, "soft|hard[:temperature]");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a masker checkpoint");
  ev->add_option("--masker", masker_path, "masker checkpoint")->required();
  ev->add_option("--classifier", classifier_path, "classifier checkpoint")->required();
  ev->add_option("--data", data, "dataset root")->required();
  ev->add_option("--split", split, "train|val|all");
  ev->add_option("--out", out, "output directory");

  CLI::App* ex = app.add_subcommand("export-saliency", "export mask PNGs, overlays, histogram");
  ex->add_option("--masker", masker_path, "masker checkpoint")->required();
  ex->add_option("--classifier", classifier_path, "classifier checkpoint")->required();
  ex->add_option("--data", data, "dataset root")->required();
  ex->add_option("--split", split, "train|val|all");
  ex->add_option("--out", out, "output directory")->required();

  CLI::App* sanity = app.add_subcommand("sanity", "sanity-check battery");
  sanity->require_subcommand(1);
  CLI::App* roar = sanity->add_subcommand("roar", "remove-and-retrain");
  roar->add_option("--masker", masker_path)->required();
  roar->add_option("--classifier", classifier_path)->required();
  roar->add_option("--data", data)->required();
  roar->add_option("--t-grid", t_grid, "comma-separated removal fractions");
  roar->add_option("--epochs", epochs, "retrain epochs");
  roar->add_option("--seed", seed);
  roar->add_option("--out", out);
  CLI::App* mprt = sanity->add_subcommand("mprt", "model parameter randomization test");
  mprt->add_option("--masker", masker_path)->required();
  mprt->add_option("--classifier", classifier_path)->required();
  mprt->add_option("--data", data)->required();
  mprt->add_option("--subset", subset, "number of validation images");
  mprt->add_option("--seed", seed);
  mprt->add_option("--out", out);
  CLI::App* drt = sanity->add_subcommand("drt", "data randomization test");
  drt->add_option("--config", config_path);
  drt->add_option("--set", overrides);
  drt->add_option("--data", data);
  drt->add_option("--subset", subset);
  drt->add_option("--seed", seed);
  drt->add_option("--out", out);

  CLI::App* fewshot = app.add_subcommand("fewshot-sweep", "few-shot training sweep");
  add_common(fewshot);
  fewshot->add_option("--data", data, "dataset root");
  fewshot->add_option("--classifier", classifier_path, "classifier checkpoint");
  fewshot->add_option("--classes", classes, "number of classes to subsample");
  fewshot->add_option("--per-class", per_class, "comma-separated examples per class");
  fewshot->add_option("--seeds", seeds, "subsample seeds per cell");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) kernels::set_threads(threads);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, overrides, out);
    if (tcls->parsed()) return cmd_train_classifier(config_path, overrides, data, out);
    if (tmask->parsed())
      return cmd_train_masker(config_path, overrides, data, classifier_path, out, mode, objective,
                              layers, infiller, gumbel);
    if (ev->parsed()) return cmd_eval(masker_path, classifier_path, data, split, out);
    if (ex->parsed()) return cmd_export_saliency(masker_path, classifier_path, data, split, out);
    if (sanity->parsed()) {
      if (roar->parsed())
        return cmd_sanity_roar(masker_path, classifier_path, data, t_grid, epochs, seed, out);
      if (mprt->parsed())
        return cmd_sanity_mprt(masker_path, classifier_path, data, subset, seed, out);
      if (drt->parsed()) return cmd_sanity_drt(config_path, overrides, data, subset, seed, out);
    }
    if (fewshot->parsed())
      return cmd_fewshot_sweep(config_path, overrides, data, classifier_path, classes, per_class,
                               seeds, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << app.help();
  return 1;
}
