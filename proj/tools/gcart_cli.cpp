// gcart: train / eval / apply / flops / gradcheck / aggregate

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gcart/gcart.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::string run_id_for(const std::string& enhancer) {
  std::string id = enhancer;
  for (char& c : id)
    if (c == ':') c = '_';
  return id;
}

struct DataArgs {
  std::string data;
  std::size_t synthetic = 0;
  std::size_t subset = 2000;
  std::size_t eval_subset = 1000;
};

gcart::Dataset load_split(const DataArgs& a, gcart::Split split, std::size_t count, std::uint64_t seed) {
  if (a.synthetic > 0) {
    const std::uint64_t base = split == gcart::Split::train ? 1000 : 2000;
    return gcart::synthetic_cifar(count, base + seed);
  }
  if (a.data.empty()) throw std::invalid_argument("--data is required (or --synthetic N)");
  return gcart::load_cifar10(a.data, split, count, seed);
}

int cmd_train(const gcart::TrainConfig& base, const std::vector<std::uint64_t>& seeds, const DataArgs& data,
              const std::string& out_dir, std::string run_id) {
  if (run_id.empty()) run_id = run_id_for(base.enhancer);
  base.validate();
  for (std::uint64_t seed : seeds) {
    gcart::TrainConfig cfg = base;
    cfg.seed = seed;
    // The data subset is fixed across seeds; only initialization and order vary.
    const gcart::Dataset train_set = load_split(data, gcart::Split::train, data.subset, 0);
    const gcart::Dataset test_set = load_split(data, gcart::Split::test, data.eval_subset, 0);

    json config = gcart::to_json(cfg);
    config["data"] = data.synthetic > 0 ? "synthetic" : data.data;
    config["subset"] = train_set.size();
    config["eval_subset"] = test_set.size();
    config["run_id"] = run_id;

    std::cerr << "[seed " << seed << "] training " << cfg.enhancer << " on " << train_set.size() << " images\n";
    auto result = gcart::train(cfg, train_set, &test_set, [&](const gcart::EpochLog& e) {
      std::cerr << "  epoch " << e.epoch << "  loss " << std::setprecision(6) << e.loss << "  ce " << e.ce
                << "  mono " << e.mono;
      if (e.clean_acc) std::cerr << "  clean " << *e.clean_acc << '%';
      std::cerr << '\n';
    });

    gcart::EvalReport report = gcart::evaluate_all(result.model, test_set, seed, config);
    for (const auto& e : result.log) report.train_log.push_back(gcart::to_json(e));
    const fs::path dir = fs::path(out_dir) / run_id;
    write_json(dir / ("seed" + std::to_string(seed) + ".json"), gcart::to_json(report));
    write_json(dir / ("seed" + std::to_string(seed) + ".ckpt.json"), gcart::to_json(result.model));
    std::cout << (dir / ("seed" + std::to_string(seed) + ".json")).string() << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const DataArgs& data, const std::string& corruption, int severity,
             const std::string& out) {
  const gcart::Model model = gcart::model_from_json(read_json(checkpoint));
  const gcart::Dataset test_set = load_split(data, gcart::Split::test, data.eval_subset, 0);
  json result;
  if (!corruption.empty() && severity > 0) {
    const gcart::CorruptionSpec spec{gcart::parse_corruption(corruption), severity};
    result = {{"corruption", corruption}, {"severity", severity}, {"accuracy", gcart::accuracy(model, test_set, spec)}};
  } else if (!corruption.empty()) {
    const auto s = gcart::sweep(model, test_set, gcart::parse_corruption(corruption));
    result = {{"corruption", corruption}, {"per_severity", s.per_severity}, {"mean", s.mean}};
  } else {
    json config = {{"checkpoint", checkpoint}, {"eval_subset", test_set.size()}, {"enhancer", model.enhancer.name()}};
    result = gcart::to_json(gcart::evaluate_all(model, test_set, 0, config));
  }
  if (out.empty()) {
    std::cout << result.dump(2) << '\n';
  } else {
    write_json(out, result);
  }
  return 0;
}

int cmd_apply(const std::string& enhancer_name, const std::string& checkpoint, const std::string& input,
              const std::string& output, const std::string& corruption, int severity) {
  gcart::Image img = gcart::read_ppm(fs::path(input));
  if (!corruption.empty()) img = gcart::corrupt(img, {gcart::parse_corruption(corruption), severity});
  gcart::Model model;
  if (!checkpoint.empty()) {
    model = gcart::model_from_json(read_json(checkpoint));
  } else {
    model = gcart::Model::init(gcart::Enhancer::parse(enhancer_name), 42);
  }
  if (checkpoint.empty() || enhancer_name != "gcart") model.enhancer = gcart::Enhancer::parse(enhancer_name);
  if (model.enhancer.learned()) {
    const auto curves = model.curves_for(img);
    for (std::size_t c = 0; c < curves.size(); ++c) {
      std::cerr << "channel " << c << ": a=" << curves[c].a << " b=" << curves[c].b << " d=" << curves[c].d
                << " e=" << curves[c].e << '\n';
    }
  }
  gcart::write_ppm(fs::path(output), model.enhance(img));
  return 0;
}

int cmd_flops(const std::string& module, std::size_t h, std::size_t w, bool as_json) {
  const gcart::FlopsReport r = gcart::count_flops(module, h, w, 3);
  if (as_json) {
    std::cout << gcart::to_json(r).dump(2) << '\n';
    return 0;
  }
  std::cout << "module                  " << r.module << '\n'
            << "params                  " << r.params << '\n'
            << "param_prediction_flops  " << r.param_prediction_flops << '\n'
            << "pixel_flops             " << r.pixel_flops << '\n';
  for (const auto& [name, n] : r.breakdown) std::cout << "  " << std::left << std::setw(22) << name << n << '\n';
  std::cout << "total                   " << r.total << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : gcart::check_primitives(seed)) {
    std::cout << (r.pass() ? "PASS " : "FAIL ") << std::left << std::setw(16) << r.name << " max_rel_err "
              << std::scientific << std::setprecision(3) << r.max_rel_err << " (tol " << r.tolerance << ")\n";
    ok = ok && r.pass();
  }
  const auto p = gcart::check_pipeline(gcart::make_pipeline_problem(seed));
  for (const auto* r : {&p.hypernet, &p.head}) {
    std::cout << (r->pass() ? "PASS " : "FAIL ") << std::left << std::setw(16) << r->name << " max_rel_err "
              << std::scientific << std::setprecision(3) << r->max_rel_err << " (tol " << r->tolerance << ", "
              << r->checked << " checked, " << r->skipped << " at kinks)\n";
    ok = ok && r->pass();
  }
  return ok ? 0 : 1;
}

int cmd_aggregate(const std::string& dir, bool csv, const std::string& label) {
  std::vector<fs::path> files;
  const std::regex seed_file(R"(seed\d+\.json)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (std::regex_match(entry.path().filename().string(), seed_file)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no seed*.json files in " + dir);
  std::vector<gcart::EvalReport> reports;
  for (const auto& f : files) reports.push_back(gcart::report_from_json(read_json(f)));
  const gcart::Summary s = gcart::aggregate(reports);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  write_json(fs::path(dir) / "summary.json", gcart::to_json(s));
  if (csv) {
    const std::string text = gcart::to_csv(s, label.empty() ? fs::path(dir).filename().string() : label);
    std::ofstream(fs::path(dir) / "summary.csv") << text;
    std::cout << text;
  } else {
    std::cout << (fs::path(dir) / "summary.json").string() << '\n';
  }
  return 0;
}

int cmd_synth(const std::string& out, std::size_t count, std::uint64_t seed) {
  fs::create_directories(out);
  const gcart::Dataset train = gcart::synthetic_cifar(count, seed);
  const std::size_t per = (count + 4) / 5;
  for (std::size_t b = 0; b < 5; ++b) {
    gcart::Dataset part;
    for (std::size_t i = b * per; i < std::min(count, (b + 1) * per); ++i) {
      part.images.push_back(train.images[i]);
      part.labels.push_back(train.labels[i]);
    }
    gcart::write_cifar_file(fs::path(out) / ("data_batch_" + std::to_string(b + 1) + ".bin"), part);
  }
  gcart::write_cifar_file(fs::path(out) / "test_batch.bin", gcart::synthetic_cifar(std::max<std::size_t>(count / 5, 1), seed + 1));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GC-ART tone-mapping front-end: training, evaluation and tooling"};
  app.require_subcommand(1);

  gcart::TrainConfig tc;
  DataArgs data;
  std::string out_dir = "results", run_id, checkpoint, corruption, out_file, module = "gcart", label;
  std::uint64_t seed = 42;
  std::vector<std::uint64_t> seeds;
  int severity = 0;
  std::size_t h = 32, w = 32, synth_count = 2000;
  bool no_augment = false, as_json = false, csv = false;
  std::string input, output;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", data.data, "CIFAR-10 binary directory or .bin file");
    sub->add_option("--synthetic", data.synthetic, "use N synthetic CIFAR-format images instead of --data");
    sub->add_option("--eval-subset", data.eval_subset, "test images used for evaluation")->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "train an enhancer + classifier and write per-seed JSON");
  add_data(train);
  train->add_option("--subset", data.subset, "training images")->capture_default_str();
  train->add_option("--out", out_dir, "results directory")->capture_default_str();
  train->add_option("--run-id", run_id, "subdirectory under --out (default: enhancer name)");
  auto* seed_opt = train->add_option("--seed", seed, "single seed");
  train->add_option("--seeds", seeds, "several seeds (default 42 43 44)")->excludes(seed_opt);
  train->add_option("--epochs", tc.epochs)->capture_default_str();
  train->add_option("--batch-size", tc.batch_size)->capture_default_str();
  train->add_option("--lr", tc.lr0)->capture_default_str();
  train->add_option("--lambda", tc.lambda, "monotonicity penalty weight")->capture_default_str();
  train->add_option("--enhancer", tc.enhancer, "none|gcart|he|clahe|gamma:<g>")->capture_default_str();
  train->add_flag("--no-augment", no_augment, "disable jitter/crop/flip");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on clean and corrupted test images");
  add_data(eval);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint JSON")->required();
  eval->add_option("--corruption", corruption, "brightness|contrast|darken");
  eval->add_option("--severity", severity, "1..5")->check(CLI::Range(1, 5));
  eval->add_option("--out", out_file, "write JSON here instead of stdout");

  std::string apply_enhancer = "gcart";
  auto* apply = app.add_subcommand("apply", "map a PPM image through an enhancer");
  apply->add_option("--enhancer", apply_enhancer, "none|gcart|he|clahe|gamma:<g>")->capture_default_str();
  apply->add_option("--checkpoint", checkpoint, "model checkpoint JSON (gcart)");
  apply->add_option("--corruption", corruption, "corrupt the input first");
  apply->add_option("--severity", severity, "1..5")->check(CLI::Range(1, 5));
  apply->add_option("input", input)->required();
  apply->add_option("output", output)->required();

  auto* flops = app.add_subcommand("flops", "print the FLOPs report of a front-end");
  flops->set_help_flag("--help", "Print this help message and exit");
  flops->add_option("--module", module, "gcart|he|gamma")->capture_default_str();
  flops->add_option("--h", h)->capture_default_str();
  flops->add_option("--w", w)->capture_default_str();
  flops->add_flag("--json", as_json);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  grad->add_option("--seed", seed)->capture_default_str();

  auto* agg = app.add_subcommand("aggregate", "mean / s.d. across seed*.json in a run directory");
  agg->add_option("--out", out_dir, "run directory containing seed*.json")->required();
  agg->add_flag("--csv", csv, "also write summary.csv");
  agg->add_option("--label", label, "row label for CSV output");

  auto* synth = app.add_subcommand("synth-data", "write a synthetic CIFAR-format dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--n", synth_count, "training images")->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      tc.augment = !no_augment;
      if (seeds.empty()) seeds = train->count("--seed") ? std::vector<std::uint64_t>{seed} : std::vector<std::uint64_t>{42, 43, 44};
      return cmd_train(tc, seeds, data, out_dir, run_id);
    }
    if (*eval) return cmd_eval(checkpoint, data, corruption, severity, out_file);
    if (*apply) {
      if (!corruption.empty() && severity == 0) throw std::invalid_argument("--corruption needs --severity");
      return cmd_apply(apply_enhancer, checkpoint, input, output, corruption, severity);
    }
    if (*flops) return cmd_flops(module, h, w, as_json);
    if (*grad) return cmd_gradcheck(seed);
    if (*agg) return cmd_aggregate(out_dir, csv, label);
    if (*synth) return cmd_synth(out_dir, synth_count, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
