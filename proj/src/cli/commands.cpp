#include "cellseg/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cellseg/augment.hpp"
#include "cellseg/cli/config.hpp"
#include "cellseg/decode.hpp"
#include "cellseg/gtprep.hpp"
#include "cellseg/io.hpp"
#include "cellseg/loss.hpp"
#include "cellseg/metrics.hpp"
#include "cellseg/synth.hpp"
#include "cellseg/version.hpp"
#include "cellseg/weights.hpp"

namespace cellseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Runs f(i) for i in [0, n) on up to `threads` workers; rethrows the first failure.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

bool is_label_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".tif" || ext == ".tiff" || ext == ".npy";
}

/// Label-map files of a directory sorted by name.
std::vector<fs::path> list_label_files(const fs::path& dir) {
  if (!fs::exists(dir)) throw FileNotFoundError(dir.string());
  if (!fs::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_label_file(entry.path()) &&
        entry.path().filename().string().front() != '.') {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::optional<fs::path> find_by_stem(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".tif", ".tiff", ".npy"}) {
    const fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

json metrics_json(const MetricsReport& m) {
  return {{"p05", m.p05}, {"rq", m.rq}, {"sq", m.sq}, {"pq", m.pq},
          {"tp", m.tp},   {"fp", m.fp}, {"fn", m.fn}};
}

json averages_json(const MetricAverages& m) {
  return {{"p05", m.p05}, {"rq", m.rq}, {"sq", m.sq}, {"pq", m.pq}};
}

void write_json(const fs::path& path, const json& value) {
  write_file_atomic(path, value.dump(2) + "\n");
}

/// Records the resolved configuration next to an output file.
void write_sidecar(const fs::path& output, const std::string& command, const PipelineConfig& cfg,
                   const json& details) {
  json meta = {{"tool", "cellseg"},
               {"version", kVersion},
               {"command", command},
               {"config", cfg.to_json()},
               {"details", details}};
  write_json(fs::path(output.string() + ".meta.json"), meta);
}

OneHotMap read_target(const fs::path& path) {
  if (path.extension() == ".npy") {
    const npy::RawArray raw = npy::read(path);
    if (raw.descr == "<f4" && raw.shape.size() == 3 && raw.shape[0] == kNumClasses) {
      const FloatArray a = read_array(path);
      OneHotMap y(kNumClasses, a.rows(), a.cols());
      for (Index l = 0; l < kNumClasses; ++l) {
        if (((a[l] != 0.0f) && (a[l] != 1.0f)).any()) {
          throw ValidationError(path.string() + ": one-hot array holds values other than 0 and 1");
        }
        y[l] = a[l].cast<std::uint8_t>();
      }
      const Grid<int> sum = y[0].cast<int>() + y[1].cast<int>() + y[2].cast<int>();
      if ((sum != 1).any()) throw ValidationError(path.string() + ": one-hot array is not one-hot");
      return y;
    }
  }
  return one_hot(read_semantic_map(path));
}

ProbabilityMap read_probability_map(const fs::path& path) {
  ProbabilityMap z = read_array(path).cast<double>();
  validate_probability_map(z);
  return z;
}

FloatArray to_float(const Grid<double>& g) { return FloatArray({g.cast<float>()}); }

struct Options {
  std::string config_path;
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cell instance segmentation toolkit", "cellseg"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  Options global;
  app.add_option("--config", global.config_path, "JSON config file; flags override its values");
  app.add_option("--threads", global.threads, "worker threads for multi-image commands")
      ->check(CLI::PositiveNumber);
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "random seed (fallback: W3_SEED)");

  // gt2sem
  auto* gt2sem = app.add_subcommand("gt2sem", "instance ground truth -> three-class semantic map");
  std::string gt2sem_in, gt2sem_out;
  int gt2sem_k = 2;
  gt2sem->add_option("--in", gt2sem_in, "instance label map")->required();
  gt2sem->add_option("--out", gt2sem_out, "semantic map output")->required();
  auto* gt2sem_k_opt = gt2sem->add_option("--k", gt2sem_k, "neighbourhood radius (default 2)")
                           ->check(CLI::PositiveNumber);

  // weights
  auto* weights = app.add_subcommand("weights", "pixel weight map from instance ground truth");
  std::string weights_gt, weights_sem, weights_out, weights_model = "w3";
  double beta = 0, nu = 0, sigma = 0;
  int weights_k = 2;
  weights->add_option("--gt", weights_gt, "instance label map")->required();
  weights->add_option("--sem", weights_sem, "semantic map (computed from --gt when omitted)");
  weights->add_option("--out", weights_out, "weight map output (.npy)")->required();
  weights->add_option("--model", weights_model, "w3 or bwm")->check(CLI::IsMember({"w3", "bwm"}));
  auto* beta_opt = weights->add_option("--beta", beta, "saturation distance (px)");
  auto* nu_opt = weights->add_option("--nu", nu, "amplitude");
  auto* sigma_opt = weights->add_option("--sigma", sigma, "Gaussian width (px)");
  auto* weights_k_opt = weights->add_option("--k", weights_k)->check(CLI::PositiveNumber);

  // augment
  auto* augment = app.add_subcommand("augment", "write augmented training tuples");
  std::string aug_image, aug_gt, aug_sem, aug_weights, aug_out;
  int aug_count = 0;
  augment->add_option("--image", aug_image, "gray image")->required();
  augment->add_option("--gt", aug_gt, "instance label map")->required();
  augment->add_option("--sem", aug_sem, "semantic map (computed when omitted)");
  augment->add_option("--weights", aug_weights, "weight map .npy (W3 computed when omitted)");
  augment->add_option("--out", aug_out, "output directory")->required();
  auto* aug_count_opt = augment->add_option("--count", aug_count, "number of draws")
                            ->check(CLI::NonNegativeNumber);

  // loss
  auto* loss = app.add_subcommand("loss", "evaluate the weighted cross entropy");
  std::string loss_target, loss_prob, loss_weights, loss_out;
  loss->add_option("--target", loss_target, "semantic map or one-hot .npy")->required();
  loss->add_option("--prob", loss_prob, "probability map .npy")->required();
  loss->add_option("--weights", loss_weights, "weight map .npy")->required();
  loss->add_option("--out", loss_out, "JSON report");

  // combine
  auto* combine = app.add_subcommand("combine", "average probability maps and apply softmax");
  std::vector<std::string> combine_in;
  std::string combine_out;
  combine->add_option("--in", combine_in, "probability maps (.npy)")->required()->expected(2, -1);
  combine->add_option("--out", combine_out, "combined map (.npy)")->required();

  // decode
  auto* decode_cmd = app.add_subcommand("decode", "probability map -> instance map");
  std::string decode_in, decode_out, strategy;
  double gamma1 = 0, gamma2 = 0, tau0 = 0, tau1 = 0;
  std::int64_t min_area = 0;
  decode_cmd->add_option("--in", decode_in, "probability map .npy")->required();
  decode_cmd->add_option("--out", decode_out, "instance label map")->required();
  auto* strategy_opt = decode_cmd->add_option("--strategy", strategy, "map, th or wt");
  auto* gamma1_opt = decode_cmd->add_option("--gamma1", gamma1, "TH cell threshold");
  auto* gamma2_opt = decode_cmd->add_option("--gamma2", gamma2, "TH touching threshold");
  auto* tau0_opt = decode_cmd->add_option("--tau0", tau0, "WT background marker threshold");
  auto* tau1_opt = decode_cmd->add_option("--tau1", tau1, "WT cell marker threshold");
  auto* min_area_opt = decode_cmd->add_option("--min-area", min_area, "drop smaller instances");

  // eval
  auto* eval = app.add_subcommand("eval", "panoptic evaluation of predicted label maps");
  std::string eval_gt, eval_pred, eval_out, eval_csv;
  eval->add_option("--gt", eval_gt, "ground-truth directory")->required();
  eval->add_option("--pred", eval_pred, "prediction directory")->required();
  eval->add_option("--out", eval_out, "JSON report")->required();
  eval->add_option("--csv", eval_csv, "optional per-image CSV");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with known ground truth");
  std::string synth_out;
  int synth_count = 6;
  double synth_blur = 1.5;
  SynthSpec synth_spec;
  synth->add_option("--out", synth_out, "dataset directory")->required();
  synth->add_option("--count", synth_count, "number of scenes")->check(CLI::PositiveNumber);
  synth->add_option("--rows", synth_spec.rows)->check(CLI::Range(16, 65535));
  synth->add_option("--cols", synth_spec.cols)->check(CLI::Range(16, 65535));
  synth->add_option("--clusters", synth_spec.clusters)->check(CLI::PositiveNumber);
  synth->add_option("--blur", synth_blur, "blur of the oracle probability maps (px)")
      ->check(CLI::NonNegativeNumber);

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "gt2sem -> weights -> decode -> eval over a dataset");
  std::string pipe_data, pipe_out;
  pipeline->add_option("--data", pipe_data, "dataset directory (gt/, prob/)");
  pipeline->add_option("--out", pipe_out, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    PipelineConfig cfg;
    if (!global.config_path.empty()) cfg = load_config(global.config_path);
    if (global.threads > 0) cfg.threads = global.threads;
    if (seed_opt->count() > 0) {
      cfg.seed = seed_flag;
      cfg.seed_explicit = true;
    } else if (!cfg.seed_explicit) {
      if (auto env = seed_from_environment()) cfg.seed = *env;
    }

    if (app.got_subcommand(gt2sem)) {
      if (gt2sem_k_opt->count() > 0) cfg.k = gt2sem_k;
      cfg.validate();
      const InstanceMap g = read_label_map(gt2sem_in);
      const SemanticMap h = instance_to_semantic(g, NeighborhoodSpec(cfg.k));
      write_semantic_map(gt2sem_out, h);
      const ClassCounts n = class_counts(h);
      write_sidecar(gt2sem_out, "gt2sem", cfg,
                    {{"input", gt2sem_in}, {"class_counts", {n[0], n[1], n[2]}}});
      out << "wrote " << gt2sem_out << " (k=" << cfg.k << ")\n";
    } else if (app.got_subcommand(weights)) {
      if (beta_opt->count() > 0) cfg.w3.beta = beta;
      if (nu_opt->count() > 0) cfg.w3.nu = nu;
      if (sigma_opt->count() > 0) cfg.w3.sigma = sigma;
      if (weights_k_opt->count() > 0) cfg.k = weights_k;
      cfg.validate();
      const InstanceMap g = read_label_map(weights_gt);
      const SemanticMap h = weights_sem.empty() ? instance_to_semantic(g, NeighborhoodSpec(cfg.k))
                                                : read_semantic_map(weights_sem);
      const WeightMap w = weights_model == "bwm" ? balanced_weight_map(h) : w3_weight_map(g, h, cfg.w3);
      write_array(weights_out, to_float(w));
      write_sidecar(weights_out, "weights", cfg,
                    {{"gt", weights_gt}, {"sem", weights_sem}, {"model", weights_model}});
      out << "wrote " << weights_out << "\n";
    } else if (app.got_subcommand(augment)) {
      if (aug_count_opt->count() > 0) cfg.augment_count = aug_count;
      cfg.augment.seed = cfg.seed;
      cfg.augment.k = cfg.k;
      cfg.augment.w3 = cfg.w3;
      cfg.validate();
      TrainingSample sample;
      sample.image = read_gray_image(aug_image);
      sample.instances = read_label_map(aug_gt);
      sample.semantic = aug_sem.empty() ? instance_to_semantic(sample.instances, NeighborhoodSpec(cfg.k))
                                        : read_semantic_map(aug_sem);
      if (aug_weights.empty()) {
        sample.weights = w3_weight_map(sample.instances, sample.semantic, cfg.w3);
      } else {
        const FloatArray w = read_array(aug_weights);
        if (w.channels() != 1) throw ValidationError(aug_weights + ": expected a single-channel weight map");
        sample.weights = w[0].cast<double>();
      }
      sample.validate();
      const fs::path dir(aug_out);
      json draws = json::array();
      std::vector<AugmentDraw> records(static_cast<std::size_t>(cfg.augment_count));
      parallel_for(records.size(), cfg.threads, [&](std::size_t i) {
        const TrainingSample s = sample_augmentation(sample, cfg.augment, i, &records[i]);
        char stem[32];
        std::snprintf(stem, sizeof stem, "aug_%04zu", i);
        write_array(dir / (std::string(stem) + "_image.npy"), to_float(s.image));
        write_label_map(dir / (std::string(stem) + "_gt.png"), s.instances);
        write_semantic_map(dir / (std::string(stem) + "_sem.png"), s.semantic);
        write_array(dir / (std::string(stem) + "_weights.npy"), to_float(s.weights));
      });
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& d = records[i];
        draws.push_back({{"index", i},
                         {"flip_horizontal", d.flip_horizontal},
                         {"flip_vertical", d.flip_vertical},
                         {"quarter_turns", d.quarter_turns},
                         {"warped", d.warped},
                         {"gamma", d.gamma},
                         {"a", d.a}});
      }
      write_json(dir / "manifest.json", {{"tool", "cellseg"},
                                         {"version", kVersion},
                                         {"command", "augment"},
                                         {"config", cfg.to_json()},
                                         {"inputs", {{"image", aug_image}, {"gt", aug_gt}}},
                                         {"draws", draws}});
      out << "wrote " << records.size() << " augmented tuples to " << aug_out << "\n";
    } else if (app.got_subcommand(loss)) {
      cfg.validate();
      const OneHotMap y = read_target(loss_target);
      const ProbabilityMap z = read_probability_map(loss_prob);
      const FloatArray wf = read_array(loss_weights);
      if (wf.channels() != 1) throw ValidationError(loss_weights + ": expected a single-channel weight map");
      const LossReport report = weighted_cross_entropy(y, z, wf[0].cast<double>());
      const json result = {{"total", report.total},
                           {"per_class", report.per_class},
                           {"pixel_count", report.pixel_count}};
      if (loss_out.empty()) {
        out << result.dump(2) << "\n";
      } else {
        write_json(loss_out, result);
        write_sidecar(loss_out, "loss", cfg,
                      {{"target", loss_target}, {"prob", loss_prob}, {"weights", loss_weights}});
        out << "loss " << report.total << " -> " << loss_out << "\n";
      }
    } else if (app.got_subcommand(combine)) {
      cfg.validate();
      std::vector<ProbabilityMap> maps;
      for (const auto& p : combine_in) maps.push_back(read_probability_map(p));
      const ProbabilityMap z = combine_probability_maps(maps);
      write_array(combine_out, z.cast<float>());
      write_sidecar(combine_out, "combine", cfg, {{"inputs", combine_in}});
      out << "wrote " << combine_out << "\n";
    } else if (app.got_subcommand(decode_cmd)) {
      if (strategy_opt->count() > 0) cfg.decode.strategy = parse_strategy(strategy);
      if ((gamma1_opt->count() > 0) != (gamma2_opt->count() > 0)) {
        throw ValidationError("--gamma1 and --gamma2 must be given together");
      }
      if (gamma1_opt->count() > 0) cfg.decode.threshold = ThresholdParams{gamma1, gamma2};
      if (tau0_opt->count() > 0) cfg.decode.watershed.tau0 = tau0;
      if (tau1_opt->count() > 0) cfg.decode.watershed.tau1 = tau1;
      if (min_area_opt->count() > 0) cfg.decode.min_instance_area = min_area;
      cfg.validate();
      const ProbabilityMap z = read_probability_map(decode_in);
      const InstanceMap g = decode(z, cfg.decode);
      write_label_map(decode_out, g);
      write_sidecar(decode_out, "decode", cfg, {{"input", decode_in}});
      out << "wrote " << decode_out << " (" << (g.size() ? g.maxCoeff() : 0) << " max label)\n";
    } else if (app.got_subcommand(eval)) {
      cfg.validate();
      const auto gt_files = list_label_files(eval_gt);
      if (gt_files.empty()) throw ValidationError("no label maps found in " + eval_gt);
      std::vector<std::pair<std::string, fs::path>> jobs;
      for (const auto& gt : gt_files) {
        const auto pred = find_by_stem(eval_pred, gt.stem().string());
        if (!pred) throw ValidationError("no prediction for " + gt.filename().string() + " in " + eval_pred);
        jobs.emplace_back(gt.string(), *pred);
      }
      std::vector<MatchResult> matches(jobs.size());
      parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        matches[i] = match_instances(read_label_map(jobs[i].first), read_label_map(jobs[i].second));
      });
      const DatasetReport report = evaluate_dataset(std::span<const MatchResult>(matches));
      json images = json::array();
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        json item = metrics_json(report.per_image[i]);
        item["name"] = fs::path(jobs[i].first).stem().string();
        images.push_back(item);
      }
      const json result = {{"pooled", metrics_json(report.pooled)},
                           {"per_image_mean", averages_json(report.per_image_mean)},
                           {"images", images}};
      write_json(eval_out, result);
      write_sidecar(eval_out, "eval", cfg, {{"gt", eval_gt}, {"pred", eval_pred}});
      if (!eval_csv.empty()) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "name,p05,rq,sq,pq,tp,fp,fn\n";
        const auto row = [&](const std::string& name, const MetricsReport& m) {
          csv << name << ',' << m.p05 << ',' << m.rq << ',' << m.sq << ',' << m.pq << ',' << m.tp
              << ',' << m.fp << ',' << m.fn << '\n';
        };
        for (std::size_t i = 0; i < jobs.size(); ++i) {
          row(fs::path(jobs[i].first).stem().string(), report.per_image[i]);
        }
        row("pooled", report.pooled);
        write_file_atomic(eval_csv, csv.str());
      }
      out << "pooled PQ " << report.pooled.pq << " over " << jobs.size() << " images -> " << eval_out
          << "\n";
    } else if (app.got_subcommand(synth)) {
      synth_spec.k = cfg.k;
      cfg.validate();
      const fs::path dir(synth_out);
      json scenes = json::array();
      std::vector<std::string> names(static_cast<std::size_t>(synth_count));
      parallel_for(names.size(), cfg.threads, [&](std::size_t i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "scene_%03zu", i);
        names[i] = stem;
        const SynthScene scene = generate_scene(synth_spec, derive_seed(cfg.seed, i));
        const SemanticMap h = instance_to_semantic(scene.instances, NeighborhoodSpec(cfg.k));
        write_gray_image(dir / "images" / (names[i] + ".png"), scene.image, 16);
        write_label_map(dir / "gt" / (names[i] + ".png"), scene.instances);
        write_array(dir / "prob" / (names[i] + ".npy"),
                    oracle_probability_map(h, synth_blur).cast<float>());
      });
      for (const auto& n : names) scenes.push_back(n);
      write_json(dir / "manifest.json",
                 {{"tool", "cellseg"},
                  {"version", kVersion},
                  {"command", "synth"},
                  {"seed", cfg.seed},
                  {"k", cfg.k},
                  {"rows", synth_spec.rows},
                  {"cols", synth_spec.cols},
                  {"clusters", synth_spec.clusters},
                  {"probability_blur", synth_blur},
                  {"scenes", scenes}});
      out << "wrote " << names.size() << " scenes to " << synth_out << "\n";
    } else if (app.got_subcommand(pipeline)) {
      if (!pipe_data.empty()) cfg.data_dir = pipe_data;
      if (!pipe_out.empty()) cfg.out_dir = pipe_out;
      if (cfg.data_dir.empty()) throw ValidationError("pipeline needs a data directory (--data or io.data)");
      if (cfg.out_dir.empty()) throw ValidationError("pipeline needs an output directory (--out or io.out)");
      cfg.validate();
      const fs::path data(cfg.data_dir);
      const fs::path outdir(cfg.out_dir);
      const auto gt_files = list_label_files(data / "gt");
      if (gt_files.empty()) throw ValidationError("no ground-truth label maps in " + (data / "gt").string());

      struct Item {
        std::string name;
        bool decoded = false;
        MatchResult match;
      };
      std::vector<Item> items(gt_files.size());
      parallel_for(items.size(), cfg.threads, [&](std::size_t i) {
        Item& item = items[i];
        item.name = gt_files[i].stem().string();
        const InstanceMap g = read_label_map(gt_files[i]);
        const SemanticMap h = instance_to_semantic(g, NeighborhoodSpec(cfg.k));
        write_semantic_map(outdir / "sem" / (item.name + ".png"), h);
        write_array(outdir / "weights" / (item.name + ".npy"), to_float(w3_weight_map(g, h, cfg.w3)));
        const fs::path prob = data / "prob" / (item.name + ".npy");
        if (fs::exists(prob)) {
          const InstanceMap pred = decode(read_probability_map(prob), cfg.decode);
          write_label_map(outdir / "pred" / (item.name + ".png"), pred);
          item.match = match_instances(g, pred);
          item.decoded = true;
        }
      });

      json stages = json::array();
      json images = json::array();
      std::vector<MatchResult> matches;
      std::vector<std::string> decoded_names;
      for (const auto& item : items) {
        json entry = {{"name", item.name},
                      {"sem", "sem/" + item.name + ".png"},
                      {"weights", "weights/" + item.name + ".npy"}};
        if (item.decoded) {
          entry["pred"] = "pred/" + item.name + ".png";
          matches.push_back(item.match);
          decoded_names.push_back(item.name);
        }
        images.push_back(entry);
      }
      json manifest = {{"tool", "cellseg"},
                       {"version", kVersion},
                       {"command", "pipeline"},
                       {"config", cfg.to_json()},
                       {"stages", {"gt2sem", "weights", "decode", "eval"}},
                       {"images", images}};
      if (matches.empty()) {
        manifest["report"] = nullptr;
        out << "no probability maps under " << (data / "prob").string() << "; skipped decode and eval\n";
      } else {
        const DatasetReport report = evaluate_dataset(std::span<const MatchResult>(matches));
        json per_image = json::array();
        for (std::size_t i = 0; i < matches.size(); ++i) {
          json m = metrics_json(report.per_image[i]);
          m["name"] = decoded_names[i];
          per_image.push_back(m);
        }
        write_json(outdir / "report.json", {{"pooled", metrics_json(report.pooled)},
                                            {"per_image_mean", averages_json(report.per_image_mean)},
                                            {"images", per_image}});
        manifest["report"] = "report.json";
        out << "pooled PQ " << report.pooled.pq << " over " << matches.size() << " images\n";
      }
      write_json(outdir / "manifest.json", manifest);
    }
    return kOk;
  } catch (const FileNotFoundError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const FormatError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace cellseg::cli
