#include "tcn/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "tcn/analysis.hpp"
#include "tcn/csv.hpp"
#include "tcn/dynobj.hpp"
#include "tcn/image_io.hpp"
#include "tcn/training.hpp"

namespace tcn {

namespace fs = std::filesystem;

namespace {

std::string default_run_root() {
  const char* env = std::getenv("TCNLAB_RUN_ROOT");
  return env ? env : "runs";
}

std::string run_dir_for(const ExperimentConfig& cfg, const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  return default_run_root() + "/" + cfg.task + "_" + norm_method_name(cfg.norm.method) + "_seed" +
         std::to_string(cfg.seed);
}

ExperimentConfig config_from_args(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
  Config raw;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw MissingInput("config file '" + config_path + "' not found");
    raw = Config::from_file(config_path);
  }
  raw.apply_overrides(overrides);
  return ExperimentConfig::from(raw);
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const std::string& task, const std::string& regime, int region, int n, uint64_t seed,
            std::string out_path, const std::string& split, int t, const std::string& png_dir,
            int png_limit, int image_scale) {
  if (task == "vaec") {
    vaec::RegimeSpec spec = regime == "scale" ? vaec::RegimeSpec::scale(region)
                                              : vaec::RegimeSpec::translation(region);
    if (out_path.empty()) out_path = spec.tag() + ".manifest";
    for (char& c : out_path)
      if (c == ':') c = '_';
    auto entries = vaec::build_manifest(spec, n, seed);
    vaec::export_manifest(entries, out_path);
    std::cout << "wrote " << entries.size() << " problems to " << out_path << "\n";
    if (!png_dir.empty()) {
      fs::create_directories(png_dir);
      int limit = std::min<int>(png_limit, static_cast<int>(entries.size()));
      for (int i = 0; i < limit; ++i) {
        const auto& e = entries[static_cast<size_t>(i)];
        std::vector<vaec::Image> strip;
        for (const auto* obj : {&e.a, &e.b, &e.c})
          strip.push_back(vaec::render_object_scaled(*obj, image_scale));
        for (const auto& c : e.candidates)
          strip.push_back(vaec::render_object_scaled(c, image_scale));
        write_png(png_dir + "/problem_" + std::to_string(i) + ".png", hstack(strip));
      }
      std::cout << "wrote " << limit << " preview images to " << png_dir << "\n";
    }
    return 0;
  }
  if (task == "dynobj") {
    dynobj::Split sp = dynobj::parse_split(split);
    std::vector<dynobj::SequenceSpec> specs;
    for (int i = 0; i < n; ++i)
      specs.push_back(dynobj::sample_sequence(sp, t, derive_seed(seed, "gen", static_cast<uint64_t>(i))));
    if (out_path.empty()) out_path = std::string("dynobj_") + split + ".manifest";
    dynobj::export_manifest(specs, out_path);
    std::cout << "wrote " << specs.size() << " sequences to " << out_path << "\n";
    if (!png_dir.empty()) {
      fs::create_directories(png_dir);
      int limit = std::min<int>(png_limit, static_cast<int>(specs.size()));
      for (int i = 0; i < limit; ++i) {
        auto frames = dynobj::render_sequence(specs[static_cast<size_t>(i)]);
        std::vector<vaec::Image> strip;
        for (const auto& f : frames)
          strip.push_back(
              vaec::Image{1, dynobj::kFrameSize, dynobj::kFrameSize, f});
        write_png(png_dir + "/sequence_" + std::to_string(i) + ".png", hstack(strip));
      }
      std::cout << "wrote " << limit << " preview strips to " << png_dir << "\n";
    }
    return 0;
  }
  fail("gen: task must be vaec or dynobj, got '" + task + "'");
}

// ---------------------------------------------------------------------------
// train / eval / analyze
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& run_dir,
              const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = config_from_args(config_path, overrides);
  RunDirectory run = RunDirectory::create(run_dir_for(cfg, run_dir), cfg);
  if (run.is_done()) {
    std::cout << "run " << run.root << " is already complete\n";
    return 0;
  }
  if (cfg.task == "dynobj") {
    if (!fs::exists(run.checkpoint_path("ae.ckpt"))) {
      RunRecord ae = train_autoencoder(cfg, run);
      std::cout << "autoencoder: " << ae.losses.size() << " steps, final loss "
                << fmt_g9(ae.losses.empty() ? 0.0 : ae.losses.back()) << "\n";
    }
    RunRecord pred = train_predictor(cfg, run);
    std::cout << "predictor: " << pred.losses.size() << " steps, final loss "
              << fmt_g9(pred.losses.empty() ? 0.0 : pred.losses.back()) << "\n";
  } else {
    RunRecord rec = train_analogy(cfg, run);
    std::cout << "trained " << rec.losses.size() << " iterations; final train accuracy "
              << fmt_g9(rec.final_train_accuracy) << "\n";
  }
  std::cout << "run directory: " << run.root << "\n";
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& indices_arg, const std::string& split,
             const std::vector<std::string>& overrides) {
  RunDirectory run = RunDirectory::open(run_dir);
  Config raw = Config::from_file(run.path("config.cfg"));
  raw.apply_overrides(overrides);
  ExperimentConfig cfg = ExperimentConfig::from(raw);
  if (cfg.task == "dynobj") {
    dynobj::Split sp = dynobj::parse_split(split);
    PredictionEval eval = evaluate_prediction(cfg, run, sp);
    CsvWriter csv(run.path(std::string("prediction_") + split + ".csv"), cfg.hash(),
                  "split,method,image_mse,copy_baseline_mse,sequences");
    csv.row({split, norm_method_name(cfg.norm.method), fmt_g9(eval.image_mse),
             fmt_g9(eval.copy_baseline_mse), std::to_string(eval.sequences)});
    csv.close();
    std::cout << split << " image MSE " << fmt_g9(eval.image_mse) << " (copy baseline "
              << fmt_g9(eval.copy_baseline_mse) << ")\n";
    return 0;
  }
  std::vector<int> indices = cfg.eval_indices;
  if (!indices_arg.empty()) {
    Config tmp;
    tmp.set("dataset.eval_indices", indices_arg);
    tmp.set("experiment.task", cfg.task);
    indices = ExperimentConfig::from(tmp).eval_indices;
  }
  RunRecord rec = evaluate_analogy(cfg, run, indices);
  for (const auto& [index, acc] : rec.accuracy_by_index)
    std::cout << cfg.regime(index).tag() << " accuracy " << fmt_g9(acc) << "\n";
  std::cout << "wrote " << run.path("accuracy.csv") << "\n";
  return 0;
}

int cmd_analyze(const std::string& run_dir, bool do_pca, bool do_per_dim,
                const std::string& curve_runs, const std::string& curves_out,
                const std::vector<std::string>& overrides) {
  if (!curve_runs.empty()) {
    std::vector<CurveInput> inputs;
    std::istringstream is(curve_runs);
    std::string dir;
    uint64_t hash = 0;
    while (std::getline(is, dir, ',')) {
      RunDirectory run = RunDirectory::open(dir);
      ExperimentConfig cfg = run.config();
      hash = cfg.hash();
      std::string loss_path = run.path(cfg.task == "dynobj" ? "pred_loss.csv" : "loss.csv");
      if (!fs::exists(loss_path)) throw MissingInput("no loss log at '" + loss_path + "'");
      inputs.push_back({norm_method_name(cfg.norm.method), read_loss_column(loss_path)});
    }
    check(!curves_out.empty(), "analyze --curves requires --out");
    write_curve_csv(curves_out, inputs, hash);
    std::cout << "wrote " << curves_out << "\n";
    return 0;
  }

  RunDirectory run = RunDirectory::open(run_dir);
  Config raw = Config::from_file(run.path("config.cfg"));
  raw.apply_overrides(overrides);
  ExperimentConfig cfg = ExperimentConfig::from(raw);
  check(cfg.task != "dynobj", "analyze --pca/--per-dim apply to analogy runs");
  std::string ckpt_path = run.checkpoint_path("final.ckpt");
  if (!fs::exists(ckpt_path)) throw MissingInput("no final checkpoint in '" + run.root + "'");
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  auto scorer = load_scorer(cfg, ckpt);
  RenderCache cache(cfg.image_scale);
  fs::create_directories(run.path("analysis"));

  if (cfg.norm.method == NormMethod::batch_train_stats && !scorer->norm_spec().train_stats) {
    auto train_entries = train_manifest(cfg);
    prepare_train_stats(*scorer, train_entries, cfg, cache);
  }

  if (do_per_dim) {
    auto rows = per_dimension_accuracy(*scorer, cfg, cache, cfg.eval_indices);
    CsvWriter csv(run.path("analysis/per_dim_accuracy.csv"), cfg.hash(),
                  "index,regime,dimension,accuracy,correct,total");
    for (const auto& r : rows)
      csv.row({std::to_string(r.index), cfg.regime(r.index).tag(), r.dim,
               fmt_g9(r.total == 0 ? 0.0 : static_cast<double>(r.correct) / r.total),
               std::to_string(r.correct), std::to_string(r.total)});
    csv.close();
    std::cout << "wrote " << run.path("analysis/per_dim_accuracy.csv") << "\n";
  }

  if (do_pca) {
    CsvWriter summary(run.path("analysis/pca_summary.csv"), cfg.hash(),
                      "index,regime,pc1_variance_ratio,dimension,r2,pairs");
    for (int index : cfg.eval_indices) {
      auto entries = eval_manifest(cfg, index);
      EmbeddingReport report = embedding_report(*scorer, cfg, cache, entries);
      std::string tag = cfg.regime(index).tag();
      CsvWriter pairs(run.path("analysis/pca_pairs_" + cfg.regime(index).file_tag() + ".csv"),
                      cfg.hash(), "dimension,underlying,pc1");
      for (const auto& fit : report.fits) {
        summary.row({std::to_string(index), tag, fmt_g9(report.pc1_ratio), fit.dim,
                     fmt_g9(fit.r2), std::to_string(fit.pairs)});
        for (const auto& [x, y] : fit.points) pairs.row({fit.dim, fmt_g9(x), fmt_g9(y)});
      }
      pairs.close();
    }
    summary.close();
    std::cout << "wrote " << run.path("analysis/pca_summary.csv") << "\n";
  }
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"temporal-context-normalization workbench"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate dataset manifests (and preview images)");
  std::string gen_task, gen_regime = "translation", gen_out, gen_split = "train", gen_png;
  int gen_region = 1, gen_n = 19040, gen_t = 20, gen_png_limit = 8, gen_image_scale = 1;
  uint64_t gen_seed = 1;
  gen->add_option("--task", gen_task, "vaec or dynobj")->required();
  gen->add_option("--regime", gen_regime, "translation or scale (vaec)");
  gen->add_option("--region", gen_region, "region/scale index 1..6 (vaec)");
  gen->add_option("--n", gen_n, "problems or sequences to generate");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "manifest output path");
  gen->add_option("--split", gen_split, "train or test (dynobj)");
  gen->add_option("--seq-len", gen_t, "sequence length (dynobj)");
  gen->add_option("--png", gen_png, "directory for preview PNGs");
  gen->add_option("--png-limit", gen_png_limit, "max preview images");
  gen->add_option("--image-scale", gen_image_scale, "render downscale factor for previews");

  // train
  auto* train = app.add_subcommand("train", "train a model from a config");
  std::string train_config, train_run;
  std::vector<std::string> train_set;
  train->add_option("--config", train_config, "config file");
  train->add_option("--run", train_run, "run directory (default derived from config)");
  train->add_option("--set", train_set, "override section.key=value");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a trained run");
  std::string eval_run, eval_indices, eval_split = "test";
  std::vector<std::string> eval_set;
  eval->add_option("--run", eval_run, "run directory")->required();
  eval->add_option("--indices", eval_indices, "regions/scales, e.g. 1-6 or 2,4");
  eval->add_option("--split", eval_split, "train or test (dynobj)");
  eval->add_option("--set", eval_set, "override section.key=value");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "embedding PCA, per-dimension accuracy, curves");
  std::string an_run, an_runs, an_out;
  bool an_pca = false, an_per_dim = false;
  std::vector<std::string> an_set;
  analyze->add_option("--run", an_run, "run directory");
  analyze->add_flag("--pca", an_pca, "embedding PCA report per region");
  analyze->add_flag("--per-dim", an_per_dim, "accuracy grouped by relevant dimension");
  analyze->add_option("--curves", an_runs, "comma-separated run dirs for loss-curve comparison");
  analyze->add_option("--out", an_out, "output CSV for --curves");
  analyze->add_option("--set", an_set, "override section.key=value");

  std::vector<const char*> argv;
  argv.push_back("tcnlab");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_gen(gen_task, gen_regime, gen_region, gen_n, gen_seed, gen_out, gen_split, gen_t,
                     gen_png, gen_png_limit, gen_image_scale);
    if (train->parsed()) return cmd_train(train_config, train_run, train_set);
    if (eval->parsed()) return cmd_eval(eval_run, eval_indices, eval_split, eval_set);
    if (analyze->parsed())
      return cmd_analyze(an_run, an_pca, an_per_dim, an_runs, an_out, an_set);
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace tcn
