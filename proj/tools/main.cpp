#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "acne/json_config.hpp"
#include "acne/train.hpp"

namespace {

using namespace acne;

// Data spec: a cache file path, or "task:key=value,...". Keys mirror the
// data parameters (count, n_points, outlier_ratio, noise_sigma, mnist_dir).
TaskDataset parse_data_spec(const std::string& spec) {
  if (std::filesystem::exists(spec))
    return dataset_from_cache(read_cache(spec));
  const auto colon = spec.find(':');
  const std::string task_name = spec.substr(0, colon);
  TrainConfig cfg;
  if (task_name == "line")
    cfg.task = TaskKind::line;
  else if (task_name == "mnist")
    cfg.task = TaskKind::mnist;
  else if (task_name == "stereo_synth")
    cfg.task = TaskKind::stereo_synth;
  else
    throw ConfigError("data spec is neither a file nor a known task: " + spec);
  cfg.test_size = 200;
  if (colon != std::string::npos) {
    std::stringstream rest(spec.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError("bad data spec item: " + item);
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (key == "count")
        cfg.test_size = std::stoul(value);
      else if (key == "n_points")
        cfg.n_points = std::stoul(value);
      else if (key == "outlier_ratio")
        cfg.outlier_ratio = std::stod(value);
      else if (key == "noise_sigma")
        cfg.noise_sigma = std::stod(value);
      else if (key == "mnist_dir")
        cfg.mnist_dir = value;
      else
        throw ConfigError("unknown data spec key: " + key);
    }
  }
  return build_test_dataset(cfg);
}

void print_eval(const EvalRecord& record) {
  switch (record.task) {
    case TaskKind::line:
      std::cout << "samples=" << record.count
                << " sign_min_l2=" << record.primary << "\n";
      break;
    case TaskKind::mnist:
      std::cout << "samples=" << record.count
                << " accuracy=" << record.primary << "\n";
      break;
    case TaskKind::stereo_synth:
      std::cout << "samples=" << record.count
                << " sign_min_frobenius=" << record.primary
                << " precision=" << record.precision
                << " recall=" << record.recall << " f1=" << record.f1 << "\n";
      break;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"ACNe: attentive context normalization toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, data_spec, out_file;
  std::string op_filter;
  std::size_t sample_index = 0;

  auto* train_cmd = app.add_subcommand("train", "train a model from a config");
  train_cmd->add_option("--config", config_path, "experiment JSON")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
  eval_cmd->add_option("--data", data_spec, "cache file or task:k=v,... spec")
      ->required();

  auto* gen_cmd = app.add_subcommand("gen-data", "write a dataset cache");
  std::string gen_task = "line", gen_out;
  std::size_t gen_count = 100, gen_points = 256;
  double gen_outlier = 0.7, gen_noise = 0.01;
  std::uint64_t gen_seed = 1;
  std::string gen_mnist_dir;
  gen_cmd->add_option("--task", gen_task, "line|mnist|stereo_synth");
  gen_cmd->add_option("--out", gen_out)->required();
  gen_cmd->add_option("--count", gen_count);
  gen_cmd->add_option("--n-points", gen_points);
  gen_cmd->add_option("--outlier-ratio", gen_outlier);
  gen_cmd->add_option("--noise", gen_noise);
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("--mnist-dir", gen_mnist_dir);

  auto* check_cmd = app.add_subcommand("grad-check", "64-bit gradient battery");
  check_cmd->add_option("--op", op_filter, "restrict to ops matching substring");

  auto* export_cmd =
      app.add_subcommand("export-attention", "dump attention weights as CSV");
  export_cmd->add_option("--checkpoint", checkpoint_path)->required();
  export_cmd->add_option("--sample", sample_index)->required();
  export_cmd->add_option("--data", data_spec)->required();
  export_cmd->add_option("--out", out_file);

  auto* count_cmd = app.add_subcommand("param-count", "trainable scalar count");
  count_cmd->add_option("--config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (train_cmd->parsed()) {
    ExperimentConfig config = load_experiment_file(config_path);
    std::filesystem::create_directories(out_dir);
    TrainResult result = train(config.train, config.network);
    write_log_csv(out_dir + "/log.csv", result);
    save_checkpoint(out_dir + "/best.ckpt", config.train, result.model);
    std::cout << "trained " << config.train.preset << " for "
              << result.stopped_iter << " iters; best " << result.val_metric_name
              << "=" << result.best_val << " at iter " << result.best_iter
              << "\n";
    EvalRecord test = evaluate(result.model, build_test_dataset(config.train),
                               config.train.threads);
    std::cout << "test: ";
    print_eval(test);
    return 0;
  }

  if (eval_cmd->parsed()) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    TaskDataset data = parse_data_spec(data_spec);
    EvalRecord record = evaluate(ckpt.model, data, ckpt.train.threads);
    print_eval(record);
    return 0;
  }

  if (gen_cmd->parsed()) {
    DatasetCache cache;
    if (gen_task == "line") {
      cache.task = TaskKind::line;
      cache.clouds =
          make_line_dataset(gen_count, gen_points, gen_outlier, gen_noise,
                            gen_seed);
    } else if (gen_task == "stereo_synth") {
      cache.task = TaskKind::stereo_synth;
      cache.stereo = make_stereo_dataset(gen_count, gen_points, gen_outlier,
                                         gen_noise, gen_seed);
    } else if (gen_task == "mnist") {
      cache.task = TaskKind::mnist;
      TrainConfig cfg;
      cfg.task = TaskKind::mnist;
      cfg.mnist_dir = gen_mnist_dir;
      cfg.outlier_ratio = gen_outlier;
      cfg.mnist_train_subset = gen_count;
      cache.clouds = load_mnist_task(cfg).train;
    } else {
      throw ConfigError("unknown task: " + gen_task);
    }
    write_cache(gen_out, cache);
    std::cout << "wrote " << gen_out << "\n";
    return 0;
  }

  if (check_cmd->parsed()) {
    const int failures = run_grad_checks(op_filter, std::cout);
    if (failures > 0) {
      std::cerr << failures << " gradient check(s) failed\n";
      return 3;
    }
    return 0;
  }

  if (export_cmd->parsed()) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    TaskDataset data = parse_data_spec(data_spec);
    std::string csv;
    if (data.task == TaskKind::stereo_synth) {
      if (sample_index >= data.stereo.size())
        throw ConfigError("sample index out of range");
      csv = export_attention_stereo(ckpt.model, data.stereo[sample_index]);
    } else {
      if (sample_index >= data.clouds.size())
        throw ConfigError("sample index out of range");
      csv = export_attention(ckpt.model, data.clouds[sample_index]);
    }
    if (out_file.empty()) {
      std::cout << csv;
    } else {
      std::ofstream out(out_file);
      if (!out) throw IoError("cannot write " + out_file);
      out << csv;
    }
    return 0;
  }

  if (count_cmd->parsed()) {
    ExperimentConfig config = load_experiment_file(config_path);
    ModelBundle model =
        init_model(config.network, config.train.preset, config.train.seed);
    std::cout << model_param_count(model) << "\n";
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
