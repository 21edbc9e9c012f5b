#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "acne/baselines.hpp"
#include "acne/config.hpp"
#include "acne/data.hpp"
#include "acne/layers.hpp"
#include "acne/losses.hpp"

namespace acne {

// One metrics-log row per eval interval. CSV header:
// iter,train_loss,val_metric,alpha_term,beta_term,gamma_term,wall_ms
struct TrainRow {
  std::size_t iter = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double alpha_term = 0.0;
  double beta_term = 0.0;
  double gamma_term = 0.0;
  double wall_ms = 0.0;
};

struct EvalRecord {
  TaskKind task = TaskKind::line;
  double primary = 0.0;  // line: sign-min l2 | mnist: accuracy | stereo: F err
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t count = 0;
};

// A trainable/checkpointable model: an ACNe-family network or the
// learnt-IRLS kernel (preset "learnt_irls_line").
struct ModelBundle {
  bool is_irls = false;
  NetworkConfig net;
  NetworkParams<float> params;
  LearntIrlsParams<float> irls;
};

ModelBundle init_model(const NetworkConfig& net, const std::string& preset,
                       std::uint64_t seed);

std::size_t model_param_count(const ModelBundle& model);

struct TrainResult {
  ModelBundle model;  // best-validation parameters
  std::vector<TrainRow> log;
  double best_val = 0.0;
  std::size_t best_iter = 0;
  std::size_t stopped_iter = 0;
  std::string val_metric_name;
};

TrainResult train(const TrainConfig& cfg, const NetworkConfig& net);

// In-memory evaluation datasets.
struct TaskDataset {
  TaskKind task = TaskKind::line;
  std::vector<PointCloudSample> clouds;
  std::vector<CorrespondenceSample> stereo;
};

TaskDataset dataset_from_cache(const DatasetCache& cache);

// Deterministic held-out test set: depends on the data parameters only,
// never on the training seed, so competing models share it.
TaskDataset build_test_dataset(const TrainConfig& cfg);

EvalRecord evaluate(const ModelBundle& model, const TaskDataset& data,
                    std::size_t threads = 0);

// MNIST: 70k pool (train+t10k), 8:1:1 split on a fixed dataset seed, then
// the configured train subset. Throws IoError when the IDX files are absent.
struct MnistTask {
  std::vector<PointCloudSample> train;
  std::vector<PointCloudSample> val;
  std::vector<PointCloudSample> test;
};
MnistTask load_mnist_task(const TrainConfig& cfg);

void write_log_csv(const std::string& path, const TrainResult& result);

// Attention dump: layer_index,acn_index,point_index,w_local,w_global,
// w_blended,inlier_label (+ a final block at layer_index = K).
std::string export_attention(const ModelBundle& model,
                             const PointCloudSample& sample);
std::string export_attention_stereo(const ModelBundle& model,
                                    const CorrespondenceSample& sample);

// Checkpoints ("ACNCKPT1": config JSON blob + named f32 tensors).
void save_checkpoint(const std::string& path, const TrainConfig& cfg,
                     const ModelBundle& model);
struct Checkpoint {
  TrainConfig train;
  ModelBundle model;
};
Checkpoint load_checkpoint(const std::string& path);

// 64-bit gradient battery behind the `grad-check` CLI verb. Returns the
// number of failing checks and prints one line per operation.
int run_grad_checks(const std::string& op_filter, std::ostream& out);

}  // namespace acne
