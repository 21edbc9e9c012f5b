#include "acne/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "acne/adam.hpp"

namespace acne {

namespace {

// Test data derives from the data parameters only (fixed stream constant),
// so competing models trained with different seeds share the same test set.
constexpr std::uint64_t kTestSeedBase = 0x7E57DA7AULL;
constexpr std::uint64_t kValStream = 0x7A11;
constexpr std::uint64_t kTrainStream = 0x7601;
constexpr std::uint64_t kMnistDataSeed = 0x3A15;
constexpr std::uint64_t kMnistSplitSeed = 71;  // dataset identity, not training

std::size_t resolve_threads(std::size_t configured, std::size_t jobs) {
  std::size_t t =
      configured ? configured : std::thread::hardware_concurrency();
  if (t == 0) t = 1;
  return std::max<std::size_t>(1, std::min(t, jobs));
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count;
             i = next.fetch_add(1))
          fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Tensor<float> to_f32(const std::vector<double>& v, Shape shape) {
  std::vector<float> data(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    data[i] = static_cast<float>(v[i]);
  return Tensor<float>(std::move(shape), std::move(data));
}

template <typename Params>
Params clone_params(const Params& params) {
  Params copy = params;
  for_each_param(copy, [](const std::string&, Tensor<float>& t) {
    t = Tensor<float>(t.shape(), t.data());
  });
  return copy;
}

ModelBundle clone_model(const ModelBundle& model) {
  ModelBundle copy = model;
  if (model.is_irls)
    copy.irls = clone_params(model.irls);
  else
    copy.params = clone_params(model.params);
  return copy;
}

struct SampleOutcome {
  double loss = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<Tensor<float>> grads;
};

LearntIrlsParams<float> attach_params_irls(const LearntIrlsParams<float>& p,
                                           Tape<float>& tape) {
  LearntIrlsParams<float> live = p;
  for_each_param(live,
                 [&](const std::string&, Tensor<float>& t) { t = tape.var(t); });
  return live;
}

std::optional<Tensor<float>> supervised_scores(
    const ForwardResult<float>& fwd, const NetworkConfig& net) {
  if (!net.attention.supervise_local || !fwd.output || !fwd.output->local)
    return std::nullopt;
  return fwd.output->local;
}

std::vector<Tensor<float>> intermediate_locals(const ForwardResult<float>& fwd,
                                               const NetworkConfig& net) {
  std::vector<Tensor<float>> out;
  if (!net.attention.supervise_local || !net.attention.use_local) return out;
  // Supervise the last ACN of every ARB.
  for (std::size_t k = 0; k < net.arb_count; ++k) {
    const std::size_t idx = k * net.acn_per_arb + (net.acn_per_arb - 1);
    if (idx < fwd.per_unit.size() && fwd.per_unit[idx].local)
      out.push_back(*fwd.per_unit[idx].local);
  }
  return out;
}

SampleOutcome cloud_pass(const ModelBundle& model, const TrainConfig& cfg,
                         const PointCloudSample& sample, std::size_t step,
                         bool with_grads) {
  SampleOutcome outcome;
  Tape<float> tape;
  Tensor<float> pts = to_f32(sample.points, {sample.n, sample.d});
  if (model.is_irls) {
    LearntIrlsParams<float> live =
        with_grads ? attach_params_irls(model.irls, tape) : model.irls;
    auto fwd = learnt_irls_forward(pts, live, model.net.irls_unroll);
    auto terms = loss_line_fitting(fwd.theta, sample.theta,
                                   fwd.sigmoid_scores.back(), sample.labels,
                                   cfg.loss);
    outcome.loss = terms.total.value();
    outcome.alpha = terms.alpha_term;
    outcome.beta = terms.beta_term;
    if (with_grads) {
      tape.backward(terms.total);
      for_each_param(live, [&](const std::string&, Tensor<float>& t) {
        outcome.grads.push_back(tape.grad(t));
      });
    }
    return outcome;
  }
  NetworkParams<float> live =
      with_grads ? attach_params(model.params, tape) : model.params;
  auto fwd = network_forward(live, model.net, pts);
  LossTerms<float> terms;
  if (model.net.head == HeadKind::classify) {
    auto logits = classification_head(fwd.features, fwd.weights, *live.head,
                                      model.net.pool);
    terms.total =
        loss_classification(logits, static_cast<std::size_t>(sample.class_id));
  } else {
    auto theta = fit_line(pts, fwd.weights);
    terms = loss_line_fitting(theta, sample.theta,
                              supervised_scores(fwd, model.net),
                              sample.labels, cfg.loss);
  }
  (void)step;
  outcome.loss = terms.total.value();
  outcome.alpha = terms.alpha_term;
  outcome.beta = terms.beta_term;
  outcome.gamma = terms.gamma_term;
  if (!std::isfinite(outcome.loss))
    throw NumericError("training loss diverged (non-finite)");
  if (with_grads) {
    tape.backward(terms.total);
    outcome.grads = collect_gradients(live, tape);
  }
  return outcome;
}

SampleOutcome stereo_pass(const ModelBundle& model, const TrainConfig& cfg,
                          const CorrespondenceSample& sample, std::size_t step,
                          bool with_grads) {
  SampleOutcome outcome;
  Tape<float> tape;
  Tensor<float> coords = to_f32(sample.coords, {sample.n, 4});
  NetworkParams<float> live =
      with_grads ? attach_params(model.params, tape) : model.params;
  auto fwd = network_forward(live, model.net, coords);
  auto fhat = eightpoint_weighted(coords, fwd.weights);
  auto terms = loss_stereo(fhat, sample.fstar,
                           supervised_scores(fwd, model.net),
                           intermediate_locals(fwd, model.net), sample.labels,
                           cfg.loss, step);
  outcome.loss = terms.total.value();
  outcome.alpha = terms.alpha_term;
  outcome.beta = terms.beta_term;
  outcome.gamma = terms.gamma_term;
  if (!std::isfinite(outcome.loss))
    throw NumericError("training loss diverged (non-finite)");
  if (with_grads) {
    tape.backward(terms.total);
    outcome.grads = collect_gradients(live, tape);
  }
  return outcome;
}

bool metric_improved(TaskKind task, double candidate, double incumbent) {
  return task == TaskKind::mnist ? candidate > incumbent
                                 : candidate < incumbent;
}

}  // namespace

ModelBundle init_model(const NetworkConfig& net, const std::string& preset,
                       std::uint64_t seed) {
  ModelBundle model;
  model.net = net;
  model.is_irls = (preset == "learnt_irls_line");
  if (model.is_irls)
    model.irls = init_learnt_irls<float>(net.irls_hidden, seed);
  else
    model.params = init_network_params<float>(net, seed);
  return model;
}

std::size_t model_param_count(const ModelBundle& model) {
  std::size_t count = 0;
  ModelBundle& m = const_cast<ModelBundle&>(model);
  if (model.is_irls)
    for_each_param(m.irls,
                   [&](const std::string&, Tensor<float>& t) { count += t.size(); });
  else
    count = param_count(model.params);
  return count;
}

TaskDataset dataset_from_cache(const DatasetCache& cache) {
  TaskDataset data;
  data.task = cache.task;
  data.clouds = cache.clouds;
  data.stereo = cache.stereo;
  return data;
}

TaskDataset build_test_dataset(const TrainConfig& cfg) {
  TaskDataset data;
  data.task = cfg.task;
  switch (cfg.task) {
    case TaskKind::line:
      data.clouds = make_line_dataset(cfg.test_size, cfg.n_points,
                                      cfg.outlier_ratio, cfg.noise_sigma,
                                      kTestSeedBase);
      break;
    case TaskKind::stereo_synth:
      data.stereo = make_stereo_dataset(cfg.test_size, cfg.n_points,
                                        cfg.outlier_ratio, cfg.noise_sigma,
                                        kTestSeedBase);
      break;
    case TaskKind::mnist:
      data.clouds = load_mnist_task(cfg).test;
      break;
  }
  return data;
}

MnistTask load_mnist_task(const TrainConfig& cfg) {
  if (cfg.mnist_dir.empty())
    throw IoError("mnist task requires mnist_dir (directory with the IDX files)");
  const std::string base = cfg.mnist_dir + "/";
  IdxImages train_images = idx_read_images(base + "train-images-idx3-ubyte");
  IdxLabels train_labels = idx_read_labels(base + "train-labels-idx1-ubyte");
  IdxImages test_images = idx_read_images(base + "t10k-images-idx3-ubyte");
  IdxLabels test_labels = idx_read_labels(base + "t10k-labels-idx1-ubyte");

  // Pool all 70k samples, then 8:1:1.
  IdxImages pool = train_images;
  pool.count += test_images.count;
  pool.pixels.insert(pool.pixels.end(), test_images.pixels.begin(),
                     test_images.pixels.end());
  IdxLabels pool_labels = train_labels;
  pool_labels.labels.insert(pool_labels.labels.end(),
                            test_labels.labels.begin(),
                            test_labels.labels.end());

  auto split = split_dataset(pool.count, {0.8, 0.1, 0.1}, kMnistSplitSeed);
  std::vector<std::size_t> train_idx = split.train;
  if (cfg.mnist_train_subset > 0 && cfg.mnist_train_subset < train_idx.size())
    train_idx.resize(cfg.mnist_train_subset);
  std::vector<std::size_t> val_idx = split.val;
  if (cfg.val_size > 0 && cfg.val_size < val_idx.size())
    val_idx.resize(cfg.val_size);
  std::vector<std::size_t> test_idx = split.test;
  if (cfg.test_size > 0 && cfg.test_size < test_idx.size())
    test_idx.resize(cfg.test_size);

  MnistTask task;
  task.train = make_mnist_clouds(pool, pool_labels, train_idx,
                                 cfg.outlier_ratio, kMnistDataSeed);
  task.val = make_mnist_clouds(pool, pool_labels, val_idx, cfg.outlier_ratio,
                               kMnistDataSeed);
  task.test = make_mnist_clouds(pool, pool_labels, test_idx, cfg.outlier_ratio,
                                kMnistDataSeed);
  return task;
}

EvalRecord evaluate(const ModelBundle& model, const TaskDataset& data,
                    std::size_t threads) {
  EvalRecord record;
  record.task = data.task;
  const std::size_t count =
      data.task == TaskKind::stereo_synth ? data.stereo.size()
                                          : data.clouds.size();
  record.count = count;
  if (count == 0) return record;
  const std::size_t workers = resolve_threads(threads, count);

  if (data.task == TaskKind::stereo_synth) {
    std::vector<double> ferr(count);
    std::vector<std::array<std::size_t, 3>> tally(count);  // tp, fp, fn
    parallel_for(count, workers, [&](std::size_t i) {
      const auto& s = data.stereo[i];
      Tensor<float> coords = to_f32(s.coords, {s.n, 4});
      auto fwd = network_forward(model.params, model.net, coords);
      auto fhat_t = eightpoint_weighted(coords, fwd.weights);
      FundamentalMatrix fhat;
      for (int j = 0; j < 9; ++j)
        fhat.f[j] = static_cast<double>(fhat_t.data()[j]);
      fhat = rank2_project(fhat);
      ferr[i] = sign_min_frobenius(fhat.f, s.fstar);
      auto& t = tally[i];
      t = {0, 0, 0};
      if (fwd.output && fwd.output->local) {
        const auto& scores = fwd.output->local->data();
        for (std::size_t p = 0; p < s.n; ++p) {
          const bool pred = scores[p] > 0.5f;
          if (pred && s.labels[p]) ++t[0];
          if (pred && !s.labels[p]) ++t[1];
          if (!pred && s.labels[p]) ++t[2];
        }
      }
    });
    double sum = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < count; ++i) {
      sum += ferr[i];
      tp += tally[i][0];
      fp += tally[i][1];
      fn += tally[i][2];
    }
    record.primary = sum / double(count);
    record.precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    record.recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    record.f1 = record.precision + record.recall > 0
                    ? 2 * record.precision * record.recall /
                          (record.precision + record.recall)
                    : 0.0;
    return record;
  }

  if (data.task == TaskKind::mnist) {
    std::vector<char> correct(count, 0);
    parallel_for(count, workers, [&](std::size_t i) {
      const auto& s = data.clouds[i];
      Tensor<float> pts = to_f32(s.points, {s.n, s.d});
      auto fwd = network_forward(model.params, model.net, pts);
      auto logits = classification_head(fwd.features, fwd.weights,
                                        *model.params.head, model.net.pool);
      std::size_t arg = 0;
      for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits.data()[c] > logits.data()[arg]) arg = c;
      correct[i] = (static_cast<int>(arg) == s.class_id) ? 1 : 0;
    });
    std::size_t good = 0;
    for (char c : correct) good += c;
    record.primary = double(good) / double(count);
    return record;
  }

  // line task (network or learnt IRLS)
  std::vector<double> errs(count);
  parallel_for(count, workers, [&](std::size_t i) {
    const auto& s = data.clouds[i];
    Tensor<float> pts = to_f32(s.points, {s.n, s.d});
    Tensor<float> theta_t;
    if (model.is_irls) {
      auto fwd = learnt_irls_forward(pts, model.irls, model.net.irls_unroll);
      theta_t = fwd.theta;
    } else {
      auto fwd = network_forward(model.params, model.net, pts);
      theta_t = fit_line(pts, fwd.weights);
    }
    std::array<double, 3> est = {static_cast<double>(theta_t.data()[0]),
                                 static_cast<double>(theta_t.data()[1]),
                                 static_cast<double>(theta_t.data()[2])};
    errs[i] = sign_min_l2_distance(est, s.theta);
  });
  double sum = 0.0;
  for (double e : errs) sum += e;
  record.primary = sum / double(count);
  return record;
}

TrainResult train(const TrainConfig& cfg, const NetworkConfig& net) {
  cfg.validate();
  net.validate();
  const bool is_irls = cfg.preset == "learnt_irls_line";
  if (is_irls && cfg.task != TaskKind::line)
    throw ConfigError("learnt_irls_line preset only supports the line task");
  if (!is_irls) {
    const bool head_ok =
        (cfg.task == TaskKind::line && net.head == HeadKind::line_fit) ||
        (cfg.task == TaskKind::mnist && net.head == HeadKind::classify) ||
        (cfg.task == TaskKind::stereo_synth &&
         net.head == HeadKind::fundamental);
    if (!head_ok) throw ConfigError("network head does not match the task");
  }

  TrainResult result;
  result.model = init_model(net, cfg.preset, cfg.seed);
  result.val_metric_name = cfg.task == TaskKind::mnist ? "accuracy"
                           : cfg.task == TaskKind::line
                               ? "sign_min_l2"
                               : "sign_min_frobenius";

  // Validation data
  TaskDataset val_data;
  val_data.task = cfg.task;
  MnistTask mnist;
  if (cfg.task == TaskKind::mnist) {
    mnist = load_mnist_task(cfg);
    val_data.clouds = mnist.val;
  } else if (cfg.task == TaskKind::line) {
    val_data.clouds =
        make_line_dataset(cfg.val_size, cfg.n_points, cfg.outlier_ratio,
                          cfg.noise_sigma, mix_seed(cfg.seed, kValStream));
  } else {
    val_data.stereo =
        make_stereo_dataset(cfg.val_size, cfg.n_points, cfg.outlier_ratio,
                            cfg.noise_sigma, mix_seed(cfg.seed, kValStream));
  }

  // Optimizer state over the live parameter slots.
  std::vector<Tensor<float>*> param_ptrs;
  if (is_irls)
    for_each_param(result.model.irls, [&](const std::string&, Tensor<float>& t) {
      param_ptrs.push_back(&t);
    });
  else
    for_each_param(result.model.params,
                   [&](const std::string&, Tensor<float>& t) {
                     param_ptrs.push_back(&t);
                   });
  AdamState<float> adam;
  adam.lr = static_cast<float>(cfg.learning_rate);

  const std::uint64_t train_base = mix_seed(cfg.seed, kTrainStream);
  const std::size_t workers = resolve_threads(cfg.threads, cfg.batch_size);

  // MNIST epoch shuffling state.
  Rng epoch_rng(mix_seed(cfg.seed, 0xE90C));
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  auto next_mnist_index = [&]() {
    if (cursor >= order.size()) {
      order.resize(mnist.train.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[epoch_rng.below(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  ModelBundle best;
  bool has_best = false;
  double best_val = 0.0;
  std::size_t best_iter = 0;
  std::size_t evals_since_best = 0;
  double window_loss = 0.0, window_alpha = 0.0, window_beta = 0.0,
         window_gamma = 0.0;
  std::size_t window_n = 0;
  auto window_start = std::chrono::steady_clock::now();
  std::size_t last_iter = 0;

  std::vector<PointCloudSample> scratch_clouds(cfg.batch_size);
  std::vector<CorrespondenceSample> scratch_corrs(cfg.batch_size);
  std::vector<const PointCloudSample*> batch_clouds(cfg.batch_size, nullptr);
  std::vector<SampleOutcome> outcomes(cfg.batch_size);

  for (std::size_t iter = 1; iter <= cfg.total_iters; ++iter) {
    last_iter = iter;
    const std::size_t step = iter - 1;
    if (cfg.task == TaskKind::mnist)
      for (std::size_t b = 0; b < cfg.batch_size; ++b)
        batch_clouds[b] = &mnist.train[next_mnist_index()];

    try {
      parallel_for(cfg.batch_size, workers, [&](std::size_t b) {
        const std::uint64_t sample_seed =
            mix_seed(train_base, step * cfg.batch_size + b);
        switch (cfg.task) {
          case TaskKind::line:
            scratch_clouds[b] = gen_line_data(cfg.n_points, cfg.outlier_ratio,
                                              cfg.noise_sigma, sample_seed);
            outcomes[b] = cloud_pass(result.model, cfg, scratch_clouds[b],
                                     step, true);
            break;
          case TaskKind::mnist:
            outcomes[b] =
                cloud_pass(result.model, cfg, *batch_clouds[b], step, true);
            break;
          case TaskKind::stereo_synth:
            scratch_corrs[b] = gen_synthetic_correspondences(
                cfg.n_points, cfg.outlier_ratio, cfg.noise_sigma, sample_seed);
            outcomes[b] = stereo_pass(result.model, cfg, scratch_corrs[b],
                                      step, true);
            break;
        }
      });
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at iteration " +
                         std::to_string(iter));
    }

    // Average gradients in batch order.
    std::vector<Tensor<float>> grads = outcomes[0].grads;
    for (std::size_t b = 1; b < cfg.batch_size; ++b)
      for (std::size_t p = 0; p < grads.size(); ++p) {
        auto& acc = grads[p].mutable_data();
        const auto& add = outcomes[b].grads[p].data();
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += add[j];
      }
    const float inv_batch = 1.0f / static_cast<float>(cfg.batch_size);
    for (auto& g : grads)
      for (auto& v : g.mutable_data()) v *= inv_batch;
    try {
      adam_step(param_ptrs, grads, adam);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at iteration " +
                         std::to_string(iter));
    }

    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      window_loss += outcomes[b].loss;
      window_alpha += outcomes[b].alpha;
      window_beta += outcomes[b].beta;
      window_gamma += outcomes[b].gamma;
      ++window_n;
    }

    if (iter % cfg.eval_every == 0 || iter == cfg.total_iters) {
      EvalRecord val = evaluate(result.model, val_data, cfg.threads);
      const auto now = std::chrono::steady_clock::now();
      TrainRow row;
      row.iter = iter;
      row.train_loss = window_loss / double(window_n);
      row.val_metric = val.primary;
      row.alpha_term = window_alpha / double(window_n);
      row.beta_term = window_beta / double(window_n);
      row.gamma_term = window_gamma / double(window_n);
      row.wall_ms = std::chrono::duration<double, std::milli>(now - window_start)
                        .count();
      result.log.push_back(row);
      window_loss = window_alpha = window_beta = window_gamma = 0.0;
      window_n = 0;
      window_start = now;

      if (!has_best || metric_improved(cfg.task, val.primary, best_val)) {
        // Snapshot only when a patience window is active: fixed-length runs
        // (patience 0, infinite synthetic data) keep the final parameters.
        if (cfg.early_stop_patience > 0) best = clone_model(result.model);
        has_best = true;
        best_val = val.primary;
        best_iter = iter;
        evals_since_best = 0;
      } else if (cfg.early_stop_patience > 0 &&
                 ++evals_since_best >= cfg.early_stop_patience) {
        break;
      }
    }
  }

  if (cfg.early_stop_patience > 0 && has_best) result.model = best;
  result.best_val = best_val;
  result.best_iter = best_iter;
  result.stopped_iter = last_iter;
  return result;
}

void write_log_csv(const std::string& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write log: " + path);
  out << "# val_metric: " << result.val_metric_name << "\n";
  out << "iter,train_loss,val_metric,alpha_term,beta_term,gamma_term,wall_ms\n";
  char buf[256];
  for (const auto& row : result.log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n",
                  row.iter, row.train_loss, row.val_metric, row.alpha_term,
                  row.beta_term, row.gamma_term, row.wall_ms);
    out << buf;
  }
}

namespace {

void append_attention_rows(std::ostringstream& out,
                           const AttentionRecord<float>& rec,
                           std::size_t layer, std::size_t acn,
                           const std::vector<std::uint8_t>& labels) {
  const std::size_t n = rec.blended.size();
  for (std::size_t p = 0; p < n; ++p) {
    out << layer << ',' << acn << ',' << p << ',';
    if (rec.local) out << (*rec.local)(p);
    out << ',';
    if (rec.global_w) out << (*rec.global_w)(p);
    out << ',' << rec.blended(p) << ','
        << (p < labels.size() ? int(labels[p]) : 0) << '\n';
  }
}

std::string attention_csv(const ModelBundle& model,
                          const ForwardResult<float>& fwd,
                          const std::vector<std::uint8_t>& labels) {
  std::ostringstream out;
  out << "layer_index,acn_index,point_index,w_local,w_global,w_blended,"
         "inlier_label\n";
  for (std::size_t u = 0; u < fwd.per_unit.size(); ++u)
    append_attention_rows(out, fwd.per_unit[u], u / model.net.acn_per_arb,
                          u % model.net.acn_per_arb, labels);
  if (fwd.output)
    append_attention_rows(out, *fwd.output, model.net.arb_count, 0, labels);
  return out.str();
}

}  // namespace

std::string export_attention(const ModelBundle& model,
                             const PointCloudSample& sample) {
  if (model.is_irls)
    throw ConfigError("attention export requires a network model");
  Tensor<float> pts = to_f32(sample.points, {sample.n, sample.d});
  auto fwd = network_forward(model.params, model.net, pts);
  return attention_csv(model, fwd, sample.labels);
}

std::string export_attention_stereo(const ModelBundle& model,
                                    const CorrespondenceSample& sample) {
  if (model.is_irls)
    throw ConfigError("attention export requires a network model");
  Tensor<float> coords = to_f32(sample.coords, {sample.n, 4});
  auto fwd = network_forward(model.params, model.net, coords);
  return attention_csv(model, fwd, sample.labels);
}

}  // namespace acne
