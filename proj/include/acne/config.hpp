#pragma once

#include <cstdint>
#include <string>

#include "acne/error.hpp"

namespace acne {

enum class NormKind { cn, acn, none };
enum class PostNorm { group_norm, none };
enum class AttentionPlacement { on_normalization, on_feature_map };
enum class OutputActivation { sigmoid_softmax, relu_tanh };
enum class HeadKind { line_fit, classify, fundamental };
enum class PoolKind { attentive_mean, max };

struct AttentionConfig {
  bool use_local = true;
  bool use_global = true;
  bool supervise_local = true;
  AttentionPlacement placement = AttentionPlacement::on_normalization;
  OutputActivation output_activation = OutputActivation::sigmoid_softmax;
};

struct NetworkConfig {
  std::size_t arb_count = 6;    // K
  std::size_t channels = 128;   // C
  std::size_t acn_per_arb = 2;
  NormKind norm_kind = NormKind::acn;
  PostNorm post_norm = PostNorm::group_norm;
  std::size_t gn_groups = 32;
  AttentionConfig attention;
  std::size_t input_dim = 2;    // D
  HeadKind head = HeadKind::line_fit;
  std::size_t num_classes = 10;
  PoolKind pool = PoolKind::attentive_mean;
  // learnt-IRLS variant (used when the preset selects it)
  std::size_t irls_hidden = 16;
  std::size_t irls_unroll = 6;

  // True when the output attention block exists (all heads that consume w).
  bool has_output_attention() const {
    return !(head == HeadKind::classify && pool == PoolKind::max);
  }
  bool output_local() const {
    if (!has_output_attention()) return false;
    if (attention.output_activation == OutputActivation::relu_tanh) return true;
    return attention.use_local || !attention.use_global;
  }
  bool output_global() const {
    if (!has_output_attention()) return false;
    if (attention.output_activation == OutputActivation::relu_tanh) return false;
    return attention.use_global;
  }
  bool unit_attention() const { return norm_kind == NormKind::acn; }

  void validate() const {
    if (arb_count < 1) throw ConfigError("arb_count must be >= 1");
    if (acn_per_arb < 1 || acn_per_arb > 3)
      throw ConfigError("acn_per_arb must be in {1,2,3}");
    if (channels == 0 || input_dim == 0)
      throw ConfigError("channels and input_dim must be positive");
    if (post_norm == PostNorm::group_norm && channels % gn_groups != 0)
      throw ConfigError("channels (" + std::to_string(channels) +
                        ") must be divisible by gn_groups (" +
                        std::to_string(gn_groups) + ")");
    if (norm_kind == NormKind::acn && !attention.use_local &&
        !attention.use_global)
      throw ConfigError("ACN requires local or global attention");
    if (attention.supervise_local && norm_kind == NormKind::acn &&
        !attention.use_local)
      throw ConfigError("supervise_local requires local attention");
    if (head == HeadKind::classify && num_classes < 2)
      throw ConfigError("classify head needs num_classes >= 2");
  }
};

struct LossWeights {
  double alpha = 0.1;
  double beta = 1.0;
  double gamma = 1.0;
  std::size_t alpha_enable_step = 0;  // 20000 for full-scale stereo
};

enum class TaskKind { line, mnist, stereo_synth };

struct TrainConfig {
  TaskKind task = TaskKind::line;
  std::string preset = "acne_line";
  std::size_t batch_size = 16;
  std::size_t total_iters = 10000;
  std::size_t eval_every = 500;
  std::size_t early_stop_patience = 20;  // eval intervals; 0 disables
  LossWeights loss;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
  // data parameters
  double outlier_ratio = 0.7;
  std::size_t n_points = 256;
  double noise_sigma = 0.01;
  std::size_t val_size = 128;
  std::size_t test_size = 1000;
  std::string mnist_dir;                 // directory with the IDX files
  std::size_t mnist_train_subset = 10000;
  std::string precision = "f32";
  std::size_t threads = 0;               // 0 = hardware concurrency

  void validate() const {
    if (total_iters == 0) throw ConfigError("total_iters must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (eval_every == 0) throw ConfigError("eval_every must be positive");
    if (outlier_ratio < 0.0 || outlier_ratio >= 1.0)
      throw ConfigError("outlier_ratio must be in [0, 1)");
    if (precision != "f32")
      throw ConfigError("training runs in f32; f64 is reserved for oracles");
  }
};

}  // namespace acne
