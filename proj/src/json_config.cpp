#include "acne/json_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "acne/baselines.hpp"

namespace acne {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

TaskKind task_from_string(const std::string& s) {
  if (s == "line") return TaskKind::line;
  if (s == "mnist") return TaskKind::mnist;
  if (s == "stereo_synth") return TaskKind::stereo_synth;
  throw ConfigError("unknown task: " + s);
}

std::string task_to_string(TaskKind t) {
  switch (t) {
    case TaskKind::line: return "line";
    case TaskKind::mnist: return "mnist";
    case TaskKind::stereo_synth: return "stereo_synth";
  }
  return "line";
}

NormKind norm_from_string(const std::string& s) {
  if (s == "cn") return NormKind::cn;
  if (s == "acn") return NormKind::acn;
  if (s == "none") return NormKind::none;
  throw ConfigError("unknown norm_kind: " + s);
}

std::string norm_to_string(NormKind n) {
  switch (n) {
    case NormKind::cn: return "cn";
    case NormKind::acn: return "acn";
    case NormKind::none: return "none";
  }
  return "acn";
}

HeadKind head_from_string(const std::string& s) {
  if (s == "line_fit") return HeadKind::line_fit;
  if (s == "classify") return HeadKind::classify;
  if (s == "fundamental") return HeadKind::fundamental;
  throw ConfigError("unknown head: " + s);
}

std::string head_to_string(HeadKind h) {
  switch (h) {
    case HeadKind::line_fit: return "line_fit";
    case HeadKind::classify: return "classify";
    case HeadKind::fundamental: return "fundamental";
  }
  return "line_fit";
}

void apply_attention(const json& obj, AttentionConfig& att) {
  reject_unknown(obj,
                 {"use_local", "use_global", "supervise_local", "placement",
                  "output_activation"},
                 "network.attention");
  if (obj.contains("use_local")) att.use_local = obj["use_local"].get<bool>();
  if (obj.contains("use_global"))
    att.use_global = obj["use_global"].get<bool>();
  if (obj.contains("supervise_local"))
    att.supervise_local = obj["supervise_local"].get<bool>();
  if (obj.contains("placement")) {
    const std::string p = obj["placement"].get<std::string>();
    if (p == "on_normalization")
      att.placement = AttentionPlacement::on_normalization;
    else if (p == "on_feature_map")
      att.placement = AttentionPlacement::on_feature_map;
    else
      throw ConfigError("unknown attention placement: " + p);
  }
  if (obj.contains("output_activation")) {
    const std::string a = obj["output_activation"].get<std::string>();
    if (a == "sigmoid_softmax")
      att.output_activation = OutputActivation::sigmoid_softmax;
    else if (a == "relu_tanh")
      att.output_activation = OutputActivation::relu_tanh;
    else
      throw ConfigError("unknown output_activation: " + a);
  }
}

void apply_network(const json& obj, NetworkConfig& net) {
  reject_unknown(obj,
                 {"arb_count", "channels", "acn_per_arb", "norm_kind",
                  "post_norm", "gn_groups", "attention", "input_dim", "head",
                  "num_classes", "pool", "irls_hidden", "irls_unroll"},
                 "network");
  if (obj.contains("arb_count")) net.arb_count = obj["arb_count"].get<std::size_t>();
  if (obj.contains("channels")) net.channels = obj["channels"].get<std::size_t>();
  if (obj.contains("acn_per_arb"))
    net.acn_per_arb = obj["acn_per_arb"].get<std::size_t>();
  if (obj.contains("norm_kind"))
    net.norm_kind = norm_from_string(obj["norm_kind"].get<std::string>());
  if (obj.contains("post_norm")) {
    const std::string p = obj["post_norm"].get<std::string>();
    if (p == "group_norm")
      net.post_norm = PostNorm::group_norm;
    else if (p == "none")
      net.post_norm = PostNorm::none;
    else
      throw ConfigError("unknown post_norm: " + p);
  }
  if (obj.contains("gn_groups")) net.gn_groups = obj["gn_groups"].get<std::size_t>();
  if (obj.contains("attention")) apply_attention(obj["attention"], net.attention);
  if (obj.contains("input_dim")) net.input_dim = obj["input_dim"].get<std::size_t>();
  if (obj.contains("head"))
    net.head = head_from_string(obj["head"].get<std::string>());
  if (obj.contains("num_classes"))
    net.num_classes = obj["num_classes"].get<std::size_t>();
  if (obj.contains("pool")) {
    const std::string p = obj["pool"].get<std::string>();
    if (p == "attentive_mean")
      net.pool = PoolKind::attentive_mean;
    else if (p == "max")
      net.pool = PoolKind::max;
    else
      throw ConfigError("unknown pool: " + p);
  }
  if (obj.contains("irls_hidden"))
    net.irls_hidden = obj["irls_hidden"].get<std::size_t>();
  if (obj.contains("irls_unroll"))
    net.irls_unroll = obj["irls_unroll"].get<std::size_t>();
}

void apply_loss(const json& obj, LossWeights& lw) {
  reject_unknown(obj, {"alpha", "beta", "gamma", "alpha_enable_step"},
                 "train.loss");
  if (obj.contains("alpha")) lw.alpha = obj["alpha"].get<double>();
  if (obj.contains("beta")) lw.beta = obj["beta"].get<double>();
  if (obj.contains("gamma")) lw.gamma = obj["gamma"].get<double>();
  if (obj.contains("alpha_enable_step"))
    lw.alpha_enable_step = obj["alpha_enable_step"].get<std::size_t>();
}

void apply_train(const json& obj, TrainConfig& cfg) {
  reject_unknown(
      obj, {"task", "preset", "batch_size", "total_iters", "eval_every",
            "early_stop_patience", "loss", "seed", "learning_rate",
            "outlier_ratio", "n_points", "noise_sigma", "val_size",
            "test_size", "mnist_dir", "mnist_train_subset", "precision",
            "threads"},
      "train");
  if (obj.contains("task"))
    cfg.task = task_from_string(obj["task"].get<std::string>());
  if (obj.contains("preset")) cfg.preset = obj["preset"].get<std::string>();
  if (obj.contains("batch_size"))
    cfg.batch_size = obj["batch_size"].get<std::size_t>();
  if (obj.contains("total_iters"))
    cfg.total_iters = obj["total_iters"].get<std::size_t>();
  if (obj.contains("eval_every"))
    cfg.eval_every = obj["eval_every"].get<std::size_t>();
  if (obj.contains("early_stop_patience"))
    cfg.early_stop_patience = obj["early_stop_patience"].get<std::size_t>();
  if (obj.contains("loss")) apply_loss(obj["loss"], cfg.loss);
  if (obj.contains("seed")) cfg.seed = obj["seed"].get<std::uint64_t>();
  if (obj.contains("learning_rate"))
    cfg.learning_rate = obj["learning_rate"].get<double>();
  if (obj.contains("outlier_ratio"))
    cfg.outlier_ratio = obj["outlier_ratio"].get<double>();
  if (obj.contains("n_points")) cfg.n_points = obj["n_points"].get<std::size_t>();
  if (obj.contains("noise_sigma"))
    cfg.noise_sigma = obj["noise_sigma"].get<double>();
  if (obj.contains("val_size")) cfg.val_size = obj["val_size"].get<std::size_t>();
  if (obj.contains("test_size"))
    cfg.test_size = obj["test_size"].get<std::size_t>();
  if (obj.contains("mnist_dir"))
    cfg.mnist_dir = obj["mnist_dir"].get<std::string>();
  if (obj.contains("mnist_train_subset"))
    cfg.mnist_train_subset = obj["mnist_train_subset"].get<std::size_t>();
  if (obj.contains("precision"))
    cfg.precision = obj["precision"].get<std::string>();
  if (obj.contains("threads")) cfg.threads = obj["threads"].get<std::size_t>();
}

}  // namespace

ExperimentConfig parse_experiment_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config JSON parse error: ") + e.what());
  }
  reject_unknown(root, {"train", "network"}, "config root");
  ExperimentConfig config;
  if (root.contains("train")) apply_train(root["train"], config.train);
  config.network = baseline_preset(config.train.preset);
  if (root.contains("network")) apply_network(root["network"], config.network);
  config.train.validate();
  config.network.validate();
  return config;
}

ExperimentConfig load_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_json(buf.str());
}

std::string experiment_to_json(const ExperimentConfig& config) {
  json att = {
      {"use_local", config.network.attention.use_local},
      {"use_global", config.network.attention.use_global},
      {"supervise_local", config.network.attention.supervise_local},
      {"placement", config.network.attention.placement ==
                            AttentionPlacement::on_feature_map
                        ? "on_feature_map"
                        : "on_normalization"},
      {"output_activation", config.network.attention.output_activation ==
                                    OutputActivation::relu_tanh
                                ? "relu_tanh"
                                : "sigmoid_softmax"},
  };
  json network = {
      {"arb_count", config.network.arb_count},
      {"channels", config.network.channels},
      {"acn_per_arb", config.network.acn_per_arb},
      {"norm_kind", norm_to_string(config.network.norm_kind)},
      {"post_norm",
       config.network.post_norm == PostNorm::group_norm ? "group_norm" : "none"},
      {"gn_groups", config.network.gn_groups},
      {"attention", att},
      {"input_dim", config.network.input_dim},
      {"head", head_to_string(config.network.head)},
      {"num_classes", config.network.num_classes},
      {"pool",
       config.network.pool == PoolKind::max ? "max" : "attentive_mean"},
      {"irls_hidden", config.network.irls_hidden},
      {"irls_unroll", config.network.irls_unroll},
  };
  json train = {
      {"task", task_to_string(config.train.task)},
      {"preset", config.train.preset},
      {"batch_size", config.train.batch_size},
      {"total_iters", config.train.total_iters},
      {"eval_every", config.train.eval_every},
      {"early_stop_patience", config.train.early_stop_patience},
      {"loss",
       {{"alpha", config.train.loss.alpha},
        {"beta", config.train.loss.beta},
        {"gamma", config.train.loss.gamma},
        {"alpha_enable_step", config.train.loss.alpha_enable_step}}},
      {"seed", config.train.seed},
      {"learning_rate", config.train.learning_rate},
      {"outlier_ratio", config.train.outlier_ratio},
      {"n_points", config.train.n_points},
      {"noise_sigma", config.train.noise_sigma},
      {"val_size", config.train.val_size},
      {"test_size", config.train.test_size},
      {"mnist_dir", config.train.mnist_dir},
      {"mnist_train_subset", config.train.mnist_train_subset},
      {"precision", config.train.precision},
      {"threads", config.train.threads},
  };
  json root = {{"train", train}, {"network", network}};
  return root.dump(2);
}

}  // namespace acne
