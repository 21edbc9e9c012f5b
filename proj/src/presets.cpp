#include "acne/baselines.hpp"

namespace acne {

namespace {

NetworkConfig line_base() {
  NetworkConfig cfg;
  cfg.arb_count = 6;
  cfg.channels = 128;
  cfg.acn_per_arb = 2;
  cfg.norm_kind = NormKind::acn;
  cfg.input_dim = 2;
  cfg.head = HeadKind::line_fit;
  return cfg;
}

NetworkConfig mnist_base() {
  NetworkConfig cfg;
  cfg.arb_count = 3;
  cfg.channels = 128;
  cfg.acn_per_arb = 2;
  cfg.norm_kind = NormKind::acn;
  cfg.input_dim = 2;
  cfg.head = HeadKind::classify;
  cfg.num_classes = 10;
  return cfg;
}

NetworkConfig stereo_base() {
  NetworkConfig cfg;
  cfg.arb_count = 12;
  cfg.channels = 128;
  cfg.acn_per_arb = 2;
  cfg.norm_kind = NormKind::acn;
  cfg.input_dim = 4;
  cfg.head = HeadKind::fundamental;
  return cfg;
}

void make_cn(NetworkConfig& cfg) {
  cfg.norm_kind = NormKind::cn;
  cfg.attention.use_local = false;
  cfg.attention.use_global = false;
}

}  // namespace

NetworkConfig baseline_preset(const std::string& name) {
  NetworkConfig cfg;
  if (name == "acne_line" || name == "acne_line_lgs" ||
      name == "learnt_irls_line") {
    cfg = line_base();
  } else if (name == "acne_line_l") {
    cfg = line_base();
    cfg.attention.use_global = false;
  } else if (name == "acne_line_g") {
    cfg = line_base();
    cfg.attention.use_local = false;
    cfg.attention.supervise_local = false;
  } else if (name == "acne_line_lg") {
    cfg = line_base();
    cfg.attention.supervise_local = false;
  } else if (name == "cne_line") {
    cfg = line_base();
    make_cn(cfg);
  } else if (name == "acne_mnist") {
    cfg = mnist_base();
    cfg.attention.supervise_local = false;  // Eq. 9 has no guidance term
  } else if (name == "cne_mnist") {
    cfg = mnist_base();
    make_cn(cfg);
    cfg.attention.supervise_local = false;
  } else if (name == "pointnet_mnist") {
    cfg = mnist_base();
    cfg.norm_kind = NormKind::none;
    cfg.post_norm = PostNorm::none;
    cfg.attention.use_local = false;
    cfg.attention.use_global = false;
    cfg.attention.supervise_local = false;
    cfg.pool = PoolKind::max;
  } else if (name == "acne_stereo") {
    cfg = stereo_base();
  } else if (name == "cne_stereo") {
    cfg = stereo_base();
    make_cn(cfg);
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  cfg.validate();
  return cfg;
}

}  // namespace acne
