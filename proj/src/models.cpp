#include "skeltk/models.hpp"

#include <cmath>

#include <json.hpp>

#include "skeltk/error.hpp"
#include "skeltk/rng.hpp"

namespace skeltk {

using nlohmann::json;
using nn::Tensor;

// ---------------------------------------------------------------------------
// parameter bookkeeping

nn::Tensor ParameterSet::add(const std::string& name, nn::Tensor t) {
  if (has(name))
    throw ValidationError("parameters: duplicate name \"" + name + "\"");
  if (!t.requires_grad())
    throw ValidationError("parameters: \"" + name + "\" must require grad");
  items_.emplace_back(name, t);
  return t;
}

nn::Tensor ParameterSet::get(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw ValidationError("parameters: unknown name \"" + name + "\"");
}

bool ParameterSet::has(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return true;
  return false;
}

std::int64_t count_parameters(const ParameterSet& params) {
  std::int64_t total = 0;
  for (const auto& [name, t] : params.items()) total += t.numel();
  return total;
}

const nn::Shape* ShapeTrace::find(const std::string& name) const {
  for (const auto& [n, s] : entries)
    if (n == name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// checkpoint bridge

nn::CheckpointData Model::to_checkpoint() const {
  nn::CheckpointData data;
  data.model_kind = kind();
  data.config_json = config_json();
  for (const auto& [name, t] : parameters().items())
    data.params.push_back({name, t.shape(), t.values()});
  data.buffers = buffers();
  return data;
}

void Model::load_params(const std::vector<nn::NamedArray>& params) {
  const auto& items = parameters().items();
  if (params.size() != items.size())
    throw ValidationError("checkpoint: expected " + std::to_string(items.size()) +
                          " parameters, got " + std::to_string(params.size()));
  for (const nn::NamedArray& a : params) {
    Tensor t = parameters().get(a.name);
    if (t.shape() != a.shape)
      throw ValidationError("checkpoint: parameter \"" + a.name +
                            "\" shape mismatch");
    t.values() = a.values;
    t.clear_grad();
  }
}

namespace {

Tensor param_normal(Rng& rng, nn::Shape shape, double std_dev) {
  std::vector<double> values(static_cast<size_t>(nn::shape_numel(shape)));
  for (double& v : values) v = rng.normal(0.0, std_dev);
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

Tensor param_const(nn::Shape shape, double value) {
  return Tensor::full(std::move(shape), value, true);
}

void push_bn_buffers(std::vector<nn::NamedArray>& out, const std::string& prefix,
                     const nn::BatchNormState& state) {
  out.push_back({prefix + ".running_mean",
                 {state.channels()},
                 state.running_mean});
  out.push_back({prefix + ".running_var", {state.channels()}, state.running_var});
}

void pull_bn_buffers(const std::vector<nn::NamedArray>& in,
                     const std::string& prefix, nn::BatchNormState& state) {
  bool found_mean = false, found_var = false;
  for (const nn::NamedArray& a : in) {
    if (a.name == prefix + ".running_mean") {
      if (static_cast<int>(a.values.size()) != state.channels())
        throw ValidationError("checkpoint: buffer \"" + a.name + "\" size mismatch");
      state.running_mean = a.values;
      found_mean = true;
    } else if (a.name == prefix + ".running_var") {
      if (static_cast<int>(a.values.size()) != state.channels())
        throw ValidationError("checkpoint: buffer \"" + a.name + "\" size mismatch");
      state.running_var = a.values;
      found_var = true;
    }
  }
  if (!found_mean || !found_var)
    throw ValidationError("checkpoint: missing running statistics for \"" +
                          prefix + "\"");
}

// Folds the person axis into the batch: (N,C,T,V,M) -> (N*M, C, T, V).
Tensor fold_bodies(const Tensor& input) {
  if (input.ndim() != 5)
    throw DimensionError("model: input must be (N, C, T, V, M), got " +
                         nn::shape_str(input.shape()));
  const int n = input.dim(0), c = input.dim(1), t = input.dim(2),
            v = input.dim(3), m = input.dim(4);
  return nn::reshape(nn::permute(input, {0, 4, 1, 2, 3}), {n * m, c, t, v});
}

// Averages per-stream logits back to per-sample: (N*M, K) -> (N, K).
Tensor unfold_logits(const Tensor& logits, int n, int m) {
  const int k = logits.dim(1);
  return nn::mean_lastdims(nn::permute(nn::reshape(logits, {n, m, k}), {0, 2, 1}),
                           1);
}

}  // namespace

// ---------------------------------------------------------------------------
// ST-GCN

void STGCNConfig::validate() const {
  if (layer_channels.empty())
    throw ValidationError("stgcn config: layer_channels must be non-empty");
  for (int c : layer_channels)
    if (c < 1) throw ValidationError("stgcn config: channel counts must be >= 1");
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0)
    throw ValidationError("stgcn config: temporal_kernel must be odd and >= 1");
  const int layers = static_cast<int>(layer_channels.size());
  for (int s : stride_layers)
    if (s < 1 || s > layers)
      throw ValidationError("stgcn config: stride layer " + std::to_string(s) +
                            " outside [1, " + std::to_string(layers) + "]");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw ValidationError("stgcn config: dropout_p must be in [0, 1)");
  if (in_channels < 1)
    throw ValidationError("stgcn config: in_channels must be >= 1");
  if (num_classes < 1)
    throw ValidationError("stgcn config: num_classes must be >= 1");
}

std::string STGCNConfig::to_json() const {
  json doc = {
      {"layer_channels", layer_channels},
      {"temporal_kernel", temporal_kernel},
      {"stride_layers", std::vector<int>(stride_layers.begin(), stride_layers.end())},
      {"dropout_p", dropout_p},
      {"residual", residual},
      {"in_channels", in_channels},
      {"num_classes", num_classes},
  };
  return doc.dump();
}

STGCNConfig STGCNConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("stgcn config: ") + e.what());
  }
  STGCNConfig cfg;
  if (doc.contains("layer_channels"))
    cfg.layer_channels = doc.at("layer_channels").get<std::vector<int>>();
  if (doc.contains("temporal_kernel"))
    cfg.temporal_kernel = doc.at("temporal_kernel").get<int>();
  if (doc.contains("stride_layers")) {
    cfg.stride_layers.clear();
    for (int s : doc.at("stride_layers").get<std::vector<int>>())
      cfg.stride_layers.insert(s);
  }
  if (doc.contains("dropout_p")) cfg.dropout_p = doc.at("dropout_p").get<double>();
  if (doc.contains("residual")) cfg.residual = doc.at("residual").get<bool>();
  if (doc.contains("in_channels"))
    cfg.in_channels = doc.at("in_channels").get<int>();
  if (doc.contains("num_classes"))
    cfg.num_classes = doc.at("num_classes").get<int>();
  return cfg;
}

STGCNModel::STGCNModel(const STGCNConfig& cfg, const SkeletalGraph& graph,
                       std::uint64_t init_seed)
    : cfg_(cfg), data_bn_(cfg.in_channels) {
  cfg_.validate();
  partitions_ = graph.partitions;
  if (partitions_.empty())
    throw ValidationError("stgcn: graph has no partitions");

  Rng rng(init_seed);
  const int p_count = static_cast<int>(partitions_.size());
  params_.add("data_bn.gamma", param_const({cfg_.in_channels}, 1.0));
  params_.add("data_bn.beta", param_const({cfg_.in_channels}, 0.0));

  int c_in = cfg_.in_channels;
  const int kernel = cfg_.temporal_kernel;
  for (size_t li = 0; li < cfg_.layer_channels.size(); ++li) {
    const int c_out = cfg_.layer_channels[li];
    const std::string prefix = "layer" + std::to_string(li + 1);
    const bool strided = cfg_.stride_layers.count(static_cast<int>(li + 1)) > 0;
    const double g_std = std::sqrt(2.0 / (c_in * p_count));
    for (int p = 0; p < p_count; ++p)
      params_.add(prefix + ".gconv.w" + std::to_string(p),
                  param_normal(rng, {c_out, c_in, 1}, g_std));
    params_.add(prefix + ".gconv.bias", param_const({c_out}, 0.0));
    params_.add(prefix + ".bn.gamma", param_const({c_out}, 1.0));
    params_.add(prefix + ".bn.beta", param_const({c_out}, 0.0));
    layer_bn_.emplace_back(c_out);
    params_.add(prefix + ".tconv.w",
                param_normal(rng, {c_out, c_out, kernel},
                             std::sqrt(2.0 / (c_out * kernel))));
    params_.add(prefix + ".tconv.bias", param_const({c_out}, 0.0));
    if (cfg_.residual && (c_in != c_out || strided)) {
      params_.add(prefix + ".res.w",
                  param_normal(rng, {c_out, c_in, 1}, std::sqrt(2.0 / c_in)));
      params_.add(prefix + ".res.bias", param_const({c_out}, 0.0));
    }
    c_in = c_out;
  }
  params_.add("classifier.w",
              param_normal(rng, {c_in, cfg_.num_classes}, std::sqrt(1.0 / c_in)));
  params_.add("classifier.bias", param_const({cfg_.num_classes}, 0.0));
}

Tensor STGCNModel::forward(const nn::Tensor& input, const ForwardOptions& opts) {
  const int n = input.dim(0), m = input.dim(4);
  if (input.dim(1) != cfg_.in_channels)
    throw DimensionError("stgcn: expected " + std::to_string(cfg_.in_channels) +
                         " input channels, got " + std::to_string(input.dim(1)));
  if (input.dim(3) != partitions_[0].rows)
    throw DimensionError("stgcn: input joints " + std::to_string(input.dim(3)) +
                         " do not match the graph (" +
                         std::to_string(partitions_[0].rows) + ")");

  Tensor x = fold_bodies(input);
  x = nn::batch_norm(x, params_.get("data_bn.gamma"), params_.get("data_bn.beta"),
                     data_bn_, opts.training);
  if (opts.trace) opts.trace->record("input", x.shape());

  Rng drop_rng(opts.dropout_seed);
  const int p_count = static_cast<int>(partitions_.size());
  const int kernel = cfg_.temporal_kernel;
  int c_in = cfg_.in_channels;
  for (size_t li = 0; li < cfg_.layer_channels.size(); ++li) {
    const int c_out = cfg_.layer_channels[li];
    const std::string prefix = "layer" + std::to_string(li + 1);
    const int stride = cfg_.stride_layers.count(static_cast<int>(li + 1)) ? 2 : 1;

    Tensor g;
    for (int p = 0; p < p_count; ++p) {
      Tensor branch = nn::joint_transform(x, partitions_[p], 3);
      branch = nn::temporal_conv(
          branch, params_.get(prefix + ".gconv.w" + std::to_string(p)), nullptr,
          1, 0);
      g = p == 0 ? branch : nn::add(g, branch);
    }
    g = nn::add_channel_bias(g, params_.get(prefix + ".gconv.bias"));
    Tensor h = nn::relu(nn::batch_norm(g, params_.get(prefix + ".bn.gamma"),
                                       params_.get(prefix + ".bn.beta"),
                                       layer_bn_[li], opts.training));
    Tensor bias = params_.get(prefix + ".tconv.bias");
    Tensor t = nn::temporal_conv(h, params_.get(prefix + ".tconv.w"), &bias,
                                 stride, (kernel - 1) / 2);
    if (cfg_.residual) {
      Tensor r = x;
      if (c_in != c_out || stride != 1) {
        Tensor rb = params_.get(prefix + ".res.bias");
        r = nn::temporal_conv(x, params_.get(prefix + ".res.w"), &rb, stride, 0);
      }
      t = nn::add(t, r);
    }
    x = nn::dropout(t, cfg_.dropout_p, drop_rng, opts.training);
    if (opts.trace) opts.trace->record(prefix, x.shape());
    c_in = c_out;
  }

  Tensor pooled = nn::mean_lastdims(x, 2);
  if (opts.trace) opts.trace->record("pre_classifier", pooled.shape());
  Tensor logits = nn::add_bias(nn::matmul(pooled, params_.get("classifier.w")),
                               params_.get("classifier.bias"));
  return unfold_logits(logits, n, m);
}

std::vector<nn::NamedArray> STGCNModel::buffers() const {
  std::vector<nn::NamedArray> out;
  push_bn_buffers(out, "data_bn", data_bn_);
  for (size_t li = 0; li < layer_bn_.size(); ++li)
    push_bn_buffers(out, "layer" + std::to_string(li + 1) + ".bn", layer_bn_[li]);
  return out;
}

void STGCNModel::load_buffers(const std::vector<nn::NamedArray>& buffers) {
  pull_bn_buffers(buffers, "data_bn", data_bn_);
  for (size_t li = 0; li < layer_bn_.size(); ++li)
    pull_bn_buffers(buffers, "layer" + std::to_string(li + 1) + ".bn",
                    layer_bn_[li]);
}

// ---------------------------------------------------------------------------
// Hyperformer

void HyperformerConfig::validate() const {
  if (num_layers < 1)
    throw ValidationError("hyperformer config: num_layers must be >= 1");
  if (hidden_channels < 1)
    throw ValidationError("hyperformer config: hidden_channels must be >= 1");
  if (num_heads < 1 || hidden_channels % num_heads != 0)
    throw ValidationError(
        "hyperformer config: num_heads must divide hidden_channels");
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0)
    throw ValidationError("hyperformer config: temporal_kernel must be odd");
  if (target_frames < 2)
    throw ValidationError("hyperformer config: target_frames must be >= 2");
  if (in_channels < 1)
    throw ValidationError("hyperformer config: in_channels must be >= 1");
  if (num_classes < 1)
    throw ValidationError("hyperformer config: num_classes must be >= 1");
}

std::string HyperformerConfig::to_json() const {
  json doc = {
      {"num_layers", num_layers},
      {"hidden_channels", hidden_channels},
      {"num_heads", num_heads},
      {"temporal_kernel", temporal_kernel},
      {"target_frames", target_frames},
      {"in_channels", in_channels},
      {"num_classes", num_classes},
  };
  return doc.dump();
}

HyperformerConfig HyperformerConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("hyperformer config: ") + e.what());
  }
  HyperformerConfig cfg;
  if (doc.contains("num_layers")) cfg.num_layers = doc.at("num_layers").get<int>();
  if (doc.contains("hidden_channels"))
    cfg.hidden_channels = doc.at("hidden_channels").get<int>();
  if (doc.contains("num_heads")) cfg.num_heads = doc.at("num_heads").get<int>();
  if (doc.contains("temporal_kernel"))
    cfg.temporal_kernel = doc.at("temporal_kernel").get<int>();
  if (doc.contains("target_frames"))
    cfg.target_frames = doc.at("target_frames").get<int>();
  if (doc.contains("in_channels"))
    cfg.in_channels = doc.at("in_channels").get<int>();
  if (doc.contains("num_classes"))
    cfg.num_classes = doc.at("num_classes").get<int>();
  return cfg;
}

HyperformerModel::HyperformerModel(const HyperformerConfig& cfg,
                                   const Hypergraph& hg, std::uint64_t init_seed)
    : cfg_(cfg) {
  cfg_.validate();
  mix_ = hg.aggregation_operator();
  same_edge_ = hg.same_edge_mask();

  Rng rng(init_seed);
  const int d = cfg_.hidden_channels;
  const int joints = hg.joint_count;
  params_.add("embed.w", param_normal(rng, {cfg_.in_channels, d},
                                      std::sqrt(1.0 / cfg_.in_channels)));
  params_.add("embed.bias", param_const({d}, 0.0));
  params_.add("embed.joint", param_normal(rng, {joints, d}, 0.1));

  const double proj_std = std::sqrt(1.0 / d);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l + 1);
    for (const char* name : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"})
      params_.add(prefix + name, param_normal(rng, {d, d}, proj_std));
    for (const char* name : {".attn.bq", ".attn.bk", ".attn.bv", ".attn.bo"})
      params_.add(prefix + name, param_const({d}, 0.0));
    params_.add(prefix + ".attn.bias_same", param_const({cfg_.num_heads}, 0.0));
    params_.add(prefix + ".attn.bias_diff", param_const({cfg_.num_heads}, 0.0));
    params_.add(prefix + ".ff.w1", param_normal(rng, {d, d}, proj_std));
    params_.add(prefix + ".ff.b1", param_const({d}, 0.0));
    params_.add(prefix + ".ff.w2", param_normal(rng, {d, d}, proj_std));
    params_.add(prefix + ".ff.b2", param_const({d}, 0.0));
    params_.add(prefix + ".tconv.w",
                param_normal(rng, {d, d, cfg_.temporal_kernel},
                             std::sqrt(2.0 / (d * cfg_.temporal_kernel))));
    params_.add(prefix + ".tconv.bias", param_const({d}, 0.0));
    params_.add(prefix + ".tconv_bn.gamma", param_const({d}, 1.0));
    params_.add(prefix + ".tconv_bn.beta", param_const({d}, 0.0));
    layer_bn_.emplace_back(d);
  }
  params_.add("classifier.w",
              param_normal(rng, {d, cfg_.num_classes}, std::sqrt(1.0 / d)));
  params_.add("classifier.bias", param_const({cfg_.num_classes}, 0.0));
}

Tensor HyperformerModel::forward(const nn::Tensor& input,
                                 const ForwardOptions& opts) {
  const int n = input.dim(0), m = input.dim(4);
  if (input.dim(1) != cfg_.in_channels)
    throw DimensionError("hyperformer: expected " +
                         std::to_string(cfg_.in_channels) +
                         " input channels, got " + std::to_string(input.dim(1)));
  if (input.dim(3) != mix_.rows)
    throw DimensionError("hyperformer: input joints " +
                         std::to_string(input.dim(3)) +
                         " do not match the hypergraph (" +
                         std::to_string(mix_.rows) + ")");

  const int nm = n * m;
  const int t = input.dim(2);
  const int v = input.dim(3);
  const int d = cfg_.hidden_channels;
  const int heads = cfg_.num_heads;
  const int dh = d / heads;
  const int rows = nm * t * v;

  Tensor x = fold_bodies(input);                    // (NM, C, T, V)
  x = nn::permute(x, {0, 2, 3, 1});                 // (NM, T, V, C)
  x = nn::reshape(x, {rows, cfg_.in_channels});
  x = nn::add_bias(nn::matmul(x, params_.get("embed.w")),
                   params_.get("embed.bias"));
  x = nn::reshape(x, {nm, t, v, d});
  x = nn::add_vertex_embedding(x, params_.get("embed.joint"));
  if (opts.trace) opts.trace->record("embed", x.shape());

  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l + 1);

    // per-frame self-attention over joints, relation-biased
    auto heads_of = [&](const Tensor& proj) {
      // (rows, d) -> (NM*T*heads, V, dh)
      Tensor h = nn::reshape(proj, {nm * t, v, heads, dh});
      h = nn::permute(h, {0, 2, 1, 3});
      return nn::reshape(h, {nm * t * heads, v, dh});
    };
    Tensor flat = nn::reshape(x, {rows, d});
    Tensor q = heads_of(nn::add_bias(nn::matmul(flat, params_.get(prefix + ".attn.wq")),
                                     params_.get(prefix + ".attn.bq")));
    Tensor k = heads_of(nn::add_bias(nn::matmul(flat, params_.get(prefix + ".attn.wk")),
                                     params_.get(prefix + ".attn.bk")));
    Tensor val = heads_of(nn::add_bias(nn::matmul(flat, params_.get(prefix + ".attn.wv")),
                                       params_.get(prefix + ".attn.bv")));
    Tensor scores = nn::scale(nn::bmm(q, k, true), attn_scale);
    scores = nn::add_relation_bias(scores, same_edge_,
                                   params_.get(prefix + ".attn.bias_same"),
                                   params_.get(prefix + ".attn.bias_diff"), heads);
    Tensor attn = nn::softmax_lastdim(scores);
    Tensor ctx = nn::bmm(attn, val);                // (NM*T*heads, V, dh)
    ctx = nn::reshape(ctx, {nm * t, heads, v, dh});
    ctx = nn::permute(ctx, {0, 2, 1, 3});
    ctx = nn::reshape(ctx, {rows, d});
    Tensor attn_out =
        nn::add_bias(nn::matmul(ctx, params_.get(prefix + ".attn.wo")),
                     params_.get(prefix + ".attn.bo"));
    x = nn::add(x, nn::reshape(attn_out, {nm, t, v, d}));

    // hyperedge mix feeding the feed-forward block, residual around the pair
    Tensor mixed = nn::joint_transform(x, mix_, 2);
    Tensor f = nn::reshape(mixed, {rows, d});
    f = nn::relu(nn::add_bias(nn::matmul(f, params_.get(prefix + ".ff.w1")),
                              params_.get(prefix + ".ff.b1")));
    f = nn::add_bias(nn::matmul(f, params_.get(prefix + ".ff.w2")),
                     params_.get(prefix + ".ff.b2"));
    x = nn::add(x, nn::reshape(f, {nm, t, v, d}));

    // temporal convolution block, residual
    Tensor c = nn::permute(x, {0, 3, 1, 2});        // (NM, d, T, V)
    Tensor tb = params_.get(prefix + ".tconv.bias");
    c = nn::temporal_conv(c, params_.get(prefix + ".tconv.w"), &tb, 1,
                          (cfg_.temporal_kernel - 1) / 2);
    c = nn::batch_norm(c, params_.get(prefix + ".tconv_bn.gamma"),
                       params_.get(prefix + ".tconv_bn.beta"), layer_bn_[l],
                       opts.training);
    x = nn::add(x, nn::permute(c, {0, 2, 3, 1}));
    if (opts.trace) opts.trace->record(prefix, x.shape());
  }

  Tensor pooled = nn::mean_lastdims(nn::permute(x, {0, 3, 1, 2}), 2);  // (NM, d)
  if (opts.trace) opts.trace->record("pre_classifier", pooled.shape());
  Tensor logits = nn::add_bias(nn::matmul(pooled, params_.get("classifier.w")),
                               params_.get("classifier.bias"));
  return unfold_logits(logits, n, m);
}

std::vector<nn::NamedArray> HyperformerModel::buffers() const {
  std::vector<nn::NamedArray> out;
  for (size_t l = 0; l < layer_bn_.size(); ++l)
    push_bn_buffers(out, "layer" + std::to_string(l + 1) + ".tconv_bn",
                    layer_bn_[l]);
  return out;
}

void HyperformerModel::load_buffers(const std::vector<nn::NamedArray>& buffers) {
  for (size_t l = 0; l < layer_bn_.size(); ++l)
    pull_bn_buffers(buffers, "layer" + std::to_string(l + 1) + ".tconv_bn",
                    layer_bn_[l]);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Model> model_from_checkpoint(const nn::CheckpointData& data) {
  std::unique_ptr<Model> model;
  if (data.model_kind == "stgcn") {
    STGCNConfig cfg = STGCNConfig::from_json(data.config_json);
    model = std::make_unique<STGCNModel>(cfg, build_ntu_graph(), 0);
  } else if (data.model_kind == "hyperformer") {
    HyperformerConfig cfg = HyperformerConfig::from_json(data.config_json);
    model =
        std::make_unique<HyperformerModel>(cfg, build_bodypart_hypergraph(), 0);
  } else {
    throw ValidationError("checkpoint: unknown model kind \"" + data.model_kind +
                          "\"");
  }
  model->load_params(data.params);
  model->load_buffers(data.buffers);
  return model;
}

}  // namespace skeltk
